//! Plain-text dataset files.
//!
//! ```text
//! <problem id> <d> <n> <seed>
//! <row>
//! ...
//! ```
//!
//! Saddle instances have `n` rows `b_i0 b_i1`. Phase-retrieval instances have
//! one row holding `w*` followed by `n` rows `a_i1 .. a_id y_i`. Numbers are
//! written with 17 significant digits, which round-trips every `f64`.

use std::fmt::Write as _;

use crate::vector::ParamVector;

use super::{
    Objective, PhaseRetrievalInstance, Problem, ProblemError, ProblemId, SaddleQuadraticInstance,
};

fn fmt_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        write!(out, "{v:.16e}").expect("writing to a String");
    }
    out.push('\n');
}

pub fn write_dataset(problem: &Problem) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{} {} {} {}",
        problem.id(),
        problem.dim(),
        problem.num_samples(),
        problem.seed()
    )
    .expect("writing to a String");
    match problem {
        Problem::Saddle(p) => {
            for b in &p.b {
                fmt_row(&mut out, b.iter().copied());
            }
        }
        Problem::Phase(p) => {
            fmt_row(&mut out, p.w_star.iter().copied());
            for i in 0..p.y.len() {
                fmt_row(&mut out, p.row(i).iter().copied().chain([p.y[i]]));
            }
        }
    }
    out
}

fn parse_row(line: &str, lineno: usize, width: usize) -> Result<Vec<f64>, ProblemError> {
    let values = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| ProblemError::Dataset {
                line: lineno,
                msg: format!("not a number: '{tok}'"),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != width {
        return Err(ProblemError::Dataset {
            line: lineno,
            msg: format!("expected {width} values, found {}", values.len()),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ProblemError::Dataset { line: lineno, msg: "non-finite value".into() });
    }
    Ok(values)
}

pub fn read_dataset(text: &str) -> Result<Problem, ProblemError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines
        .next()
        .ok_or(ProblemError::Dataset { line: 1, msg: "missing header".into() })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(ProblemError::Dataset {
            line: hline,
            msg: "header must be '<problem> <d> <n> <seed>'".into(),
        });
    }
    let bad = |what: &str| ProblemError::Dataset { line: hline, msg: format!("bad {what}") };
    let id: ProblemId = fields[0].parse()?;
    let d: usize = fields[1].parse().map_err(|_| bad("d"))?;
    let n: usize = fields[2].parse().map_err(|_| bad("n"))?;
    let seed: u64 = fields[3].parse().map_err(|_| bad("seed"))?;
    if n == 0 || d == 0 {
        return Err(bad("size"));
    }

    let mut next_row = |width: usize| -> Result<Vec<f64>, ProblemError> {
        let (lineno, line) = lines.next().ok_or(ProblemError::Dataset {
            line: hline,
            msg: "unexpected end of file".into(),
        })?;
        parse_row(line, lineno, width)
    };

    let problem = match id {
        ProblemId::SaddleQuadratic => {
            if d != 2 {
                return Err(bad("d (saddle objective is two-dimensional)"));
            }
            let b = (0..n)
                .map(|_| next_row(2).map(|r| [r[0], r[1]]))
                .collect::<Result<Vec<_>, _>>()?;
            Problem::Saddle(SaddleQuadraticInstance::from_parts(b, seed))
        }
        ProblemId::PhaseRetrieval => {
            let w_star = ParamVector::from(next_row(d)?);
            let mut a = Vec::with_capacity(n * d);
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                let mut row = next_row(d + 1)?;
                y.push(row.pop().expect("row has d + 1 values"));
                a.extend(row);
            }
            Problem::Phase(PhaseRetrievalInstance { d, a, y, w_star, seed })
        }
    };
    if let Some((lineno, _)) = lines.next() {
        return Err(ProblemError::Dataset { line: lineno, msg: "trailing data".into() });
    }
    Ok(problem)
}
