//! Finite-difference checks of the analytic derivatives.

use saddlescout_core::problems::{generate_phase_retrieval, generate_saddle_quadratic, Objective};
use saddlescout_core::rng::{SeededRng, Stream};
use saddlescout_core::ParamVector;

fn fd_grad<O: Objective>(obj: &O, w: &ParamVector, h: f64) -> Vec<f64> {
    (0..w.dim())
        .map(|j| {
            let (mut p, mut m) = (w.clone(), w.clone());
            p[j] += h;
            m[j] -= h;
            (obj.value(&p).unwrap() - obj.value(&m).unwrap()) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    diff / scale
}

fn check<O: Objective>(obj: &O, scale: f64, points: usize, seed: u64) {
    let mut rng = SeededRng::new(seed, Stream::InitialPoint);
    let d = obj.dim();
    for _ in 0..points {
        let w: ParamVector = (0..d).map(|_| scale * rng.normal()).collect();
        let g = obj.full_grad(&w).unwrap();
        let err = rel_err(&g, &fd_grad(obj, &w, 1e-6));
        assert!(err <= 1e-5, "gradient error {err} at {w:?}");

        let h = obj.full_hessian(&w).unwrap();
        let step = 1e-5;
        let mut fd = vec![0.0; d * d];
        for j in 0..d {
            let (mut p, mut m) = (w.clone(), w.clone());
            p[j] += step;
            m[j] -= step;
            let (gp, gm) = (obj.full_grad(&p).unwrap(), obj.full_grad(&m).unwrap());
            for i in 0..d {
                fd[i * d + j] = (gp[i] - gm[i]) / (2.0 * step);
            }
        }
        let err = rel_err(h.entries(), &fd);
        assert!(err <= 1e-4, "hessian error {err} at {w:?}");
    }
}

#[test]
fn saddle_derivatives_match_finite_differences() {
    let inst = generate_saddle_quadratic(1, 10).unwrap();
    check(&inst, 0.5, 500, 1);
}

#[test]
fn phase_derivatives_match_finite_differences() {
    let inst = generate_phase_retrieval(1, 10, 200).unwrap();
    check(&inst, 0.3, 100, 2);
}
