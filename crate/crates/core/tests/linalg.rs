use proptest::prelude::*;
use saddlescout_core::linalg::{mt_apply, mt_spectrum, sym_eig, SymMatrix};

fn sym_strategy() -> impl Strategy<Value = SymMatrix> {
    (1usize..8).prop_flat_map(|d| {
        prop::collection::vec(-5.0f64..5.0, d * d)
            .prop_map(move |v| SymMatrix::from_fn(d, |i, j| v[i.min(j) * d + i.max(j)]).unwrap())
    })
}

proptest! {
    #[test]
    fn eigendecomposition_reconstructs(a in sym_strategy()) {
        let e = sym_eig(&a).unwrap();
        let back = e.reconstruct();
        let diff: f64 = a.entries().iter().zip(back.entries()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        prop_assert!(diff <= 1e-10 * a.frobenius_norm().max(1.0));
        for w in e.eigenvalues.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        for (i, u) in e.eigenvectors.iter().enumerate() {
            for (j, v) in e.eigenvectors.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((u.dot(v) - want).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn two_by_two_matches_closed_form(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0) {
        let m = SymMatrix::from_rows(&[vec![a, b], vec![b, c]]).unwrap();
        let e = sym_eig(&m).unwrap();
        let mid = 0.5 * (a + c);
        let rad = (0.25 * (a - c).powi(2) + b * b).sqrt();
        prop_assert!((e.lambda_min() - (mid - rad)).abs() <= 1e-12 * (1.0 + rad));
        prop_assert!((e.lambda_max() - (mid + rad)).abs() <= 1e-12 * (1.0 + rad));
    }
}

fn dense_product(h: &SymMatrix, eta: f64, beta: f64, tau: u64, k: u64) -> Vec<f64> {
    let d = h.dim();
    let mut acc: Vec<f64> = (0..d * d).map(|i| if i % (d + 1) == 0 { 1.0 } else { 0.0 }).collect();
    let mul_g = |s: u64, acc: &mut Vec<f64>| {
        let coef = eta * (1.0 - beta.powi(s as i32)) / (1.0 - beta);
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut sum = 0.0;
                for l in 0..d {
                    let g = if i == l { 1.0 } else { 0.0 } - coef * h.get(i, l);
                    sum += g * acc[l * d + j];
                }
                out[i * d + j] = sum;
            }
        }
        *acc = out;
    };
    for s in 1..tau {
        mul_g(s, &mut acc);
    }
    for s in k..tau {
        mul_g(s, &mut acc);
    }
    acc
}

#[test]
fn mt_matches_dense_product() {
    let h = SymMatrix::from_rows(&[
        vec![1.0, 0.2, 0.0],
        vec![0.2, -0.1, 0.05],
        vec![0.0, 0.05, 0.4],
    ])
    .unwrap();
    for (eta, beta, tau, k) in [(0.01, 0.9, 50, 1), (0.05, 0.5, 20, 3), (0.02, 0.0, 10, 9)] {
        let spec = mt_spectrum(&h, eta, beta, tau, k).unwrap();
        let dense = dense_product(&h, eta, beta, tau, k);
        let scale = spec.mu_max_log.exp();
        for i in 0..3 {
            let mut e = vec![0.0; 3];
            e[i] = 1.0;
            let col = mt_apply(&spec, &e).unwrap();
            for r in 0..3 {
                let want = dense[r * 3 + i];
                assert!((col[r] - want).abs() <= 1e-8 * scale, "{eta} {beta} {tau} {k}: {} vs {want}", col[r]);
            }
        }
    }
}

#[test]
fn long_products_stay_finite() {
    let h = SymMatrix::diag(&[1.0, -0.1]).unwrap();
    let spec = mt_spectrum(&h, 5e-5, 0.9, 300_000, 1).unwrap();
    // Both products saturate at ln(1 + 0.1·η/(1-β)) per factor.
    let approx = 2.0 * 300_000.0 * (1.0 + 0.1 * 5e-5 / 0.1f64).ln();
    assert!((spec.mu_max_log - approx).abs() <= 0.01 * approx, "{}", spec.mu_max_log);
    assert!(spec.log_mu.iter().all(|l| l.is_finite()));
}
