use saddlescout_core::planner::{plan_parameters, t_thred_for, PlanError, PlannerConstants, Status};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn recipe_matches_direct_evaluation() {
    // Everything one except L = sigma^2 = c' = 2, beta = 0.
    let c = PlannerConstants {
        l: 2.0,
        sigma2: 2.0,
        c_prime: 2.0,
        delta: 1.0,
        eps: 1.0,
        ..PlannerConstants::default()
    };
    let c0 = 1.0 / 1152.0;
    let r = c0 / (2.0 * 2.0);
    let eta = (c0 / 24.0) / (4.0 * 2.0 * 2.0);
    let f = (c0 / 576.0) / (2.0 * 4.0);
    let plan = match plan_parameters(&c) {
        Ok(p) => p,
        // These constants violate the boosted-step coupling; the values are still reported.
        Err(PlanError::Infeasible { result, .. }) => *result,
        Err(e) => panic!("{e}"),
    };
    assert!(rel(plan.r, r) <= 1e-12);
    assert!(rel(plan.eta_table, eta) <= 1e-12);
    assert!(rel(plan.f_thred, f) <= 1e-12);
}

#[test]
fn every_inequality_is_reported_once() {
    let c = PlannerConstants { l: 2.0, sigma2: 2.0, c_prime: 2.0, c_m: 2.0, beta: 0.1, ..PlannerConstants::default() };
    let plan = plan_parameters(&c).unwrap();
    let mut names: Vec<&str> = plan.report.iter().map(|c| c.name).collect();
    names.sort_unstable();
    names.dedup();
    assert_eq!(names.len(), plan.report.len());
    assert!(plan.report.iter().all(|c| c.status == Status::Pass));
    assert!(plan.t_total >= plan.t_thred && plan.periods >= 1.0);
}

#[test]
fn larger_beta_shortens_period() {
    let base = PlannerConstants { l: 2.0, sigma2: 2.0, c_prime: 2.0, c_m: 2.0, ..PlannerConstants::default() };
    let eta = plan_parameters(&PlannerConstants { beta: 0.1, ..base }).unwrap().eta;
    let t1 = t_thred_for(&PlannerConstants { beta: 0.05, ..base }, eta);
    let t2 = t_thred_for(&PlannerConstants { beta: 0.15, ..base }, eta);
    assert!(t2 <= t1);
}
