mod common;

use common::*;
use svrsqp::harness::build_constraint;
use svrsqp::harness::ConstraintKind;
use svrsqp::metrics::{aggregate, measure, select_best, stationarity_error, BestIterate, IterateRecord};
use svrsqp::problems::{LogisticProblem, Problem};

fn problem() -> LogisticProblem {
    let spec = build_constraint(ConstraintKind::Linear { m: 5 }, 14, 0).unwrap();
    LogisticProblem::new(australian(), spec)
}

#[test]
fn stationarity_matches_svd_least_squares() {
    let p = problem();
    let mut r = rng(30);
    for _ in 0..5 {
        let x = normal_vec(&mut r, 14).scaled(0.3);
        let g = to_na_vec(&p.full_gradient(&x));
        let jt = to_na(&p.jacobian(&x)).transpose();
        let y = jt.clone().svd(true, true).solve(&(-&g), 1e-14).unwrap();
        let oracle = (g + jt * y).amax();
        let got = stationarity_error(&p, &x).unwrap();
        assert!((got - oracle).abs() <= 1e-12 * (1.0 + oracle), "{got} vs {oracle}");
    }
}

#[test]
fn least_squares_residual_is_not_improved_by_perturbation() {
    let p = problem();
    let x = normal_vec(&mut rng(31), 14).scaled(0.3);
    let g = p.full_gradient(&x);
    let j = p.jacobian(&x);
    let y = svrsqp::linalg::least_squares_multipliers(&j, &g).unwrap();
    let best = g.add(&j.tr_mul_vec(&y)).norm_l2();
    let mut r = rng(32);
    for _ in 0..50 {
        let w = y.add(&normal_vec(&mut r, 5).scaled(1e-3));
        assert!(best <= g.add(&j.tr_mul_vec(&w)).norm_l2());
    }
}

#[test]
fn measurement_fields() {
    let p = problem();
    let x = normal_vec(&mut rng(33), 14);
    let m = measure(&p, &x, 0.25);
    let c = p.constraints(&x);
    assert_eq!(m.feasibility_inf, c.norm_inf());
    let f = (0..p.num_components()).map(|i| p.component_objective(i, &x)).sum::<f64>() / p.num_components() as f64;
    assert!((m.merit - (0.25 * f + c.norm_l1())).abs() <= 1e-12 * (1.0 + m.merit));
}

fn rec(feas: f64, stat: f64) -> IterateRecord {
    IterateRecord {
        epoch: 0.0,
        outer_k: 0,
        inner_s: 0,
        feasibility_inf: feas,
        stationarity_inf: stat,
        merit: 0.0,
        tau: 0.1,
        step: 1.0,
    }
}

#[test]
fn best_iterate_rules() {
    // feasible records exist: most stationary among them, earliest on ties
    let log = [rec(1e-3, 1e-9), rec(1e-7, 0.5), rec(1e-6, 0.2), rec(0.0, 0.2)];
    assert_eq!(select_best(&log).unwrap().index, 2);
    // none feasible: least infeasible
    let log = [rec(0.3, 0.0), rec(0.1, 9.0), rec(0.2, 0.0)];
    assert_eq!(select_best(&log).unwrap().index, 1);
    assert!(select_best(&[]).is_none());
}

#[test]
fn aggregate_matches_hand_computation() {
    let runs: Vec<BestIterate> = [1.0, 2.0, 4.0, 5.0]
        .iter()
        .enumerate()
        .map(|(i, &s)| BestIterate {
            index: i,
            feasibility_inf: 0.0,
            stationarity_inf: s,
        })
        .collect();
    let a = aggregate(&runs).unwrap();
    // mean 3, sample variance 10/3
    assert_eq!(a.stationarity.mean, 3.0);
    let expected = 1.96 * (10.0f64 / 3.0).sqrt() / 2.0;
    assert!((a.stationarity.halfwidth - expected).abs() < 1e-15);
    assert_eq!(a.feasibility.halfwidth, 0.0);
    assert!(aggregate(&runs[..1]).is_err());
}
