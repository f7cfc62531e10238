mod common;

use std::io::Cursor;
use std::sync::Arc;

use common::*;
use rand::Rng;
use svrsqp::linalg::{DenseMatrix, DenseVector};
use svrsqp::problems::{
    estimate_lipschitz, make_linear_constraints, parse_libsvm, ConstraintSpec, Dataset, LogisticProblem, Problem,
    QuadraticProblem,
};

const FD_STEP: f64 = 1e-6;

/// Central-difference gradient of a scalar function.
fn fd_gradient(f: impl Fn(&DenseVector) -> f64, x: &DenseVector) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let (mut up, mut down) = (x.clone(), x.clone());
            up[k] += FD_STEP;
            down[k] -= FD_STEP;
            (f(&up) - f(&down)) / (2.0 * FD_STEP)
        })
        .collect()
}

#[test]
fn five_line_fixture_matches_reference_reader() {
    // Values read with sklearn's load_svmlight_file and frozen here.
    let expected_x = [
        [1.0, 0.0, 0.5, 0.0],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, -1.25, 0.0, 0.3],
        [2.5, 1.0, 1.0, 1.0],
        [0.0, 0.0, 0.0, 7.0],
    ];
    let expected_y = [1.0, -1.0, 1.0, -1.0, -1.0];
    let d = Dataset::open(data_dir().join("five_line.libsvm"), None).unwrap();
    assert_eq!((d.len(), d.n_features()), (5, 4));
    for (i, row) in expected_x.iter().enumerate() {
        assert_eq!(d.dense_row(i), row.to_vec(), "row {i}");
    }
    assert_eq!(d.labels(), &expected_y);
    assert_eq!(d.label_histogram(), (3, 2));
}

#[test]
fn feature_override_pads_columns() {
    let text = "1 1:1\n-1 2:2\n";
    let d = parse_libsvm(Cursor::new(text), Some(5)).unwrap();
    assert_eq!(d.n_features(), 5);
    assert_eq!(d.dense_row(1), vec![0.0, 2.0, 0.0, 0.0, 0.0]);
}

#[test]
fn australian_shape() {
    let d = australian();
    assert_eq!((d.len(), d.n_features()), (621, 14));
}

#[test]
fn logistic_gradients_match_finite_differences() {
    let data = australian();
    let p = LogisticProblem::new(data.clone(), ConstraintSpec::l2_ball(1.0).unwrap());
    let mut r = rng(20);
    for _ in 0..20 {
        let i = r.random_range(0..data.len());
        let x = normal_vec(&mut r, 14).scaled(0.1);
        let fd = fd_gradient(|z| p.component_objective(i, z), &x);
        let g = p.component_gradient(i, &x);
        assert!(rel_err(g.as_slice(), &fd) <= 1e-6, "component {i}");
    }
}

#[test]
fn full_gradient_is_component_mean() {
    let data = australian();
    let p = LogisticProblem::new(data.clone(), ConstraintSpec::l2_ball(1.0).unwrap());
    let x = normal_vec(&mut rng(21), 14).scaled(0.2);
    let mut sum = DenseVector::zeros(14);
    for i in 0..data.len() {
        sum.axpy(1.0, &p.component_gradient(i, &x));
    }
    sum.scale(1.0 / data.len() as f64);
    assert!(rel_err(p.full_gradient(&x).as_slice(), sum.as_slice()) <= 1e-12);
    let f_mean = (0..data.len()).map(|i| p.component_objective(i, &x)).sum::<f64>() / data.len() as f64;
    assert!((p.objective(&x) - f_mean).abs() <= 1e-12);
}

#[test]
fn logistic_value_at_origin_is_log_two() {
    let p = LogisticProblem::new(australian(), ConstraintSpec::l2_ball(1.0).unwrap());
    let x = DenseVector::zeros(14);
    assert!((p.objective(&x) - std::f64::consts::LN_2).abs() < 1e-14);
}

#[test]
fn constraint_jacobians_match_finite_differences() {
    let mut r = rng(22);
    let linear = make_linear_constraints(6, 3, &mut r).unwrap();
    let ball = ConstraintSpec::l2_ball(1.0).unwrap();
    for spec in [linear, ball] {
        for _ in 0..5 {
            let x = normal_vec(&mut r, 6);
            let j = spec.jacobian(&x);
            for row in 0..spec.len() {
                let fd = fd_gradient(|z| spec.eval(z)[row], &x);
                assert!(rel_err(j.row(row), &fd) <= 1e-7);
            }
        }
    }
}

#[test]
fn ball_constraint_collocation() {
    let spec = ConstraintSpec::l2_ball(1.0).unwrap();
    let points = [
        (vec![0.0, 0.0, 0.0], -1.0, vec![0.0, 0.0, 0.0]),
        (vec![1.0, 0.0, 0.0], 0.0, vec![2.0, 0.0, 0.0]),
        (vec![1.0, 2.0, 2.0], 8.0, vec![2.0, 4.0, 4.0]),
    ];
    for (x, c, j) in points {
        let x = DenseVector::from(x);
        assert_eq!(spec.eval(&x).as_slice(), &[c]);
        assert_eq!(spec.jacobian(&x).row(0), j.as_slice());
    }
    assert_eq!(spec.gamma(), 2.0);
}

#[test]
fn linear_constraints_are_reproducible() {
    let a = make_linear_constraints(14, 5, &mut rng(7)).unwrap();
    let b = make_linear_constraints(14, 5, &mut rng(7)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, make_linear_constraints(14, 5, &mut rng(8)).unwrap());
    assert_eq!(a.gamma(), 0.0);
}

fn quadratic(q: DenseMatrix) -> QuadraticProblem {
    let n = q.rows();
    let a = DenseMatrix::from_rows(&[vec![1.0; n]]);
    QuadraticProblem::new(vec![q], vec![DenseVector::zeros(n)], ConstraintSpec::Linear {
        a,
        a1: DenseVector::from(vec![0.0]),
    })
}

#[test]
fn lipschitz_of_half_squared_norm_is_one() {
    let p = quadratic(DenseMatrix::identity(5));
    let l = estimate_lipschitz(&p, &normal_vec(&mut rng(1), 5), &mut rng(2));
    assert!((l - 1.0).abs() <= 1e-8, "{l}");
}

#[test]
fn lipschitz_estimate_never_exceeds_true_constant() {
    for seed in 0..5 {
        let p = quadratic_fixture(seed, 6, 5, 2);
        let exact = max_eigenvalue(&p.mean_hessian());
        let l = estimate_lipschitz(&p, &DenseVector::zeros(5), &mut rng(seed + 100));
        assert!(l <= exact + 1e-6, "{l} > {exact}");
        assert!(l > 0.0);
    }
}

#[test]
fn lipschitz_estimate_on_australian_is_deterministic() {
    let p = LogisticProblem::new(australian(), ConstraintSpec::l2_ball(1.0).unwrap());
    let x0 = normal_vec(&mut rng(3), 14).scaled(0.1);
    let a = estimate_lipschitz(&p, &x0, &mut rng(4));
    let b = estimate_lipschitz(&p, &x0, &mut rng(4));
    assert_eq!(a.to_bits(), b.to_bits());
    assert!(a.is_finite() && a > 0.0);
}

#[test]
fn dense_constructor_agrees_with_parser() {
    let text = "1 1:0.5 2:-1\n-1 2:3\n";
    let parsed = parse_libsvm(Cursor::new(text), None).unwrap();
    let dense = Dataset::from_dense(&[vec![0.5, -1.0], vec![0.0, 3.0]], &[1.0, -1.0]);
    let x = [0.3, -0.7];
    let pa = LogisticProblem::new(Arc::new(parsed), ConstraintSpec::l2_ball(1.0).unwrap());
    let pb = LogisticProblem::new(Arc::new(dense), ConstraintSpec::l2_ball(1.0).unwrap());
    let x = DenseVector::from(x.to_vec());
    assert_eq!(pa.full_gradient(&x), pb.full_gradient(&x));
}
