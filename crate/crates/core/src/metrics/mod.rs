//! Feasibility and stationarity measures, best-iterate selection and
//! aggregation over seeds.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{least_squares_multipliers, DenseVector, LinalgError};
use crate::problems::Problem;

/// Iterates with `‖c‖∞` at or below this count as feasible.
pub const FEASIBILITY_THRESHOLD: f64 = 1e-6;

/// Normal quantile for a two-sided 95% interval.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterateRecord {
    pub epoch: f64,
    pub outer_k: usize,
    pub inner_s: usize,
    pub feasibility_inf: f64,
    pub stationarity_inf: f64,
    pub merit: f64,
    pub tau: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestIterate {
    pub index: usize,
    pub feasibility_inf: f64,
    pub stationarity_inf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub mean: f64,
    pub halfwidth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub runs: usize,
    pub feasibility: Interval,
    pub stationarity: Interval,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("need at least 2 runs to aggregate, got {0}")]
    InsufficientRuns(usize),
}

/// `‖∇f(x) + J(x)ᵀ y_ls‖∞` with `y_ls` the least-squares multipliers.
pub fn stationarity_error<P: Problem + ?Sized>(problem: &P, x: &DenseVector) -> Result<f64, LinalgError> {
    let g = problem.full_gradient(x);
    let j = problem.jacobian(x);
    let y = least_squares_multipliers(&j, &g)?;
    Ok(g.add(&j.tr_mul_vec(&y)).norm_inf())
}

/// Metrics at one point, from exact oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub feasibility_inf: f64,
    /// `+∞` when the Jacobian is rank deficient at the point.
    pub stationarity_inf: f64,
    pub merit: f64,
}

pub fn measure<P: Problem + ?Sized>(problem: &P, x: &DenseVector, tau: f64) -> Measurement {
    let c = problem.constraints(x);
    Measurement {
        feasibility_inf: c.norm_inf(),
        stationarity_inf: stationarity_error(problem, x).unwrap_or(f64::INFINITY),
        merit: tau * problem.objective(x) + c.norm_l1(),
    }
}

fn argmin_by<F: Fn(&IterateRecord) -> f64>(log: &[IterateRecord], keep: impl Fn(&IterateRecord) -> bool, key: F) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in log.iter().enumerate().filter(|(_, r)| keep(r)) {
        let v = key(r);
        match best {
            Some((_, b)) if !(v < b) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Best iterate of a run.
///
/// If no record reaches [`FEASIBILITY_THRESHOLD`] the least infeasible one
/// wins; otherwise the most stationary among the feasible ones. Ties go to
/// the earlier record. `None` for an empty log.
pub fn select_best(log: &[IterateRecord]) -> Option<BestIterate> {
    let feasible = |r: &IterateRecord| r.feasibility_inf <= FEASIBILITY_THRESHOLD;
    let index = if log.iter().any(feasible) {
        argmin_by(log, feasible, |r| r.stationarity_inf)?
    } else {
        argmin_by(log, |_| true, |r| r.feasibility_inf)?
    };
    let r = &log[index];
    Some(BestIterate {
        index,
        feasibility_inf: r.feasibility_inf,
        stationarity_inf: r.stationarity_inf,
    })
}

fn interval(values: impl Iterator<Item = f64> + Clone, n: usize) -> Interval {
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    Interval {
        mean,
        halfwidth: Z_95 * var.sqrt() / nf.sqrt(),
    }
}

/// Mean and normal-approximation 95% half-width of each metric.
pub fn aggregate(runs: &[BestIterate]) -> Result<Aggregate, MetricsError> {
    if runs.len() < 2 {
        return Err(MetricsError::InsufficientRuns(runs.len()));
    }
    Ok(Aggregate {
        runs: runs.len(),
        feasibility: interval(runs.iter().map(|r| r.feasibility_inf), runs.len()),
        stationarity: interval(runs.iter().map(|r| r.stationarity_inf), runs.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::problems::{ConstraintSpec, QuadraticProblem};

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

    fn best(log: &[IterateRecord]) -> usize {
        select_best(log).unwrap().index
    }

    #[test]
    fn infeasible_runs_pick_least_violation() {
        assert_eq!(best(&[rec(1e-3, 1.0), rec(1e-5, 9.0), rec(1e-4, 0.0)]), 1);
    }

    #[test]
    fn feasible_runs_pick_least_stationarity() {
        assert_eq!(best(&[rec(1e-8, 5.0), rec(1e-9, 3.0)]), 1);
        assert_eq!(best(&[rec(1e-2, 0.0), rec(1e-7, 3.0), rec(1e-6, 4.0)]), 1);
    }

    #[test]
    fn ties_go_to_earliest() {
        assert_eq!(best(&[rec(1e-3, 1.0), rec(1e-3, 0.5)]), 0);
        assert_eq!(best(&[rec(1e-7, 2.0), rec(1e-8, 2.0)]), 0);
        assert!(select_best(&[]).is_none());
    }

    #[test]
    fn aggregate_examples() {
        let b = |f: f64, s: f64| BestIterate {
            index: 0,
            feasibility_inf: f,
            stationarity_inf: s,
        };
        let a = aggregate(&[b(1.0, 2.0), b(3.0, 2.0)]).unwrap();
        assert_eq!(a.feasibility.mean, 2.0);
        assert!((a.feasibility.halfwidth - 1.96).abs() < 1e-15);
        assert_eq!(a.stationarity.halfwidth, 0.0);
        assert_eq!(aggregate(&[b(1.0, 1.0)]), Err(MetricsError::InsufficientRuns(1)));
    }

    #[test]
    fn stationarity_vanishes_at_kkt_point() {
        // min ½‖x‖² s.t. x₁ + x₂ = 1 has its solution at (½, ½)
        let p = QuadraticProblem::new(
            vec![DenseMatrix::identity(2)],
            vec![DenseVector::zeros(2)],
            ConstraintSpec::Linear {
                a: DenseMatrix::from_rows(&[vec![1.0, 1.0]]),
                a1: DenseVector::from(vec![1.0]),
            },
        );
        let x = DenseVector::from(vec![0.5, 0.5]);
        assert!(stationarity_error(&p, &x).unwrap() < 1e-10);
        // any gradient in the row space of J is cancelled
        let x = DenseVector::from(vec![2.0, 2.0]);
        assert!(stationarity_error(&p, &x).unwrap() < 1e-12);
        let m = measure(&p, &x, 0.5);
        assert_eq!(m.feasibility_inf, 3.0);
        assert_eq!(m.merit, 0.5 * 4.0 + 3.0);
    }
}
