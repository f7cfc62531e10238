use rand::Rng;
use rand_distr::StandardNormal;

use super::Problem;
use crate::linalg::DenseVector;

pub const LIPSCHITZ_PROBES: usize = 10;
pub const LIPSCHITZ_PROBE_RADIUS: f64 = 1e-2;

/// Estimates the gradient Lipschitz constant of `f` near `x0` as
/// `max_u ‖∇f(x0 + δu) − ∇f(x0)‖₂ / δ` over random unit directions `u`.
///
/// The estimate is a lower bound on the true constant. It is clamped away from
/// zero so step-size formulas that divide by it stay finite.
pub fn estimate_lipschitz<P, R>(problem: &P, x0: &DenseVector, rng: &mut R) -> f64
where
    P: Problem + ?Sized,
    R: Rng + ?Sized,
{
    let n = problem.dim();
    let g0 = problem.full_gradient(x0);
    let mut best = 0.0_f64;
    for _ in 0..LIPSCHITZ_PROBES {
        let mut u: DenseVector = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect::<Vec<_>>()
            .into();
        let norm = u.norm_l2();
        if norm == 0.0 {
            continue;
        }
        u.scale(LIPSCHITZ_PROBE_RADIUS / norm);
        let g = problem.full_gradient(&x0.add(&u));
        best = best.max(g.sub(&g0).norm_l2() / LIPSCHITZ_PROBE_RADIUS);
    }
    best.max(f64::EPSILON)
}
