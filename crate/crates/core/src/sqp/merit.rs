use std::fmt;

use crate::linalg::{DenseMatrix, DenseVector};
use crate::problems::Problem;

/// `φ(x, τ) = τ f(x) + ‖c(x)‖₁`
pub fn merit_value<P: Problem + ?Sized>(problem: &P, x: &DenseVector, tau: f64) -> f64 {
    tau * problem.objective(x) + problem.constraints(x).norm_l1()
}

/// `Δl = −τ gᵀd + ‖c‖₁`, the decrease of the linearized merit model along a
/// direction that satisfies the linearized constraints.
pub fn model_reduction(tau: f64, g: &DenseVector, d: &DenseVector, c: &DenseVector) -> f64 {
    reduction(tau, g.dot(d), c.norm_l1())
}

pub(crate) fn reduction(tau: f64, gtd: f64, c_l1: f64) -> f64 {
    -tau * gtd + c_l1
}

/// Trial merit parameter; `Infinite` whenever the curvature-adjusted
/// directional derivative is nonpositive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauTrial {
    Infinite,
    Finite(f64),
}

impl TauTrial {
    /// Whether `tau ≤ τ_trial`.
    pub fn admits(&self, tau: f64) -> bool {
        match *self {
            TauTrial::Infinite => true,
            TauTrial::Finite(t) => tau <= t,
        }
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            TauTrial::Infinite => f64::INFINITY,
            TauTrial::Finite(t) => t,
        }
    }
}

impl fmt::Display for TauTrial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TauTrial::Infinite => f.write_str("inf"),
            TauTrial::Finite(t) => write!(f, "{t:e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeritState {
    pub tau: f64,
    pub sigma: f64,
    pub eps_tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeritUpdate {
    pub state: MeritState,
    pub tau_trial: TauTrial,
    /// `ḡᵀd̄ + max{d̄ᵀH d̄, 0}`
    pub q: f64,
}

impl MeritUpdate {
    pub fn decreased(&self, previous: &MeritState) -> bool {
        self.state.tau < previous.tau
    }
}

/// `q > 0` while `c = 0`: the direction computation lost accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegenerateDirection {
    pub q: f64,
}

/// Relative size below which a positive `q` at a feasible point counts as
/// rounding noise.
const Q_NOISE: f64 = 1e-10;

impl MeritState {
    pub fn new(tau: f64, sigma: f64, eps_tau: f64) -> Self {
        Self { tau, sigma, eps_tau }
    }

    /// Merit parameter update from the scalars `ḡᵀd̄`, `d̄ᵀH d̄` and `‖c‖₁`.
    pub fn update(&self, gtd: f64, dhd: f64, c_l1: f64) -> Result<MeritUpdate, DegenerateDirection> {
        let q = gtd + dhd.max(0.0);
        let tau_trial = if q <= 0.0 {
            TauTrial::Infinite
        } else if c_l1 == 0.0 {
            if q > Q_NOISE * (gtd.abs() + dhd.abs()) {
                return Err(DegenerateDirection { q });
            }
            TauTrial::Infinite
        } else {
            TauTrial::Finite((1.0 - self.sigma) * c_l1 / q)
        };
        let tau = if tau_trial.admits(self.tau) {
            self.tau
        } else {
            (1.0 - self.eps_tau) * tau_trial.as_f64()
        };
        Ok(MeritUpdate {
            state: MeritState { tau, ..*self },
            tau_trial,
            q,
        })
    }
}

/// Merit parameter update from the step quantities themselves.
pub fn update_merit_parameter(
    merit: &MeritState,
    g_bar: &DenseVector,
    d_bar: &DenseVector,
    h: &DenseMatrix,
    c: &DenseVector,
) -> Result<MeritUpdate, DegenerateDirection> {
    merit.update(g_bar.dot(d_bar), h.quad_form(d_bar), c.norm_l1())
}
