use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveParams {
    pub beta: f64,
    pub alpha_u: f64,
    /// objective gradient Lipschitz estimate `L`
    pub lipschitz: f64,
    /// constraint Jacobian Lipschitz constant `Γ`
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Constant { alpha: f64 },
    Adaptive(AdaptiveParams),
}

/// Which branch produced a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepCase {
    /// zero direction, iterate left in place
    Skipped,
    Constant,
    /// `α̂ < 1`
    Hat,
    /// `α̃ ≤ 1 ≤ α̂`
    Unit,
    /// `α̃ > 1`
    Tilde,
}

/// Two trial steps of the adaptive rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSteps {
    pub hat: f64,
    pub tilde: f64,
}

pub fn trial_steps(p: &AdaptiveParams, tau: f64, delta_l: f64, d_bar_norm_sq: f64, c_l1: f64) -> TrialSteps {
    let curvature = (tau * p.lipschitz + p.gamma) * d_bar_norm_sq;
    let hat = (delta_l / curvature).min(p.alpha_u) * p.beta;
    TrialSteps {
        hat,
        tilde: hat - 4.0 * c_l1 / curvature,
    }
}

/// Adaptive step size and the branch that chose it.
pub fn adaptive_step(
    p: &AdaptiveParams,
    tau: f64,
    delta_l: f64,
    d_bar_norm_sq: f64,
    c_l1: f64,
) -> (f64, StepCase) {
    let t = trial_steps(p, tau, delta_l, d_bar_norm_sq, c_l1);
    if t.hat < 1.0 {
        (t.hat, StepCase::Hat)
    } else if t.tilde <= 1.0 {
        (1.0, StepCase::Unit)
    } else {
        (t.tilde, StepCase::Tilde)
    }
}

impl StepRule {
    pub fn step(&self, tau: f64, delta_l: f64, d_bar_norm_sq: f64, c_l1: f64) -> (f64, StepCase) {
        match self {
            StepRule::Constant { alpha } => (*alpha, StepCase::Constant),
            StepRule::Adaptive(p) => adaptive_step(p, tau, delta_l, d_bar_norm_sq, c_l1),
        }
    }
}
