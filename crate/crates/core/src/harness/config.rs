use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::gradients::SamplingMode;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("config error in `{key}`: {reason}")]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    data: RawData,
    constraint: Option<RawConstraint>,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    solver: Vec<RawSolver>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    path: PathBuf,
    n: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    kind: String,
    m: Option<usize>,
    a2: Option<f64>,
    seed: Option<u64>,
    resample_per_seed: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawInner {
    Count(i64),
    Ratio(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    b: Option<i64>,
    inner: Option<RawInner>,
    epochs: Option<f64>,
    seeds: Option<Vec<u64>>,
    sigma: Option<f64>,
    eps_tau: Option<f64>,
    tau_init: Option<f64>,
    init_scale: Option<f64>,
    sampling: Option<SamplingMode>,
    cache_reference: Option<bool>,
    out_dir: Option<PathBuf>,
    threads: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawSolver {
    SvrSqpA {
        label: Option<String>,
        beta: Option<f64>,
        alpha_u: Option<f64>,
    },
    SvrSqpC {
        label: Option<String>,
        alpha: f64,
    },
    MinibatchSqp {
        label: Option<String>,
        step: Option<String>,
        alpha: Option<f64>,
        beta: Option<f64>,
        alpha_u: Option<f64>,
    },
    StoSubgradVr {
        label: Option<String>,
        alpha: f64,
        tau: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub path: PathBuf,
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintKind {
    Linear { m: usize },
    L2Ball { a2: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintConfig {
    pub kind: ConstraintKind,
    /// seed for `(A, a₁)` when they are shared by all run seeds
    pub seed: u64,
    /// draw `(A, a₁)` from each run seed instead
    pub resample_per_seed: bool,
}

/// Inner iteration count `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSpec {
    Fixed(usize),
    /// `⌊N / (c·b)⌋`
    Ratio(usize),
}

impl InnerSpec {
    /// Resolves against the data size; ratios that round to 0 become 1.
    pub fn resolve(&self, big_n: usize, b: usize) -> usize {
        match *self {
            InnerSpec::Fixed(s) => s,
            InnerSpec::Ratio(c) => (big_n / (c * b)).max(1),
        }
    }

    fn parse(s: &str) -> Option<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mid = t.strip_prefix("N/")?.strip_suffix('b')?;
        let c = if mid.is_empty() { 1 } else { mid.parse().ok()? };
        (c > 0).then_some(InnerSpec::Ratio(c))
    }
}

impl fmt::Display for InnerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InnerSpec::Fixed(s) => write!(f, "{s}"),
            InnerSpec::Ratio(1) => f.write_str("N/b"),
            InnerSpec::Ratio(c) => write!(f, "N/{c}b"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MinibatchStep {
    Constant { alpha: f64 },
    Adaptive { beta: f64, alpha_u: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverKind {
    SvrSqpA { beta: f64, alpha_u: f64 },
    SvrSqpC { alpha: f64 },
    MinibatchSqp(MinibatchStep),
    StoSubgradVr { alpha: f64, tau: f64 },
}

impl SolverKind {
    pub fn default_label(&self) -> String {
        match self {
            SolverKind::SvrSqpA { beta, alpha_u } => {
                if *beta == 1.0 && *alpha_u == 1e6 {
                    "svr_sqp_a".to_string()
                } else {
                    format!("svr_sqp_a_beta{beta:?}_au{alpha_u:?}")
                }
            }
            SolverKind::SvrSqpC { alpha } => format!("svr_sqp_c_alpha{alpha:?}"),
            SolverKind::MinibatchSqp(MinibatchStep::Constant { alpha }) => format!("minibatch_sqp_alpha{alpha:?}"),
            SolverKind::MinibatchSqp(MinibatchStep::Adaptive { beta, alpha_u }) => {
                format!("minibatch_sqp_a_beta{beta:?}_au{alpha_u:?}")
            }
            SolverKind::StoSubgradVr { alpha, tau } => format!("sto_subgrad_vr_alpha{alpha:?}_tau{tau:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSpec {
    pub label: String,
    pub kind: SolverKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub constraint: ConstraintConfig,
    pub batch_size: usize,
    pub inner: InnerSpec,
    pub epochs: f64,
    pub seeds: Vec<u64>,
    pub sigma: f64,
    pub eps_tau: f64,
    pub tau_init: f64,
    pub init_scale: f64,
    pub sampling: SamplingMode,
    pub cache_reference: bool,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub solvers: Vec<SolverSpec>,
}

impl ExperimentConfig {
    /// Defaults around a dataset, with SVR-SQP-A as the only solver.
    pub fn with_dataset(path: impl Into<PathBuf>, kind: ConstraintKind) -> Self {
        let solver = SolverKind::SvrSqpA { beta: 1.0, alpha_u: 1e6 };
        Self {
            data: DataConfig {
                path: path.into(),
                n: None,
            },
            constraint: ConstraintConfig {
                kind,
                seed: 0,
                resample_per_seed: false,
            },
            batch_size: 16,
            inner: InnerSpec::Ratio(2),
            epochs: 30.0,
            seeds: (0..10).collect(),
            sigma: 0.5,
            eps_tau: 1e-6,
            tau_init: 0.1,
            init_scale: 0.1,
            sampling: SamplingMode::WithReplacement,
            cache_reference: false,
            out_dir: None,
            threads: None,
            solvers: vec![SolverSpec {
                label: solver.default_label(),
                kind: solver,
            }],
        }
    }

    /// Checks the settings that depend on the data size.
    pub fn check_against(&self, big_n: usize) -> Result<usize, ConfigError> {
        if self.batch_size == 0 || self.batch_size >= big_n {
            return Err(ConfigError::new("b", "must be in [1, N−1]"));
        }
        let s = self.inner.resolve(big_n, self.batch_size);
        if s == 0 {
            return Err(ConfigError::new("inner", "must be at least 1"));
        }
        Ok(s)
    }
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::new(key, "must be positive and finite"))
    }
}

fn open_unit(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(ConfigError::new(key, "must be in (0, 1)"))
    }
}

fn half_open_unit(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(ConfigError::new(key, "must be in (0, 1]"))
    }
}

fn solver_spec(raw: RawSolver, index: usize) -> Result<SolverSpec, ConfigError> {
    let key = |k: &str| format!("solver[{index}].{k}");
    let (label, kind) = match raw {
        RawSolver::SvrSqpA { label, beta, alpha_u } => (
            label,
            SolverKind::SvrSqpA {
                beta: half_open_unit(&key("beta"), beta.unwrap_or(1.0))?,
                alpha_u: positive(&key("alpha_u"), alpha_u.unwrap_or(1e6))?,
            },
        ),
        RawSolver::SvrSqpC { label, alpha } => (
            label,
            SolverKind::SvrSqpC {
                alpha: positive(&key("alpha"), alpha)?,
            },
        ),
        RawSolver::MinibatchSqp {
            label,
            step,
            alpha,
            beta,
            alpha_u,
        } => {
            let step = match step.as_deref().unwrap_or("constant") {
                "constant" => {
                    if beta.is_some() || alpha_u.is_some() {
                        return Err(ConfigError::new(key("step"), "constant step takes only `alpha`"));
                    }
                    let alpha = alpha.ok_or_else(|| ConfigError::new(key("alpha"), "required for a constant step"))?;
                    MinibatchStep::Constant {
                        alpha: positive(&key("alpha"), alpha)?,
                    }
                }
                "adaptive" => {
                    if alpha.is_some() {
                        return Err(ConfigError::new(key("step"), "adaptive step takes `beta` and `alpha_u`"));
                    }
                    MinibatchStep::Adaptive {
                        beta: half_open_unit(&key("beta"), beta.unwrap_or(1.0))?,
                        alpha_u: positive(&key("alpha_u"), alpha_u.unwrap_or(1e6))?,
                    }
                }
                other => {
                    return Err(ConfigError::new(
                        key("step"),
                        format!("unknown step `{other}`, expected `constant` or `adaptive`"),
                    ))
                }
            };
            (label, SolverKind::MinibatchSqp(step))
        }
        RawSolver::StoSubgradVr { label, alpha, tau } => (
            label,
            SolverKind::StoSubgradVr {
                alpha: positive(&key("alpha"), alpha)?,
                tau: positive(&key("tau"), tau)?,
            },
        ),
    };
    let label = label.unwrap_or_else(|| kind.default_label());
    if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || "._-=+".contains(c)) {
        return Err(ConfigError::new(key("label"), "must be nonempty and use only [A-Za-z0-9._-=+]"));
    }
    Ok(SolverSpec { label, kind })
}

/// Parses and validates a TOML config. Relative paths resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        let key = msg
            .split('`')
            .nth(1)
            .filter(|_| msg.starts_with("unknown field"))
            .unwrap_or("<file>")
            .to_string();
        ConfigError::new(key, e.to_string().trim().replace('\n', " "))
    })?;

    let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };

    if raw.data.n == Some(0) {
        return Err(ConfigError::new("data.n", "must be positive"));
    }
    let data = DataConfig {
        path: resolve(raw.data.path),
        n: raw.data.n,
    };

    let constraint = match raw.constraint {
        None => ConstraintConfig {
            kind: ConstraintKind::Linear { m: 10 },
            seed: 0,
            resample_per_seed: false,
        },
        Some(c) => {
            let kind = match c.kind.as_str() {
                "linear" => {
                    if c.a2.is_some() {
                        return Err(ConfigError::new("constraint.a2", "only valid for kind = \"l2ball\""));
                    }
                    let m = c.m.unwrap_or(10);
                    if m == 0 {
                        return Err(ConfigError::new("constraint.m", "must be positive"));
                    }
                    ConstraintKind::Linear { m }
                }
                "l2ball" => {
                    if c.m.is_some() {
                        return Err(ConfigError::new("constraint.m", "only valid for kind = \"linear\""));
                    }
                    ConstraintKind::L2Ball {
                        a2: positive("constraint.a2", c.a2.unwrap_or(1.0))?,
                    }
                }
                other => {
                    return Err(ConfigError::new(
                        "constraint.kind",
                        format!("unknown kind `{other}`, expected `linear` or `l2ball`"),
                    ))
                }
            };
            ConstraintConfig {
                kind,
                seed: c.seed.unwrap_or(0),
                resample_per_seed: c.resample_per_seed.unwrap_or(false),
            }
        }
    };

    let run = raw.run;
    let batch_size = match run.b.unwrap_or(16) {
        b if b >= 1 => b as usize,
        _ => return Err(ConfigError::new("b", "must be in [1, N−1]")),
    };
    let inner = match run.inner {
        None => InnerSpec::Ratio(2),
        Some(RawInner::Count(s)) if s >= 1 => InnerSpec::Fixed(s as usize),
        Some(RawInner::Count(_)) => return Err(ConfigError::new("inner", "must be at least 1")),
        Some(RawInner::Ratio(s)) => InnerSpec::parse(&s)
            .ok_or_else(|| ConfigError::new("inner", format!("expected an integer or \"N/<c>b\", got \"{s}\"")))?,
    };
    let seeds = run.seeds.unwrap_or_else(|| (0..10).collect());
    if seeds.is_empty() {
        return Err(ConfigError::new("seeds", "must not be empty"));
    }
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(ConfigError::new("seeds", "must not repeat"));
    }
    if run.threads == Some(0) {
        return Err(ConfigError::new("threads", "must be positive"));
    }

    let mut solvers = raw
        .solver
        .into_iter()
        .enumerate()
        .map(|(i, s)| solver_spec(s, i))
        .collect::<Result<Vec<_>, _>>()?;
    if solvers.is_empty() {
        let kind = SolverKind::SvrSqpA { beta: 1.0, alpha_u: 1e6 };
        solvers.push(SolverSpec {
            label: kind.default_label(),
            kind,
        });
    }
    for (i, s) in solvers.iter().enumerate() {
        if solvers[..i].iter().any(|o| o.label == s.label) {
            return Err(ConfigError::new(format!("solver[{i}].label"), format!("duplicate label `{}`", s.label)));
        }
    }

    Ok(ExperimentConfig {
        data,
        constraint,
        batch_size,
        inner,
        epochs: positive("epochs", run.epochs.unwrap_or(30.0))?,
        seeds,
        sigma: open_unit("sigma", run.sigma.unwrap_or(0.5))?,
        eps_tau: open_unit("eps_tau", run.eps_tau.unwrap_or(1e-6))?,
        tau_init: positive("tau_init", run.tau_init.unwrap_or(0.1))?,
        init_scale: positive("init_scale", run.init_scale.unwrap_or(0.1))?,
        sampling: run.sampling.unwrap_or_default(),
        cache_reference: run.cache_reference.unwrap_or(false),
        out_dir: run.out_dir.map(resolve),
        threads: run.threads,
        solvers,
    })
}

/// Reads and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("<file>", format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ExperimentConfig, ConfigError> {
        parse_config(s, Path::new("/cfg"))
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse("[data]\npath = \"australian\"\n").unwrap();
        assert_eq!(c.data.path, PathBuf::from("/cfg/australian"));
        assert_eq!(c.constraint.kind, ConstraintKind::Linear { m: 10 });
        assert_eq!((c.sigma, c.eps_tau, c.tau_init, c.init_scale), (0.5, 1e-6, 0.1, 0.1));
        assert_eq!((c.batch_size, c.epochs), (16, 30.0));
        assert_eq!(c.seeds, (0..10).collect::<Vec<_>>());
        assert_eq!(c.solvers[0].kind, SolverKind::SvrSqpA { beta: 1.0, alpha_u: 1e6 });
        assert_eq!(c.inner.resolve(621, 16), 19);
        assert_eq!(c.check_against(621), Ok(19));
    }

    #[test]
    fn batch_size_range() {
        let e = parse("[data]\npath = \"x\"\n[run]\nb = 0\n").unwrap_err();
        assert_eq!(e, ConfigError::new("b", "must be in [1, N−1]"));
        let c = parse("[data]\npath = \"x\"\n[run]\nb = 621\n").unwrap();
        assert_eq!(c.check_against(621).unwrap_err().key, "b");
    }

    #[test]
    fn inner_forms() {
        assert_eq!(InnerSpec::parse("N/2b"), Some(InnerSpec::Ratio(2)));
        assert_eq!(InnerSpec::parse(" N / b "), Some(InnerSpec::Ratio(1)));
        assert_eq!(InnerSpec::parse("N/0b"), None);
        assert_eq!(InnerSpec::parse("2b"), None);
        let c = parse("[data]\npath = \"x\"\n[run]\ninner = 7\n").unwrap();
        assert_eq!(c.inner, InnerSpec::Fixed(7));
        assert_eq!(parse("[data]\npath = \"x\"\n[run]\ninner = \"half\"\n").unwrap_err().key, "inner");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse("[data]\npath = \"x\"\n[run]\nepoch = 3\n").unwrap_err();
        assert_eq!(e.key, "epoch");
        let e = parse("[data]\npath = \"x\"\n[[solver]]\nkind = \"svr_sqp_c\"\nalpha = 1.0\nbeta = 2.0\n").unwrap_err();
        assert_eq!(e.key, "beta");
    }

    #[test]
    fn solvers_and_constraints() {
        let c = parse(
            "[data]\npath = \"x\"\n[constraint]\nkind = \"l2ball\"\n\
             [[solver]]\nkind = \"minibatch_sqp\"\nalpha = 0.1\n\
             [[solver]]\nkind = \"sto_subgrad_vr\"\nalpha = 1.0\ntau = 0.01\nlabel = \"sg\"\n",
        )
        .unwrap();
        assert_eq!(c.constraint.kind, ConstraintKind::L2Ball { a2: 1.0 });
        assert_eq!(c.solvers[0].label, "minibatch_sqp_alpha0.1");
        assert_eq!(c.solvers[1].label, "sg");
        let e = parse("[data]\npath = \"x\"\n[[solver]]\nkind = \"svr_sqp_a\"\nbeta = 2.0\n").unwrap_err();
        assert_eq!(e.key, "solver[0].beta");
        let e = parse("[data]\npath = \"x\"\n[[solver]]\nkind = \"svr_sqp_a\"\n[[solver]]\nkind = \"svr_sqp_a\"\n")
            .unwrap_err();
        assert_eq!(e.key, "solver[1].label");
        let e = parse("[data]\npath = \"x\"\n[run]\nsigma = 1.5\n").unwrap_err();
        assert_eq!(e.key, "sigma");
    }
}
