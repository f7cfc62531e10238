use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::{load_config, prepare, run_experiment, ConfigError, ExperimentConfig, HarnessError};
use crate::problems::Dataset;

pub const OUT_DIR_ENV: &str = "SVRSQP_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "svrsqp_out";

#[derive(Debug, Parser)]
#[command(name = "svrsqp", version, about = "Stochastic variance-reduced SQP experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Overrides {
    /// output directory (falls back to $SVRSQP_OUT_DIR, then the config)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// comma-separated run seeds
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// worker threads; 1 runs sequentially
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every solver on every seed and write CSV output
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check a config and print the resolved parameters
    Validate {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print dataset size and label counts
    Info {
        dataset: PathBuf,
        /// feature count override
        #[arg(long)]
        n: Option<usize>,
    },
}

fn apply(cfg: &mut ExperimentConfig, o: &Overrides) -> Result<(), ConfigError> {
    if let Some(seeds) = &o.seeds {
        if seeds.is_empty() {
            return Err(ConfigError::new("seeds", "must not be empty"));
        }
        cfg.seeds = seeds.clone();
    }
    if let Some(t) = o.threads {
        if t == 0 {
            return Err(ConfigError::new("threads", "must be positive"));
        }
        cfg.threads = Some(t);
    }
    if let Some(d) = &o.out_dir {
        cfg.out_dir = Some(d.clone());
    } else if let Some(d) = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()) {
        cfg.out_dir = Some(PathBuf::from(d));
    }
    Ok(())
}

fn describe(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<(), HarnessError> {
    let p = prepare(cfg)?;
    let problem = &p.setups[0].problem;
    let lines = [
        format!("dataset = {}", cfg.data.path.display()),
        format!("N = {}", p.data.len()),
        format!("n = {}", p.data.n_features()),
        format!("constraint = {:?}", cfg.constraint.kind),
        format!("m = {}", crate::problems::Problem::num_constraints(problem)),
        format!("gamma = {}", crate::problems::Problem::constraint_lipschitz(problem)),
        format!("b = {}", cfg.batch_size),
        format!("inner = {} ({})", p.inner, cfg.inner),
        format!("epochs = {}", cfg.epochs),
        format!("seeds = {:?}", cfg.seeds),
        format!("sigma = {}", cfg.sigma),
        format!("eps_tau = {}", cfg.eps_tau),
        format!("tau_init = {}", cfg.tau_init),
        format!("init_scale = {}", cfg.init_scale),
        format!("sampling = {:?}", cfg.sampling),
        format!("cache_reference = {}", cfg.cache_reference),
        format!(
            "lipschitz = {:?}",
            p.setups.iter().map(|s| s.lipschitz).collect::<Vec<_>>()
        ),
    ];
    for l in lines {
        let _ = writeln!(out, "{l}");
    }
    for s in &cfg.solvers {
        let _ = writeln!(out, "solver {} = {:?}", s.label, s.kind);
    }
    Ok(())
}

fn exec(cli: Cli, out: &mut dyn Write) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { config, overrides } => {
            let mut cfg = load_config(&config)?;
            apply(&mut cfg, &overrides)?;
            let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
            let res = run_experiment(&cfg, &dir)?;
            let _ = writeln!(out, "wrote {} runs to {}", res.runs.len(), dir.display());
            for (label, agg) in res.aggregates(&cfg) {
                if let Some(a) = agg {
                    let _ = writeln!(
                        out,
                        "{label}: feasibility {:e} ± {:e}, stationarity {:e} ± {:e}",
                        a.feasibility.mean, a.feasibility.halfwidth, a.stationarity.mean, a.stationarity.halfwidth
                    );
                }
            }
            Ok(())
        }
        Command::Validate { config, overrides } => {
            let mut cfg = load_config(&config)?;
            apply(&mut cfg, &overrides)?;
            describe(&cfg, out)
        }
        Command::Info { dataset, n } => {
            let d = Dataset::open(&dataset, n)?;
            let (neg, pos) = d.label_histogram();
            let _ = writeln!(out, "N={} n={}", d.len(), d.n_features());
            let _ = writeln!(out, "labels: -1={neg} +1={pos}");
            for (raw, mapped) in d.label_map() {
                let _ = writeln!(out, "label {raw} -> {mapped:+}");
            }
            Ok(())
        }
    }
}

/// Runs the CLI with explicit output streams and returns the exit code.
pub fn run_cli<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match exec(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Entry point used by the binary: 0 success, 1 config or usage error,
/// 2 runtime error.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_cli(argv, &mut std::io::stdout(), &mut std::io::stderr())
}
