use std::path::PathBuf;
use std::process::ExitCode;

use afdg::experiments::{emit, execute, Experiment, RunConfig};
use clap::{Args, Parser, Subcommand};

/// Active Flux and DG solvers: runs, convergence studies, equivalence checks
/// and benchmarks, all emitting CSV.
#[derive(Parser)]
#[command(name = "afdg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate once per grid and report per-family errors.
    Run(Common),
    /// EOC table over the grid list.
    Convergence(Common),
    /// DG errors at Radau/crossing points, uniform points and averages.
    Superconvergence(Common),
    /// Compare DG-induced and AF-native dof derivatives; exits 1 on mismatch.
    EquivCheck {
        #[command(flatten)]
        common: Common,
        /// Run the full sweep of settings instead of the configured one.
        #[arg(long)]
        suite: bool,
    },
    /// Single-threaded runtime scaling over the grid list.
    Bench(Common),
    /// Dof counts, quadrature orders and CFL numbers of all methods.
    DofTable {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self, experiment: Experiment) -> afdg::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::parse(&std::fs::read_to_string(p)?)?,
            None => RunConfig::default(),
        };
        for kv in &self.sets {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| afdg::Error::Config(format!("--set expects key=value, got '{kv}'")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        cfg.experiment = experiment;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, experiment, suite) = match &cli.command {
        Command::Run(c) => (c, Experiment::Run, false),
        Command::Convergence(c) => (c, Experiment::Convergence, false),
        Command::Superconvergence(c) => (c, Experiment::Superconvergence, false),
        Command::EquivCheck { common, suite } => (common, Experiment::EquivCheck, *suite),
        Command::Bench(c) => (c, Experiment::Bench, false),
        Command::DofTable { out } => {
            let c = Common { config: None, sets: Vec::new(), out: out.clone() };
            return finish(c.config(Experiment::DofTable).and_then(|cfg| Ok((execute(&cfg, false)?, cfg))));
        }
    };
    finish(common.config(experiment).and_then(|cfg| Ok((execute(&cfg, suite)?, cfg))))
}

fn finish(result: afdg::Result<(afdg::experiments::Outcome, RunConfig)>) -> ExitCode {
    match result.and_then(|(o, cfg)| emit(cfg.out.as_ref(), &o.csv).map(|_| o.pass)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("afdg: checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("afdg: {e}");
            ExitCode::from(2)
        }
    }
}
