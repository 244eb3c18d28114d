use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use decorr::commands::{cmd_cv, cmd_ingest, cmd_pipeline, cmd_reproduce, cmd_simulate, parse_pin};
use decorr::config::RunConfig;
use decorr::reproduce::Study;
use decorr::Error;

/// Causal structure learning for block-dependent mixed data.
#[derive(Parser, Debug)]
#[command(name = "decorr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Every configuration key, settable from the command line.
#[derive(Args, Debug, Default, Clone)]
struct Keys {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long)]
    seed: Option<String>,
    /// Data CSV (header row, one row per unit).
    #[arg(long)]
    data: Option<String>,
    /// Spec sidecar TSV: name, kind, levels, thresholds.
    #[arg(long)]
    specs: Option<String>,
    /// Block TSV: unit_id, block_id.
    #[arg(long)]
    blocks: Option<String>,
    /// Background feature CSV used for unit covariance.
    #[arg(long)]
    background: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// CI-test level (default 0.01).
    #[arg(long)]
    alpha: Option<String>,
    /// De-correlated states pooled by average/consensus.
    #[arg(long)]
    m: Option<String>,
    /// De-correlation iterations.
    #[arg(long = "t_max")]
    t_max: Option<String>,
    /// Gibbs burn-in sweeps.
    #[arg(long = "burn_in")]
    burn_in: Option<String>,
    /// Gibbs draws averaged per iteration.
    #[arg(long)]
    draws: Option<String>,
    /// Ridge factor of the M-step regression.
    #[arg(long)]
    ridge: Option<String>,
    /// Bootstrap replicates for edge confidence.
    #[arg(long)]
    bootstrap: Option<String>,
    /// Cross-validation folds.
    #[arg(long)]
    folds: Option<String>,
    /// Monte Carlo replications for discrete log-likelihood.
    #[arg(long = "loglik_reps")]
    loglik_reps: Option<String>,
    /// baseline, average, consensus or consensus-ident.
    #[arg(long)]
    strategy: Option<String>,
    /// pc, hc or hybrid.
    #[arg(long)]
    learner: Option<String>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<String>,
    /// Simulated units.
    #[arg(long)]
    n: Option<String>,
    /// Simulated variables.
    #[arg(long)]
    p: Option<String>,
    /// Simulated edge count (default 2p).
    #[arg(long)]
    edges: Option<String>,
    /// Smallest simulated block.
    #[arg(long = "block_min")]
    block_min: Option<String>,
    /// Largest simulated block.
    #[arg(long = "block_max")]
    block_max: Option<String>,
    /// Blocks to cut from background clustering.
    #[arg(long)]
    clusters: Option<String>,
}

impl Keys {
    fn overrides(&self) -> Vec<(String, String)> {
        let pairs = [
            ("seed", &self.seed),
            ("data", &self.data),
            ("specs", &self.specs),
            ("blocks", &self.blocks),
            ("background", &self.background),
            ("out", &self.out),
            ("alpha", &self.alpha),
            ("m", &self.m),
            ("t_max", &self.t_max),
            ("burn_in", &self.burn_in),
            ("draws", &self.draws),
            ("ridge", &self.ridge),
            ("bootstrap", &self.bootstrap),
            ("folds", &self.folds),
            ("loglik_reps", &self.loglik_reps),
            ("strategy", &self.strategy),
            ("learner", &self.learner),
            ("threads", &self.threads),
            ("n", &self.n),
            ("p", &self.p),
            ("edges", &self.edges),
            ("block_min", &self.block_min),
            ("block_max", &self.block_max),
            ("clusters", &self.clusters),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect()
    }

    fn load(&self) -> Result<RunConfig, Error> {
        RunConfig::load(self.config.as_deref(), &self.overrides())
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a block-dependent mixed dataset with its true DAG and covariance.
    Simulate {
        #[command(flatten)]
        keys: Keys,
    },
    /// Estimate a CPDAG and write edges, pre-estimate, covariance and timings.
    Pipeline {
        #[command(flatten)]
        keys: Keys,
    },
    /// Run desk-scale studies and write a pass/fail report.
    Reproduce {
        /// Studies to run.
        #[arg(required = true, value_parser = parse_study)]
        studies: Vec<Study>,
        /// Seeds per multi-seed study.
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[command(flatten)]
        keys: Keys,
    },
    /// Read an expression CSV and write pipeline inputs.
    Ingest {
        /// Pin a column's kind: `name=continuous` or `name=discrete:<levels>`.
        #[arg(long = "pin")]
        pins: Vec<String>,
        #[command(flatten)]
        keys: Keys,
    },
    /// Blocked cross-validation of baseline, consensus-ident and consensus.
    Cv {
        #[command(flatten)]
        keys: Keys,
    },
}

fn parse_study(s: &str) -> Result<Study, String> {
    Study::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Study::ALL.iter().map(|s| s.name()).collect();
        format!("unknown study `{s}` (expected one of: {})", names.join(", "))
    })
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Simulate { keys } => cmd_simulate(&keys.load()?),
        Command::Pipeline { keys } => cmd_pipeline(&keys.load()?),
        Command::Reproduce { studies, seeds, keys } => {
            if seeds == 0 {
                return Err(Error::Config("`seeds` must be positive".into()));
            }
            let cfg = keys.load()?;
            let reports = cmd_reproduce(&cfg, &studies, seeds)?;
            for r in &reports {
                for c in &r.checks {
                    println!(
                        "{}\t{}\t{}\t{} {}\t{}",
                        r.study,
                        c.name,
                        decorr::io::fmt_f64(c.value),
                        c.compare.symbol(),
                        decorr::io::fmt_f64(c.threshold),
                        if c.pass { "PASS" } else { "FAIL" }
                    );
                }
            }
            Ok(())
        }
        Command::Ingest { pins, keys } => {
            let pins: HashMap<_, _> = pins.iter().map(|p| parse_pin(p)).collect::<Result<_, _>>()?;
            cmd_ingest(&keys.load()?, &pins)
        }
        Command::Cv { keys } => cmd_cv(&keys.load()?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
