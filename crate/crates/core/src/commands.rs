//! Command drivers behind the `decorr` binary.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use log::info;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluate::{blocked_cv, bootstrap_confidence, LoglikConfig};
use crate::graphs::Cpdag;
use crate::io;
use crate::model::{MixedDataset, VariableKind, VariableSpec};
use crate::pipeline::{run_pipeline, Strategy};
use crate::preprocess::{hier_cluster_blocks, ingest_expression};
use crate::reproduce::{run_studies, Study, StudyReport, StudySettings};
use crate::rng::Streams;
use crate::simulate::{simulate, SimulationSettings};

pub const DATA_FILE: &str = "data.csv";
pub const SPECS_FILE: &str = "specs.tsv";
pub const BLOCKS_FILE: &str = "blocks.tsv";
pub const EDGES_FILE: &str = "edges.tsv";
pub const TRUTH_EDGES_FILE: &str = "truth_edges.tsv";
pub const TRUTH_SPECS_FILE: &str = "truth_specs.tsv";
pub const TRUTH_COV_FILE: &str = "truth_cov.txt";
pub const COV_FILE: &str = "cov.txt";
pub const PREESTIMATE_FILE: &str = "preestimate.tsv";
pub const TIMINGS_FILE: &str = "timings.tsv";
pub const CONFIG_FILE: &str = "config.txt";
pub const BOOTSTRAP_FILE: &str = "bootstrap_edges.tsv";
pub const REPORT_FILE: &str = "discretization.tsv";
pub const CV_FILE: &str = "cv.tsv";

/// Run `f` on a worker pool of `threads` threads.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(f)
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::Config(format!("`{key}` is required")))
}

/// Simulated dataset with its truth: data, spec sidecar (thresholds left
/// blank), blocks, true DAG edges, true specs and true unit covariance.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let mut settings = SimulationSettings::standard(cfg.n, cfg.p);
    if let Some(e) = cfg.edges {
        settings.edges = e;
    }
    settings.block_sizes = (cfg.block_min, cfg.block_max);
    let inst = simulate(&settings, cfg.seed)?;
    let out = &cfg.out;
    let x = &inst.data;
    io::write_data_csv(&out.join(DATA_FILE), x)?;
    let inputs: Vec<VariableSpec> =
        x.specs().iter().map(|s| VariableSpec { thresholds: None, ..s.clone() }).collect();
    io::write_specs_tsv(&out.join(SPECS_FILE), &inputs)?;
    io::write_specs_tsv(&out.join(TRUTH_SPECS_FILE), &inst.model.specs)?;
    io::write_blocks_tsv(&out.join(BLOCKS_FILE), x.unit_ids(), x.block_labels())?;
    let truth = Cpdag::from_edges(x.p(), &inst.model.dag.edges(), &[])?;
    io::write_edges_tsv(&out.join(TRUTH_EDGES_FILE), &truth, &x.names(), None)?;
    io::write_cov(&out.join(TRUTH_COV_FILE), &inst.cov, x.block_labels())?;
    io::write_text(&out.join(CONFIG_FILE), &cfg.to_text())?;
    info!("simulated {} units x {} variables into {}", x.n(), x.p(), out.display());
    Ok(())
}

/// Dataset from the configured data, specs and (optional) blocks files.
pub fn load_dataset(cfg: &RunConfig, need_blocks: bool) -> Result<MixedDataset> {
    let data = required(&cfg.data, "data")?;
    let specs = required(&cfg.specs, "specs")?;
    if need_blocks && cfg.blocks.is_none() {
        return Err(Error::Config("`blocks` is required for this strategy".into()));
    }
    let x = io::read_dataset(data, specs)?;
    match &cfg.blocks {
        Some(b) => {
            let labels = io::read_blocks_tsv(b, x.unit_ids())?;
            x.with_blocks(labels)
        }
        None => {
            let n = x.n();
            x.with_blocks((0..n).collect())
        }
    }
}

/// Estimate a CPDAG with the configured strategy and write its artifacts.
pub fn cmd_pipeline(cfg: &RunConfig) -> Result<()> {
    if cfg.strategy.uses_blocks() && cfg.blocks.is_none() {
        return Err(Error::Config(format!("strategy `{}` needs a `blocks` file", cfg.strategy.name())));
    }
    let x = load_dataset(cfg, cfg.strategy.uses_blocks())?;
    let params = cfg.pipeline_params(x.p());
    let streams = Streams::new(cfg.seed);
    let out_dir = &cfg.out;
    let names = x.names();
    with_threads(cfg.threads, || {
        let out = run_pipeline(&x, cfg.strategy, &params, &streams)?;
        io::write_edges_tsv(&out_dir.join(EDGES_FILE), &out.graph, &names, None)?;
        if let Some(pre) = &out.pre {
            io::write_preestimate(&out_dir.join(PREESTIMATE_FILE), pre, &names)?;
        }
        if let Some(cov) = &out.cov {
            io::write_cov(&out_dir.join(COV_FILE), cov, x.block_labels())?;
        }
        io::write_timings(&out_dir.join(TIMINGS_FILE), &out.timings)?;
        io::write_text(&out_dir.join(CONFIG_FILE), &cfg.to_text())?;
        if let Some(b) = cfg.bootstrap {
            let boot = bootstrap_confidence(&x, &out.graph, b, &streams.child("bootstrap", &[]), |xb, s| {
                run_pipeline(xb, cfg.strategy, &params, s).map(|o| o.graph)
            })
            .map_err(Error::in_stage("bootstrap"))?;
            io::write_edges_tsv(&out_dir.join(BOOTSTRAP_FILE), &boot.graph, &names, Some(&boot.confidence))?;
            info!("bootstrap: {} of {b} replicates succeeded", boot.effective);
        }
        info!("pipeline `{}` wrote {} edges to {}", cfg.strategy.name(), out.graph.edge_count(), out_dir.display());
        Ok(())
    })
}

/// Run desk-scale studies; failed checks are report rows, not errors.
pub fn cmd_reproduce(cfg: &RunConfig, studies: &[Study], seeds: usize) -> Result<Vec<StudyReport>> {
    let settings = StudySettings { seed: cfg.seed, seeds };
    with_threads(cfg.threads, || run_studies(studies, &settings, &cfg.out))
}

/// Parse a `name=kind` pin, where kind is `continuous` or `discrete:<levels>`.
pub fn parse_pin(s: &str) -> Result<(String, VariableKind)> {
    let (name, kind) = s.split_once('=').ok_or_else(|| Error::Config(format!("pin `{s}` is not name=kind")))?;
    let kind = match kind {
        "continuous" => VariableKind::Continuous,
        k => match k.strip_prefix("discrete:").and_then(|l| l.parse().ok()) {
            Some(levels) if levels >= 2 => VariableKind::Discrete { levels },
            _ => return Err(Error::Config(format!("pin kind `{k}` is not continuous or discrete:<levels>"))),
        },
    };
    Ok((name.to_string(), kind))
}

/// Read an expression CSV, decide column kinds, optionally cluster units
/// from background features, and write the pipeline inputs.
pub fn cmd_ingest(cfg: &RunConfig, pins: &HashMap<String, VariableKind>) -> Result<()> {
    let data = required(&cfg.data, "data")?;
    let streams = Streams::new(cfg.seed);
    let ingested = with_threads(cfg.threads, || ingest_expression(data, pins, &streams))?;
    let x = &ingested.data;
    let labels = match (&cfg.background, cfg.clusters) {
        (Some(bg), Some(k)) => {
            let table = io::read_numeric_csv(bg)?;
            if table.unit_ids.len() != x.n() {
                return Err(Error::Input(format!("background has {} rows, data has {}", table.unit_ids.len(), x.n())));
            }
            hier_cluster_blocks(&table.values, k)?
        }
        (None, None) => (0..x.n()).collect(),
        _ => return Err(Error::Config("`background` and `clusters` must be given together".into())),
    };
    let out = &cfg.out;
    io::write_data_csv(&out.join(DATA_FILE), x)?;
    io::write_specs_tsv(&out.join(SPECS_FILE), x.specs())?;
    io::write_blocks_tsv(&out.join(BLOCKS_FILE), x.unit_ids(), &labels)?;
    io::write_discretization_report(&out.join(REPORT_FILE), &ingested.report)?;
    Ok(())
}

/// Blocked cross-validation of baseline, consensus-ident and consensus.
pub fn cmd_cv(cfg: &RunConfig) -> Result<()> {
    let x = load_dataset(cfg, true)?;
    let background = match &cfg.background {
        Some(p) => {
            let t = io::read_numeric_csv(p)?;
            if t.unit_ids.len() != x.n() {
                return Err(Error::Input(format!("background has {} rows, data has {}", t.unit_ids.len(), x.n())));
            }
            Some(t.values)
        }
        None => None,
    };
    let strategies = [Strategy::Baseline, Strategy::ConsensusIdent, Strategy::Consensus];
    let params = cfg.pipeline_params(x.p());
    let loglik = LoglikConfig { replications: cfg.loglik_reps, seed: cfg.seed };
    let table = with_threads(cfg.threads, || {
        blocked_cv(&x, background.as_ref(), &strategies, &params, cfg.folds, &loglik, &Streams::new(cfg.seed))
    })?;
    let mut header = vec!["fold", "test_units"];
    header.extend(strategies.iter().map(|s| s.name()));
    let mut rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let mut row = vec![k.to_string(), table.test_units[k].to_string()];
            row.extend(r.iter().map(|e| io::fmt_f64(e.value)));
            row
        })
        .collect();
    let mut med = vec!["median".to_string(), "-".to_string()];
    med.extend((0..strategies.len()).map(|s| io::fmt_f64(table.median(s))));
    rows.push(med);
    io::write_table(&cfg.out.join(CV_FILE), &header, &rows)
}
