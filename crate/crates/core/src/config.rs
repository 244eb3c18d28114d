//! Run configuration: flat `key = value` files with `#` comments, layered
//! under command-line overrides of the same names.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::decorrelate::DecorrelateConfig;
use crate::error::{Error, Result};
use crate::learn::{LearnParams, Learner};
use crate::pipeline::{PipelineParams, Strategy};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub data: Option<PathBuf>,
    pub specs: Option<PathBuf>,
    pub blocks: Option<PathBuf>,
    pub background: Option<PathBuf>,
    pub out: PathBuf,
    /// CI-test level; the learner default when unset.
    pub alpha: Option<f64>,
    pub m: usize,
    pub t_max: usize,
    pub burn_in: usize,
    pub draws: usize,
    pub ridge: f64,
    /// Bootstrap replicates; no bootstrap when unset.
    pub bootstrap: Option<usize>,
    pub folds: usize,
    pub loglik_reps: usize,
    pub strategy: Strategy,
    pub learner: Learner,
    pub threads: usize,
    pub n: usize,
    pub p: usize,
    /// Edge count for simulation; 2p when unset.
    pub edges: Option<usize>,
    pub block_min: usize,
    pub block_max: usize,
    /// Cluster count when blocks come from background features.
    pub clusters: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let d = DecorrelateConfig::default();
        RunConfig {
            seed: 0,
            data: None,
            specs: None,
            blocks: None,
            background: None,
            out: PathBuf::from("out"),
            alpha: None,
            m: 10,
            t_max: d.t_max,
            burn_in: d.burn_in,
            draws: d.draws,
            ridge: d.ridge,
            bootstrap: None,
            folds: 10,
            loglik_reps: 500,
            strategy: Strategy::Consensus,
            learner: Learner::Hybrid,
            threads: 1,
            n: 100,
            p: 100,
            edges: None,
            block_min: 10,
            block_max: 15,
            clusters: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "seed",
    "data",
    "specs",
    "blocks",
    "background",
    "out",
    "alpha",
    "m",
    "t_max",
    "burn_in",
    "draws",
    "ridge",
    "bootstrap",
    "folds",
    "loglik_reps",
    "strategy",
    "learner",
    "threads",
    "n",
    "p",
    "edges",
    "block_min",
    "block_max",
    "clusters",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

impl RunConfig {
    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse(key, v)?,
            "data" => self.data = Some(PathBuf::from(v)),
            "specs" => self.specs = Some(PathBuf::from(v)),
            "blocks" => self.blocks = Some(PathBuf::from(v)),
            "background" => self.background = Some(PathBuf::from(v)),
            "out" => self.out = PathBuf::from(v),
            "alpha" => self.alpha = Some(parse(key, v)?),
            "m" => self.m = parse(key, v)?,
            "t_max" => self.t_max = parse(key, v)?,
            "burn_in" => self.burn_in = parse(key, v)?,
            "draws" => self.draws = parse(key, v)?,
            "ridge" => self.ridge = parse(key, v)?,
            "bootstrap" => self.bootstrap = Some(parse(key, v)?),
            "folds" => self.folds = parse(key, v)?,
            "loglik_reps" => self.loglik_reps = parse(key, v)?,
            "strategy" => {
                self.strategy = Strategy::parse(v).ok_or_else(|| Error::Config(format!("unknown strategy `{v}`")))?
            }
            "learner" => self.learner = Learner::parse(v).ok_or_else(|| Error::Config(format!("unknown learner `{v}`")))?,
            "threads" => self.threads = parse(key, v)?,
            "n" => self.n = parse(key, v)?,
            "p" => self.p = parse(key, v)?,
            "edges" => self.edges = Some(parse(key, v)?),
            "block_min" => self.block_min = parse(key, v)?,
            "block_max" => self.block_max = parse(key, v)?,
            "clusters" => self.clusters = Some(parse(key, v)?),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Apply `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(k.trim(), v).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    /// Defaults, then the file (if any), then `overrides` in order.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(f) = file {
            cfg.apply_file(f)?;
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("m", self.m),
            ("t_max", self.t_max),
            ("draws", self.draws),
            ("folds", self.folds),
            ("loglik_reps", self.loglik_reps),
            ("threads", self.threads),
            ("n", self.n),
            ("p", self.p),
            ("block_min", self.block_min),
            ("block_max", self.block_max),
        ];
        for (k, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("`{k}` must be positive")));
            }
        }
        for (k, v) in [("bootstrap", self.bootstrap), ("clusters", self.clusters)] {
            if v == Some(0) {
                return Err(Error::Config(format!("`{k}` must be positive")));
            }
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Config(format!("alpha must lie in (0, 1), got {a}")));
            }
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::Config("ridge must be non-negative".into()));
        }
        if self.block_min > self.block_max {
            return Err(Error::Config("block_min exceeds block_max".into()));
        }
        Ok(())
    }

    pub fn learn_params(&self, p: usize) -> LearnParams {
        let mut lp = LearnParams::for_dimension(p);
        if let Some(a) = self.alpha {
            lp.alpha = a;
        }
        lp
    }

    pub fn pipeline_params(&self, p: usize) -> PipelineParams {
        PipelineParams {
            learner: self.learner,
            learn: self.learn_params(p),
            decorrelate: DecorrelateConfig { t_max: self.t_max, burn_in: self.burn_in, draws: self.draws, ridge: self.ridge },
            m: self.m,
        }
    }

    /// Canonical `key = value` rendering of every set key except `out` and
    /// `threads`, which never affect results.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let entries: Vec<(&str, Option<String>)> = vec![
            ("seed", Some(self.seed.to_string())),
            ("data", path(&self.data)),
            ("specs", path(&self.specs)),
            ("blocks", path(&self.blocks)),
            ("background", path(&self.background)),
            ("alpha", self.alpha.map(|a| a.to_string())),
            ("m", Some(self.m.to_string())),
            ("t_max", Some(self.t_max.to_string())),
            ("burn_in", Some(self.burn_in.to_string())),
            ("draws", Some(self.draws.to_string())),
            ("ridge", Some(self.ridge.to_string())),
            ("bootstrap", self.bootstrap.map(|b| b.to_string())),
            ("folds", Some(self.folds.to_string())),
            ("loglik_reps", Some(self.loglik_reps.to_string())),
            ("strategy", Some(self.strategy.name().to_string())),
            ("learner", Some(self.learner.name().to_string())),
            ("n", Some(self.n.to_string())),
            ("p", Some(self.p.to_string())),
            ("edges", self.edges.map(|e| e.to_string())),
            ("block_min", Some(self.block_min.to_string())),
            ("block_max", Some(self.block_max.to_string())),
            ("clusters", self.clusters.map(|c| c.to_string())),
        ];
        for (k, v) in entries {
            if let Some(v) = v {
                writeln!(s, "{k} = {v}").expect("string write");
            }
        }
        s
    }
}
