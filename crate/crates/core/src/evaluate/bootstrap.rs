use log::warn;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graphs::Cpdag;
use crate::model::MixedDataset;
use crate::rng::Streams;

/// Slack for comparing sums of confidences against the 0.5 cut and the ratio rule.
const CONF_SLACK: f64 = 1e-12;
const ORIENT_RATIO: f64 = 3.0;

/// Bootstrap frequency of each orientation of each pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeConfidence {
    p: usize,
    conf: Vec<f64>,
}

impl EdgeConfidence {
    pub fn zeros(p: usize) -> Self {
        EdgeConfidence { p, conf: vec![0.0; p * p] }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Conf(a → b).
    pub fn directed(&self, a: usize, b: usize) -> f64 {
        self.conf[a * self.p + b]
    }

    /// Conf(a − b) = Conf(a → b) + Conf(b → a).
    pub fn undirected(&self, a: usize, b: usize) -> f64 {
        self.directed(a, b) + self.directed(b, a)
    }

    pub fn set(&mut self, a: usize, b: usize, value: f64) -> Result<()> {
        if a >= self.p || b >= self.p || a == b || !(0.0..=1.0).contains(&value) {
            return Err(Error::Input(format!("invalid confidence {value} for ({a}, {b})")));
        }
        self.conf[a * self.p + b] = value;
        Ok(())
    }
}

/// 1 for a → b, 0.5 for a − b, 0 otherwise.
pub fn edge_indicator(g: &Cpdag, a: usize, b: usize) -> f64 {
    if g.is_directed(a, b) {
        1.0
    } else if g.is_undirected(a, b) {
        0.5
    } else {
        0.0
    }
}

/// Confidence of both orientations of every edge of `full`, averaged over replicates.
pub fn edge_confidence(full: &Cpdag, replicates: &[Cpdag]) -> Result<EdgeConfidence> {
    if replicates.is_empty() {
        return Err(Error::Config("no bootstrap replicates".into()));
    }
    let p = full.p();
    if replicates.iter().any(|g| g.p() != p) {
        return Err(Error::Input("replicate graphs disagree on node count".into()));
    }
    let b = replicates.len() as f64;
    let mut out = EdgeConfidence::zeros(p);
    for (u, v) in full.skeleton() {
        for (a, c) in [(u, v), (v, u)] {
            let sum: f64 = replicates.iter().map(|g| edge_indicator(g, a, c)).sum();
            out.conf[a * p + c] = sum / b;
        }
    }
    Ok(out)
}

/// Keep edges of `full` with Conf(a − b) ≥ 0.5; orient when one direction
/// has at least three times the support of the other.
pub fn final_graph(full: &Cpdag, conf: &EdgeConfidence) -> Result<Cpdag> {
    if conf.p() != full.p() {
        return Err(Error::Input("confidence table does not match the graph".into()));
    }
    let mut out = Cpdag::empty(full.p());
    for (a, b) in full.skeleton() {
        let (ab, ba) = (conf.directed(a, b), conf.directed(b, a));
        if ab + ba < 0.5 - CONF_SLACK {
            continue;
        }
        if ab >= ORIENT_RATIO * ba - CONF_SLACK && ab > 0.0 {
            out.set_directed(a, b);
        } else if ba >= ORIENT_RATIO * ab - CONF_SLACK && ba > 0.0 {
            out.set_directed(b, a);
        } else {
            out.set_undirected(a, b);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct BootstrapResult {
    pub confidence: EdgeConfidence,
    pub graph: Cpdag,
    /// Replicates that produced a graph.
    pub effective: usize,
    pub failures: usize,
}

/// ⌊n/2⌋ unit indices drawn with replacement, sorted.
pub fn resample_units<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n / 2).map(|_| rng.random_range(0..n)).collect();
    idx.sort_unstable();
    idx
}

/// Run `estimate` on `replicates` half-size resamples of `x` and score the
/// edges of `full`. Resamples keep each unit's block label; `estimate` may
/// re-derive blocks itself. Failed replicates are skipped.
pub fn bootstrap_confidence<F>(x: &MixedDataset, full: &Cpdag, replicates: usize, streams: &Streams, estimate: F) -> Result<BootstrapResult>
where
    F: Fn(&MixedDataset, &Streams) -> Result<Cpdag> + Sync,
{
    if replicates == 0 {
        return Err(Error::Config("bootstrap needs at least one replicate".into()));
    }
    if x.n() < 2 {
        return Err(Error::Input("bootstrap needs at least two units".into()));
    }
    let results: Vec<Result<Cpdag>> = (0..replicates)
        .into_par_iter()
        .map(|t| {
            let rows = resample_units(x.n(), &mut streams.stream("resample", &[t as u64]));
            estimate(&x.select_rows(&rows), &streams.child("replicate", &[t as u64]))
        })
        .collect();
    let mut graphs = Vec::with_capacity(replicates);
    let mut failures = 0;
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok(g) => graphs.push(g),
            Err(e) => {
                warn!("bootstrap replicate {t} failed: {e}");
                failures += 1;
            }
        }
    }
    if graphs.is_empty() {
        return Err(Error::Config(format!("all {replicates} bootstrap replicates failed")));
    }
    let confidence = edge_confidence(full, &graphs)?;
    let graph = final_graph(full, &confidence)?;
    Ok(BootstrapResult { confidence, graph, effective: graphs.len(), failures })
}
