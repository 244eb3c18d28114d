use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graphs::Cpdag;
use crate::model::BlockCovariance;

pub const HIST_BIN_WIDTH: f64 = 0.05;
const HIST_BINS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Arc-level F1 with every undirected edge counted as both orientations.
pub fn cpdag_f1(truth: &Cpdag, est: &Cpdag) -> Result<F1Score> {
    if truth.p() != est.p() {
        return Err(Error::Input(format!("graphs have {} and {} nodes", truth.p(), est.p())));
    }
    let t: HashSet<(usize, usize)> = truth.expanded_arcs().into_iter().collect();
    let e: HashSet<(usize, usize)> = est.expanded_arcs().into_iter().collect();
    let tp = t.intersection(&e).count();
    let fp = e.len() - tp;
    let fn_ = t.len() - tp;
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if tp == 0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(F1Score { precision, recall, f1, tp, fp, fn_ })
}

/// RMSE of estimated correlations over the truth's non-zero off-diagonal entries.
pub fn cov_rmse(est: &BlockCovariance, truth: &BlockCovariance) -> Result<f64> {
    if est.n() != truth.n() {
        return Err(Error::Input("covariances have different sizes".into()));
    }
    let mut slot = vec![(0usize, 0usize); est.n()];
    for (b, blk) in est.blocks().iter().enumerate() {
        for (r, &u) in blk.units.iter().enumerate() {
            slot[u] = (b, r);
        }
    }
    let (mut ss, mut count) = (0.0, 0usize);
    for blk in truth.blocks() {
        let m = blk.sigma.as_matrix();
        for r in 0..blk.units.len() {
            for c in (r + 1)..blk.units.len() {
                if m[(r, c)] == 0.0 {
                    continue;
                }
                let (bu, ru) = slot[blk.units[r]];
                let (bv, rv) = slot[blk.units[c]];
                if bu != bv {
                    return Err(Error::Input("block partitions differ".into()));
                }
                let d = est.blocks()[bu].sigma.as_matrix()[(ru, rv)] - m[(r, c)];
                ss += d * d;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::UndefinedMetric("truth has no non-zero off-diagonal entries".into()));
    }
    Ok((ss / count as f64).sqrt())
}

/// RMSE over every threshold of every discrete column.
pub fn threshold_rmse(est: &[Option<Vec<f64>>], truth: &[Option<Vec<f64>>]) -> Result<f64> {
    if est.len() != truth.len() {
        return Err(Error::Input(format!("{} vs {} columns", est.len(), truth.len())));
    }
    let (mut ss, mut count) = (0.0, 0usize);
    for (j, (e, t)) in est.iter().zip(truth).enumerate() {
        match (e, t) {
            (None, None) => {}
            (Some(e), Some(t)) if e.len() == t.len() => {
                ss += e.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                count += e.len();
            }
            _ => return Err(Error::Input(format!("threshold shapes differ in column {j}"))),
        }
    }
    if count == 0 {
        return Err(Error::UndefinedMetric("no thresholds to compare".into()));
    }
    Ok((ss / count as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSummary {
    /// One value per within-block unit pair.
    pub values: Vec<f64>,
    pub mean: f64,
    pub mean_abs: f64,
    /// (left edge, count) for bins of width 0.05 covering [−1, 1].
    pub histogram: Vec<(f64, usize)>,
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Correlation between the row vectors of every pair of units sharing a block.
pub fn correlation_summary(columns: &DMatrix<f64>, groups: &[Vec<usize>]) -> Result<CorrelationSummary> {
    if columns.ncols() < 2 {
        return Err(Error::Input("need at least two continuous columns".into()));
    }
    let rows: Vec<Vec<f64>> = (0..columns.nrows()).map(|i| columns.row(i).iter().copied().collect()).collect();
    let mut values = Vec::new();
    for g in groups {
        for (k, &a) in g.iter().enumerate() {
            for &b in &g[k + 1..] {
                values.push(pearson(&rows[a], &rows[b]));
            }
        }
    }
    if values.is_empty() {
        return Err(Error::UndefinedMetric("every block has a single unit".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mean_abs = values.iter().map(|v| v.abs()).sum::<f64>() / n;
    let mut counts = [0usize; HIST_BINS];
    for v in &values {
        let bin = ((v + 1.0) / HIST_BIN_WIDTH).floor() as isize;
        counts[bin.clamp(0, HIST_BINS as isize - 1) as usize] += 1;
    }
    let histogram = counts.iter().enumerate().map(|(k, &c)| (-1.0 + k as f64 * HIST_BIN_WIDTH, c)).collect();
    Ok(CorrelationSummary { values, mean, mean_abs, histogram })
}
