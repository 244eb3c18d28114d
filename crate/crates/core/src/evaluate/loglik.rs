use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::mathcore::linalg::{cholesky_lower, log_det_from_cholesky, solve_lower_in_place};
use crate::mathcore::normal::{normal_interval_mass, MASS_FLOOR};
use crate::mathcore::{truncnorm_sample, Interval};
use crate::model::{level_interval, BlockCovariance, DagModel, MixedDataset};
use crate::rng::Streams;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoglikConfig {
    /// Monte Carlo replications per discrete block rectangle.
    pub replications: usize,
    pub seed: u64,
}

impl Default for LoglikConfig {
    fn default() -> Self {
        LoglikConfig { replications: 500, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoglikEstimate {
    /// Log-likelihood divided by the number of cells.
    pub value: f64,
    pub std_error: f64,
    pub cells: usize,
}

/// Sequential-conditioning (GHK) estimate of log P(ε ∈ rectangle) for
/// ε ~ N(0, LLᵀ). Returns (log estimate, standard error of the log).
pub fn ghk_log_prob<R: Rng + ?Sized>(l: &DMatrix<f64>, rect: &[Interval], reps: usize, rng: &mut R) -> Result<(f64, f64)> {
    let m = rect.len();
    if l.nrows() != m || reps == 0 {
        return Err(Error::Input("rectangle does not match the factor".into()));
    }
    let draw_count = if m == 1 { 1 } else { reps };
    let mut log_w = Vec::with_capacity(draw_count);
    let mut e = vec![0.0; m];
    for _ in 0..draw_count {
        let mut lw = 0.0;
        for i in 0..m {
            let mu: f64 = (0..i).map(|k| l[(i, k)] * e[k]).sum();
            let d = l[(i, i)];
            let iv = Interval { lower: (rect[i].lower - mu) / d, upper: (rect[i].upper - mu) / d };
            let mass = normal_interval_mass(iv.lower, iv.upper);
            lw += mass.max(MASS_FLOOR).ln();
            if i + 1 < m {
                e[i] = if mass < MASS_FLOOR {
                    0.0f64.clamp(iv.lower, iv.upper)
                } else {
                    truncnorm_sample(iv, 0.0, 1.0, rng)?
                };
            }
        }
        log_w.push(lw);
    }
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = log_w.iter().map(|v| (v - top).exp()).collect();
    let r = draw_count as f64;
    let mean = scaled.iter().sum::<f64>() / r;
    let log_p = top + mean.ln();
    if draw_count == 1 {
        return Ok((log_p, 0.0));
    }
    let var = scaled.iter().map(|w| (w / mean - 1.0).powi(2)).sum::<f64>() / (r - 1.0);
    Ok((log_p, (var / r).sqrt()))
}

/// Held-out log-likelihood per cell.
///
/// Continuous columns contribute the exact blockwise Gaussian density of
/// their residuals; discrete columns contribute a GHK estimate of each
/// block's rectangle probability.
pub fn test_loglik(x: &MixedDataset, model: &DagModel, cov: &BlockCovariance, cfg: &LoglikConfig) -> Result<LoglikEstimate> {
    let (n, p) = (x.n(), x.p());
    if model.p() != p || cov.n() != n {
        return Err(Error::Input("model or covariance does not match the test data".into()));
    }
    for (j, (ms, xs)) in model.specs.iter().zip(x.specs()).enumerate() {
        if ms.is_discrete() != xs.is_discrete() || (ms.is_discrete() && ms.levels() != xs.levels()) {
            return Err(Error::Input(format!("column {j} kind differs between model and data")));
        }
        if ms.is_discrete() && ms.thresholds.is_none() {
            return Err(Error::Input(format!("model has no thresholds for column {j}")));
        }
    }
    if cfg.replications == 0 {
        return Err(Error::Config("replications must be positive".into()));
    }
    let factors: Vec<DMatrix<f64>> = cov.blocks().iter().map(|b| cholesky_lower(&b.sigma)).collect::<Result<_>>()?;
    let streams = Streams::new(cfg.seed);
    let (mut total, mut var) = (0.0, 0.0);
    for j in 0..p {
        let eta: DVector<f64> = x.values() * model.weights.column(j);
        let spec = &model.specs[j];
        for (b, (blk, l)) in cov.blocks().iter().zip(&factors).enumerate() {
            match &spec.thresholds {
                None => {
                    let mut r = DMatrix::from_fn(blk.units.len(), 1, |k, _| x.values()[(blk.units[k], j)] - eta[blk.units[k]]);
                    solve_lower_in_place(l, &mut r);
                    let m = blk.units.len() as f64;
                    total += -0.5 * (m * LN_2PI + log_det_from_cholesky(l) + r.norm_squared());
                }
                Some(t) => {
                    let rect: Vec<Interval> =
                        blk.units.iter().map(|&u| level_interval(t, x.level(u, j)).shifted(eta[u])).collect();
                    let mut rng = streams.stream("ghk", &[b as u64, j as u64]);
                    let (lp, se) = ghk_log_prob(l, &rect, cfg.replications, &mut rng)?;
                    total += lp;
                    var += se * se;
                }
            }
        }
    }
    let cells = n * p;
    Ok(LoglikEstimate { value: total / cells as f64, std_error: var.sqrt() / cells as f64, cells })
}
