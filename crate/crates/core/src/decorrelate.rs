//! EM-based latent recovery and de-correlation of dependent units.
//!
//! Discrete latent errors are imputed by Gibbs sampling from the truncated
//! block normal, the latent matrix is rebuilt and every column is mapped
//! through Lᵀ, where L is the Cholesky factor of the block precision. The
//! M-step refits discrete-node coefficients by ridge regression on the
//! transformed parent columns.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mathcore::linalg::{least_squares, ridge, spd_inverse, SymMatrix};
use crate::mathcore::normal::Interval;
use crate::mathcore::truncnorm::{truncnorm_mean, truncnorm_sample};
use crate::model::{level_interval, BlockCovariance, MixedDataset};
use crate::preestimate::PreEstimate;
use crate::rng::Streams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecorrelateConfig {
    /// Outer EM iterations.
    pub t_max: usize,
    pub burn_in: usize,
    /// Retained Gibbs draws per expectation.
    pub draws: usize,
    /// Ridge multiplier on each design column's squared norm.
    pub ridge: f64,
}

impl Default for DecorrelateConfig {
    fn default() -> Self {
        DecorrelateConfig { t_max: 15, burn_in: 100, draws: 200, ridge: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub t: usize,
    /// n × |discrete|: imputed errors, columns in discrete-column order.
    pub eps_hat: DMatrix<f64>,
    /// n × p latent matrix (continuous columns copied from the data).
    pub z_hat: DMatrix<f64>,
    /// n × p de-correlated matrix.
    pub z_tilde: DMatrix<f64>,
    /// p × p coefficients after this iteration's M-step.
    pub beta: DMatrix<f64>,
    /// Coordinates pinned to a bound because their conditional had no mass.
    pub pinned: usize,
}

/// Precision-based conditionals of one covariance block.
#[derive(Debug, Clone)]
pub struct GibbsBlock {
    precision: DMatrix<f64>,
}

impl GibbsBlock {
    pub fn new(sigma: &SymMatrix) -> Result<Self> {
        Ok(GibbsBlock { precision: spd_inverse(sigma)? })
    }

    pub fn dim(&self) -> usize {
        self.precision.nrows()
    }
}

#[derive(Debug, Clone)]
pub struct GibbsRun {
    /// draws × block size.
    pub draws: DMatrix<f64>,
    pub last: Vec<f64>,
    pub pinned: usize,
}

impl GibbsRun {
    pub fn mean(&self) -> Vec<f64> {
        let n = self.draws.nrows() as f64;
        (0..self.draws.ncols()).map(|c| self.draws.column(c).sum() / n).collect()
    }
}

fn pin(iv: Interval, mean: f64) -> f64 {
    let inside_lower = if iv.lower.is_finite() { iv.lower + f64::EPSILON * iv.lower.abs().max(1.0) } else { f64::NEG_INFINITY };
    if iv.upper.is_finite() && (mean >= iv.upper || !iv.lower.is_finite()) {
        iv.upper
    } else if inside_lower.is_finite() && inside_lower <= iv.upper {
        inside_lower
    } else {
        iv.upper
    }
}

/// Systematic-scan Gibbs sampler for N(0, Σ) truncated to a box.
pub fn gibbs_truncated_block<R: Rng + ?Sized>(
    block: &GibbsBlock,
    intervals: &[Interval],
    start: Option<&[f64]>,
    burn_in: usize,
    draws: usize,
    rng: &mut R,
) -> Result<GibbsRun> {
    let m = block.dim();
    if intervals.len() != m {
        return Err(Error::Input(format!("{} intervals for a block of size {m}", intervals.len())));
    }
    let mut x: Vec<f64> = match start {
        Some(s) if s.len() == m => s.to_vec(),
        _ => intervals
            .iter()
            .map(|&iv| truncnorm_mean(iv, 0.0, 1.0).unwrap_or_else(|_| pin(iv, 0.0)))
            .collect(),
    };
    let q = &block.precision;
    let sd: Vec<f64> = (0..m).map(|i| 1.0 / q[(i, i)].sqrt()).collect();
    let mut out = DMatrix::zeros(draws, m);
    let mut pinned = 0;
    for sweep in 0..(burn_in + draws) {
        for i in 0..m {
            let mut s = 0.0;
            for k in 0..m {
                if k != i {
                    s += q[(i, k)] * x[k];
                }
            }
            let mean = -s / q[(i, i)];
            x[i] = match truncnorm_sample(intervals[i], mean, sd[i], rng) {
                Ok(v) => v,
                Err(Error::DegenerateInterval { .. }) => {
                    pinned += 1;
                    pin(intervals[i], mean)
                }
                Err(e) => return Err(e),
            };
        }
        if sweep >= burn_in {
            for i in 0..m {
                out[(sweep - burn_in, i)] = x[i];
            }
        }
    }
    Ok(GibbsRun { draws: out, last: x, pinned })
}

/// Rows of each block multiplied by that block's Lᵀ.
fn apply_lt(factors: &[DMatrix<f64>], cov: &BlockCovariance, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (b, l) in cov.blocks().iter().zip(factors) {
        let rows = DMatrix::from_fn(b.units.len(), m.ncols(), |r, c| m[(b.units[r], c)]);
        let tr = l.transpose() * rows;
        for (r, &u) in b.units.iter().enumerate() {
            out.set_row(u, &tr.row(r));
        }
    }
    out
}

/// X̃ = LᵀX blockwise, L the Cholesky factor of Σ⁻¹.
pub fn decorrelate_continuous(columns: &DMatrix<f64>, cov: &BlockCovariance) -> Result<DMatrix<f64>> {
    if columns.nrows() != cov.n() {
        return Err(Error::Input("row count differs from covariance size".into()));
    }
    Ok(apply_lt(&cov.precision_factors()?, cov, columns))
}

fn unit_intervals(x: &MixedDataset, t: &[f64], j: usize, eta: &DVector<f64>, units: &[usize]) -> Vec<Interval> {
    units.iter().map(|&i| level_interval(t, x.level(i, j)).shifted(eta[i])).collect()
}

fn thresholds_of(pre: &PreEstimate, j: usize) -> Result<&[f64]> {
    pre.thresholds[j]
        .as_deref()
        .ok_or_else(|| Error::Input(format!("no thresholds for discrete column {j}")))
}

/// Monte Carlo estimate of E[ε_j | X, β_j] for discrete node `j`.
pub fn impute_errors(
    x: &MixedDataset,
    pre: &PreEstimate,
    cov: &BlockCovariance,
    beta: &DMatrix<f64>,
    j: usize,
    streams: &Streams,
    cfg: &DecorrelateConfig,
) -> Result<DVector<f64>> {
    let t = thresholds_of(pre, j)?;
    let eta = x.values() * beta.column(j);
    let mut out = DVector::zeros(x.n());
    for (b, blk) in cov.blocks().iter().enumerate() {
        let gb = GibbsBlock::new(&blk.sigma)?;
        let ivs = unit_intervals(x, t, j, &eta, &blk.units);
        let mut rng = streams.stream("impute", &[b as u64, j as u64]);
        let run = gibbs_truncated_block(&gb, &ivs, None, cfg.burn_in, cfg.draws, &mut rng)?;
        for (k, &u) in blk.units.iter().enumerate() {
            out[u] = run.mean()[k];
        }
    }
    Ok(out)
}

fn check_inputs(x: &MixedDataset, pre: &PreEstimate, cov: &BlockCovariance, cfg: &DecorrelateConfig) -> Result<()> {
    if pre.p() != x.p() || pre.beta.nrows() != x.p() || cov.n() != x.n() {
        return Err(Error::Config(format!(
            "inconsistent inputs: data {}x{}, pre-estimate p = {}, covariance n = {}",
            x.n(),
            x.p(),
            pre.p(),
            cov.n()
        )));
    }
    if cfg.t_max == 0 || cfg.draws == 0 {
        return Err(Error::Config("t_max and draws must be positive".into()));
    }
    if !(cfg.ridge >= 0.0) {
        return Err(Error::Config("ridge must be non-negative".into()));
    }
    Ok(())
}

/// Run the de-correlation EM and return every iteration's state.
pub fn algorithm2(
    x: &MixedDataset,
    pre: &PreEstimate,
    cov: &BlockCovariance,
    cfg: &DecorrelateConfig,
    streams: &Streams,
) -> Result<Vec<LatentState>> {
    check_inputs(x, pre, cov, cfg)?;
    let factors = cov.precision_factors()?;
    let x_tilde = apply_lt(&factors, cov, x.values());
    let disc = x.discrete_columns();
    if disc.is_empty() {
        return Ok(vec![LatentState {
            t: 0,
            eps_hat: DMatrix::zeros(x.n(), 0),
            z_hat: x.values().clone(),
            z_tilde: x_tilde,
            beta: pre.beta.clone(),
            pinned: 0,
        }]);
    }
    for &j in &disc {
        thresholds_of(pre, j)?;
    }
    let gibbs: Vec<GibbsBlock> = cov.blocks().iter().map(|b| GibbsBlock::new(&b.sigma)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..disc.len()).flat_map(|d| (0..gibbs.len()).map(move |b| (d, b))).collect();
    let mut chains: Vec<Option<Vec<f64>>> = vec![None; jobs.len()];
    let mut beta = pre.beta.clone();
    let mut states = Vec::with_capacity(cfg.t_max);
    for t in 1..=cfg.t_max {
        let etas: Vec<DVector<f64>> = disc.iter().map(|&j| x.values() * beta.column(j)).collect();
        let runs: Vec<Result<GibbsRun>> = jobs
            .par_iter()
            .zip(chains.par_iter())
            .map(|(&(d, b), chain)| {
                let j = disc[d];
                let tj = thresholds_of(pre, j)?;
                let units = &cov.blocks()[b].units;
                let ivs = unit_intervals(x, tj, j, &etas[d], units);
                let mut rng = streams.stream("gibbs", &[b as u64, j as u64, t as u64]);
                gibbs_truncated_block(&gibbs[b], &ivs, chain.as_deref(), cfg.burn_in, cfg.draws, &mut rng)
            })
            .collect();
        let mut eps_hat = DMatrix::zeros(x.n(), disc.len());
        let mut pinned = 0;
        for (k, run) in runs.into_iter().enumerate() {
            let run = run?;
            let (d, b) = jobs[k];
            for (r, &u) in cov.blocks()[b].units.iter().enumerate() {
                eps_hat[(u, d)] = run.mean()[r];
            }
            pinned += run.pinned;
            chains[k] = Some(run.last);
        }
        if pinned > 0 {
            warn!("iteration {t}: {pinned} Gibbs coordinates pinned to interval bounds");
        }
        let mut z_hat = x.values().clone();
        for (d, &j) in disc.iter().enumerate() {
            for i in 0..x.n() {
                z_hat[(i, j)] = etas[d][i] + eps_hat[(i, d)];
            }
        }
        let z_tilde = apply_lt(&factors, cov, &z_hat);
        let new_cols: Vec<DVector<f64>> = disc
            .par_iter()
            .map(|&j| {
                let pa = &pre.parents[j];
                let design = DMatrix::from_fn(x.n(), pa.len(), |i, k| x_tilde[(i, pa[k])]);
                let y = z_tilde.column(j).into_owned();
                let pen: Vec<f64> = (0..pa.len()).map(|k| cfg.ridge * design.column(k).norm_squared()).collect();
                let coef = ridge(&design, &y, &pen).unwrap_or_else(|| least_squares(&design, &y).0);
                let mut col = DVector::zeros(x.p());
                for (k, &pk) in pa.iter().enumerate() {
                    col[pk] = coef[k];
                }
                col
            })
            .collect();
        for (d, &j) in disc.iter().enumerate() {
            beta.set_column(j, &new_cols[d]);
        }
        states.push(LatentState { t, eps_hat, z_hat, z_tilde, beta: beta.clone(), pinned });
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::truncnorm::truncnorm_cdf;
    use crate::model::{CovBlock, VariableSpec};
    use crate::simulate::{covariance_factors, draw_block_noise, simulate, BlockPattern, SimulationSettings};
    use crate::testutil::ks_statistic;
    use rand_distr::StandardNormal;

    fn pos() -> Interval {
        Interval { lower: 0.0, upper: f64::INFINITY }
    }

    #[test]
    fn singleton_block_matches_univariate_truncation() {
        let gb = GibbsBlock::new(&SymMatrix::identity(1)).unwrap();
        let iv = Interval { lower: -0.4, upper: 1.3 };
        let mut rng = Streams::new(1).rng();
        let run = gibbs_truncated_block(&gb, &[iv], None, 10, 20_000, &mut rng).unwrap();
        let xs: Vec<f64> = run.draws.column(0).iter().copied().collect();
        let d = ks_statistic(xs, |x| truncnorm_cdf(x, iv, 0.0, 1.0));
        assert!(d < 1.949 / (20_000f64).sqrt(), "ks {d}");
    }

    fn quadrant_oracle(rho: f64, draws: usize, seed: u64) -> (f64, f64) {
        // Rejection sampling from the bivariate normal restricted to the positive quadrant.
        let mut rng = Streams::new(seed).rng();
        let mut acc = Vec::with_capacity(draws);
        while acc.len() < draws {
            let u: f64 = rng.sample(StandardNormal);
            let v: f64 = rng.sample(StandardNormal);
            let w = rho * u + (1.0 - rho * rho).sqrt() * v;
            if u > 0.0 && w > 0.0 {
                acc.push(u);
            }
        }
        let mean = acc.iter().sum::<f64>() / draws as f64;
        let var = acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        (mean, var)
    }

    #[test]
    fn correlated_quadrant_mean_matches_rejection_sampler() {
        let sigma = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0])).unwrap();
        let gb = GibbsBlock::new(&sigma).unwrap();
        let mut rng = Streams::new(2).rng();
        let draws = 40_000;
        let run = gibbs_truncated_block(&gb, &[pos(), pos()], None, 100, draws, &mut rng).unwrap();
        let (want, var) = quadrant_oracle(0.6, 200_000, 3);
        let got = run.mean()[0];
        // Gibbs draws are autocorrelated; inflate the standard error accordingly.
        let se = (var / draws as f64).sqrt() * 3.0 + (var / 200_000.0).sqrt();
        assert!((got - want).abs() < 3.0 * se, "{got} vs {want}");
        assert!(run.draws.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn untruncated_sampler_reproduces_covariance() {
        let sigma = BlockPattern::Equal(0.5).matrix(4);
        let gb = GibbsBlock::new(&sigma).unwrap();
        let mut rng = Streams::new(4).rng();
        let run = gibbs_truncated_block(&gb, &[Interval::REAL_LINE; 4], None, 100, 10_000, &mut rng).unwrap();
        let d = &run.draws;
        let emp = d.transpose() * d / d.nrows() as f64;
        assert!((emp - sigma.as_matrix()).abs().max() < 0.05);
    }

    fn binary_dataset(levels: &[usize], blocks: Vec<usize>) -> MixedDataset {
        let n = levels.len();
        let v = DMatrix::from_fn(n, 1, |i, _| levels[i] as f64);
        MixedDataset::new(v, vec![VariableSpec::discrete("d", 2)], (0..n).map(|i| format!("u{i}")).collect(), blocks).unwrap()
    }

    fn binary_pre() -> PreEstimate {
        PreEstimate { thresholds: vec![Some(vec![0.0])], beta: DMatrix::zeros(1, 1), parents: vec![vec![]], trace: vec![], loglik_trace: vec![] }
    }

    #[test]
    fn identity_covariance_imputation_matches_truncated_means() {
        let levels = [0, 1, 1, 0, 1];
        let x = binary_dataset(&levels, vec![0; 5]);
        let cov = BlockCovariance::identity(&[(0..5).collect()]);
        let cfg = DecorrelateConfig { draws: 4000, ..Default::default() };
        let e = impute_errors(&x, &binary_pre(), &cov, &DMatrix::zeros(1, 1), 0, &Streams::new(5), &cfg).unwrap();
        let m = (2.0 / std::f64::consts::PI).sqrt();
        let sd = (1.0 - 2.0 / std::f64::consts::PI).sqrt();
        for (i, &l) in levels.iter().enumerate() {
            let want = if l == 1 { m } else { -m };
            assert!((e[i] - want).abs() < 3.0 * sd / (4000f64).sqrt(), "{} vs {want}", e[i]);
        }
    }

    #[test]
    fn top_level_errors_are_positive() {
        let x = binary_dataset(&[1, 1, 1], vec![0; 3]);
        let mut pre = binary_pre();
        pre.thresholds[0] = Some(vec![0.5]);
        let cov = BlockCovariance::identity(&[(0..3).collect()]);
        let e = impute_errors(&x, &pre, &cov, &DMatrix::zeros(1, 1), 0, &Streams::new(6), &DecorrelateConfig::default()).unwrap();
        assert!(e.iter().all(|&v| v > 0.5));
    }

    #[test]
    fn fitted_value_moves_the_error_interval() {
        // z = 2 + ε and z ≤ 0 observed, so ε ≤ −2.
        let v = DMatrix::from_row_slice(1, 2, &[2.0, 0.0]);
        let specs = vec![VariableSpec::continuous("c"), VariableSpec::discrete("d", 2)];
        let x = MixedDataset::new(v, specs, vec!["u0".into()], vec![0]).unwrap();
        let mut beta = DMatrix::zeros(2, 2);
        beta[(0, 1)] = 1.0;
        let pre = PreEstimate {
            thresholds: vec![None, Some(vec![0.0])],
            beta: beta.clone(),
            parents: vec![vec![], vec![0]],
            trace: vec![],
            loglik_trace: vec![],
        };
        let cov = BlockCovariance::identity(&[vec![0]]);
        let e = impute_errors(&x, &pre, &cov, &beta, 1, &Streams::new(6), &DecorrelateConfig::default()).unwrap();
        let want = truncnorm_mean(Interval { lower: f64::NEG_INFINITY, upper: -2.0 }, 0.0, 1.0).unwrap();
        assert!(e[0] <= -2.0);
        assert!((e[0] - want).abs() < 0.05, "{} vs {want}", e[0]);
    }

    #[test]
    fn correlated_pair_imputation_matches_rejection_sampler() {
        let x = binary_dataset(&[1, 1], vec![0, 0]);
        let sigma = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])).unwrap();
        let cov = BlockCovariance::new(2, vec![CovBlock { units: vec![0, 1], sigma }]).unwrap();
        let cfg = DecorrelateConfig { draws: 20_000, ..Default::default() };
        let e = impute_errors(&x, &binary_pre(), &cov, &DMatrix::zeros(1, 1), 0, &Streams::new(7), &cfg).unwrap();
        let (want, var) = quadrant_oracle(0.5, 200_000, 8);
        let se = (var / 20_000.0).sqrt() * 3.0;
        assert!((e[0] - want).abs() < 3.0 * se && (e[1] - want).abs() < 3.0 * se);
    }

    #[test]
    fn lt_transform_whitens_block_noise() {
        let sigma = BlockPattern::Equal(0.6).matrix(12);
        let cov = BlockCovariance::new(12, vec![CovBlock { units: (0..12).collect(), sigma }]).unwrap();
        let f = covariance_factors(&cov).unwrap();
        let mut rng = Streams::new(9).rng();
        let reps = 10_000;
        let noise = DMatrix::from_fn(12, reps, |_, _| 0.0);
        let mut noise = noise;
        for r in 0..reps {
            noise.set_column(r, &draw_block_noise(&cov, &f, &mut rng));
        }
        let w = decorrelate_continuous(&noise, &cov).unwrap();
        let emp = &w * w.transpose() / reps as f64;
        assert!((emp - DMatrix::<f64>::identity(12, 12)).abs().max() <= 0.1);
    }

    #[test]
    fn analytic_two_unit_whitening() {
        let rho = 0.4;
        let sigma = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0])).unwrap();
        let cov = BlockCovariance::new(2, vec![CovBlock { units: vec![0, 1], sigma: sigma.clone() }]).unwrap();
        let l = &cov.precision_factors().unwrap()[0];
        let c = l.transpose() * sigma.as_matrix() * l;
        assert!((c - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-12);
        let ones = DMatrix::from_element(3, 1, 1.0);
        let id = BlockCovariance::identity(&[vec![0, 1, 2]]);
        assert_eq!(decorrelate_continuous(&ones, &id).unwrap(), ones);
    }

    #[test]
    fn continuous_only_gives_single_state() {
        let inst = simulate(&SimulationSettings { discretize_prob: 0.0, ..SimulationSettings::standard(30, 5) }, 3).unwrap();
        let pre = crate::preestimate::algorithm1(&inst.data, &inst.model.dag.parent_sets()).unwrap();
        let states = algorithm2(&inst.data, &pre, &inst.cov, &DecorrelateConfig::default(), &Streams::new(1)).unwrap();
        assert_eq!(states.len(), 1);
        assert_eq!(states[0].z_tilde, decorrelate_continuous(inst.data.values(), &inst.cov).unwrap());
    }

    #[test]
    fn states_respect_intervals_and_are_deterministic() {
        let inst = simulate(&SimulationSettings::standard(40, 10), 4).unwrap();
        let pre = crate::preestimate::algorithm1(&inst.data, &inst.model.dag.parent_sets()).unwrap();
        let cfg = DecorrelateConfig { t_max: 3, burn_in: 20, draws: 30, ridge: 0.1 };
        let a = algorithm2(&inst.data, &pre, &inst.cov, &cfg, &Streams::new(2)).unwrap();
        let b = algorithm2(&inst.data, &pre, &inst.cov, &cfg, &Streams::new(2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        let disc = inst.data.discrete_columns();
        let mut prev_beta = pre.beta.clone();
        for s in &a {
            assert_eq!(s.pinned, 0);
            for (d, &j) in disc.iter().enumerate() {
                let t = pre.thresholds[j].as_ref().unwrap();
                let eta = inst.data.values() * prev_beta.column(j);
                for i in 0..inst.data.n() {
                    let iv = level_interval(t, inst.data.level(i, j)).shifted(eta[i]);
                    // The average of draws lies in the closure of the interval.
                    assert!(s.eps_hat[(i, d)] >= iv.lower && s.eps_hat[(i, d)] <= iv.upper);
                }
            }
            for j in inst.data.continuous_columns() {
                for i in 0..inst.data.n() {
                    assert_eq!(s.z_hat[(i, j)], inst.data.values()[(i, j)]);
                }
            }
            prev_beta = s.beta.clone();
        }
    }

    #[test]
    fn identity_covariance_leaves_latent_unchanged() {
        let inst = simulate(&SimulationSettings::standard(30, 6), 5).unwrap();
        let pre = crate::preestimate::algorithm1(&inst.data, &inst.model.dag.parent_sets()).unwrap();
        let id = BlockCovariance::identity(&inst.data.block_groups());
        let cfg = DecorrelateConfig { t_max: 2, burn_in: 10, draws: 10, ridge: 0.1 };
        for s in algorithm2(&inst.data, &pre, &id, &cfg, &Streams::new(3)).unwrap() {
            assert_eq!(s.z_tilde, s.z_hat);
        }
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let inst = simulate(&SimulationSettings::standard(30, 6), 6).unwrap();
        let pre = crate::preestimate::algorithm1(&inst.data, &inst.model.dag.parent_sets()).unwrap();
        let wrong = BlockCovariance::identity(&[(0..10).collect()]);
        assert!(matches!(
            algorithm2(&inst.data, &pre, &wrong, &DecorrelateConfig::default(), &Streams::new(1)),
            Err(Error::Config(_))
        ));
    }
}
