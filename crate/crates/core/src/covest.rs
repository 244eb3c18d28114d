//! Within-block unit correlations by pairwise maximum likelihood.

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mathcore::bivariate::rect_unchecked;
use crate::mathcore::linalg::{min_eigenvalue, sym_eigen, SymMatrix};
use crate::mathcore::normal::{Interval, MASS_FLOOR};
use crate::model::{level_interval, BlockCovariance, CovBlock, MixedDataset};
use crate::preestimate::PreEstimate;

pub const RHO_CAP: f64 = 0.999;
const COARSE_GRID: usize = 21;
const GOLDEN_TOL: f64 = 1e-6;
const MIN_EIG: f64 = 1e-8;
const MAX_RESCALES: usize = 20;
const RESCALE: f64 = 0.9;

/// Everything the pairwise likelihood of one unit pair needs.
#[derive(Debug, Clone, Default)]
pub struct PairLikelihoodInput {
    /// Discrete variables: latent rectangles for units a and b.
    pub rects: Vec<(Interval, Interval)>,
    /// Continuous variables: residuals for units a and b.
    pub residuals: Vec<(f64, f64)>,
    saa: f64,
    sab: f64,
    sbb: f64,
}

impl PairLikelihoodInput {
    pub fn new(rects: Vec<(Interval, Interval)>, residuals: Vec<(f64, f64)>) -> Self {
        let (mut saa, mut sab, mut sbb) = (0.0, 0.0, 0.0);
        for &(ra, rb) in &residuals {
            saa += ra * ra;
            sab += ra * rb;
            sbb += rb * rb;
        }
        PairLikelihoodInput { rects, residuals, saa, sab, sbb }
    }

    /// Same pair with units a and b exchanged.
    pub fn swapped(&self) -> Self {
        PairLikelihoodInput::new(
            self.rects.iter().map(|&(a, b)| (b, a)).collect(),
            self.residuals.iter().map(|&(a, b)| (b, a)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.rects.len() + self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Log pairwise likelihood: rectangle probabilities for discrete variables
/// and bivariate normal densities of residuals for continuous ones.
pub fn pair_loglik(input: &PairLikelihoodInput, rho: f64) -> f64 {
    let mut total = 0.0;
    for &(a, b) in &input.rects {
        let mass = rect_unchecked(a, b, rho);
        if !(mass > MASS_FLOOR) {
            return f64::NEG_INFINITY;
        }
        total += mass.ln();
    }
    let m = input.residuals.len() as f64;
    if m > 0.0 {
        let one_minus = 1.0 - rho * rho;
        total += -m * (2.0 * std::f64::consts::PI).ln()
            - 0.5 * m * one_minus.ln()
            - (input.saa - 2.0 * rho * input.sab + input.sbb) / (2.0 * one_minus);
    }
    total
}

/// Maximize the pairwise likelihood over ρ ∈ [−0.999, 0.999]: coarse grid
/// to bracket, golden-section inside the bracket.
pub fn estimate_rho(input: &PairLikelihoodInput) -> Result<f64> {
    let grid: Vec<f64> = (0..COARSE_GRID)
        .map(|k| -RHO_CAP + 2.0 * RHO_CAP * k as f64 / (COARSE_GRID - 1) as f64)
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&r| pair_loglik(input, r)).collect();
    let mut best = 0;
    for k in 1..COARSE_GRID {
        if vals[k] > vals[best] {
            best = k;
        }
    }
    if vals[best] == f64::NEG_INFINITY {
        return Err(Error::EstimationFailed { a: 0, b: 0 });
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(COARSE_GRID - 1)];
    let (r, v) = golden_max(|r| pair_loglik(input, r), lo, hi);
    Ok(if v >= vals[best] { r } else { grid[best] })
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > GOLDEN_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let candidates = [(a, f(a)), (b, f(b)), (c, fc), (d, fd)];
    candidates.into_iter().fold((a, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc })
}

/// Clamp negative eigenvalues, restore the unit diagonal, then shrink
/// off-diagonals by 0.9 until the smallest eigenvalue reaches 1e-8.
pub fn psd_repair(m: &SymMatrix) -> Result<SymMatrix> {
    let k = m.dim();
    let mut cur = m.as_matrix().clone();
    for i in 0..k {
        cur[(i, i)] = 1.0;
    }
    let as_sym = |mat: &DMatrix<f64>| SymMatrix::new(crate::model::symmetrize(mat.clone()));
    if min_eigenvalue(&as_sym(&cur)?) >= MIN_EIG {
        return as_sym(&cur);
    }
    let (vals, vecs) = sym_eigen(&as_sym(&cur)?);
    let clamped = DMatrix::from_diagonal(&vals.map(|v| v.max(0.0)));
    cur = &vecs * clamped * vecs.transpose();
    for i in 0..k {
        cur[(i, i)] = 1.0;
    }
    let mut rescales = 0;
    loop {
        let min = min_eigenvalue(&as_sym(&cur)?);
        if min >= MIN_EIG {
            return as_sym(&cur);
        }
        if rescales == MAX_RESCALES {
            return Err(Error::RepairFailed { min_eig: min });
        }
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    cur[(i, j)] *= RESCALE;
                }
            }
        }
        rescales += 1;
    }
}

/// Per-unit ingredients shared by all pairs.
struct UnitTerms {
    /// n × |discrete|: latent interval of each unit.
    intervals: Vec<Vec<Interval>>,
    /// n × |continuous|: residuals.
    residuals: Vec<Vec<f64>>,
}

fn unit_terms(x: &MixedDataset, pre: &PreEstimate) -> Result<UnitTerms> {
    if pre.p() != x.p() {
        return Err(Error::Input("pre-estimate and data disagree on p".into()));
    }
    let fitted = x.values() * &pre.beta;
    let disc = x.discrete_columns();
    let cont = x.continuous_columns();
    let mut intervals = vec![Vec::with_capacity(disc.len()); x.n()];
    let mut residuals = vec![Vec::with_capacity(cont.len()); x.n()];
    for i in 0..x.n() {
        for &j in &disc {
            let t = pre.thresholds[j]
                .as_ref()
                .ok_or_else(|| Error::Input(format!("no thresholds for discrete column {j}")))?;
            intervals[i].push(level_interval(t, x.level(i, j)).shifted(fitted[(i, j)]));
        }
        for &j in &cont {
            residuals[i].push(x.values()[(i, j)] - fitted[(i, j)]);
        }
    }
    Ok(UnitTerms { intervals, residuals })
}

fn pair_input(terms: &UnitTerms, a: usize, b: usize) -> PairLikelihoodInput {
    let rects = terms.intervals[a].iter().copied().zip(terms.intervals[b].iter().copied()).collect();
    let residuals = terms.residuals[a].iter().copied().zip(terms.residuals[b].iter().copied()).collect();
    PairLikelihoodInput::new(rects, residuals)
}

#[derive(Debug, Clone, Default)]
pub struct CovReport {
    pub failed_pairs: usize,
}

/// Pairwise estimates within each block, then blockwise repair.
pub fn estimate_block_cov(x: &MixedDataset, pre: &PreEstimate, blocks: &[Vec<usize>]) -> Result<(BlockCovariance, CovReport)> {
    let terms = unit_terms(x, pre)?;
    let mut jobs = Vec::new();
    for (bi, units) in blocks.iter().enumerate() {
        for r in 0..units.len() {
            for c in (r + 1)..units.len() {
                jobs.push((bi, r, c));
            }
        }
    }
    let estimates: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(bi, r, c)| estimate_rho(&pair_input(&terms, blocks[bi][r], blocks[bi][c])).ok())
        .collect();
    let mut mats: Vec<DMatrix<f64>> = blocks.iter().map(|u| DMatrix::identity(u.len(), u.len())).collect();
    let mut report = CovReport::default();
    for (&(bi, r, c), est) in jobs.iter().zip(estimates) {
        let v = est.unwrap_or_else(|| {
            report.failed_pairs += 1;
            0.0
        });
        mats[bi][(r, c)] = v;
        mats[bi][(c, r)] = v;
    }
    if report.failed_pairs > 0 {
        warn!("{} unit pairs could not be estimated; set to 0", report.failed_pairs);
    }
    let cov_blocks = blocks
        .iter()
        .zip(mats)
        .map(|(units, m)| Ok(CovBlock { units: units.clone(), sigma: psd_repair(&SymMatrix::new(m)?)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok((BlockCovariance::new(x.n(), cov_blocks)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::normal::std_normal_ln_pdf;
    use crate::model::VariableSpec;
    use crate::rng::Streams;
    use crate::simulate::{draw_block_noise, covariance_factors, BlockPattern};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn correlated_pairs(rho: f64, m: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = Streams::new(seed).rng();
        (0..m)
            .map(|_| {
                let u: f64 = rng.sample(StandardNormal);
                let v: f64 = rng.sample(StandardNormal);
                (u, rho * u + (1.0 - rho * rho).sqrt() * v)
            })
            .collect()
    }

    #[test]
    fn loglik_examples() {
        let res = vec![(0.3, -1.2), (1.5, 0.2)];
        let input = PairLikelihoodInput::new(vec![], res.clone());
        let want: f64 = res.iter().map(|&(a, b)| std_normal_ln_pdf(a) + std_normal_ln_pdf(b)).sum();
        assert_abs_diff_eq!(pair_loglik(&input, 0.0), want, epsilon = 1e-12);
        let neg = Interval { lower: f64::NEG_INFINITY, upper: 0.0 };
        let input = PairLikelihoodInput::new(vec![(neg, neg)], vec![]);
        assert_abs_diff_eq!(pair_loglik(&input, 0.5), (1.0f64 / 3.0).ln(), epsilon = 1e-9);
        assert_eq!(pair_loglik(&PairLikelihoodInput::default(), 0.4), 0.0);
    }

    #[test]
    fn continuous_estimate_matches_stationary_point() {
        let input = PairLikelihoodInput::new(vec![], correlated_pairs(0.6, 500, 1));
        let r = estimate_rho(&input).unwrap();
        assert!((r - 0.6).abs() < 0.08);
        // Score equation of the bivariate-normal correlation with unit variances:
        // m ρ (1 − ρ²) + (1 + ρ²) S_ab − ρ (S_aa + S_bb) = 0.
        let m = 500.0;
        let score = m * r * (1.0 - r * r) + (1.0 + r * r) * input.sab - r * (input.saa + input.sbb);
        assert!(score.abs() < 1e-2 * m, "score {score}");
        for k in 0..201 {
            let g = -RHO_CAP + 2.0 * RHO_CAP * k as f64 / 200.0;
            assert!(pair_loglik(&input, r) >= pair_loglik(&input, g) - 1e-8);
        }
    }

    #[test]
    fn identical_residuals_hit_the_cap() {
        let res: Vec<(f64, f64)> = correlated_pairs(0.0, 50, 2).into_iter().map(|(a, _)| (a, a)).collect();
        let r = estimate_rho(&PairLikelihoodInput::new(vec![], res)).unwrap();
        assert!(r > 0.998);
    }

    #[test]
    fn independent_residuals_near_zero() {
        for seed in 0..10 {
            let r = estimate_rho(&PairLikelihoodInput::new(vec![], correlated_pairs(0.0, 500, seed))).unwrap();
            assert!(r.abs() <= 0.1, "seed {seed}: {r}");
        }
    }

    #[test]
    fn estimate_is_symmetric_in_units() {
        let mut rng = Streams::new(3).rng();
        let mut rects = Vec::new();
        for _ in 0..30 {
            let a: f64 = rng.random_range(-1.5..0.5);
            let b: f64 = rng.random_range(-0.5..1.0);
            rects.push((Interval { lower: a, upper: a + 1.2 }, Interval { lower: b, upper: f64::INFINITY }));
        }
        let input = PairLikelihoodInput::new(rects, correlated_pairs(0.4, 30, 4));
        assert_eq!(estimate_rho(&input).unwrap(), estimate_rho(&input.swapped()).unwrap());
    }

    fn max_grid_jump(input: &PairLikelihoodInput, lo: f64, hi: f64, step: f64) -> f64 {
        let mut worst: f64 = 0.0;
        let mut prev = pair_loglik(input, lo);
        let k = ((hi - lo) / step).round() as usize;
        for i in 1..=k {
            let v = pair_loglik(input, lo + step * i as f64);
            worst = worst.max((v - prev).abs() / (1.0 + v.abs()));
            prev = v;
        }
        worst
    }

    fn reachable_rects(rng: &mut impl Rng, m: usize) -> Vec<(Interval, Interval)> {
        let mut rects = Vec::new();
        while rects.len() < m {
            let a: f64 = rng.random_range(-2.0..1.0);
            let b: f64 = rng.random_range(-2.0..1.0);
            // Keep rectangles that stay reachable as |ρ| → 1.
            if a <= b && a + 1.0 + b >= 0.0 {
                rects.push((Interval { lower: a, upper: a + 1.0 }, Interval { lower: f64::NEG_INFINITY, upper: b }));
            }
        }
        rects
    }

    #[test]
    fn loglik_is_continuous_in_rho() {
        let mut rng = Streams::new(5).rng();
        for _ in 0..5 {
            let input = PairLikelihoodInput::new(reachable_rects(&mut rng, 20), vec![]);
            assert!(max_grid_jump(&input, -RHO_CAP, RHO_CAP, 1e-3) <= 1e-2);
        }
    }

    #[test]
    fn loglik_jumps_shrink_with_grid_when_residuals_present() {
        let mut rng = Streams::new(6).rng();
        for _ in 0..5 {
            let rects = reachable_rects(&mut rng, 20);
            let input = PairLikelihoodInput::new(rects, correlated_pairs(0.3, 20, rng.random()));
            let coarse = max_grid_jump(&input, -RHO_CAP, RHO_CAP, 1e-3);
            let fine = max_grid_jump(&input, -RHO_CAP, RHO_CAP, 1e-4);
            assert!(fine < 0.2 * coarse, "{fine} vs {coarse}");
        }
    }

    #[test]
    fn failure_when_every_rectangle_is_empty() {
        let far = Interval { lower: 50.0, upper: 51.0 };
        let input = PairLikelihoodInput::new(vec![(far, far)], vec![]);
        assert!(matches!(estimate_rho(&input), Err(Error::EstimationFailed { .. })));
    }

    #[test]
    fn repair_examples() {
        let pd = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0])).unwrap();
        let out = psd_repair(&pd).unwrap();
        assert!((out.as_matrix() - pd.as_matrix()).abs().max() < 1e-12);
        let sing = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])).unwrap();
        let out = psd_repair(&sing).unwrap();
        assert_abs_diff_eq!(out.as_matrix()[(0, 1)], 0.9, epsilon = 1e-9);
        assert_abs_diff_eq!(out.as_matrix()[(0, 0)], 1.0, epsilon = 0.0);
        let bad = SymMatrix::new(DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0])).unwrap();
        assert!(min_eigenvalue(&bad) < -0.1);
        let out = psd_repair(&bad).unwrap();
        assert!(min_eigenvalue(&out) >= 1e-8);
        assert!((0..3).all(|i| out.as_matrix()[(i, i)] == 1.0));
    }

    fn equal_block_data(theta: f64, m: usize, p: usize, seed: u64) -> (MixedDataset, PreEstimate) {
        let sigma = BlockPattern::Equal(theta).matrix(m);
        let cov = BlockCovariance::new(m, vec![CovBlock { units: (0..m).collect(), sigma }]).unwrap();
        let f = covariance_factors(&cov).unwrap();
        let mut rng = Streams::new(seed).rng();
        let mut values = DMatrix::zeros(m, p);
        let mut specs = Vec::new();
        let mut thresholds = Vec::new();
        for j in 0..p {
            let e = draw_block_noise(&cov, &f, &mut rng);
            if j % 2 == 0 {
                let t = vec![-1.0, 1.0];
                for i in 0..m {
                    values[(i, j)] = crate::model::quantize(e[i], &t) as f64;
                }
                specs.push(VariableSpec::with_thresholds(format!("X{j}"), t.clone()).unwrap());
                thresholds.push(Some(t));
            } else {
                values.set_column(j, &e);
                specs.push(VariableSpec::continuous(format!("X{j}")));
                thresholds.push(None);
            }
        }
        let x = MixedDataset::new(values, specs, (0..m).map(|i| format!("u{i}")).collect(), vec![0; m]).unwrap();
        let pre = PreEstimate { thresholds, beta: DMatrix::zeros(p, p), parents: vec![vec![]; p], trace: vec![], loglik_trace: vec![] };
        (x, pre)
    }

    #[test]
    fn equal_block_rmse() {
        let mut acc = 0.0;
        for seed in 0..10 {
            let (x, pre) = equal_block_data(0.5, 10, 500, seed);
            let (cov, rep) = estimate_block_cov(&x, &pre, &[(0..10).collect()]).unwrap();
            assert_eq!(rep.failed_pairs, 0);
            let m = cov.blocks()[0].sigma.as_matrix();
            let mut se = 0.0;
            for i in 0..10 {
                for j in 0..10 {
                    if i != j {
                        se += (m[(i, j)] - 0.5).powi(2);
                    }
                }
            }
            acc += (se / 90.0).sqrt();
        }
        assert!(acc / 10.0 <= 0.15, "mean rmse {}", acc / 10.0);
    }

    #[test]
    fn singleton_blocks_stay_diagonal() {
        let (x, pre) = equal_block_data(0.5, 4, 6, 1);
        let groups: Vec<Vec<usize>> = (0..4).map(|i| vec![i]).collect();
        let (cov, _) = estimate_block_cov(&x, &pre, &groups).unwrap();
        assert_eq!(cov.to_dense(), DMatrix::identity(4, 4));
    }

    #[test]
    fn continuous_residuals_subtract_fitted_values() {
        let specs = vec![VariableSpec::continuous("big"), VariableSpec::continuous("small")];
        let values = DMatrix::from_row_slice(4, 2, &[3.0, 2.0, -3.0, -1.0, 3.0, 1.0, -3.0, -2.0]);
        let x = MixedDataset::new(values, specs, (0..4).map(|i| format!("u{i}")).collect(), vec![0; 4]).unwrap();
        let pre = PreEstimate { thresholds: vec![None, None], beta: DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.0, 0.0]), parents: vec![vec![], vec![0]], trace: vec![], loglik_trace: vec![] };
        let terms = unit_terms(&x, &pre).unwrap();
        assert_eq!(terms.residuals[0], vec![3.0, 0.5]);
        assert_eq!(terms.residuals[1], vec![-3.0, 0.5]);
    }
}
