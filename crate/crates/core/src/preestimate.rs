//! Threshold and coefficient pre-estimation with independent units.
//!
//! Each discrete node alternates a few EM sweeps for its coefficients with a
//! bounded quasi-Newton fit of its cut points, parameterized by successive
//! differences so that ordering is a box constraint.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::learn::{hybrid_dag, LearnParams};
use crate::mathcore::lbfgsb::{boxed_quasi_newton, LbfgsbOptions};
use crate::mathcore::linalg::least_squares;
use crate::mathcore::normal::{normal_interval_mass, std_normal_pdf, std_normal_quantile, Interval, MASS_FLOOR};
use crate::mathcore::truncnorm::truncnorm_mean;
use crate::model::{level_interval, MixedDataset};

/// Smallest gap between consecutive thresholds.
pub const DELTA_MIN: f64 = 1e-3;
pub const INNER_EM_ITERS: usize = 3;
pub const OUTER_TOL: f64 = 1e-3;
pub const OUTER_MAX_ITERS: usize = 20;
const SCALE_RANGE: f64 = 1.5;
/// Bound on |β_k| on the latent scale; keeps separated columns finite.
pub const COEF_BOUND: f64 = 10.0;
const NEWTON_MAX_ITERS: usize = 50;
const NEWTON_GRAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PreEstimate {
    /// Cut points per node; `None` for continuous nodes.
    pub thresholds: Vec<Option<Vec<f64>>>,
    /// p × p; column j holds β_j, zero off the parent set.
    pub beta: DMatrix<f64>,
    pub parents: Vec<Vec<usize>>,
    /// Per node: (d_β, d_T) after each outer iteration.
    pub trace: Vec<Vec<(f64, f64)>>,
    /// Per node: log-likelihood at the start and after every half-step.
    pub loglik_trace: Vec<Vec<f64>>,
}

impl PreEstimate {
    pub fn p(&self) -> usize {
        self.parents.len()
    }

    /// Fitted values X·β_j.
    pub fn fitted(&self, x: &MixedDataset, j: usize) -> DVector<f64> {
        x.values() * self.beta.column(j)
    }
}

/// τ_c = Φ⁻¹(cumulative frequency of levels ≤ c).
pub fn initial_thresholds(codes: &[usize], levels: usize) -> Result<Vec<f64>> {
    let n = codes.len() as f64;
    let mut counts = vec![0usize; levels];
    for &c in codes {
        if c >= levels {
            return Err(Error::Input(format!("level code {c} outside 0..{}", levels - 1)));
        }
        counts[c] += 1;
    }
    let mut out = Vec::with_capacity(levels - 1);
    let mut cum = 0usize;
    for (c, &k) in counts.iter().enumerate().take(levels - 1) {
        cum += k;
        if cum == 0 {
            return Err(Error::DegenerateLevel { column: String::new(), level: c });
        }
        if cum == codes.len() {
            return Err(Error::DegenerateLevel { column: String::new(), level: c + 1 });
        }
        out.push(std_normal_quantile(cum as f64 / n)?);
    }
    enforce_gaps(&mut out);
    Ok(out)
}

/// Cut points from clamped cumulative frequencies, usable when an extreme
/// level is empty.
pub fn fallback_thresholds(codes: &[usize], levels: usize) -> Vec<f64> {
    let n = codes.len() as f64;
    let mut counts = vec![0usize; levels];
    for &c in codes {
        counts[c.min(levels - 1)] += 1;
    }
    let lo = 0.5 / n;
    let mut cum = 0.0;
    let mut out: Vec<f64> = counts[..levels - 1]
        .iter()
        .map(|&k| {
            cum += k as f64;
            std_normal_quantile((cum / n).clamp(lo, 1.0 - lo)).expect("clamped into (0, 1)")
        })
        .collect();
    enforce_gaps(&mut out);
    out
}

fn enforce_gaps(t: &mut [f64]) {
    for c in 1..t.len() {
        if t[c] < t[c - 1] + DELTA_MIN {
            t[c] = t[c - 1] + DELTA_MIN;
        }
    }
}

/// Σᵢ log[Φ(τ_{x+1} − η) − Φ(τ_x − η)]; −∞ when any mass underflows.
pub fn discrete_loglik(codes: &[usize], t: &[f64], eta: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&c, &e) in codes.iter().zip(eta) {
        let iv = level_interval(t, c);
        let mass = normal_interval_mass(iv.lower - e, iv.upper - e);
        if !(mass > MASS_FLOOR) {
            return f64::NEG_INFINITY;
        }
        total += mass.ln();
    }
    total
}

fn design(x: &MixedDataset, pa: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.n(), pa.len(), |i, k| x.values()[(i, pa[k])])
}

fn codes_of(x: &MixedDataset, j: usize) -> Vec<usize> {
    (0..x.n()).map(|i| x.level(i, j)).collect()
}

/// EM sweeps for β_j with Σ = I: impute the truncated-normal mean of the
/// latent value, then least squares on the parent columns.
pub fn em_beta_step(x: &MixedDataset, j: usize, pa: &[usize], t: &[f64], beta0: &[f64], iters: usize) -> Result<Vec<f64>> {
    if beta0.len() != pa.len() {
        return Err(Error::Input("coefficient count differs from parent count".into()));
    }
    em_sweeps(&design(x, pa), &codes_of(x, j), j, t, beta0, iters)
}

fn em_sweeps(d: &DMatrix<f64>, codes: &[usize], j: usize, t: &[f64], beta0: &[f64], iters: usize) -> Result<Vec<f64>> {
    let mut beta = DVector::from_column_slice(beta0);
    let mut fallback_warned = false;
    for _ in 0..iters {
        let eta = d * &beta;
        let mut z = DVector::zeros(codes.len());
        for i in 0..codes.len() {
            z[i] = truncnorm_mean(level_interval(t, codes[i]), eta[i], 1.0)?;
        }
        let (b, fallback) = least_squares(d, &z);
        if fallback && !fallback_warned {
            warn!("collinear parents for node {j}; using a small ridge penalty");
            fallback_warned = true;
        }
        beta = b;
    }
    Ok(beta.iter().copied().collect())
}

/// Damped Newton ascent on the ordinal-probit log-likelihood in β with the
/// thresholds fixed. Never decreases the likelihood.
fn newton_beta(d: &DMatrix<f64>, codes: &[usize], t: &[f64], beta0: Vec<f64>) -> Vec<f64> {
    let k = beta0.len();
    if k == 0 {
        return beta0;
    }
    let mut beta = DVector::from_vec(beta0);
    let ll_at = |b: &DVector<f64>| -> f64 {
        let eta: Vec<f64> = (d * b).iter().copied().collect();
        discrete_loglik(codes, t, &eta)
    };
    let mut ll = ll_at(&beta);
    if !ll.is_finite() {
        return beta.iter().copied().collect();
    }
    for _ in 0..NEWTON_MAX_ITERS {
        let eta = d * &beta;
        let mut grad = DVector::zeros(k);
        let mut hess = DMatrix::zeros(k, k);
        for (i, &c) in codes.iter().enumerate() {
            let iv = level_interval(t, c);
            let (a, b) = (iv.lower - eta[i], iv.upper - eta[i]);
            let mass = normal_interval_mass(a, b);
            let (pa, pb) = (std_normal_pdf(a), std_normal_pdf(b));
            let g = (pa - pb) / mass;
            let apa = if a.is_finite() { a * pa } else { 0.0 };
            let bpb = if b.is_finite() { b * pb } else { 0.0 };
            let curv = (apa - bpb) / mass - g * g;
            let row = d.row(i).transpose();
            grad.axpy(g, &row, 1.0);
            hess.ger(curv, &row, &row, 1.0);
        }
        if grad.amax() < NEWTON_GRAD_TOL * codes.len() as f64 {
            break;
        }
        let Some(step) = (-hess).cholesky().map(|c| c.solve(&grad)) else { break };
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand = (&beta + &step * scale).map(|v| v.clamp(-COEF_BOUND, COEF_BOUND));
            let v = ll_at(&cand);
            if v >= ll {
                improved = v > ll;
                beta = cand;
                ll = v;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            break;
        }
    }
    beta.iter().copied().collect()
}

/// Negative mean log-likelihood and its gradient in the difference
/// parameterization.
fn threshold_objective(codes: &[usize], eta: &[f64], delta: &DVector<f64>) -> (f64, DVector<f64>) {
    let k = delta.len();
    let t: Vec<f64> = delta
        .iter()
        .scan(0.0, |acc, d| {
            *acc += d;
            Some(*acc)
        })
        .collect();
    let n = codes.len() as f64;
    let mut grad_t = vec![0.0; k];
    let mut ll = 0.0;
    for (&c, &e) in codes.iter().zip(eta) {
        let iv = level_interval(&t, c);
        let (a, b) = (iv.lower - e, iv.upper - e);
        let mass = normal_interval_mass(a, b);
        if !(mass > MASS_FLOOR) {
            return (f64::INFINITY, DVector::zeros(k));
        }
        ll += mass.ln();
        if c < k {
            grad_t[c] += std_normal_pdf(b) / mass;
        }
        if c > 0 {
            grad_t[c - 1] -= std_normal_pdf(a) / mass;
        }
    }
    // d τ_m / d δ_l = 1 for l ≤ m
    let mut grad = DVector::zeros(k);
    let mut acc = 0.0;
    for l in (0..k).rev() {
        acc += grad_t[l];
        grad[l] = -acc / n;
    }
    (-ll / n, grad)
}

/// Maximize the discrete log-likelihood over cut points given fitted values.
pub fn optimize_thresholds(codes: &[usize], eta: &[f64], t0: &[f64]) -> Result<Vec<f64>> {
    if t0.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(format!("starting thresholds not increasing: {t0:?}")));
    }
    let mut delta0: Vec<f64> = t0.to_vec();
    for c in (1..t0.len()).rev() {
        delta0[c] = (t0[c] - t0[c - 1]).max(DELTA_MIN);
    }
    let bounds: Vec<Interval> = (0..t0.len())
        .map(|c| if c == 0 { Interval::REAL_LINE } else { Interval { lower: DELTA_MIN, upper: f64::INFINITY } })
        .collect();
    let start_ll = discrete_loglik(codes, t0, eta);
    if !start_ll.is_finite() {
        return Err(Error::InvalidStart);
    }
    let opts = LbfgsbOptions { pg_tol: 1e-8, ..LbfgsbOptions::default() };
    let res = boxed_quasi_newton(|d| threshold_objective(codes, eta, d), &delta0, &bounds, opts)?;
    let mut t: Vec<f64> = res
        .x
        .iter()
        .scan(0.0, |acc, d| {
            *acc += d;
            Some(*acc)
        })
        .collect();
    enforce_gaps(&mut t);
    if discrete_loglik(codes, &t, eta) < start_ll {
        return Ok(t0.to_vec());
    }
    Ok(t)
}

#[derive(Debug, Clone)]
struct NodeFit {
    beta: Vec<f64>,
    thresholds: Option<Vec<f64>>,
    trace: Vec<(f64, f64)>,
    loglik: Vec<f64>,
}

fn scaled(v: &[f64], c: f64) -> Vec<f64> {
    v.iter().map(|x| x * c).collect()
}

/// Joint rescaling of (β, T) that maximizes the likelihood; 1 if nothing
/// improves. The likelihood is concave along this ray.
fn best_scale(codes: &[usize], eta: &[f64], t: &[f64], max_log_scale: f64) -> f64 {
    let f = |log_c: f64| {
        let c = log_c.exp();
        discrete_loglik(codes, &scaled(t, c), &scaled(eta, c))
    };
    let base = f(0.0);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (-SCALE_RANGE, SCALE_RANGE.min(max_log_scale));
    if b <= a {
        return 1.0;
    }
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-10 {
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
    let mid = 0.5 * (a + b);
    if f(mid) > base { mid.exp() } else { 1.0 }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn fit_discrete(x: &MixedDataset, j: usize, pa: &[usize], levels: usize) -> Result<NodeFit> {
    let codes = codes_of(x, j);
    // Ascent runs on mean-centered parents; the thresholds absorb the offset
    // m·β, so the likelihood is unchanged but slope and location decouple.
    let (mut tc, optimize) = match initial_thresholds(&codes, levels) {
        Ok(t) => (t, true),
        Err(Error::DegenerateLevel { level, .. }) => {
            warn!("column {} has an empty extreme level {level}; thresholds held at initial values", x.specs()[j].name);
            (fallback_thresholds(&codes, levels), false)
        }
        Err(e) => return Err(e),
    };
    let mut d = design(x, pa);
    let means: Vec<f64> = if optimize { (0..pa.len()).map(|k| d.column(k).mean()).collect() } else { vec![0.0; pa.len()] };
    for (k, m) in means.iter().enumerate() {
        d.column_mut(k).add_scalar_mut(-m);
    }
    let offset = |b: &[f64]| -> f64 { b.iter().zip(&means).map(|(b, m)| b * m).sum() };
    let to_raw = |tc: &[f64], b: &[f64]| -> Vec<f64> { tc.iter().map(|v| v + offset(b)).collect() };
    let mut beta = vec![0.0; pa.len()];
    let eta_of = |b: &[f64]| -> Vec<f64> { (&d * DVector::from_column_slice(b)).iter().copied().collect() };
    let mut loglik = vec![discrete_loglik(&codes, &tc, &eta_of(&beta))];
    let mut trace = Vec::new();
    for _ in 0..OUTER_MAX_ITERS {
        let swept = match em_sweeps(&d, &codes, j, &tc, &beta, INNER_EM_ITERS) {
            Ok(b) if b.iter().all(|v| v.abs() <= COEF_BOUND)
                && discrete_loglik(&codes, &tc, &eta_of(&b)) >= discrete_loglik(&codes, &tc, &eta_of(&beta)) =>
            {
                b
            }
            Ok(_) | Err(Error::DegenerateInterval { .. }) => beta.clone(),
            Err(e) => return Err(e),
        };
        let new_beta = newton_beta(&d, &codes, &tc, swept);
        let eta = eta_of(&new_beta);
        loglik.push(discrete_loglik(&codes, &tc, &eta));
        let new_tc = if optimize { optimize_thresholds(&codes, &eta, &tc)? } else { tc.clone() };
        loglik.push(discrete_loglik(&codes, &new_tc, &eta));
        let (new_beta, new_tc) = if optimize {
            let largest = new_beta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let c = best_scale(&codes, &eta, &new_tc, (COEF_BOUND / largest).ln());
            loglik.push(discrete_loglik(&codes, &scaled(&new_tc, c), &scaled(&eta, c)));
            (scaled(&new_beta, c), scaled(&new_tc, c))
        } else {
            (new_beta, new_tc)
        };
        let step = (euclid(&new_beta, &beta), euclid(&to_raw(&new_tc, &new_beta), &to_raw(&tc, &beta)));
        trace.push(step);
        beta = new_beta;
        tc = new_tc;
        if step.0.max(step.1) < OUTER_TOL {
            break;
        }
    }
    for w in loglik.windows(2) {
        if w[1] < w[0] - 1e-8 * (1.0 + w[0].abs()) {
            warn!("log-likelihood decreased for node {j}: {} -> {}", w[0], w[1]);
        }
    }
    Ok(NodeFit { thresholds: Some(to_raw(&tc, &beta)), beta, trace, loglik })
}

fn fit_continuous(x: &MixedDataset, j: usize, pa: &[usize]) -> NodeFit {
    let d = design(x, pa);
    let y = x.values().column(j).into_owned();
    let (b, fallback) = least_squares(&d, &y);
    if fallback {
        warn!("collinear parents for node {j}; using a small ridge penalty");
    }
    NodeFit { beta: b.iter().copied().collect(), thresholds: None, trace: Vec::new(), loglik: Vec::new() }
}

/// Coordinate ascent over (β_j, T_j) for every discrete node and least
/// squares for continuous nodes, given parent sets.
pub fn algorithm1(x: &MixedDataset, parents: &[Vec<usize>]) -> Result<PreEstimate> {
    let p = x.p();
    if parents.len() != p {
        return Err(Error::Input(format!("{} parent sets for {p} columns", parents.len())));
    }
    for (j, pa) in parents.iter().enumerate() {
        if pa.iter().any(|&k| k >= p || k == j) {
            return Err(Error::Input(format!("invalid parent set for node {j}")));
        }
    }
    let fits: Vec<Result<NodeFit>> = (0..p)
        .into_par_iter()
        .map(|j| match x.specs()[j].levels() {
            Some(levels) => fit_discrete(x, j, &parents[j], levels),
            None => Ok(fit_continuous(x, j, &parents[j])),
        })
        .collect();
    let mut beta = DMatrix::zeros(p, p);
    let mut thresholds = Vec::with_capacity(p);
    let mut trace = Vec::with_capacity(p);
    let mut loglik_trace = Vec::with_capacity(p);
    for (j, fit) in fits.into_iter().enumerate() {
        let fit = fit?;
        for (k, &pa) in parents[j].iter().enumerate() {
            beta[(pa, j)] = fit.beta[k];
        }
        thresholds.push(fit.thresholds);
        trace.push(fit.trace);
        loglik_trace.push(fit.loglik);
    }
    Ok(PreEstimate { thresholds, beta, parents: parents.to_vec(), trace, loglik_trace })
}

/// Parent sets of the hybrid learner's DAG on z-scored raw data (discrete
/// codes treated as numeric).
pub fn baseline_parents(x: &MixedDataset, params: &LearnParams) -> Vec<Vec<usize>> {
    hybrid_dag(&x.zscored(), params).parent_sets()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::Dag;
    use crate::model::{BlockCovariance, DagModel, VariableSpec};
    use crate::rng::Streams;
    use crate::simulate::{gen_mixed_data, simulate, SimulationSettings};
    use approx::assert_abs_diff_eq;

    fn iid(n: usize) -> BlockCovariance {
        BlockCovariance::identity(&(0..n).map(|i| vec![i]).collect::<Vec<_>>())
    }

    #[test]
    fn initial_threshold_examples() {
        let half: Vec<usize> = (0..100).map(|i| i % 2).collect();
        assert_abs_diff_eq!(initial_thresholds(&half, 2).unwrap()[0], 0.0, epsilon = 1e-12);
        let thirds: Vec<usize> = (0..300).map(|i| i % 3).collect();
        let t = initial_thresholds(&thirds, 3).unwrap();
        assert_abs_diff_eq!(t[0], -0.430727, epsilon = 1e-6);
        assert_abs_diff_eq!(t[1], 0.430727, epsilon = 1e-6);
        let skew: Vec<usize> = (0..1000).map(|i| usize::from(i >= 977)).collect();
        assert_abs_diff_eq!(initial_thresholds(&skew, 2).unwrap()[0], 2.0, epsilon = 0.01);
        let no_top: Vec<usize> = (0..10).map(|i| i % 2).collect();
        assert!(matches!(initial_thresholds(&no_top, 3), Err(Error::DegenerateLevel { level: 2, .. })));
        let no_bottom = vec![1usize, 2, 1, 2];
        assert!(matches!(initial_thresholds(&no_bottom, 3), Err(Error::DegenerateLevel { level: 0, .. })));
    }

    #[test]
    fn loglik_examples() {
        assert_abs_diff_eq!(discrete_loglik(&[1], &[0.0], &[0.0]), -0.693147, epsilon = 1e-6);
        assert_abs_diff_eq!(discrete_loglik(&[1], &[0.0], &[40.0]), 0.0, epsilon = 1e-12);
        let one = discrete_loglik(&[2], &[-1.0, 0.5], &[0.3]);
        assert_abs_diff_eq!(discrete_loglik(&[2, 2], &[-1.0, 0.5], &[0.3, 0.3]), 2.0 * one, epsilon = 1e-14);
        assert_eq!(discrete_loglik(&[0], &[0.0], &[45.0]), f64::NEG_INFINITY);
    }

    fn one_parent_data(n: usize, beta: f64, t: &[f64], seed: u64) -> MixedDataset {
        let dag = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let mut w = DMatrix::zeros(2, 2);
        w[(0, 1)] = beta;
        let specs = vec![VariableSpec::continuous("c"), VariableSpec::with_thresholds("d", t.to_vec()).unwrap()];
        let model = DagModel::new(dag, w, specs).unwrap();
        gen_mixed_data(&model, &iid(n), &Streams::new(seed)).unwrap()
    }

    #[test]
    fn em_step_examples() {
        let x = one_parent_data(500, 0.8, &[-1.0, 1.0], 1);
        assert_eq!(em_beta_step(&x, 1, &[], &[-1.0, 1.0], &[], 3).unwrap(), Vec::<f64>::new());
        assert_eq!(em_beta_step(&x, 1, &[0], &[-1.0, 1.0], &[0.25], 0).unwrap(), vec![0.25]);
        let mut acc = 0.0;
        for seed in 0..10 {
            let x = one_parent_data(5000, 0.8, &[-1.0, 1.0], 10 + seed);
            acc += em_beta_step(&x, 1, &[0], &[-1.0, 1.0], &[0.0], 3).unwrap()[0];
        }
        assert!((acc / 10.0 - 0.8).abs() < 0.1, "mean beta {}", acc / 10.0);
    }

    #[test]
    fn em_step_increases_likelihood() {
        let x = one_parent_data(2000, -0.7, &[-0.5, 0.7], 3);
        let codes = codes_of(&x, 1);
        let t = [-0.5, 0.7];
        let mut beta = vec![0.0];
        let mut prev = f64::NEG_INFINITY;
        for _ in 0..6 {
            let eta: Vec<f64> = (0..x.n()).map(|i| x.values()[(i, 0)] * beta[0]).collect();
            let ll = discrete_loglik(&codes, &t, &eta);
            assert!(ll >= prev - 1e-9);
            prev = ll;
            beta = em_beta_step(&x, 1, &[0], &t, &beta, 1).unwrap();
        }
    }

    #[test]
    fn threshold_gradient_matches_finite_differences() {
        let x = one_parent_data(300, 0.6, &[-1.0, 0.2, 1.0], 4);
        let codes = codes_of(&x, 1);
        let eta: Vec<f64> = (0..x.n()).map(|i| 0.5 * x.values()[(i, 0)]).collect();
        let d = DVector::from_vec(vec![-0.9, 1.1, 0.7]);
        let (_, g) = threshold_objective(&codes, &eta, &d);
        for k in 0..3 {
            let h = 1e-6;
            let mut up = d.clone();
            up[k] += h;
            let mut dn = d.clone();
            dn[k] -= h;
            let fd = (threshold_objective(&codes, &eta, &up).0 - threshold_objective(&codes, &eta, &dn).0) / (2.0 * h);
            assert_abs_diff_eq!(g[k], fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn binary_threshold_mle() {
        let codes: Vec<usize> = (0..1000).map(|i| usize::from(i % 2 == 0)).collect();
        let eta = vec![0.0; 1000];
        let t = optimize_thresholds(&codes, &eta, &[0.7]).unwrap();
        assert_abs_diff_eq!(t[0], 0.0, epsilon = 1e-4);
        let (_, g) = threshold_objective(&codes, &eta, &DVector::from_vec(t.clone()));
        assert!(g[0].abs() * 1000.0 <= 1e-4 * 1000.0);
        let mut rng = Streams::new(5).rng();
        let skew: Vec<usize> = (0..800).map(|i| usize::from(i % 5 == 0)).collect();
        let eta2: Vec<f64> = (0..800).map(|i| ((i % 7) as f64 - 3.0) * 0.2).collect();
        let mut sols = Vec::new();
        for _ in 0..5 {
            use rand::Rng;
            let start: f64 = rng.random_range(-2.0..2.0);
            sols.push(optimize_thresholds(&skew, &eta2, &[start]).unwrap()[0]);
        }
        for s in &sols {
            assert_abs_diff_eq!(*s, sols[0], epsilon = 1e-3);
        }
    }

    #[test]
    fn three_level_thresholds_recovered() {
        let x = one_parent_data(2000, 0.8, &[-1.0, 1.0], 6);
        let codes = codes_of(&x, 1);
        let eta: Vec<f64> = (0..x.n()).map(|i| 0.8 * x.values()[(i, 0)]).collect();
        let t0 = initial_thresholds(&codes, 3).unwrap();
        let t = optimize_thresholds(&codes, &eta, &t0).unwrap();
        let rmse = (((t[0] + 1.0).powi(2) + (t[1] - 1.0).powi(2)) / 2.0).sqrt();
        assert!(rmse < 0.25, "{t:?}");
        assert!(discrete_loglik(&codes, &t, &eta) >= discrete_loglik(&codes, &t0, &eta) - 1e-9);
    }

    #[test]
    fn algorithm1_on_simulated_data() {
        let inst = simulate(&SimulationSettings::standard(100, 50), 11).unwrap();
        let parents = inst.model.dag.parent_sets();
        let pre = algorithm1(&inst.data, &parents).unwrap();
        for j in inst.data.discrete_columns() {
            let tr = &pre.trace[j];
            assert!(tr.len() <= 10, "node {j} took {} iterations", tr.len());
            let last = tr.last().unwrap();
            assert!(last.0.max(last.1) < 1e-3);
            for w in pre.loglik_trace[j].windows(2) {
                assert!(w[1] >= w[0] - 1e-8 * (1.0 + w[0].abs()), "node {j}: {w:?}");
            }
            let t = pre.thresholds[j].as_ref().unwrap();
            assert!(t.windows(2).all(|w| w[0] < w[1]));
        }
        for j in 0..50 {
            for k in 0..50 {
                if !parents[j].contains(&k) {
                    assert_eq!(pre.beta[(k, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn algorithm1_without_parents() {
        let inst = simulate(&SimulationSettings::standard(200, 8), 12).unwrap();
        let pre = algorithm1(&inst.data, &vec![Vec::new(); 8]).unwrap();
        assert!(pre.beta.iter().all(|&b| b == 0.0));
        for j in inst.data.discrete_columns() {
            let codes = codes_of(&inst.data, j);
            let want = initial_thresholds(&codes, 3).unwrap();
            let got = pre.thresholds[j].as_ref().unwrap();
            assert_abs_diff_eq!(got[0], want[0], epsilon = 1e-4);
            assert_abs_diff_eq!(got[1], want[1], epsilon = 1e-4);
        }
        let all_cont = inst.data.select_columns(&inst.data.continuous_columns());
        let pre = algorithm1(&all_cont, &vec![Vec::new(); all_cont.p()]).unwrap();
        assert!(pre.thresholds.iter().all(|t| t.is_none()));
    }

    #[test]
    fn continuous_surrogate_is_plain_least_squares() {
        let x = one_parent_data(400, 0.8, &[-1.0, 1.0], 7);
        let cont = x.select_columns(&[0]);
        let pre = algorithm1(&x.select_columns(&[0, 0]).with_specs(vec![VariableSpec::continuous("a"), VariableSpec::continuous("b")]).unwrap(), &[vec![], vec![0]]).unwrap();
        assert_abs_diff_eq!(pre.beta[(0, 1)], 1.0, epsilon = 1e-10);
        assert_eq!(cont.p(), 1);
    }
}
