use rand::Rng;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
pub const GMM_TOL: f64 = 1e-6;
pub const GMM_MAX_ITERS: usize = 500;
pub const GMM_RESTARTS: usize = 5;
/// Component variances below this count as a collapse.
pub const MIN_VARIANCE: f64 = 1e-8;

/// One-dimensional Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub loglik: f64,
    /// Log-likelihood after every EM iteration of the winning restart.
    pub trace: Vec<f64>,
}

impl GmmFit {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    /// log(π_k φ(x; μ_k, σ²_k)) for every component.
    fn log_joint(&self, x: f64, out: &mut [f64]) {
        for k in 0..self.k() {
            let d = x - self.means[k];
            out[k] = self.weights[k].ln() - 0.5 * (LN_2PI + self.variances[k].ln() + d * d / self.variances[k]);
        }
    }

    /// Index of the component with the largest responsibility.
    pub fn assign(&self, x: f64) -> usize {
        let mut lj = vec![0.0; self.k()];
        self.log_joint(x, &mut lj);
        let mut best = 0;
        for k in 1..lj.len() {
            if lj[k] > lj[best] {
                best = k;
            }
        }
        best
    }

    pub fn loglik_of(&self, xs: &[f64]) -> f64 {
        let mut lj = vec![0.0; self.k()];
        xs.iter()
            .map(|&x| {
                self.log_joint(x, &mut lj);
                log_sum_exp(&lj)
            })
            .sum()
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// k-means++ seeding followed by hard assignment to the nearest seed.
fn kmeanspp_start<R: Rng + ?Sized>(xs: &[f64], k: usize, rng: &mut R) -> Option<GmmFit> {
    let mut centers = vec![xs[rng.random_range(0..xs.len())]];
    while centers.len() < k {
        let d2: Vec<f64> = xs.iter().map(|&x| centers.iter().map(|c| (x - c) * (x - c)).fold(f64::INFINITY, f64::min)).collect();
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = xs.len() - 1;
        for (i, d) in d2.iter().enumerate() {
            if u < *d {
                pick = i;
                break;
            }
            u -= d;
        }
        centers.push(xs[pick]);
    }
    let mut members = vec![Vec::new(); k];
    for &x in xs {
        let mut best = 0;
        for c in 1..k {
            if (x - centers[c]).abs() < (x - centers[best]).abs() {
                best = c;
            }
        }
        members[best].push(x);
    }
    let n = xs.len() as f64;
    let mut fit = GmmFit { weights: vec![], means: vec![], variances: vec![], loglik: f64::NEG_INFINITY, trace: vec![] };
    for m in &members {
        if m.len() < 2 {
            return None;
        }
        let (mean, var) = moments(m);
        if var < MIN_VARIANCE {
            return None;
        }
        fit.weights.push(m.len() as f64 / n);
        fit.means.push(mean);
        fit.variances.push(var);
    }
    Some(fit)
}

/// EM from `fit`; `None` when a component collapses.
fn run_em(xs: &[f64], mut fit: GmmFit) -> Option<GmmFit> {
    let k = fit.k();
    let n = xs.len();
    let mut resp = vec![0.0; n * k];
    let mut lj = vec![0.0; k];
    let mut prev = f64::NEG_INFINITY;
    for _ in 0..GMM_MAX_ITERS {
        let mut ll = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            fit.log_joint(x, &mut lj);
            let lse = log_sum_exp(&lj);
            ll += lse;
            for c in 0..k {
                resp[i * k + c] = (lj[c] - lse).exp();
            }
        }
        fit.trace.push(ll);
        fit.loglik = ll;
        if ll - prev < GMM_TOL {
            break;
        }
        prev = ll;
        for c in 0..k {
            let nk: f64 = (0..n).map(|i| resp[i * k + c]).sum();
            if nk <= 0.0 {
                return None;
            }
            let mean = (0..n).map(|i| resp[i * k + c] * xs[i]).sum::<f64>() / nk;
            let var = (0..n).map(|i| resp[i * k + c] * (xs[i] - mean).powi(2)).sum::<f64>() / nk;
            if var < MIN_VARIANCE {
                return None;
            }
            fit.weights[c] = nk / n as f64;
            fit.means[c] = mean;
            fit.variances[c] = var;
        }
    }
    Some(fit)
}

/// Maximum-likelihood K-component mixture, best of several EM restarts.
pub fn fit_gmm<R: Rng + ?Sized>(xs: &[f64], k: usize, rng: &mut R) -> Result<GmmFit> {
    if !(1..=3).contains(&k) {
        return Err(Error::Input(format!("component count {k} outside 1..=3")));
    }
    if xs.len() < 10 * k {
        return Err(Error::Input(format!("{} values are too few for {k} components", xs.len())));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("column has non-finite values".into()));
    }
    if k == 1 {
        let (mean, var) = moments(xs);
        if var < MIN_VARIANCE {
            return Err(Error::FitFailed("column is constant".into()));
        }
        let mut fit = GmmFit { weights: vec![1.0], means: vec![mean], variances: vec![var], loglik: 0.0, trace: vec![] };
        fit.loglik = fit.loglik_of(xs);
        fit.trace.push(fit.loglik);
        return Ok(fit);
    }
    let mut best: Option<GmmFit> = None;
    for _ in 0..GMM_RESTARTS {
        let Some(start) = kmeanspp_start(xs, k, rng) else { continue };
        let Some(fit) = run_em(xs, start) else { continue };
        if best.as_ref().is_none_or(|b| fit.loglik > b.loglik) {
            best = Some(fit);
        }
    }
    best.ok_or_else(|| Error::FitFailed(format!("every restart collapsed for {k} components")))
}
