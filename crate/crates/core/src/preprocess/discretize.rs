use log::warn;

use super::gmm::{fit_gmm, GmmFit};
use super::shapiro::shapiro_wilk;
use crate::rng::Streams;

pub const MIN_TEST_LENGTH: usize = 30;
pub const SW_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixtureModel {
    Gauss1,
    Gmm2,
    Gmm3,
}

impl MixtureModel {
    pub fn name(&self) -> &'static str {
        match self {
            MixtureModel::Gauss1 => "gauss1",
            MixtureModel::Gmm2 => "gmm2",
            MixtureModel::Gmm3 => "gmm3",
        }
    }

    fn from_k(k: usize) -> Self {
        match k {
            1 => MixtureModel::Gauss1,
            2 => MixtureModel::Gmm2,
            _ => MixtureModel::Gmm3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Continuous,
    Discrete { levels: usize },
}

/// Outcome of the mixture-plus-normality test for one column.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnReport {
    pub name: String,
    /// `None` when the column was not tested.
    pub chosen: Option<MixtureModel>,
    /// BIC for 1, 2 and 3 components (infinite when that fit failed).
    pub bic: [f64; 3],
    /// Shapiro–Wilk p-value per component of the chosen mixture, ordered by
    /// component mean; NaN for components too small to test.
    pub sw_pvalues: Vec<f64>,
    pub decision: Decision,
    /// Level codes when discrete, ordered by component mean.
    pub codes: Option<Vec<usize>>,
}

impl ColumnReport {
    fn continuous(name: &str, chosen: Option<MixtureModel>, bic: [f64; 3], sw_pvalues: Vec<f64>) -> Self {
        ColumnReport { name: name.to_string(), chosen, bic, sw_pvalues, decision: Decision::Continuous, codes: None }
    }
}

pub type DiscretizationReport = Vec<ColumnReport>;

/// BIC with 3K − 1 free parameters.
pub fn gmm_bic(fit: &GmmFit, n: usize) -> f64 {
    -2.0 * fit.loglik + (3 * fit.k() - 1) as f64 * (n as f64).ln()
}

/// Decide whether a column is a quantized variable: a mixture must beat the
/// single Gaussian on BIC and at least one of its components must fail the
/// normality test.
pub fn discretization_test(name: &str, column: &[f64], streams: &Streams) -> ColumnReport {
    let n = column.len();
    let mut bic = [f64::INFINITY; 3];
    if n < MIN_TEST_LENGTH {
        warn!("column `{name}` has {n} values; kept continuous without testing");
        return ColumnReport::continuous(name, None, bic, vec![]);
    }
    let mut fits: Vec<Option<GmmFit>> = Vec::with_capacity(3);
    for k in 1..=3 {
        match fit_gmm(column, k, &mut streams.stream("gmm", &[k as u64])) {
            Ok(f) => {
                bic[k - 1] = gmm_bic(&f, n);
                fits.push(Some(f));
            }
            Err(e) => {
                warn!("column `{name}`: {k}-component fit failed: {e}");
                fits.push(None);
            }
        }
    }
    if fits[0].is_none() {
        warn!("column `{name}` could not be tested; kept continuous");
        return ColumnReport::continuous(name, None, bic, vec![]);
    }
    let best = (0..3).fold(0, |b, k| if bic[k] < bic[b] { k } else { b });
    let chosen = MixtureModel::from_k(best + 1);
    if best == 0 {
        return ColumnReport::continuous(name, Some(chosen), bic, vec![]);
    }
    let fit = fits[best].as_ref().expect("winning fit exists");
    let mut order: Vec<usize> = (0..fit.k()).collect();
    order.sort_by(|&a, &b| fit.means[a].total_cmp(&fit.means[b]));
    let mut rank = vec![0; fit.k()];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r;
    }
    let raw: Vec<usize> = column.iter().map(|&x| rank[fit.assign(x)]).collect();
    let mut members = vec![Vec::new(); fit.k()];
    for (&x, &c) in column.iter().zip(&raw) {
        members[c].push(x);
    }
    let sw_pvalues: Vec<f64> =
        members.iter().map(|m| if m.len() >= 3 { shapiro_wilk(m).map_or(f64::NAN, |r| r.p_value) } else { f64::NAN }).collect();
    if !sw_pvalues.iter().any(|&p| p < SW_ALPHA) {
        return ColumnReport::continuous(name, Some(chosen), bic, sw_pvalues);
    }
    // Drop empty components so codes are consecutive.
    let mut remap = vec![usize::MAX; fit.k()];
    let mut levels = 0;
    for (c, m) in members.iter().enumerate() {
        if !m.is_empty() {
            remap[c] = levels;
            levels += 1;
        }
    }
    if levels < 2 {
        return ColumnReport::continuous(name, Some(chosen), bic, sw_pvalues);
    }
    let codes = raw.iter().map(|&c| remap[c]).collect();
    ColumnReport { name: name.to_string(), chosen: Some(chosen), bic, sw_pvalues, decision: Decision::Discrete { levels }, codes: Some(codes) }
}
