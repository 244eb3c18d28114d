use log::warn;
use nalgebra::DMatrix;

use crate::mathcore::linalg::{spd_inverse, SymMatrix};
use crate::mathcore::normal::std_normal_sf;

/// Correlation matrix plus effective sample size for Fisher-z tests.
#[derive(Debug, Clone)]
pub struct CiTest {
    corr: DMatrix<f64>,
    n: usize,
}

impl CiTest {
    /// From an n × p data matrix.
    pub fn from_data(data: &DMatrix<f64>) -> Self {
        CiTest { corr: correlation_matrix(data), n: data.nrows() }
    }

    pub fn from_correlation(corr: DMatrix<f64>, n: usize) -> Self {
        CiTest { corr, n }
    }

    pub fn p(&self) -> usize {
        self.corr.nrows()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.corr
    }

    /// Partial correlation of i and j given `s`; `None` if the conditioning
    /// submatrix is singular.
    pub fn partial_correlation(&self, i: usize, j: usize, s: &[usize]) -> Option<f64> {
        if s.is_empty() {
            return Some(self.corr[(i, j)]);
        }
        let idx: Vec<usize> = [i, j].iter().chain(s).copied().collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.corr[(idx[a], idx[b])]);
        let prec = spd_inverse(&SymMatrix::new(sub).ok()?).ok()?;
        let r = -prec[(0, 1)] / (prec[(0, 0)] * prec[(1, 1)]).sqrt();
        r.is_finite().then_some(r.clamp(-1.0, 1.0))
    }

    /// Two-sided p-value for zero partial correlation.
    pub fn fisher_z(&self, i: usize, j: usize, s: &[usize]) -> f64 {
        let Some(r) = self.partial_correlation(i, j, s) else {
            warn!("singular conditioning set in CI test ({i}, {j} | {s:?})");
            return 1.0;
        };
        let df = self.n as f64 - s.len() as f64 - 3.0;
        if df <= 0.0 {
            return 1.0;
        }
        let r = r.clamp(-1.0 + 1e-15, 1.0 - 1e-15);
        let z = r.atanh() * df.sqrt();
        (2.0 * std_normal_sf(z.abs())).min(1.0)
    }
}

/// Pearson correlation of the columns; constant columns get zero correlation.
pub fn correlation_matrix(data: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = data.shape();
    let mut centered = data.clone();
    let mut sd = vec![0.0; p];
    for j in 0..p {
        let mean = data.column(j).sum() / n as f64;
        for i in 0..n {
            centered[(i, j)] -= mean;
        }
        sd[j] = centered.column(j).norm();
    }
    let cross = centered.transpose() * &centered;
    DMatrix::from_fn(p, p, |a, b| {
        if a == b {
            1.0
        } else if sd[a] > 0.0 && sd[b] > 0.0 {
            (cross[(a, b)] / (sd[a] * sd[b])).clamp(-1.0, 1.0)
        } else {
            0.0
        }
    })
}
