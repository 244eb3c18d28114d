use log::warn;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::loglik::{test_loglik, LoglikConfig, LoglikEstimate};
use crate::covest::estimate_block_cov;
use crate::error::{Error, Result};
use crate::model::{zscore_columns, BlockCovariance, MixedDataset, VariableSpec};
use crate::pipeline::{fit_model, run_pipeline, PipelineParams, Strategy};
use crate::preestimate::PreEstimate;
use crate::rng::Streams;

#[derive(Debug, Clone, PartialEq)]
pub struct CvTable {
    pub strategies: Vec<Strategy>,
    /// `rows[k][s]`: fold k, strategy s.
    pub rows: Vec<Vec<LoglikEstimate>>,
    pub test_units: Vec<usize>,
}

impl CvTable {
    pub fn column(&self, s: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[s].value).collect()
    }

    pub fn median(&self, s: usize) -> f64 {
        median(self.column(s))
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Blocks shuffled and dealt round-robin into `folds` groups of units.
pub fn assign_folds(groups: &[Vec<usize>], folds: usize, streams: &Streams) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::Config("need at least two folds".into()));
    }
    if groups.len() < folds {
        return Err(Error::Config(format!("{} blocks cannot fill {folds} folds", groups.len())));
    }
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(&mut streams.stream("folds", &[]));
    let mut out = vec![Vec::new(); folds];
    for (pos, &g) in order.iter().enumerate() {
        out[pos % folds].extend_from_slice(&groups[g]);
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

/// Unit covariance for `groups` from background features only. Columns are
/// used as given, so standardize them beforehand.
pub fn background_cov(background: &DMatrix<f64>, groups: &[Vec<usize>]) -> Result<BlockCovariance> {
    let (n, q) = background.shape();
    if q < 1 {
        return Err(Error::Input("background matrix has no columns".into()));
    }
    let specs = (0..q).map(|k| VariableSpec::continuous(format!("bg{k}"))).collect();
    let mut labels = vec![0; n];
    for (b, g) in groups.iter().enumerate() {
        for &u in g {
            labels[u] = b;
        }
    }
    let ids = (0..n).map(|i| i.to_string()).collect();
    let bg = MixedDataset::new(background.clone(), specs, ids, labels)?;
    let pre = PreEstimate {
        thresholds: vec![None; q],
        beta: DMatrix::zeros(q, q),
        parents: vec![Vec::new(); q],
        trace: vec![Vec::new(); q],
        loglik_trace: vec![Vec::new(); q],
    };
    Ok(estimate_block_cov(&bg, &pre, groups)?.0)
}

/// Blocked K-fold cross-validation of held-out log-likelihood per cell.
///
/// Training sees only training-block rows. The test covariance comes from
/// `background` restricted to the test units (identity when absent) and is
/// shared by every strategy within a fold.
pub fn blocked_cv(
    x: &MixedDataset,
    background: Option<&DMatrix<f64>>,
    strategies: &[Strategy],
    params: &PipelineParams,
    folds: usize,
    loglik: &LoglikConfig,
    streams: &Streams,
) -> Result<CvTable> {
    if strategies.is_empty() {
        return Err(Error::Config("no strategies to evaluate".into()));
    }
    if let Some(bg) = background {
        if bg.nrows() != x.n() {
            return Err(Error::Input("background rows differ from data rows".into()));
        }
    } else {
        warn!("no background matrix; test covariance fixed to the identity");
    }
    let background = background.map(zscore_columns);
    let fold_units = assign_folds(&x.block_groups(), folds, streams)?;
    let rows: Vec<Result<Vec<LoglikEstimate>>> = fold_units
        .par_iter()
        .enumerate()
        .map(|(k, test)| {
            let mut in_test = vec![false; x.n()];
            for &u in test {
                in_test[u] = true;
            }
            let train: Vec<usize> = (0..x.n()).filter(|&u| !in_test[u]).collect();
            let x_train = x.select_rows(&train);
            let x_test = x.select_rows(test);
            let groups = x_test.block_groups();
            let cov_test = match &background {
                Some(bg) => {
                    let rows = DMatrix::from_fn(test.len(), bg.ncols(), |r, c| bg[(test[r], c)]);
                    background_cov(&rows, &groups)?
                }
                None => BlockCovariance::identity(&groups),
            };
            let fold_streams = streams.child("fold", &[k as u64]);
            let cfg = LoglikConfig { seed: fold_streams.child("loglik", &[]).seed(), ..*loglik };
            strategies
                .iter()
                .map(|&s| {
                    let out = run_pipeline(&x_train, s, params, &fold_streams)?;
                    let model = fit_model(&x_train, &out, params.m)?;
                    test_loglik(&x_test, &model, &cov_test, &cfg)
                })
                .collect()
        })
        .collect();
    Ok(CvTable { strategies: strategies.to_vec(), rows: rows.into_iter().collect::<Result<_>>()?, test_units: fold_units.iter().map(Vec::len).collect() })
}
