use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{LearnParams, Learner};
use crate::decorrelate::LatentState;
use crate::error::{Error, Result};
use crate::graphs::{meek_close, Cpdag};
use crate::model::MixedDataset;

/// The last `m` states, or a config error when fewer exist.
pub fn latest(states: &[LatentState], m: usize) -> Result<&[LatentState]> {
    if m == 0 || states.len() < m {
        return Err(Error::Config(format!("need {m} de-correlated states, have {}", states.len())));
    }
    Ok(&states[states.len() - m..])
}

/// Majority vote over graphs. An edge is kept when present in at least
/// ⌈M/2⌉ graphs; among those, directed occurrences count 1 toward their
/// orientation and undirected ones 0.5 toward each. An orientation holding at
/// least 2/3 of that mass is kept, otherwise the edge stays undirected.
pub fn aggregate_consensus(graphs: &[Cpdag]) -> Result<Cpdag> {
    let Some(first) = graphs.first() else {
        return Err(Error::Config("no graphs to aggregate".into()));
    };
    let p = first.p();
    if graphs.iter().any(|g| g.p() != p) {
        return Err(Error::Input("graphs disagree on node count".into()));
    }
    let m = graphs.len();
    let need = m.div_ceil(2);
    let mut out = Cpdag::empty(p);
    for a in 0..p {
        for b in (a + 1)..p {
            let (mut present, mut ab, mut ba) = (0usize, 0.0, 0.0);
            for g in graphs {
                if g.is_directed(a, b) {
                    present += 1;
                    ab += 1.0;
                } else if g.is_directed(b, a) {
                    present += 1;
                    ba += 1.0;
                } else if g.is_undirected(a, b) {
                    present += 1;
                    ab += 0.5;
                    ba += 0.5;
                }
            }
            if present < need {
                continue;
            }
            let mass = present as f64;
            if 3.0 * ab >= 2.0 * mass {
                out.set_directed(a, b);
            } else if 3.0 * ba >= 2.0 * mass {
                out.set_directed(b, a);
            } else {
                out.set_undirected(a, b);
            }
        }
    }
    Ok(meek_close(&out))
}

/// Learner on each of the last `m` de-correlated matrices, then a vote.
pub fn consensus_estimate(states: &[LatentState], learner: Learner, params: &LearnParams, m: usize) -> Result<Cpdag> {
    let use_states = latest(states, m)?;
    let graphs: Vec<Cpdag> = use_states.par_iter().map(|s| learner.learn(&s.z_tilde, params)).collect();
    aggregate_consensus(&graphs)
}

/// Learner once on the entrywise mean of the last `m` de-correlated matrices.
pub fn average_estimate(states: &[LatentState], learner: Learner, params: &LearnParams, m: usize) -> Result<Cpdag> {
    let use_states = latest(states, m)?;
    let mut mean = DMatrix::zeros(use_states[0].z_tilde.nrows(), use_states[0].z_tilde.ncols());
    for s in use_states {
        mean += &s.z_tilde;
    }
    mean /= m as f64;
    Ok(learner.learn(&mean, params))
}

/// Learner on the raw data with every column z-scored.
pub fn baseline_estimate(x: &MixedDataset, learner: Learner, params: &LearnParams) -> Cpdag {
    learner.learn(&x.zscored(), params)
}
