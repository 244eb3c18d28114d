//! End-to-end estimation: pre-estimation, covariance, de-correlation and a
//! structure-learning strategy, plus fitting SEM parameters to the result.

use std::time::Instant;

use log::info;
use nalgebra::{DMatrix, DVector};

use crate::covest::{estimate_block_cov, CovReport};
use crate::decorrelate::{algorithm2, decorrelate_continuous, DecorrelateConfig, LatentState};
use crate::error::{Error, Result};
use crate::graphs::Cpdag;
use crate::learn::{average_estimate, baseline_estimate, consensus_estimate, latest, LearnParams, Learner};
use crate::mathcore::linalg::least_squares;
use crate::model::{BlockCovariance, DagModel, MixedDataset, VariableSpec};
use crate::preestimate::{algorithm1, baseline_parents, PreEstimate};
use crate::rng::Streams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Baseline,
    Average,
    Consensus,
    /// Consensus with the unit covariance fixed to the identity.
    ConsensusIdent,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Baseline, Strategy::Average, Strategy::Consensus, Strategy::ConsensusIdent];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::Average => "average",
            Strategy::Consensus => "consensus",
            Strategy::ConsensusIdent => "consensus-ident",
        }
    }

    pub fn parse(s: &str) -> Option<Strategy> {
        Strategy::ALL.into_iter().find(|st| st.name() == s)
    }

    /// Whether the strategy needs a block assignment.
    pub fn uses_blocks(&self) -> bool {
        matches!(self, Strategy::Average | Strategy::Consensus)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineParams {
    pub learner: Learner,
    pub learn: LearnParams,
    pub decorrelate: DecorrelateConfig,
    /// Number of trailing de-correlated states used by average/consensus.
    pub m: usize,
}

impl PipelineParams {
    pub fn for_dimension(p: usize, learner: Learner) -> Self {
        PipelineParams { learner, learn: LearnParams::for_dimension(p), decorrelate: DecorrelateConfig::default(), m: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub strategy: Strategy,
    pub graph: Cpdag,
    pub pre: Option<PreEstimate>,
    pub cov: Option<BlockCovariance>,
    pub cov_report: Option<CovReport>,
    pub states: Vec<LatentState>,
    pub timings: Vec<StageTiming>,
}

fn timed<T>(timings: &mut Vec<StageTiming>, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(Error::in_stage(stage))?;
    let seconds = start.elapsed().as_secs_f64();
    info!("stage {stage}: {seconds:.3}s");
    timings.push(StageTiming { stage, seconds });
    Ok(out)
}

/// Everything upstream of structure learning for the de-correlated strategies.
#[derive(Debug, Clone)]
pub struct LatentStages {
    pub pre: PreEstimate,
    pub cov: BlockCovariance,
    pub cov_report: Option<CovReport>,
    pub states: Vec<LatentState>,
    pub timings: Vec<StageTiming>,
}

/// Baseline parents, pre-estimation, covariance (or the identity when
/// `identity` is set) and de-correlation. Independent of the learner.
pub fn latent_stages(x: &MixedDataset, identity: bool, params: &PipelineParams, streams: &Streams) -> Result<LatentStages> {
    let mut timings = Vec::new();
    let parents = timed(&mut timings, "baseline_parents", || Ok(baseline_parents(x, &params.learn)))?;
    let pre = timed(&mut timings, "preestimate", || algorithm1(x, &parents))?;
    let groups = x.block_groups();
    let (cov, cov_report) = if identity {
        (BlockCovariance::identity(&groups), None)
    } else {
        let (c, r) = timed(&mut timings, "covariance", || estimate_block_cov(x, &pre, &groups))?;
        (c, Some(r))
    };
    let states = timed(&mut timings, "decorrelate", || algorithm2(x, &pre, &cov, &params.decorrelate, &streams.child("decorrelate", &[])))?;
    Ok(LatentStages { pre, cov, cov_report, states, timings })
}

/// Structure stage of a de-correlated strategy on existing states.
pub fn strategy_graph(states: &[LatentState], strategy: Strategy, params: &PipelineParams) -> Result<Cpdag> {
    let m = params.m.min(states.len());
    match strategy {
        Strategy::Baseline => Err(Error::Config("baseline does not use latent states".into())),
        Strategy::Average => average_estimate(states, params.learner, &params.learn, m),
        _ => consensus_estimate(states, params.learner, &params.learn, m),
    }
}

pub fn run_pipeline(x: &MixedDataset, strategy: Strategy, params: &PipelineParams, streams: &Streams) -> Result<PipelineOutput> {
    if params.m == 0 {
        return Err(Error::Config("m must be positive".into()));
    }
    if strategy == Strategy::Baseline {
        let mut timings = Vec::new();
        let graph = timed(&mut timings, "structure", || Ok(baseline_estimate(x, params.learner, &params.learn)))?;
        return Ok(PipelineOutput { strategy, graph, pre: None, cov: None, cov_report: None, states: Vec::new(), timings });
    }
    let LatentStages { pre, cov, cov_report, states, mut timings } =
        latent_stages(x, strategy == Strategy::ConsensusIdent, params, streams)?;
    let graph = timed(&mut timings, "structure", || strategy_graph(&states, strategy, params))?;
    Ok(PipelineOutput { strategy, graph, pre: Some(pre), cov: Some(cov), cov_report, states, timings })
}

/// Specs of `x` with discrete columns carrying the given thresholds.
fn specs_with_thresholds(x: &MixedDataset, thresholds: &[Option<Vec<f64>>]) -> Result<Vec<VariableSpec>> {
    x.specs()
        .iter()
        .zip(thresholds)
        .map(|(s, t)| match t {
            Some(t) if s.is_discrete() => VariableSpec::with_thresholds(s.name.clone(), t.clone()),
            _ => Ok(s.clone()),
        })
        .collect()
}

/// SEM parameters for the pipeline's graph.
///
/// The graph is replaced by one DAG in its class. Baseline refits the
/// pre-estimation on that DAG's parents. De-correlated strategies regress the
/// mean of the last `m` de-correlated states on the de-correlated parents
/// and keep the pre-estimated thresholds.
pub fn fit_model(x: &MixedDataset, out: &PipelineOutput, m: usize) -> Result<DagModel> {
    let dag = out.graph.consistent_extension();
    let parents = dag.parent_sets();
    let p = x.p();
    let (weights, thresholds) = match (&out.pre, &out.cov) {
        (Some(pre), Some(cov)) if !out.states.is_empty() => {
            let use_states = latest(&out.states, m.min(out.states.len()))?;
            let mut z_bar = DMatrix::zeros(x.n(), p);
            for s in use_states {
                z_bar += &s.z_tilde;
            }
            z_bar /= use_states.len() as f64;
            let x_tilde = decorrelate_continuous(x.values(), cov)?;
            let mut w = DMatrix::zeros(p, p);
            for (j, pa) in parents.iter().enumerate() {
                if pa.is_empty() {
                    continue;
                }
                let design = DMatrix::from_fn(x.n(), pa.len(), |i, k| x_tilde[(i, pa[k])]);
                let y: DVector<f64> = z_bar.column(j).into_owned();
                let (coef, _) = least_squares(&design, &y);
                for (k, &pk) in pa.iter().enumerate() {
                    w[(pk, j)] = coef[k];
                }
            }
            (w, pre.thresholds.clone())
        }
        _ => {
            let pre = algorithm1(x, &parents)?;
            (pre.beta, pre.thresholds)
        }
    };
    let specs = specs_with_thresholds(x, &thresholds)?;
    DagModel::new(dag, weights, specs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate, SimulationSettings};

    fn small() -> MixedDataset {
        simulate(&SimulationSettings::standard(40, 8), 3).unwrap().data
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(Strategy::parse(s.name()), Some(s));
        }
        assert_eq!(Strategy::parse("majority"), None);
    }

    #[test]
    fn baseline_skips_later_stages() {
        let x = small();
        let params = PipelineParams::for_dimension(x.p(), Learner::Pc);
        let out = run_pipeline(&x, Strategy::Baseline, &params, &Streams::new(1)).unwrap();
        assert!(out.pre.is_none() && out.cov.is_none() && out.states.is_empty());
        assert_eq!(out.timings.iter().map(|t| t.stage).collect::<Vec<_>>(), vec!["structure"]);
    }

    #[test]
    fn ident_strategy_injects_identity() {
        let x = small();
        let mut params = PipelineParams::for_dimension(x.p(), Learner::Pc);
        params.decorrelate.t_max = 3;
        params.m = 2;
        let out = run_pipeline(&x, Strategy::ConsensusIdent, &params, &Streams::new(1)).unwrap();
        assert!(out.cov_report.is_none());
        assert!(!out.timings.iter().any(|t| t.stage == "covariance"));
        let cov = out.cov.unwrap();
        assert_eq!(cov.to_dense(), DMatrix::identity(x.n(), x.n()));
    }

    #[test]
    fn fitted_model_respects_graph() {
        let x = small();
        let mut params = PipelineParams::for_dimension(x.p(), Learner::Hybrid);
        params.decorrelate.t_max = 3;
        params.m = 2;
        for s in [Strategy::Baseline, Strategy::Consensus] {
            let out = run_pipeline(&x, s, &params, &Streams::new(2)).unwrap();
            let model = fit_model(&x, &out, params.m).unwrap();
            for (k, j) in model.dag.edges() {
                assert!(out.graph.adjacent(k, j));
            }
            for (j, spec) in model.specs.iter().enumerate() {
                assert_eq!(spec.is_discrete(), x.specs()[j].is_discrete());
                if spec.is_discrete() {
                    assert!(spec.thresholds.is_some());
                }
            }
        }
    }
}
