//! Structure learners for i.i.d. continuous data and the strategies that
//! apply them to raw or de-correlated data.

mod citest;
mod hc;
mod pc;
mod strategy;

use nalgebra::DMatrix;

pub use citest::{correlation_matrix, CiTest};
pub use hc::{hc_search, BicScore, HcResult};
pub use pc::{orient_colliders, pc_from_test, pc_skeleton, Skeleton};
pub use strategy::{aggregate_consensus, average_estimate, baseline_estimate, consensus_estimate, latest};

use crate::graphs::{dag_to_cpdag, Cpdag, Dag};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnParams {
    pub alpha: f64,
    /// Largest conditioning set tried by the skeleton phase.
    pub max_cond: Option<usize>,
}

impl LearnParams {
    /// alpha = 0.01; conditioning sets capped at 3 once p ≥ 100.
    pub fn for_dimension(p: usize) -> Self {
        LearnParams { alpha: 0.01, max_cond: if p >= 100 { Some(3) } else { None } }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Learner {
    Pc,
    Hc,
    Hybrid,
}

impl Learner {
    pub fn name(&self) -> &'static str {
        match self {
            Learner::Pc => "pc",
            Learner::Hc => "hc",
            Learner::Hybrid => "hybrid",
        }
    }

    pub fn parse(s: &str) -> Option<Learner> {
        match s {
            "pc" => Some(Learner::Pc),
            "hc" => Some(Learner::Hc),
            "hybrid" => Some(Learner::Hybrid),
            _ => None,
        }
    }

    /// Learn a CPDAG from an n × p continuous matrix.
    pub fn learn(&self, data: &DMatrix<f64>, params: &LearnParams) -> Cpdag {
        match self {
            Learner::Pc => pc_learn(data, params),
            Learner::Hc => hc_learn(data, None),
            Learner::Hybrid => hybrid_learn(data, params),
        }
    }
}

pub fn pc_learn(data: &DMatrix<f64>, params: &LearnParams) -> Cpdag {
    pc_from_test(&CiTest::from_data(data), params)
}

pub fn hc_learn(data: &DMatrix<f64>, restrict: Option<&[(usize, usize)]>) -> Cpdag {
    dag_to_cpdag(&hc_search(data, restrict).dag).expect("search keeps the graph acyclic")
}

/// Hill climbing restricted to the skeleton found by the PC adjacency phase.
pub fn hybrid_dag(data: &DMatrix<f64>, params: &LearnParams) -> Dag {
    let sk = pc_skeleton(&CiTest::from_data(data), params);
    hc_search(data, Some(&sk.edges())).dag
}

pub fn hybrid_learn(data: &DMatrix<f64>, params: &LearnParams) -> Cpdag {
    dag_to_cpdag(&hybrid_dag(data, params)).expect("search keeps the graph acyclic")
}
