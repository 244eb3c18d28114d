//! Desk-scale replication studies with pass/fail checks.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;

use crate::covest::estimate_block_cov;
use crate::decorrelate::decorrelate_continuous;
use crate::error::{Error, Result};
use crate::evaluate::{blocked_cv, correlation_summary, cov_rmse, cpdag_f1, CorrelationSummary, LoglikConfig};
use crate::graphs::dag_to_cpdag;
use crate::io::{fmt_f64, write_table};
use crate::learn::{baseline_estimate, LearnParams, Learner};
use crate::model::MixedDataset;
use crate::pipeline::{latent_stages, strategy_graph, PipelineParams, Strategy};
use crate::preestimate::{algorithm1, baseline_parents};
use crate::rng::Streams;
use crate::simulate::{covariance_factors, draw_block_noise, simulate, SimulationSettings};

/// Largest per-step drop of the pre-estimation likelihood still counted as monotone.
pub const MONOTONE_SLACK: f64 = 1e-8;
pub const CONVERGENCE_TOL: f64 = 1e-3;
pub const CONVERGENCE_ITERS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    /// Mean within-block unit correlation before and after de-correlation.
    Fig4Desk,
    /// CPDAG F1 of baseline, average and consensus over seeds.
    Fig3Desk,
    /// Covariance RMSE as p grows, estimated against oracle parents.
    Fig2Desk,
    /// Pre-estimation convergence and likelihood monotonicity.
    S1Desk,
    /// Blocked cross-validation test log-likelihood.
    CvDesk,
}

impl Study {
    pub const ALL: [Study; 5] = [Study::Fig4Desk, Study::Fig3Desk, Study::Fig2Desk, Study::S1Desk, Study::CvDesk];

    pub fn name(&self) -> &'static str {
        match self {
            Study::Fig4Desk => "fig4-desk",
            Study::Fig3Desk => "fig3-desk",
            Study::Fig2Desk => "fig2-desk",
            Study::S1Desk => "s1-desk",
            Study::CvDesk => "cv-desk",
        }
    }

    pub fn parse(s: &str) -> Option<Study> {
        Study::ALL.into_iter().find(|st| st.name() == s)
    }

    /// Wall-clock budget in seconds.
    pub fn budget(&self) -> f64 {
        match self {
            Study::Fig4Desk => 300.0,
            Study::Fig3Desk => 1800.0,
            Study::Fig2Desk => 1200.0,
            Study::S1Desk => 120.0,
            Study::CvDesk => 1800.0,
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compare {
    AtLeast,
    AtMost,
    Above,
}

impl Compare {
    pub fn symbol(&self) -> &'static str {
        match self {
            Compare::AtLeast => ">=",
            Compare::AtMost => "<=",
            Compare::Above => ">",
        }
    }

    pub fn holds(&self, value: f64, threshold: f64) -> bool {
        match self {
            Compare::AtLeast => value >= threshold,
            Compare::AtMost => value <= threshold,
            Compare::Above => value > threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub compare: Compare,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, compare: Compare, threshold: f64) -> Self {
        Check { name: name.into(), value, compare, threshold, pass: compare.holds(value, threshold) }
    }
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub study: Study,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl StudyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Seeds and sizes shared by the studies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudySettings {
    /// First seed; multi-seed studies use `seed..seed + seeds`.
    pub seed: u64,
    pub seeds: usize,
}

impl Default for StudySettings {
    fn default() -> Self {
        StudySettings { seed: 0, seeds: 10 }
    }
}

fn seed_range(s: &StudySettings) -> Vec<u64> {
    (s.seed..s.seed + s.seeds as u64).collect()
}

fn continuous_block(x: &MixedDataset) -> DMatrix<f64> {
    let cont = x.continuous_columns();
    DMatrix::from_fn(x.n(), cont.len(), |i, k| x.values()[(i, cont[k])])
}

fn histogram_rows(s: &CorrelationSummary) -> Vec<Vec<String>> {
    s.histogram.iter().map(|(lo, c)| vec![fmt_f64(*lo), fmt_f64(lo + crate::evaluate::HIST_BIN_WIDTH), c.to_string()]).collect()
}

pub struct Fig4Result {
    pub before: CorrelationSummary,
    pub after: CorrelationSummary,
}

/// Correlation of continuous columns before and after L̂ᵀ on one
/// (n = 100, p = 100) dataset.
pub fn fig4_desk(seed: u64) -> Result<Fig4Result> {
    let inst = simulate(&SimulationSettings::standard(100, 100), seed)?;
    let x = &inst.data;
    let groups = x.block_groups();
    let cont = continuous_block(x);
    let before = correlation_summary(&cont, &groups)?;
    let parents = baseline_parents(x, &LearnParams::for_dimension(x.p()));
    let pre = algorithm1(x, &parents)?;
    let (cov, _) = estimate_block_cov(x, &pre, &groups)?;
    let after = correlation_summary(&decorrelate_continuous(&cont, &cov)?, &groups)?;
    Ok(Fig4Result { before, after })
}

/// One F1 table row.
#[derive(Debug, Clone, PartialEq)]
pub struct F1Row {
    pub learner: Learner,
    pub seed: u64,
    pub strategy: Strategy,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

/// F1 of baseline, average and consensus at (n = 100, p = 100, s = 2p) for
/// each seed and learner. The de-correlation stages are shared by the learners.
pub fn fig3_desk(seeds: &[u64], learners: &[Learner]) -> Result<Vec<F1Row>> {
    let mut rows = Vec::new();
    for &seed in seeds {
        let inst = simulate(&SimulationSettings::standard(100, 100), seed)?;
        let x = &inst.data;
        let truth = dag_to_cpdag(&inst.model.dag)?;
        let streams = Streams::new(seed);
        let base = PipelineParams::for_dimension(x.p(), Learner::Hybrid);
        let latent = latent_stages(x, false, &base, &streams)?;
        for &learner in learners {
            let params = PipelineParams { learner, ..base.clone() };
            let graphs = [
                (Strategy::Baseline, baseline_estimate(x, learner, &params.learn)),
                (Strategy::Average, strategy_graph(&latent.states, Strategy::Average, &params)?),
                (Strategy::Consensus, strategy_graph(&latent.states, Strategy::Consensus, &params)?),
            ];
            for (strategy, g) in graphs {
                let s = cpdag_f1(&truth, &g)?;
                rows.push(F1Row { learner, seed, strategy, f1: s.f1, precision: s.precision, recall: s.recall });
            }
        }
    }
    Ok(rows)
}

pub fn mean_f1(rows: &[F1Row], learner: Learner, strategy: Strategy) -> f64 {
    let v: Vec<f64> = rows.iter().filter(|r| r.learner == learner && r.strategy == strategy).map(|r| r.f1).collect();
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovRow {
    pub p: usize,
    pub seed: u64,
    pub estimated: f64,
    pub oracle: f64,
}

pub const FIG2_DIMENSIONS: [usize; 3] = [100, 200, 500];

/// Covariance RMSE at n = 100 with baseline-learner parents and with the
/// true parents.
pub fn fig2_desk(seeds: &[u64], dims: &[usize]) -> Result<Vec<CovRow>> {
    let mut rows = Vec::new();
    for &p in dims {
        for &seed in seeds {
            let inst = simulate(&SimulationSettings::standard(100, p), seed)?;
            let x = &inst.data;
            let groups = x.block_groups();
            let est_parents = baseline_parents(x, &LearnParams::for_dimension(p));
            let (est, _) = estimate_block_cov(x, &algorithm1(x, &est_parents)?, &groups)?;
            let (orc, _) = estimate_block_cov(x, &algorithm1(x, &inst.model.dag.parent_sets())?, &groups)?;
            rows.push(CovRow { p, seed, estimated: cov_rmse(&est, &inst.cov)?, oracle: cov_rmse(&orc, &inst.cov)? });
        }
    }
    Ok(rows)
}

fn mean_by_p(rows: &[CovRow], p: usize, f: impl Fn(&CovRow) -> f64) -> f64 {
    let v: Vec<f64> = rows.iter().filter(|r| r.p == p).map(f).collect();
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Per discrete node: first outer iteration (1-based) with max(d_β, d_T)
/// below tolerance, and the largest likelihood drop between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub node: usize,
    pub converged_at: Option<usize>,
    pub iterations: usize,
    pub max_drop: f64,
}

/// Pre-estimation on (n = 100, p = 50) with the true parent sets.
pub fn s1_desk(seed: u64) -> Result<Vec<ConvergenceRow>> {
    let inst = simulate(&SimulationSettings::standard(100, 50), seed)?;
    let x = &inst.data;
    let pre = algorithm1(x, &inst.model.dag.parent_sets())?;
    Ok(x
        .discrete_columns()
        .into_iter()
        .map(|j| {
            let converged_at = pre.trace[j].iter().position(|(db, dt)| db.max(*dt) < CONVERGENCE_TOL).map(|i| i + 1);
            let ll = &pre.loglik_trace[j];
            let max_drop = ll.windows(2).map(|w| (w[0] - w[1]) / (1.0 + w[0].abs())).fold(f64::NEG_INFINITY, f64::max);
            ConvergenceRow { node: j, converged_at, iterations: pre.trace[j].len(), max_drop }
        })
        .collect())
}

pub struct CvResult {
    pub strategies: Vec<Strategy>,
    pub rows: Vec<Vec<f64>>,
    pub medians: Vec<f64>,
}

pub const CV_STRATEGIES: [Strategy; 3] = [Strategy::Baseline, Strategy::ConsensusIdent, Strategy::Consensus];
pub const CV_BACKGROUND_COLUMNS: usize = 100;

/// Ten-fold blocked CV on (n = 200, p = 100) data with hybrid learning.
/// Background columns are noise vectors drawn from the true unit covariance.
pub fn cv_desk(seed: u64) -> Result<CvResult> {
    let inst = simulate(&SimulationSettings::standard(200, 100), seed)?;
    let factors = covariance_factors(&inst.cov)?;
    let streams = Streams::new(seed);
    let mut rng = streams.stream("background", &[]);
    let mut bg = DMatrix::zeros(inst.data.n(), CV_BACKGROUND_COLUMNS);
    for c in 0..CV_BACKGROUND_COLUMNS {
        bg.set_column(c, &draw_block_noise(&inst.cov, &factors, &mut rng));
    }
    let params = PipelineParams::for_dimension(inst.data.p(), Learner::Hybrid);
    let table = blocked_cv(&inst.data, Some(&bg), &CV_STRATEGIES, &params, 10, &LoglikConfig::default(), &streams)?;
    let medians = (0..CV_STRATEGIES.len()).map(|s| table.median(s)).collect();
    let rows = table.rows.iter().map(|r| r.iter().map(|e| e.value).collect()).collect();
    Ok(CvResult { strategies: CV_STRATEGIES.to_vec(), rows, medians })
}

fn write_opt(out: Option<&Path>, file: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    match out {
        Some(dir) => write_table(&dir.join(file), header, rows),
        None => Ok(()),
    }
}

/// Run one study, writing its tables under `out` when given.
pub fn run_study(study: Study, settings: &StudySettings, out: Option<&Path>) -> Result<StudyReport> {
    let start = Instant::now();
    let mut checks = Vec::new();
    match study {
        Study::Fig4Desk => {
            let r = fig4_desk(settings.seed)?;
            write_opt(out, "fig4_before_hist.tsv", &["bin_lo", "bin_hi", "count"], &histogram_rows(&r.before))?;
            write_opt(out, "fig4_after_hist.tsv", &["bin_lo", "bin_hi", "count"], &histogram_rows(&r.after))?;
            write_opt(
                out,
                "fig4_means.tsv",
                &["stage", "mean", "mean_abs", "pairs"],
                &[
                    vec!["before".into(), fmt_f64(r.before.mean), fmt_f64(r.before.mean_abs), r.before.values.len().to_string()],
                    vec!["after".into(), fmt_f64(r.after.mean), fmt_f64(r.after.mean_abs), r.after.values.len().to_string()],
                ],
            )?;
            checks.push(Check::new("mean_corr_before", r.before.mean, Compare::AtLeast, 0.4));
            checks.push(Check::new("mean_corr_after", r.after.mean, Compare::AtMost, 0.15));
        }
        Study::Fig3Desk => {
            let learners = [Learner::Pc, Learner::Hybrid];
            let rows = fig3_desk(&seed_range(settings), &learners)?;
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.learner.name().into(),
                        r.seed.to_string(),
                        r.strategy.name().into(),
                        fmt_f64(r.f1),
                        fmt_f64(r.precision),
                        fmt_f64(r.recall),
                    ]
                })
                .collect();
            write_opt(out, "fig3_f1.tsv", &["learner", "seed", "strategy", "f1", "precision", "recall"], &table)?;
            for l in learners {
                let gain = mean_f1(&rows, l, Strategy::Consensus) - mean_f1(&rows, l, Strategy::Baseline);
                checks.push(Check::new(format!("{}_consensus_minus_baseline_f1", l.name()), gain, Compare::AtLeast, 0.05));
            }
        }
        Study::Fig2Desk => {
            let rows = fig2_desk(&seed_range(settings), &FIG2_DIMENSIONS)?;
            let table: Vec<Vec<String>> =
                rows.iter().map(|r| vec![r.p.to_string(), r.seed.to_string(), fmt_f64(r.estimated), fmt_f64(r.oracle)]).collect();
            write_opt(out, "fig2_cov_rmse.tsv", &["p", "seed", "estimated_parents", "oracle_parents"], &table)?;
            let est: Vec<f64> = FIG2_DIMENSIONS.iter().map(|&p| mean_by_p(&rows, p, |r| r.estimated)).collect();
            let orc: Vec<f64> = FIG2_DIMENSIONS.iter().map(|&p| mean_by_p(&rows, p, |r| r.oracle)).collect();
            for (curve, v) in [("estimated", &est), ("oracle", &orc)] {
                for w in 0..v.len() - 1 {
                    let (a, b) = (FIG2_DIMENSIONS[w], FIG2_DIMENSIONS[w + 1]);
                    checks.push(Check::new(format!("{curve}_rmse_drop_p{a}_to_p{b}"), v[w] - v[w + 1], Compare::Above, 0.0));
                }
            }
            for (k, &p) in FIG2_DIMENSIONS.iter().enumerate() {
                checks.push(Check::new(format!("estimated_minus_oracle_p{p}"), (est[k] - orc[k]).abs(), Compare::AtMost, 0.05));
            }
        }
        Study::S1Desk => {
            let rows = s1_desk(settings.seed)?;
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.node.to_string(),
                        r.converged_at.map_or("-".into(), |i| i.to_string()),
                        r.iterations.to_string(),
                        fmt_f64(r.max_drop),
                    ]
                })
                .collect();
            write_opt(out, "s1_convergence.tsv", &["node", "converged_at", "iterations", "max_relative_drop"], &table)?;
            let worst = rows.iter().map(|r| r.converged_at.map_or(f64::INFINITY, |i| i as f64)).fold(0.0, f64::max);
            let drop = rows.iter().map(|r| r.max_drop).fold(f64::NEG_INFINITY, f64::max);
            checks.push(Check::new("slowest_node_iterations", worst, Compare::AtMost, CONVERGENCE_ITERS as f64));
            checks.push(Check::new("largest_relative_loglik_drop", drop.max(0.0), Compare::AtMost, MONOTONE_SLACK));
        }
        Study::CvDesk => {
            let r = cv_desk(settings.seed)?;
            let mut header = vec!["fold"];
            header.extend(r.strategies.iter().map(|s| s.name()));
            let table: Vec<Vec<String>> = r
                .rows
                .iter()
                .enumerate()
                .map(|(k, row)| std::iter::once(k.to_string()).chain(row.iter().map(|v| fmt_f64(*v))).collect())
                .collect();
            write_opt(out, "cv_loglik.tsv", &header, &table)?;
            let med = |s: Strategy| r.medians[r.strategies.iter().position(|x| *x == s).expect("strategy evaluated")];
            let c = med(Strategy::Consensus);
            checks.push(Check::new("consensus_minus_ident_median", c - med(Strategy::ConsensusIdent), Compare::Above, 0.0));
            checks.push(Check::new("consensus_minus_baseline_median", c - med(Strategy::Baseline), Compare::Above, 0.0));
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    checks.push(Check::new("runtime_seconds", seconds, Compare::AtMost, study.budget()));
    Ok(StudyReport { study, checks, seconds })
}

pub fn report_rows(reports: &[StudyReport]) -> Vec<Vec<String>> {
    reports
        .iter()
        .flat_map(|r| {
            r.checks.iter().map(move |c| {
                vec![
                    r.study.name().to_string(),
                    c.name.clone(),
                    fmt_f64(c.value),
                    c.compare.symbol().to_string(),
                    fmt_f64(c.threshold),
                    if c.pass { "PASS" } else { "FAIL" }.to_string(),
                ]
            })
        })
        .collect()
}

pub const REPORT_HEADER: [&str; 6] = ["study", "check", "value", "compare", "threshold", "result"];

/// Run studies in order; tables go to `out/<study>/`, checks to `out/report.tsv`.
pub fn run_studies(studies: &[Study], settings: &StudySettings, out: &Path) -> Result<Vec<StudyReport>> {
    if studies.is_empty() {
        return Err(Error::Config("no studies requested".into()));
    }
    let reports: Vec<StudyReport> =
        studies.iter().map(|s| run_study(*s, settings, Some(&out.join(s.name())))).collect::<Result<_>>()?;
    write_table(&out.join("report.tsv"), &REPORT_HEADER, &report_rows(&reports))?;
    Ok(reports)
}
