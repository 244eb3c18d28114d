//! Random DAGs, SEM weights, block covariances and dependent mixed data.

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graphs::Dag;
use crate::mathcore::linalg::{cholesky_lower, SymMatrix};
use crate::model::{quantize, BlockCovariance, CovBlock, DagModel, MixedDataset, VariableSpec};
use crate::rng::Streams;

/// DAG with exactly `s` edges, oriented along a random node order.
pub fn random_dag<R: Rng + ?Sized>(p: usize, s: usize, rng: &mut R) -> Result<Dag> {
    let max = p * p.saturating_sub(1) / 2;
    if s > max {
        return Err(Error::Infeasible(format!("{s} edges requested but {p} nodes allow at most {max}")));
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    let mut picks = index::sample(rng, max, s).into_vec();
    picks.sort_unstable();
    let mut edges = Vec::with_capacity(s);
    for k in picks {
        let (a, b) = pair_from_index(k, p);
        edges.push((order[a], order[b]));
    }
    Dag::from_edges(p, &edges)
}

/// k-th pair (a, b), a < b, in row-major order of the strict upper triangle.
fn pair_from_index(mut k: usize, p: usize) -> (usize, usize) {
    let mut a = 0;
    while k >= p - a - 1 {
        k -= p - a - 1;
        a += 1;
    }
    (a, a + 1 + k)
}

/// Weights uniform on [−0.9, −0.6] ∪ [0.6, 0.9], one per edge (row-major order).
pub fn sample_weights<R: Rng + ?Sized>(g: &Dag, rng: &mut R) -> DMatrix<f64> {
    let p = g.p();
    let mut w = DMatrix::zeros(p, p);
    for (a, b) in g.edges() {
        let mag: f64 = rng.random_range(0.6..=0.9);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        w[(a, b)] = sign * mag;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockPattern {
    /// Σ_ij = θ for i ≠ j.
    Equal(f64),
    /// Σ_ij = θ^{|i−j|/5}.
    Toeplitz(f64),
}

impl BlockPattern {
    pub fn matrix(&self, m: usize) -> SymMatrix {
        let mat = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                return 1.0;
            }
            match *self {
                BlockPattern::Equal(theta) => theta,
                BlockPattern::Toeplitz(theta) => theta.powf((i as f64 - j as f64).abs() / 5.0),
            }
        });
        SymMatrix::new(mat).expect("pattern matrices are symmetric")
    }
}

/// Consecutive blocks with sizes uniform in `sizes`; the last block takes the
/// remainder and may be smaller. Each block is Equal (θ ~ U(0.4, 0.7)) or
/// Toeplitz (θ ~ U(0.1, 0.25)) with equal probability.
pub fn make_block_cov<R: Rng + ?Sized>(n: usize, sizes: (usize, usize), rng: &mut R) -> Result<(BlockCovariance, Vec<BlockPattern>)> {
    if n == 0 || sizes.0 == 0 || sizes.0 > sizes.1 {
        return Err(Error::Input(format!("cannot partition {n} units with sizes {sizes:?}")));
    }
    let mut blocks = Vec::new();
    let mut patterns = Vec::new();
    let mut start = 0;
    while start < n {
        let size = rng.random_range(sizes.0..=sizes.1).min(n - start);
        let pattern = if rng.random_bool(0.5) {
            BlockPattern::Equal(rng.random_range(0.4..0.7))
        } else {
            BlockPattern::Toeplitz(rng.random_range(0.1..0.25))
        };
        blocks.push(CovBlock { units: (start..start + size).collect(), sigma: pattern.matrix(size) });
        patterns.push(pattern);
        start += size;
    }
    Ok((BlockCovariance::new(n, blocks)?, patterns))
}

/// Each node discretized with probability `prob` at the given cut points.
pub fn random_specs<R: Rng + ?Sized>(p: usize, prob: f64, thresholds: &[f64], rng: &mut R) -> Result<Vec<VariableSpec>> {
    (0..p)
        .map(|j| {
            let name = format!("X{}", j + 1);
            if rng.random_bool(prob) {
                VariableSpec::with_thresholds(name, thresholds.to_vec())
            } else {
                Ok(VariableSpec::continuous(name))
            }
        })
        .collect()
}

/// Draw one n-vector from N(0, Σ) block by block.
pub fn draw_block_noise<R: Rng + ?Sized>(cov: &BlockCovariance, factors: &[DMatrix<f64>], rng: &mut R) -> DVector<f64> {
    let mut out = DVector::zeros(cov.n());
    for (b, l) in cov.blocks().iter().zip(factors) {
        let m = b.units.len();
        let u = DVector::from_iterator(m, (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let e = l * u;
        for (k, &unit) in b.units.iter().enumerate() {
            out[unit] = e[k];
        }
    }
    out
}

/// Per-block lower Cholesky factors of Σ itself.
pub fn covariance_factors(cov: &BlockCovariance) -> Result<Vec<DMatrix<f64>>> {
    cov.blocks().iter().map(|b| cholesky_lower(&b.sigma)).collect()
}

/// Generate X column by column in topological order: latent
/// z_j = X·β_j + ε_j with ε_j ~ N(0, Σ), quantized for discrete nodes.
/// Parents enter through their observed values.
pub fn gen_mixed_data(model: &DagModel, cov: &BlockCovariance, streams: &Streams) -> Result<MixedDataset> {
    let n = cov.n();
    let p = model.p();
    for s in &model.specs {
        if s.is_discrete() && s.thresholds.is_none() {
            return Err(Error::Input(format!("discrete node {} needs thresholds to simulate", s.name)));
        }
    }
    let factors = covariance_factors(cov)?;
    let order = model.dag.topological_order()?;
    let mut x = DMatrix::zeros(n, p);
    for &j in &order {
        let mut rng = streams.stream("noise", &[j as u64]);
        let eps = draw_block_noise(cov, &factors, &mut rng);
        let parents = model.dag.parents(j);
        for i in 0..n {
            let mut z = eps[i];
            for &k in &parents {
                z += x[(i, k)] * model.weights[(k, j)];
            }
            x[(i, j)] = match &model.specs[j].thresholds {
                Some(t) if model.specs[j].is_discrete() => quantize(z, t) as f64,
                _ => z,
            };
        }
    }
    let mut labels = vec![0; n];
    for (b, blk) in cov.blocks().iter().enumerate() {
        for &u in &blk.units {
            labels[u] = b;
        }
    }
    let ids = (1..=n).map(|i| format!("u{i}")).collect();
    MixedDataset::new(x, model.specs.clone(), ids, labels)
}

#[derive(Debug, Clone)]
pub struct SimulationSettings {
    pub n: usize,
    pub p: usize,
    pub edges: usize,
    pub block_sizes: (usize, usize),
    pub discretize_prob: f64,
    pub thresholds: Vec<f64>,
}

impl SimulationSettings {
    /// n units, p nodes, 2p edges, blocks of 10–15, half the nodes cut at {−1, 1}.
    pub fn standard(n: usize, p: usize) -> Self {
        SimulationSettings {
            n,
            p,
            edges: (2 * p).min(p * p.saturating_sub(1) / 2),
            block_sizes: (10, 15),
            discretize_prob: 0.5,
            thresholds: vec![-1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedInstance {
    pub model: DagModel,
    pub cov: BlockCovariance,
    pub patterns: Vec<BlockPattern>,
    pub data: MixedDataset,
}

/// Full simulation with independent sub-streams for each component.
pub fn simulate(settings: &SimulationSettings, seed: u64) -> Result<SimulatedInstance> {
    let streams = Streams::new(seed);
    let dag = random_dag(settings.p, settings.edges, &mut streams.stream("dag", &[]))?;
    let weights = sample_weights(&dag, &mut streams.stream("weights", &[]));
    let specs = random_specs(settings.p, settings.discretize_prob, &settings.thresholds, &mut streams.stream("specs", &[]))?;
    let (cov, patterns) = make_block_cov(settings.n, settings.block_sizes, &mut streams.stream("cov", &[]))?;
    let model = DagModel::new(dag, weights, specs)?;
    let data = gen_mixed_data(&model, &cov, &streams.child("data", &[]))?;
    Ok(SimulatedInstance { model, cov, patterns, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::normal::std_normal_cdf;
    use crate::testutil::ks_statistic;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dag_edge_counts() {
        let mut rng = Streams::new(1).rng();
        assert_eq!(random_dag(3, 0, &mut rng).unwrap().edge_count(), 0);
        let full = random_dag(5, 10, &mut rng).unwrap();
        assert_eq!(full.edge_count(), 10);
        let big = random_dag(100, 200, &mut rng).unwrap();
        assert_eq!(big.edge_count(), 200);
        assert!(big.topological_order().is_ok());
        assert!(matches!(random_dag(4, 7, &mut rng), Err(Error::Infeasible(_))));
    }

    #[test]
    fn pair_index_covers_upper_triangle() {
        let p = 6;
        let all: Vec<_> = (0..15).map(|k| pair_from_index(k, p)).collect();
        let want: Vec<_> = (0..p).flat_map(|a| ((a + 1)..p).map(move |b| (a, b))).collect();
        assert_eq!(all, want);
    }

    #[test]
    fn weights_in_range() {
        let mut rng = Streams::new(2).rng();
        let g = random_dag(200, 10_000, &mut rng).unwrap();
        let w = sample_weights(&g, &mut rng);
        let vals: Vec<f64> = g.edges().iter().map(|&(a, b)| w[(a, b)]).collect();
        assert!(vals.iter().all(|v| (0.6..=0.9).contains(&v.abs())));
        let mean_abs = vals.iter().map(|v| v.abs()).sum::<f64>() / vals.len() as f64;
        assert_abs_diff_eq!(mean_abs, 0.75, epsilon = 0.01);
        let pos = vals.iter().filter(|v| **v > 0.0).count() as f64 / vals.len() as f64;
        assert_abs_diff_eq!(pos, 0.5, epsilon = 0.03);
        assert_eq!(sample_weights(&Dag::empty(3), &mut rng).iter().filter(|v| **v != 0.0).count(), 0);
    }

    #[test]
    fn block_patterns() {
        let eq = BlockPattern::Equal(0.5).matrix(3);
        assert!(eq.as_matrix().iter().enumerate().all(|(k, &v)| if k % 4 == 0 { v == 1.0 } else { v == 0.5 }));
        let tp = BlockPattern::Toeplitz(0.2).matrix(8);
        assert_abs_diff_eq!(tp.as_matrix()[(0, 5)], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(tp.as_matrix()[(7, 2)], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn block_partition_sizes() {
        let mut rng = Streams::new(3).rng();
        let (cov, pats) = make_block_cov(37, (10, 15), &mut rng).unwrap();
        assert_eq!(cov.n(), 37);
        assert_eq!(pats.len(), cov.blocks().len());
        let sizes: Vec<usize> = cov.blocks().iter().map(|b| b.units.len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 37);
        for s in &sizes[..sizes.len() - 1] {
            assert!((10..=15).contains(s));
        }
        for b in cov.blocks() {
            assert!(cholesky_lower(&b.sigma).is_ok());
        }
    }

    fn iid(n: usize) -> BlockCovariance {
        BlockCovariance::identity(&(0..n).map(|i| vec![i]).collect::<Vec<_>>())
    }

    fn sem(p: usize, edges: &[(usize, usize, f64)], specs: Vec<VariableSpec>) -> DagModel {
        let e: Vec<(usize, usize)> = edges.iter().map(|&(a, b, _)| (a, b)).collect();
        let dag = Dag::from_edges(p, &e).unwrap();
        let mut w = DMatrix::zeros(p, p);
        for &(a, b, v) in edges {
            w[(a, b)] = v;
        }
        DagModel::new(dag, w, specs).unwrap()
    }

    #[test]
    fn null_model_gives_standard_normal_columns() {
        let n = 10_000;
        let model = sem(2, &[], vec![VariableSpec::continuous("a"), VariableSpec::continuous("b")]);
        let cov = iid(n);
        let d = gen_mixed_data(&model, &cov, &Streams::new(4)).unwrap();
        for j in 0..2 {
            let col: Vec<f64> = d.values().column(j).iter().copied().collect();
            let ks = ks_statistic(col, std_normal_cdf);
            assert!(ks < 1.949 / (n as f64).sqrt(), "ks={ks}");
        }
    }

    #[test]
    fn single_edge_correlation() {
        let n = 100_000;
        let model = sem(2, &[(0, 1, 0.8)], vec![VariableSpec::continuous("a"), VariableSpec::continuous("b")]);
        let cov = iid(n);
        let d = gen_mixed_data(&model, &cov, &Streams::new(5)).unwrap();
        let z = d.zscored();
        let r = z.column(0).dot(&z.column(1)) / n as f64;
        assert_abs_diff_eq!(r, 0.8 / 1.64f64.sqrt(), epsilon = 0.01);
    }

    #[test]
    fn discrete_level_frequencies() {
        let n = 100_000;
        let model = sem(1, &[], vec![VariableSpec::with_thresholds("d", vec![-1.0, 1.0]).unwrap()]);
        let cov = iid(n);
        let d = gen_mixed_data(&model, &cov, &Streams::new(6)).unwrap();
        let mut counts = [0usize; 3];
        for i in 0..n {
            counts[d.level(i, 0)] += 1;
        }
        let want = [std_normal_cdf(-1.0), std_normal_cdf(1.0) - std_normal_cdf(-1.0), 1.0 - std_normal_cdf(1.0)];
        for c in 0..3 {
            assert_abs_diff_eq!(counts[c] as f64 / n as f64, want[c], epsilon = 0.01);
        }
    }

    #[test]
    fn sample_covariance_matches_sem_covariance() {
        let n = 100_000;
        for seed in 0..5 {
            let streams = Streams::new(100 + seed);
            let dag = random_dag(6, 8, &mut streams.stream("dag", &[])).unwrap();
            let w = sample_weights(&dag, &mut streams.stream("weights", &[]));
            let specs = random_specs(6, 0.0, &[], &mut streams.stream("s", &[])).unwrap();
            let model = DagModel::new(dag, w.clone(), specs).unwrap();
            let cov = iid(n);
            let d = gen_mixed_data(&model, &cov, &streams).unwrap();
            // Cov(X) = (I − B)^{-T} (I − B)^{-1} with B[k, j] = weight on k → j.
            let a = (DMatrix::<f64>::identity(6, 6) - &w).try_inverse().unwrap();
            let truth = a.transpose() * &a;
            let x = d.values();
            let emp = x.transpose() * x / n as f64;
            for i in 0..6 {
                for j in 0..6 {
                    assert!((emp[(i, j)] - truth[(i, j)]).abs() < 0.05, "seed {seed} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn block_noise_matches_block_covariance() {
        let reps = 10_000;
        for pattern in [BlockPattern::Equal(0.55), BlockPattern::Toeplitz(0.2)] {
            let sigma = pattern.matrix(12);
            let cov = BlockCovariance::new(12, vec![CovBlock { units: (0..12).collect(), sigma: sigma.clone() }]).unwrap();
            let f = covariance_factors(&cov).unwrap();
            let mut rng = Streams::new(7).rng();
            let mut acc = DMatrix::<f64>::zeros(12, 12);
            for _ in 0..reps {
                let e = draw_block_noise(&cov, &f, &mut rng);
                acc += &e * e.transpose();
            }
            acc /= reps as f64;
            assert!((acc - sigma.as_matrix()).abs().max() < 0.05);
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let s = SimulationSettings::standard(40, 12);
        let a = simulate(&s, 9).unwrap();
        let b = simulate(&s, 9).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.model.dag, b.model.dag);
        let c = simulate(&s, 10).unwrap();
        assert_ne!(a.data, c.data);
    }
}
