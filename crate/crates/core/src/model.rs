//! Datasets, variable descriptions, SEM parameters and block covariances.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graphs::Dag;
use crate::mathcore::linalg::{cholesky_lower, spd_inverse, SymMatrix};
use crate::mathcore::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariableKind {
    Continuous,
    Discrete { levels: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
    /// Known cut points (simulated data); `None` when they must be estimated.
    pub thresholds: Option<Vec<f64>>,
}

impl VariableSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        VariableSpec { name: name.into(), kind: VariableKind::Continuous, thresholds: None }
    }

    pub fn discrete(name: impl Into<String>, levels: usize) -> Self {
        VariableSpec { name: name.into(), kind: VariableKind::Discrete { levels }, thresholds: None }
    }

    /// Discrete variable with known, strictly increasing cut points.
    pub fn with_thresholds(name: impl Into<String>, thresholds: Vec<f64>) -> Result<Self> {
        check_thresholds(&thresholds)?;
        Ok(VariableSpec {
            name: name.into(),
            kind: VariableKind::Discrete { levels: thresholds.len() + 1 },
            thresholds: Some(thresholds),
        })
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, VariableKind::Discrete { .. })
    }

    pub fn levels(&self) -> Option<usize> {
        match self.kind {
            VariableKind::Discrete { levels } => Some(levels),
            VariableKind::Continuous => None,
        }
    }
}

pub fn check_thresholds(t: &[f64]) -> Result<()> {
    if t.iter().any(|v| !v.is_finite()) || t.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(format!("thresholds must be finite and strictly increasing: {t:?}")));
    }
    Ok(())
}

/// The latent interval of level `c` given interior cut points `t`.
pub fn level_interval(t: &[f64], c: usize) -> Interval {
    let lower = if c == 0 { f64::NEG_INFINITY } else { t[c - 1] };
    let upper = if c >= t.len() { f64::INFINITY } else { t[c] };
    Interval { lower, upper }
}

/// Level c with t[c-1] < z <= t[c].
pub fn quantize(z: f64, t: &[f64]) -> usize {
    t.partition_point(|&tau| tau < z)
}

/// DAG plus edge weights and per-node variable descriptions.
#[derive(Debug, Clone)]
pub struct DagModel {
    pub dag: Dag,
    /// `weights[(k, j)]` is the coefficient on k → j; zero off the edge set.
    pub weights: DMatrix<f64>,
    pub specs: Vec<VariableSpec>,
}

impl DagModel {
    pub fn new(dag: Dag, weights: DMatrix<f64>, specs: Vec<VariableSpec>) -> Result<Self> {
        let p = dag.p();
        if weights.nrows() != p || weights.ncols() != p || specs.len() != p {
            return Err(Error::Input("model dimensions disagree".into()));
        }
        for k in 0..p {
            for j in 0..p {
                if weights[(k, j)] != 0.0 && !dag.has_edge(k, j) {
                    return Err(Error::Input(format!("weight on non-edge {k} -> {j}")));
                }
            }
        }
        Ok(DagModel { dag, weights, specs })
    }

    pub fn p(&self) -> usize {
        self.dag.p()
    }
}

/// One diagonal block of the unit covariance.
#[derive(Debug, Clone)]
pub struct CovBlock {
    /// Global unit indices, in the order used by `sigma`.
    pub units: Vec<usize>,
    pub sigma: SymMatrix,
}

/// Block-diagonal unit covariance with unit diagonal.
#[derive(Debug, Clone)]
pub struct BlockCovariance {
    n: usize,
    blocks: Vec<CovBlock>,
}

impl BlockCovariance {
    pub fn new(n: usize, blocks: Vec<CovBlock>) -> Result<Self> {
        let mut seen = vec![false; n];
        for b in &blocks {
            if b.units.len() != b.sigma.dim() {
                return Err(Error::Input("block size does not match its matrix".into()));
            }
            for &u in &b.units {
                if u >= n || seen[u] {
                    return Err(Error::Input(format!("unit {u} missing from range or repeated across blocks")));
                }
                seen[u] = true;
            }
            let m = b.sigma.as_matrix();
            if (0..m.nrows()).any(|i| (m[(i, i)] - 1.0).abs() > 1e-9) {
                return Err(Error::Input("block diagonal must be 1".into()));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Input("blocks do not cover every unit".into()));
        }
        Ok(BlockCovariance { n, blocks })
    }

    /// Σ = I with the given partition.
    pub fn identity(groups: &[Vec<usize>]) -> Self {
        let n = groups.iter().map(|g| g.len()).sum();
        let blocks = groups
            .iter()
            .map(|g| CovBlock { units: g.clone(), sigma: SymMatrix::identity(g.len()) })
            .collect();
        BlockCovariance { n, blocks }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[CovBlock] {
        &self.blocks
    }

    /// Dense n × n matrix (tests and small problems only).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for b in &self.blocks {
            let m = b.sigma.as_matrix();
            for (r, &u) in b.units.iter().enumerate() {
                for (c, &v) in b.units.iter().enumerate() {
                    out[(u, v)] = m[(r, c)];
                }
            }
        }
        out
    }

    /// Per block: lower Cholesky factor of the precision Θ = Σ⁻¹.
    pub fn precision_factors(&self) -> Result<Vec<DMatrix<f64>>> {
        self.blocks
            .iter()
            .map(|b| {
                let theta = spd_inverse(&b.sigma)?;
                cholesky_lower(&SymMatrix::new(symmetrize(theta))?)
            })
            .collect()
    }
}

pub(crate) fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// n × p observations with column descriptions, unit ids and block labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedDataset {
    values: DMatrix<f64>,
    specs: Vec<VariableSpec>,
    unit_ids: Vec<String>,
    blocks: Vec<usize>,
}

impl MixedDataset {
    pub fn new(values: DMatrix<f64>, specs: Vec<VariableSpec>, unit_ids: Vec<String>, blocks: Vec<usize>) -> Result<Self> {
        let (n, p) = values.shape();
        if specs.len() != p || unit_ids.len() != n || blocks.len() != n {
            return Err(Error::Input(format!(
                "dataset shape {n}x{p} disagrees with {} specs, {} ids, {} block labels",
                specs.len(),
                unit_ids.len(),
                blocks.len()
            )));
        }
        for (j, s) in specs.iter().enumerate() {
            if values.column(j).iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("column {} has missing or non-finite values", s.name)));
            }
            if let Some(c) = s.levels() {
                if c < 2 {
                    return Err(Error::Input(format!("column {} needs at least 2 levels", s.name)));
                }
                if let Some(t) = &s.thresholds {
                    if t.len() + 1 != c {
                        return Err(Error::Input(format!("column {} threshold count mismatch", s.name)));
                    }
                    check_thresholds(t)?;
                }
                let bad = values.column(j).iter().any(|&v| v.fract() != 0.0 || v < 0.0 || v >= c as f64);
                if bad {
                    return Err(Error::Input(format!("column {} has codes outside 0..{}", s.name, c - 1)));
                }
            }
        }
        Ok(MixedDataset { values, specs, unit_ids, blocks })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn specs(&self) -> &[VariableSpec] {
        &self.specs
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn block_labels(&self) -> &[usize] {
        &self.blocks
    }

    pub fn names(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.name.clone()).collect()
    }

    pub fn level(&self, i: usize, j: usize) -> usize {
        self.values[(i, j)] as usize
    }

    pub fn discrete_columns(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.specs[j].is_discrete()).collect()
    }

    pub fn continuous_columns(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| !self.specs[j].is_discrete()).collect()
    }

    /// Unit groups ordered by block label, units ascending within each.
    pub fn block_groups(&self) -> Vec<Vec<usize>> {
        groups_from_labels(&self.blocks)
    }

    pub fn with_blocks(mut self, blocks: Vec<usize>) -> Result<Self> {
        if blocks.len() != self.n() {
            return Err(Error::Input("block label count differs from unit count".into()));
        }
        self.blocks = blocks;
        Ok(self)
    }

    pub fn with_specs(self, specs: Vec<VariableSpec>) -> Result<Self> {
        MixedDataset::new(self.values, specs, self.unit_ids, self.blocks)
    }

    /// Rows in the given order (repeats allowed; repeated ids get a suffix).
    pub fn select_rows(&self, rows: &[usize]) -> MixedDataset {
        let p = self.p();
        let values = DMatrix::from_fn(rows.len(), p, |r, c| self.values[(rows[r], c)]);
        let mut seen = std::collections::HashMap::new();
        let unit_ids = rows
            .iter()
            .map(|&r| {
                let k = seen.entry(r).or_insert(0usize);
                *k += 1;
                if *k == 1 {
                    self.unit_ids[r].clone()
                } else {
                    format!("{}#{}", self.unit_ids[r], k)
                }
            })
            .collect();
        let blocks = rows.iter().map(|&r| self.blocks[r]).collect();
        MixedDataset { values, specs: self.specs.clone(), unit_ids, blocks }
    }

    /// Columns in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> MixedDataset {
        let values = DMatrix::from_fn(self.n(), cols.len(), |r, c| self.values[(r, cols[c])]);
        let specs = cols.iter().map(|&c| self.specs[c].clone()).collect();
        MixedDataset { values, specs, unit_ids: self.unit_ids.clone(), blocks: self.blocks.clone() }
    }

    /// Every column standardized to mean 0 and variance 1 (constant columns become 0).
    pub fn zscored(&self) -> DMatrix<f64> {
        zscore_columns(&self.values)
    }
}

pub fn zscore_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = m.shape();
    let mut out = m.clone();
    for j in 0..p {
        let mean = m.column(j).sum() / n as f64;
        let var = m.column(j).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        for i in 0..n {
            out[(i, j)] = if sd > 0.0 { (m[(i, j)] - mean) / sd } else { 0.0 };
        }
    }
    out
}

pub fn groups_from_labels(labels: &[usize]) -> Vec<Vec<usize>> {
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mut groups = vec![Vec::new(); ids.len()];
    for (u, l) in labels.iter().enumerate() {
        let g = ids.binary_search(l).expect("label present");
        groups[g].push(u);
    }
    groups
}
