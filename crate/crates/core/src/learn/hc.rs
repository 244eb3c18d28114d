use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::graphs::Dag;
use crate::mathcore::linalg::solve_spd;

const MIN_GAIN: f64 = 1e-10;

/// Gaussian BIC with per-node local scores; intercept and variance count
/// as parameters.
pub struct BicScore {
    cov: DMatrix<f64>,
    n: f64,
    cache: HashMap<(usize, Vec<usize>), f64>,
}

impl BicScore {
    pub fn new(data: &DMatrix<f64>) -> Self {
        let (n, p) = data.shape();
        let mut centered = data.clone();
        for j in 0..p {
            let mean = data.column(j).sum() / n as f64;
            for i in 0..n {
                centered[(i, j)] -= mean;
            }
        }
        let cov = centered.transpose() * &centered / n as f64;
        BicScore { cov, n: n as f64, cache: HashMap::new() }
    }

    /// Local score of `j` with sorted parent set `pa`.
    pub fn local(&mut self, j: usize, pa: &[usize]) -> f64 {
        if let Some(&v) = self.cache.get(&(j, pa.to_vec())) {
            return v;
        }
        let s = &self.cov;
        let mut var = s[(j, j)];
        if !pa.is_empty() {
            let spp = DMatrix::from_fn(pa.len(), pa.len(), |a, b| s[(pa[a], pa[b])]);
            let spj = nalgebra::DVector::from_fn(pa.len(), |a, _| s[(pa[a], j)]);
            var = match solve_spd(&spp, &spj) {
                Some(coef) => var - spj.dot(&coef),
                None => var,
            };
        }
        let var = var.max(1e-12 * s[(j, j)].max(1e-300));
        let ll = -0.5 * self.n * ((2.0 * std::f64::consts::PI * var).ln() + 1.0);
        let v = ll - 0.5 * self.n.ln() * (pa.len() as f64 + 2.0);
        self.cache.insert((j, pa.to_vec()), v);
        v
    }
}

#[derive(Debug, Clone)]
pub struct HcResult {
    pub dag: Dag,
    /// Total score at the start and after every accepted move.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
enum Move {
    Add(usize, usize),
    Delete(usize, usize),
    Reverse(usize, usize),
}

fn with(pa: &[usize], v: usize) -> Vec<usize> {
    let mut out = pa.to_vec();
    if let Err(pos) = out.binary_search(&v) {
        out.insert(pos, v);
    }
    out
}

fn without(pa: &[usize], v: usize) -> Vec<usize> {
    pa.iter().copied().filter(|&u| u != v).collect()
}

/// Nodes reachable from `v`, including `v`.
fn reach(children: &[Vec<usize>], v: usize) -> Vec<bool> {
    let mut seen = vec![false; children.len()];
    let mut stack = vec![v];
    seen[v] = true;
    while let Some(u) = stack.pop() {
        for &c in &children[u] {
            if !seen[c] {
                seen[c] = true;
                stack.push(c);
            }
        }
    }
    seen
}

/// Greedy add/delete/reverse search from the empty graph. With `restrict`,
/// only pairs in that list (a < b) may become adjacent.
pub fn hc_search(data: &DMatrix<f64>, restrict: Option<&[(usize, usize)]>) -> HcResult {
    let p = data.ncols();
    let mut score = BicScore::new(data);
    let pairs: Vec<(usize, usize)> = match restrict {
        Some(r) => r.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect(),
        None => (0..p).flat_map(|a| ((a + 1)..p).map(move |b| (a, b))).collect(),
    };
    let mut dag = Dag::empty(p);
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); p];
    let mut local: Vec<f64> = (0..p).map(|j| score.local(j, &[])).collect();
    let mut trace = vec![local.iter().sum()];
    loop {
        let children: Vec<Vec<usize>> = (0..p).map(|v| dag.children(v)).collect();
        let desc: Vec<Vec<bool>> = (0..p).map(|v| reach(&children, v)).collect();
        let mut best: Option<(f64, Move)> = None;
        let consider = |gain: f64, mv: Move, best: &mut Option<(f64, Move)>| {
            if gain > MIN_GAIN && best.as_ref().is_none_or(|(g, _)| gain > *g) {
                *best = Some((gain, mv));
            }
        };
        for &(a, b) in &pairs {
            for (x, y) in [(a, b), (b, a)] {
                if dag.has_edge(x, y) {
                    let del = score.local(y, &without(&parents[y], x)) - local[y];
                    consider(del, Move::Delete(x, y), &mut best);
                    let other_path = children[x].iter().any(|&c| c != y && desc[c][y]);
                    if !other_path {
                        let gain = del + score.local(x, &with(&parents[x], y)) - local[x];
                        consider(gain, Move::Reverse(x, y), &mut best);
                    }
                }
            }
            if !dag.adjacent(a, b) {
                for (x, y) in [(a, b), (b, a)] {
                    if !desc[y][x] {
                        let gain = score.local(y, &with(&parents[y], x)) - local[y];
                        consider(gain, Move::Add(x, y), &mut best);
                    }
                }
            }
        }
        let Some((_, mv)) = best else { break };
        match mv {
            Move::Add(x, y) => {
                dag.insert(x, y);
                parents[y] = with(&parents[y], x);
                local[y] = score.local(y, &parents[y]);
            }
            Move::Delete(x, y) => {
                dag.remove(x, y);
                parents[y] = without(&parents[y], x);
                local[y] = score.local(y, &parents[y]);
            }
            Move::Reverse(x, y) => {
                dag.remove(x, y);
                dag.insert(y, x);
                parents[y] = without(&parents[y], x);
                parents[x] = with(&parents[x], y);
                local[y] = score.local(y, &parents[y]);
                local[x] = score.local(x, &parents[x]);
            }
        }
        trace.push(local.iter().sum());
    }
    HcResult { dag, trace }
}
