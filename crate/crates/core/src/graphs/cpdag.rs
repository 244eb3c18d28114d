use super::{unordered, Dag};
use crate::error::{Error, Result};

/// Partially directed graph: each adjacent pair is either directed or undirected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cpdag {
    p: usize,
    /// `dir[i * p + j]` iff i → j.
    dir: Vec<bool>,
    /// symmetric; `und[i * p + j]` iff i − j.
    und: Vec<bool>,
}

impl Cpdag {
    pub fn empty(p: usize) -> Self {
        Cpdag { p, dir: vec![false; p * p], und: vec![false; p * p] }
    }

    pub fn from_edges(p: usize, directed: &[(usize, usize)], undirected: &[(usize, usize)]) -> Result<Self> {
        let mut c = Cpdag::empty(p);
        for &(a, b) in directed.iter().chain(undirected) {
            if a >= p || b >= p || a == b {
                return Err(Error::Input(format!("invalid edge ({a}, {b}) for {p} nodes")));
            }
        }
        for &(a, b) in undirected {
            c.set_undirected(a, b);
        }
        for &(a, b) in directed {
            if c.adjacent(a, b) {
                return Err(Error::Input(format!("pair ({a}, {b}) listed twice")));
            }
            c.set_directed(a, b);
        }
        Ok(c)
    }

    /// Every DAG edge becomes undirected.
    pub fn skeleton_of(dag: &Dag) -> Self {
        let mut c = Cpdag::empty(dag.p());
        for (a, b) in dag.edges() {
            c.set_undirected(a, b);
        }
        c
    }

    /// The DAG itself as a (fully directed) partially directed graph.
    pub fn from_dag(dag: &Dag) -> Self {
        let mut c = Cpdag::empty(dag.p());
        for (a, b) in dag.edges() {
            c.set_directed(a, b);
        }
        c
    }

    pub fn p(&self) -> usize {
        self.p
    }

    fn idx(&self, a: usize, b: usize) -> usize {
        a * self.p + b
    }

    pub fn is_directed(&self, a: usize, b: usize) -> bool {
        self.dir[self.idx(a, b)]
    }

    pub fn is_undirected(&self, a: usize, b: usize) -> bool {
        self.und[self.idx(a, b)]
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.is_undirected(a, b) || self.is_directed(a, b) || self.is_directed(b, a)
    }

    pub fn remove(&mut self, a: usize, b: usize) {
        let (ab, ba) = (self.idx(a, b), self.idx(b, a));
        self.dir[ab] = false;
        self.dir[ba] = false;
        self.und[ab] = false;
        self.und[ba] = false;
    }

    pub fn set_undirected(&mut self, a: usize, b: usize) {
        self.remove(a, b);
        let (ab, ba) = (self.idx(a, b), self.idx(b, a));
        self.und[ab] = true;
        self.und[ba] = true;
    }

    pub fn set_directed(&mut self, a: usize, b: usize) {
        self.remove(a, b);
        let ab = self.idx(a, b);
        self.dir[ab] = true;
    }

    /// Directed edges in row-major order.
    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.p {
            for b in 0..self.p {
                if self.dir[self.idx(a, b)] {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Undirected edges as `(min, max)` pairs, sorted.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.p {
            for b in (a + 1)..self.p {
                if self.und[self.idx(a, b)] {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Sorted unordered adjacent pairs.
    pub fn skeleton(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.p {
            for b in (a + 1)..self.p {
                if self.adjacent(a, b) {
                    out.push(unordered(a, b));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.skeleton().len()
    }

    /// Undirected edges expanded to both orientations.
    pub fn expanded_arcs(&self) -> Vec<(usize, usize)> {
        let mut out = self.directed_edges();
        for (a, b) in self.undirected_edges() {
            out.push((a, b));
            out.push((b, a));
        }
        out.sort_unstable();
        out
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.p).filter(|&u| u != v && self.adjacent(u, v)).collect()
    }

    pub fn undirected_neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.p).filter(|&u| self.is_undirected(u, v)).collect()
    }

    pub fn directed_parents(&self, v: usize) -> Vec<usize> {
        (0..self.p).filter(|&u| self.is_directed(u, v)).collect()
    }

    /// A DAG in the represented class (Dor–Tarsi extension). Falls back to
    /// orienting leftover undirected edges by index when no consistent
    /// extension exists, then drops any arc that would close a cycle.
    pub fn consistent_extension(&self) -> Dag {
        let p = self.p;
        let mut work = self.clone();
        let mut alive = vec![true; p];
        let mut dag = Dag::empty(p);
        for (a, b) in self.directed_edges() {
            dag.insert(a, b);
        }
        let mut remaining = p;
        while remaining > 0 {
            let sink = (0..p).find(|&x| {
                alive[x]
                    && (0..p).all(|y| !alive[y] || !work.is_directed(x, y))
                    && {
                        let und: Vec<usize> = (0..p).filter(|&y| alive[y] && work.is_undirected(x, y)).collect();
                        let adj: Vec<usize> = (0..p).filter(|&y| alive[y] && y != x && work.adjacent(x, y)).collect();
                        und.iter().all(|&y| adj.iter().all(|&z| z == y || work.adjacent(y, z)))
                    }
            });
            let Some(x) = sink else { break };
            for y in 0..p {
                if alive[y] && work.is_undirected(x, y) {
                    dag.insert(y, x);
                }
            }
            for y in 0..p {
                work.remove(x, y);
            }
            alive[x] = false;
            remaining -= 1;
        }
        if remaining > 0 {
            for (a, b) in work.undirected_edges() {
                if !dag.has_path(b, a) {
                    dag.insert(a, b);
                } else {
                    dag.insert(b, a);
                }
            }
        }
        // Remove cycle-closing arcs deterministically.
        while dag.topological_order().is_err() {
            let edges = dag.edges();
            if let Some(&(a, b)) = edges.iter().rev().find(|&&(a, b)| dag.has_path(b, a)) {
                dag.remove(a, b);
            } else {
                break;
            }
        }
        dag
    }
}
