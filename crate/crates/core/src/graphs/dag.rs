use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Directed graph over `p` labelled nodes, acyclic once validated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    p: usize,
    /// `adj[i * p + j]` is true iff i → j.
    adj: Vec<bool>,
    labels: Vec<String>,
}

impl Dag {
    pub fn empty(p: usize) -> Self {
        Dag { p, adj: vec![false; p * p], labels: (0..p).map(|i| format!("X{}", i + 1)).collect() }
    }

    pub fn with_labels(labels: Vec<String>) -> Self {
        let p = labels.len();
        Dag { p, adj: vec![false; p * p], labels }
    }

    /// Build and validate: no self-loops, no cycles, indices in range.
    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Dag::empty(p);
        for &(i, j) in edges {
            g.try_add_edge(i, j)?;
        }
        g.topological_order()?;
        Ok(g)
    }

    pub fn set_labels(&mut self, labels: Vec<String>) -> Result<()> {
        if labels.len() != self.p {
            return Err(Error::Input(format!("{} labels for {} nodes", labels.len(), self.p)));
        }
        self.labels = labels;
        Ok(())
    }

    fn try_add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i >= self.p || j >= self.p {
            return Err(Error::Input(format!("edge ({i}, {j}) out of range for {} nodes", self.p)));
        }
        if i == j {
            return Err(Error::Input(format!("self-loop on node {i}")));
        }
        self.adj[i * self.p + j] = true;
        Ok(())
    }

    /// Unchecked insertion used by learners that maintain acyclicity themselves.
    pub(crate) fn insert(&mut self, i: usize, j: usize) {
        debug_assert!(i != j);
        self.adj[i * self.p + j] = true;
    }

    pub(crate) fn remove(&mut self, i: usize, j: usize) {
        self.adj[i * self.p + j] = false;
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.p + j]
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.has_edge(i, j) || self.has_edge(j, i)
    }

    pub fn parents(&self, j: usize) -> Vec<usize> {
        (0..self.p).filter(|&i| self.adj[i * self.p + j]).collect()
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.p).filter(|&j| self.adj[i * self.p + j]).collect()
    }

    pub fn parent_sets(&self) -> Vec<Vec<usize>> {
        (0..self.p).map(|j| self.parents(j)).collect()
    }

    /// Edges in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.p {
            for j in 0..self.p {
                if self.adj[i * self.p + j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&b| b).count()
    }

    /// Kahn's algorithm, smallest available index first.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let p = self.p;
        let mut indeg = vec![0usize; p];
        for (i, j) in self.edges() {
            let _ = i;
            indeg[j] += 1;
        }
        let mut ready: BinaryHeap<Reverse<usize>> = (0..p).filter(|&v| indeg[v] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(p);
        while let Some(Reverse(v)) = ready.pop() {
            order.push(v);
            for c in self.children(v) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.push(Reverse(c));
                }
            }
        }
        if order.len() == p {
            Ok(order)
        } else {
            Err(Error::CyclicGraph)
        }
    }

    /// True iff a directed path `from ⇝ to` exists.
    pub fn has_path(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.p];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            for c in 0..self.p {
                if self.adj[v * self.p + c] && !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        false
    }

    /// Descendant indicator of `v` (including `v`).
    pub fn descendants(&self, v: usize) -> Vec<bool> {
        let mut seen = vec![false; self.p];
        let mut stack = vec![v];
        seen[v] = true;
        while let Some(u) = stack.pop() {
            for c in 0..self.p {
                if self.adj[u * self.p + c] && !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topological_examples() {
        assert_eq!(Dag::empty(3).topological_order().unwrap(), vec![0, 1, 2]);
        let chain = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(chain.topological_order().unwrap(), vec![0, 1, 2]);
        let g = Dag::from_edges(3, &[(2, 0), (2, 1), (0, 1)]).unwrap();
        assert_eq!(g.topological_order().unwrap(), vec![2, 0, 1]);
    }

    #[test]
    fn cycles_and_self_loops_rejected() {
        assert!(matches!(Dag::from_edges(3, &[(0, 1), (1, 2), (2, 0)]), Err(Error::CyclicGraph)));
        assert!(Dag::from_edges(2, &[(1, 1)]).is_err());
        assert!(Dag::from_edges(2, &[(0, 5)]).is_err());
    }

    #[test]
    fn parents_and_paths() {
        let g = Dag::from_edges(4, &[(0, 2), (1, 2), (2, 3)]).unwrap();
        assert_eq!(g.parents(2), vec![0, 1]);
        assert_eq!(g.children(2), vec![3]);
        assert!(g.has_path(0, 3));
        assert!(!g.has_path(3, 0));
        assert_eq!(g.edge_count(), 3);
    }
}
