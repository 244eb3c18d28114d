use std::collections::HashMap;

use rayon::prelude::*;

use super::citest::CiTest;
use super::LearnParams;
use crate::graphs::{meek_close, Cpdag};

/// Adjacency and separating sets after the skeleton phase.
#[derive(Debug, Clone)]
pub struct Skeleton {
    p: usize,
    adj: Vec<bool>,
    pub sepsets: HashMap<(usize, usize), Vec<usize>>,
}

impl Skeleton {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adj[a * self.p + b]
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.p).filter(|&u| self.adjacent(v, u)).collect()
    }

    /// Unordered adjacent pairs `(a, b)` with a < b, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.p {
            for b in (a + 1)..self.p {
                if self.adjacent(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    fn remove(&mut self, a: usize, b: usize) {
        self.adj[a * self.p + b] = false;
        self.adj[b * self.p + a] = false;
    }
}

/// Calls `f` on each size-`k` subset of `items`, in lexicographic order.
fn for_each_subset(items: &[usize], k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, k, i + 1, cur, f);
            cur.pop();
        }
    }
    rec(items, k, 0, &mut Vec::with_capacity(k), f);
}

/// Order-independent skeleton search. Each level tests against a frozen
/// adjacency snapshot; the separating set kept for a removed edge is the one
/// with the largest p-value.
pub fn pc_skeleton(test: &CiTest, params: &LearnParams) -> Skeleton {
    let p = test.p();
    let mut sk = Skeleton { p, adj: vec![true; p * p], sepsets: HashMap::new() };
    for v in 0..p {
        sk.adj[v * p + v] = false;
    }
    let mut level = 0usize;
    loop {
        if params.max_cond.is_some_and(|m| level > m) {
            break;
        }
        let nbrs: Vec<Vec<usize>> = (0..p).map(|v| sk.neighbors(v)).collect();
        let edges = sk.edges();
        let testable = edges.iter().any(|&(a, b)| nbrs[a].len() > level || nbrs[b].len() > level);
        if !testable {
            break;
        }
        let removals: Vec<Option<(usize, usize, Vec<usize>)>> = edges
            .par_iter()
            .map(|&(a, b)| {
                let mut best: Option<(f64, Vec<usize>)> = None;
                for (x, y) in [(a, b), (b, a)] {
                    let pool: Vec<usize> = nbrs[x].iter().copied().filter(|&v| v != y).collect();
                    if pool.len() < level {
                        continue;
                    }
                    for_each_subset(&pool, level, &mut |s| {
                        let pv = test.fisher_z(a, b, s);
                        if pv > params.alpha && best.as_ref().is_none_or(|(bp, bs)| pv > *bp || (pv == *bp && s < bs.as_slice())) {
                            best = Some((pv, s.to_vec()));
                        }
                    });
                }
                best.map(|(_, s)| (a, b, s))
            })
            .collect();
        for (a, b, s) in removals.into_iter().flatten() {
            sk.remove(a, b);
            sk.sepsets.insert((a, b), s);
        }
        level += 1;
    }
    sk
}

/// Orient unshielded colliders from the separating sets. Conflicting
/// proposals leave the edge undirected.
pub fn orient_colliders(sk: &Skeleton) -> Cpdag {
    let p = sk.p();
    let mut c = Cpdag::empty(p);
    for (a, b) in sk.edges() {
        c.set_undirected(a, b);
    }
    let mut proposed = vec![false; p * p];
    for k in 0..p {
        let nb = sk.neighbors(k);
        for (ii, &i) in nb.iter().enumerate() {
            for &j in &nb[ii + 1..] {
                if sk.adjacent(i, j) {
                    continue;
                }
                let sep = sk.sepsets.get(&(i.min(j), i.max(j)));
                if sep.is_some_and(|s| !s.contains(&k)) {
                    proposed[i * p + k] = true;
                    proposed[j * p + k] = true;
                }
            }
        }
    }
    for a in 0..p {
        for b in 0..p {
            if proposed[a * p + b] && !proposed[b * p + a] {
                c.set_directed(a, b);
            }
        }
    }
    c
}

pub fn pc_from_test(test: &CiTest, params: &LearnParams) -> Cpdag {
    let sk = pc_skeleton(test, params);
    meek_close(&orient_colliders(&sk))
}
