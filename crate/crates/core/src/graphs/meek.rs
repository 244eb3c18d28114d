use super::{Cpdag, Dag};
use crate::error::Result;

/// Orientations implied by Meek's rules R1–R4 on the current graph.
fn implied(c: &Cpdag) -> Vec<(usize, usize)> {
    let p = c.p();
    let mut out = Vec::new();
    for a in 0..p {
        for b in 0..p {
            if a == b || !c.is_undirected(a, b) {
                continue;
            }
            if orient_ab(c, a, b) {
                out.push((a, b));
            }
        }
    }
    out
}

/// Whether some rule orients the undirected edge a − b as a → b.
fn orient_ab(c: &Cpdag, a: usize, b: usize) -> bool {
    let p = c.p();
    // R1: x → a − b with x, b nonadjacent.
    if (0..p).any(|x| c.is_directed(x, a) && x != b && !c.adjacent(x, b)) {
        return true;
    }
    // R2: a → x → b.
    if (0..p).any(|x| c.is_directed(a, x) && c.is_directed(x, b)) {
        return true;
    }
    // R3: a − x → b, a − y → b, x and y nonadjacent.
    let xs: Vec<usize> = (0..p).filter(|&x| x != b && c.is_undirected(a, x) && c.is_directed(x, b)).collect();
    for (i, &x) in xs.iter().enumerate() {
        for &y in &xs[i + 1..] {
            if !c.adjacent(x, y) {
                return true;
            }
        }
    }
    // R4: a − k → l → b, k and b nonadjacent, a adjacent to l.
    for k in 0..p {
        if k == b || !c.is_undirected(a, k) || c.adjacent(k, b) {
            continue;
        }
        if (0..p).any(|l| l != a && c.is_directed(k, l) && c.is_directed(l, b) && c.adjacent(a, l)) {
            return true;
        }
    }
    false
}

/// Apply R1–R4 to a fixed point.
///
/// Each round collects every implied orientation from the same snapshot and
/// applies them together, so the result does not depend on node labelling.
/// An edge implied in both directions is left undirected.
pub fn meek_close(c: &Cpdag) -> Cpdag {
    let mut g = c.clone();
    loop {
        let proposals = implied(&g);
        let mut changed = false;
        for &(a, b) in &proposals {
            if proposals.binary_search(&(b, a)).is_ok() {
                continue;
            }
            if g.is_undirected(a, b) {
                g.set_directed(a, b);
                changed = true;
            }
        }
        if !changed {
            return g;
        }
    }
}

/// Completed pattern of `g`'s Markov equivalence class.
pub fn dag_to_cpdag(g: &Dag) -> Result<Cpdag> {
    g.topological_order()?;
    let p = g.p();
    let mut c = Cpdag::skeleton_of(g);
    for b in 0..p {
        let pa = g.parents(b);
        for (i, &a) in pa.iter().enumerate() {
            for &x in &pa[i + 1..] {
                if !g.adjacent(a, x) {
                    c.set_directed(a, b);
                    c.set_directed(x, b);
                }
            }
        }
    }
    Ok(meek_close(&c))
}
