//! DAGs, CPDAGs, and the orientation machinery linking them.
//!
//! Both graph types keep dense per-node membership rows (O(1) adjacency
//! queries) alongside sorted neighbour lists that are rebuilt on demand.

mod cpdag;
mod dag;
mod meek;

pub use cpdag::Cpdag;
pub use dag::Dag;
pub use meek::{dag_to_cpdag, meek_close};

/// Canonical unordered pair `(min, max)`.
pub fn unordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}
