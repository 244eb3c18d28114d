use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::zscore_columns;

/// One agglomeration step: clusters `a` and `b` (by representative unit)
/// joined at Ward height `height`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

/// Ward linkage on Euclidean row distances, by the nearest-neighbour chain.
/// Returns n − 1 merges sorted by height.
pub fn ward_linkage(rows: &DMatrix<f64>) -> Vec<Merge> {
    let n = rows.nrows();
    // Squared distances; the Lance–Williams update for Ward is exact on them.
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (rows.row(i) - rows.row(j)).norm_squared();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut chain: Vec<usize> = Vec::new();
    while merges.len() + 1 < n {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("active cluster"));
        }
        loop {
            let top = *chain.last().expect("non-empty chain");
            let prev = if chain.len() >= 2 { Some(chain[chain.len() - 2]) } else { None };
            // Prefer the previous chain element on ties so the chain terminates.
            let mut best = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |p| d[top * n + p]);
            for k in 0..n {
                if k != top && active[k] && d[top * n + k] < best_d {
                    best = Some(k);
                    best_d = d[top * n + k];
                }
            }
            let nb = best.expect("at least two active clusters");
            if Some(nb) == prev {
                break;
            }
            chain.push(nb);
        }
        let b = chain.pop().expect("chain pair");
        let a = chain.pop().expect("chain pair");
        let (keep, drop) = (a.min(b), a.max(b));
        let dab = d[a * n + b];
        merges.push(Merge { a: keep, b: drop, height: dab.max(0.0).sqrt() });
        let (na, nb) = (size[keep] as f64, size[drop] as f64);
        for k in 0..n {
            if !active[k] || k == keep || k == drop {
                continue;
            }
            let nk = size[k] as f64;
            let v = ((na + nk) * d[keep * n + k] + (nb + nk) * d[drop * n + k] - nk * dab) / (na + nb + nk);
            d[keep * n + k] = v;
            d[k * n + keep] = v;
        }
        active[drop] = false;
        size[keep] += size[drop];
    }
    merges.sort_by(|x, y| x.height.total_cmp(&y.height));
    merges
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Block labels from cutting the Ward dendrogram of z-scored background
/// features at `k` clusters. Labels are numbered by first appearance.
pub fn hier_cluster_blocks(background: &DMatrix<f64>, k: usize) -> Result<Vec<usize>> {
    let (n, q) = background.shape();
    if q < 2 {
        return Err(Error::Input("need at least two background columns".into()));
    }
    if k == 0 || k > n {
        return Err(Error::Input(format!("cannot cut {n} units into {k} clusters")));
    }
    let merges = ward_linkage(&zscore_columns(background));
    let mut parent: Vec<usize> = (0..n).collect();
    for m in &merges[..n - k] {
        let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
        parent[ra.max(rb)] = ra.min(rb);
    }
    let mut label_of_root = vec![usize::MAX; n];
    let mut next = 0;
    let mut labels = Vec::with_capacity(n);
    for u in 0..n {
        let r = find(&mut parent, u);
        if label_of_root[r] == usize::MAX {
            label_of_root[r] = next;
            next += 1;
        }
        labels.push(label_of_root[r]);
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;
    use rand::seq::SliceRandom;
    use rand_distr::{Distribution, StandardNormal};

    fn canonical(labels: &[usize]) -> Vec<usize> {
        let mut map = std::collections::HashMap::new();
        labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect()
    }

    fn adjusted_rand(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let ka = a.iter().max().unwrap() + 1;
        let kb = b.iter().max().unwrap() + 1;
        let mut table = vec![vec![0f64; kb]; ka];
        for i in 0..n {
            table[a[i]][b[i]] += 1.0;
        }
        let c2 = |x: f64| x * (x - 1.0) / 2.0;
        let index: f64 = table.iter().flatten().map(|&v| c2(v)).sum();
        let rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
        let cols: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
        let expected = rows * cols / c2(n as f64);
        (index - expected) / (0.5 * (rows + cols) - expected)
    }

    fn gaussian_clusters(centers: &[Vec<f64>], per: usize, sd: f64, seed: u64) -> (DMatrix<f64>, Vec<usize>) {
        let mut rng = Streams::new(seed).rng();
        let q = centers[0].len();
        let n = centers.len() * per;
        let truth: Vec<usize> = (0..n).map(|i| i / per).collect();
        let m = DMatrix::from_fn(n, q, |i, c| centers[truth[i]][c] + sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng));
        (m, truth)
    }

    #[test]
    fn two_far_groups_are_recovered() {
        let (m, truth) = gaussian_clusters(&[vec![0.0, 0.0], vec![50.0, -50.0]], 6, 0.5, 1);
        assert_eq!(hier_cluster_blocks(&m, 2).unwrap(), canonical(&truth));
    }

    #[test]
    fn k_equal_n_gives_singletons() {
        let (m, _) = gaussian_clusters(&[vec![0.0, 0.0, 1.0]], 7, 1.0, 2);
        assert_eq!(hier_cluster_blocks(&m, 7).unwrap(), (0..7).collect::<Vec<_>>());
        assert_eq!(hier_cluster_blocks(&m, 1).unwrap(), vec![0; 7]);
        assert!(hier_cluster_blocks(&m, 8).is_err());
    }

    #[test]
    fn three_clusters_in_ten_dimensions() {
        // Each pair of centres differs by 10 sd or more in at least half the coordinates.
        let centers =
            vec![vec![0.0; 10], vec![10.0; 10], (0..10).map(|d| if d % 2 == 0 { 10.0 } else { -10.0 }).collect()];
        let (m, truth) = gaussian_clusters(&centers, 20, 1.0, 3);
        let labels = hier_cluster_blocks(&m, 3).unwrap();
        assert_eq!(adjusted_rand(&labels, &truth), 1.0);
    }

    #[test]
    fn row_permutation_only_relabels() {
        let (m, _) = gaussian_clusters(&[vec![0.0; 4], vec![3.0; 4], vec![-3.0, 3.0, 0.0, 1.0]], 10, 1.0, 4);
        let base = hier_cluster_blocks(&m, 5).unwrap();
        let mut perm: Vec<usize> = (0..m.nrows()).collect();
        perm.shuffle(&mut Streams::new(5).rng());
        let pm = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(perm[r], c)]);
        let plabels = hier_cluster_blocks(&pm, 5).unwrap();
        let mut back = vec![0; m.nrows()];
        for (r, &u) in perm.iter().enumerate() {
            back[u] = plabels[r];
        }
        assert_eq!(canonical(&back), base);
    }

    #[test]
    fn ward_heights_match_reference() {
        // scipy.cluster.hierarchy.linkage(x, "ward") heights for these rows.
        let x = DMatrix::from_row_slice(5, 2, &[0.0, 0.0, 1.0, 0.0, 5.0, 0.0, 6.0, 1.0, 0.0, 4.0]);
        let h: Vec<f64> = ward_linkage(&x).iter().map(|m| m.height).collect();
        let want = [1.0, 1.4142135623730951, 4.654746681256314, 8.107609594284453];
        for (a, b) in h.iter().zip(want) {
            assert!((a - b).abs() < 1e-9, "{h:?}");
        }
    }
}
