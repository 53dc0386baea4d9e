//! Agglomerative clustering of trajectory distance matrices and dendrogram
//! export.
//!
//! The matrices here are small (one leaf per configuration), so a plain
//! O(m^3) agglomeration with explicit tie-breaking wins over anything
//! cleverer: merge order is fully deterministic, ties resolve to the
//! smallest leaf indices.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::TrajectoryDistanceMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    Single,
    Average,
    Complete,
}

impl Linkage {
    pub fn parse_flag(s: &str) -> Result<Self> {
        Ok(match s {
            "single" => Linkage::Single,
            "average" => Linkage::Average,
            "complete" => Linkage::Complete,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown linkage '{other}' (expected single|average|complete)"
                )))
            }
        })
    }
}

/// One agglomeration step. Cluster ids follow the usual convention: leaves
/// are `0..m`, the cluster created by merge `t` is `m + t`.
#[derive(Debug, Clone, Serialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

/// Stepwise dendrogram: exactly `m - 1` merges with non-decreasing heights.
#[derive(Debug, Clone, Serialize)]
pub struct Dendrogram {
    pub merges: Vec<Merge>,
    pub leaf_ids: Vec<String>,
}

/// Standard agglomerative clustering of a symmetric distance matrix.
pub fn hierarchical_cluster(
    d: &TrajectoryDistanceMatrix,
    linkage: Linkage,
) -> Result<Dendrogram> {
    let m = d.m();
    if m < 2 {
        return Err(Error::InvalidArgument(
            "clustering needs at least 2 leaves".into(),
        ));
    }
    for v in d.entries() {
        if !v.is_finite() {
            return Err(Error::Numerical("non-finite distance entry".into()));
        }
    }
    // Working copy of inter-cluster distances, indexed by slot; each slot
    // holds a current cluster id and its member count.
    let mut dist: Vec<f64> = d.entries().to_vec();
    let get = |dist: &[f64], i: usize, j: usize| dist[i * m + j];
    let mut active: Vec<bool> = vec![true; m];
    let mut cluster_id: Vec<usize> = (0..m).collect();
    let mut sizes: Vec<usize> = vec![1; m];
    let mut merges = Vec::with_capacity(m - 1);

    for t in 0..m - 1 {
        // Smallest pairwise distance; ties by smallest (i, j).
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..m {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..m {
                if !active[j] {
                    continue;
                }
                let v = get(&dist, i, j);
                match best {
                    Some((bv, _, _)) if v >= bv => {}
                    _ => best = Some((v, i, j)),
                }
            }
        }
        let (height, i, j) = best.expect("at least two active clusters");
        // Record with ascending cluster ids for reproducibility.
        let (ca, cb) = (
            cluster_id[i].min(cluster_id[j]),
            cluster_id[i].max(cluster_id[j]),
        );
        let new_size = sizes[i] + sizes[j];
        merges.push(Merge {
            a: ca,
            b: cb,
            height,
            size: new_size,
        });
        // Fold cluster j into slot i under the chosen linkage.
        for k in 0..m {
            if !active[k] || k == i || k == j {
                continue;
            }
            let dik = get(&dist, i, k);
            let djk = get(&dist, j, k);
            let v = match linkage {
                Linkage::Single => dik.min(djk),
                Linkage::Complete => dik.max(djk),
                Linkage::Average => {
                    (sizes[i] as f64 * dik + sizes[j] as f64 * djk)
                        / (sizes[i] + sizes[j]) as f64
                }
            };
            dist[i * m + k] = v;
            dist[k * m + i] = v;
        }
        active[j] = false;
        sizes[i] = new_size;
        cluster_id[i] = m + t;
    }
    Ok(Dendrogram {
        merges,
        leaf_ids: d.ids.clone(),
    })
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.leaf_ids.len()
    }

    /// Connected components of merges strictly below `height`, as sets of
    /// leaf indices sorted by smallest member.
    pub fn cut(&self, height: f64) -> Vec<Vec<usize>> {
        let m = self.n_leaves();
        let mut parent: Vec<usize> = (0..(2 * m - 1)).collect();
        fn find(parent: &mut Vec<usize>, x: usize) -> usize {
            if parent[x] != x {
                let root = find(parent, parent[x]);
                parent[x] = root;
            }
            parent[x]
        }
        for (t, merge) in self.merges.iter().enumerate() {
            if merge.height < height {
                let new = m + t;
                let ra = find(&mut parent, merge.a);
                let rb = find(&mut parent, merge.b);
                parent[ra] = new;
                parent[rb] = new;
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for leaf in 0..m {
            let root = find(&mut parent, leaf);
            groups.entry(root).or_default().push(leaf);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort_by_key(|g| g[0]);
        out
    }

    /// Newick text with branch lengths (parent height minus child height).
    pub fn to_newick(&self) -> String {
        let m = self.n_leaves();
        fn subtree(d: &Dendrogram, node: usize, parent_height: f64, m: usize) -> String {
            if node < m {
                format!("{}:{:.6}", sanitize(&d.leaf_ids[node]), parent_height)
            } else {
                let merge = &d.merges[node - m];
                let left = subtree(d, merge.a, merge.height, m);
                let right = subtree(d, merge.b, merge.height, m);
                format!(
                    "({left},{right}):{:.6}",
                    (parent_height - merge.height).max(0.0)
                )
            }
        }
        fn sanitize(s: &str) -> String {
            s.replace([' ', ',', '(', ')', ':', ';'], "_")
        }
        let root = 2 * m - 2;
        let root_height = self.merges.last().map_or(0.0, |mg| mg.height);
        let merge = &self.merges[root - m];
        let left = subtree(self, merge.a, root_height, m);
        let right = subtree(self, merge.b, root_height, m);
        format!("({left},{right});")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{DistanceKind, DistanceMatrix};

    fn matrix(entries: &[f64], ids: &[&str]) -> TrajectoryDistanceMatrix {
        DistanceMatrix::new(
            DistanceKind::Bhattacharyya,
            ids.iter().map(|s| s.to_string()).collect(),
            entries.to_vec(),
        )
        .unwrap()
    }

    /// Two tight groups {0,1} and {2,3}: within 0.01, across 1.0.
    fn two_groups() -> TrajectoryDistanceMatrix {
        let mut e = vec![0.0f64; 16];
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    continue;
                }
                e[i * 4 + j] = if (i < 2) == (j < 2) { 0.01 } else { 1.0 };
            }
        }
        matrix(&e, &["a0", "a1", "b0", "b1"])
    }

    #[test]
    fn two_group_separation() {
        for linkage in [Linkage::Single, Linkage::Average, Linkage::Complete] {
            let dend = hierarchical_cluster(&two_groups(), linkage).unwrap();
            assert_eq!(dend.merges.len(), 3);
            assert!((dend.merges[0].height - 0.01).abs() < 1e-12);
            assert!((dend.merges[1].height - 0.01).abs() < 1e-12);
            // Final merge joins the two groups at exactly 1.0.
            assert!((dend.merges[2].height - 1.0).abs() < 1e-12);
            let parts = dend.cut(0.5);
            assert_eq!(parts, vec![vec![0, 1], vec![2, 3]]);
        }
    }

    #[test]
    fn two_leaves_single_merge() {
        let dend = hierarchical_cluster(
            &matrix(&[0.0, 0.7, 0.7, 0.0], &["x", "y"]),
            Linkage::Average,
        )
        .unwrap();
        assert_eq!(dend.merges.len(), 1);
        assert!((dend.merges[0].height - 0.7).abs() < 1e-12);
    }

    #[test]
    fn all_zero_matrix_merges_at_zero() {
        let dend = hierarchical_cluster(
            &matrix(&vec![0.0; 9], &["a", "b", "c"]),
            Linkage::Average,
        )
        .unwrap();
        assert!(dend.merges.iter().all(|m| m.height == 0.0));
        // Deterministic tie-breaking: (0,1) first, then (cluster, 2).
        assert_eq!((dend.merges[0].a, dend.merges[0].b), (0, 1));
    }

    #[test]
    fn cut_boundaries() {
        let dend = hierarchical_cluster(&two_groups(), Linkage::Average).unwrap();
        assert_eq!(dend.cut(0.0).len(), 4, "below all merges: singletons");
        assert_eq!(dend.cut(2.0).len(), 1, "above all merges: one cluster");
        // Monotonicity: raising the cut never increases the cluster count.
        let mut last = usize::MAX;
        for h in [0.0, 0.005, 0.02, 0.5, 1.5] {
            let k = dend.cut(h).len();
            assert!(k <= last);
            last = k;
        }
    }

    #[test]
    fn merge_heights_non_decreasing() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let m = 9;
        let mut e = vec![0.0f64; m * m];
        for i in 0..m {
            for j in 0..i {
                let v = rng.gen::<f64>();
                e[i * m + j] = v;
                e[j * m + i] = v;
            }
        }
        let ids: Vec<String> = (0..m).map(|i| format!("l{i}")).collect();
        let dm = DistanceMatrix::new(
            DistanceKind::Bhattacharyya,
            ids,
            e,
        )
        .unwrap();
        for linkage in [Linkage::Single, Linkage::Average, Linkage::Complete] {
            let dend = hierarchical_cluster(&dm, linkage).unwrap();
            assert_eq!(dend.merges.len(), m - 1);
            for w in dend.merges.windows(2) {
                assert!(w[1].height >= w[0].height - 1e-12);
            }
        }
    }

    #[test]
    fn permutation_gives_isomorphic_dendrogram() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(14);
        let m = 7;
        let mut e = vec![0.0f64; m * m];
        for i in 0..m {
            for j in 0..i {
                let v = rng.gen::<f64>() + 0.01;
                e[i * m + j] = v;
                e[j * m + i] = v;
            }
        }
        let ids: Vec<String> = (0..m).map(|i| format!("l{i}")).collect();
        let dm = DistanceMatrix::new(DistanceKind::Bhattacharyya, ids.clone(), e.clone()).unwrap();
        // Reverse the leaf order.
        let perm: Vec<usize> = (0..m).rev().collect();
        let mut pe = vec![0.0f64; m * m];
        for i in 0..m {
            for j in 0..m {
                pe[i * m + j] = e[perm[i] * m + perm[j]];
            }
        }
        let pids: Vec<String> = perm.iter().map(|&i| ids[i].clone()).collect();
        let pdm = DistanceMatrix::new(DistanceKind::Bhattacharyya, pids, pe).unwrap();

        let d1 = hierarchical_cluster(&dm, Linkage::Average).unwrap();
        let d2 = hierarchical_cluster(&pdm, Linkage::Average).unwrap();
        // Same merge heights...
        for (a, b) in d1.merges.iter().zip(&d2.merges) {
            assert!((a.height - b.height).abs() < 1e-12);
        }
        // ...and identical partitions (as id sets) at every height.
        for h in [0.05, 0.3, 0.6, 0.9, 1.2] {
            let part = |d: &Dendrogram| -> Vec<Vec<String>> {
                let mut p: Vec<Vec<String>> = d
                    .cut(h)
                    .into_iter()
                    .map(|g| {
                        let mut names: Vec<String> =
                            g.iter().map(|&l| d.leaf_ids[l].clone()).collect();
                        names.sort();
                        names
                    })
                    .collect();
                p.sort();
                p
            };
            assert_eq!(part(&d1), part(&d2), "height {h}");
        }
    }

    #[test]
    fn newick_is_well_formed() {
        let dend = hierarchical_cluster(&two_groups(), Linkage::Average).unwrap();
        let nwk = dend.to_newick();
        assert!(nwk.starts_with('(') && nwk.ends_with(';'));
        for id in &dend.leaf_ids {
            assert!(nwk.contains(id.as_str()), "{nwk}");
        }
        assert_eq!(
            nwk.matches('(').count(),
            nwk.matches(')').count(),
            "balanced parens"
        );
    }
}
