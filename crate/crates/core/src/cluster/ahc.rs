use super::{AffinityMatrix, ClusterAssignment, Method};

/// AHC threshold from the reference system's cosine backend.
pub const DEFAULT_AHC_THRESHOLD: f64 = -0.015;

/// One agglomeration step. Clusters are named by their smallest member
/// index; `absorbed` is merged into `kept` (`kept < absorbed`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub kept: usize,
    pub absorbed: usize,
    pub similarity: f64,
}

/// Average-linkage agglomeration, merging while the best average
/// similarity is at least `threshold` (all the way to one cluster when
/// `threshold` is `None`). Ties go to the lowest `(kept, absorbed)` pair.
pub fn agglomerate(aff: &AffinityMatrix, threshold: Option<f64>) -> Vec<Merge> {
    let n = aff.len();
    // sums[a][b]: summed similarity between members of clusters a and b
    let mut sums: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| aff.get(i, j)).collect()).collect();
    let mut sizes = vec![1usize; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    while active.len() > 1 {
        let mut best: Option<(usize, usize, f64)> = None;
        for (x, &a) in active.iter().enumerate() {
            for &b in &active[x + 1..] {
                let avg = sums[a][b] / (sizes[a] * sizes[b]) as f64;
                if best.is_none_or(|(_, _, s)| avg > s) {
                    best = Some((a, b, avg));
                }
            }
        }
        let (a, b, similarity) = best.expect("at least two active clusters");
        if threshold.is_some_and(|t| similarity < t) {
            break;
        }
        for &c in &active {
            if c != a && c != b {
                let s = sums[a][c] + sums[b][c];
                sums[a][c] = s;
                sums[c][a] = s;
            }
        }
        sizes[a] += sizes[b];
        active.retain(|&c| c != b);
        merges.push(Merge {
            kept: a,
            absorbed: b,
            similarity,
        });
    }
    merges
}

/// Flat labels after applying `merges` to `n` singletons, numbered by
/// first occurrence.
pub fn labels_from_merges(n: usize, merges: &[Merge]) -> Vec<usize> {
    let mut root: Vec<usize> = (0..n).collect();
    for m in merges {
        for r in root.iter_mut() {
            if *r == m.absorbed {
                *r = m.kept;
            }
        }
    }
    super::relabel_first_occurrence(&root)
}

pub fn ahc(aff: &AffinityMatrix, threshold: f64) -> ClusterAssignment {
    let merges = agglomerate(aff, Some(threshold));
    let labels = labels_from_merges(aff.len(), &merges);
    ClusterAssignment::new(labels, Method::Ahc, None)
}
