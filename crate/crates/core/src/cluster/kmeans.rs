use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub seed: u64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self { restarts: 10, seed: 0 }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.gen_range(0..n)].clone()];
    let mut dist: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in dist.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            dist[i] = dist[i].min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

/// Gives every empty cluster the point lying farthest from its centroid
/// among clusters with more than one member.
fn fill_empty(points: &[Vec<f64>], labels: &mut [usize], centroids: &[Vec<f64>], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let donor = (0..points.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .max_by(|&a, &b| {
                let da = sq_dist(&points[a], &centroids[labels[a]]);
                let db = sq_dist(&points[b], &centroids[labels[b]]);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("k <= n leaves a cluster with spare members");
        labels[donor] = empty;
    }
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> (Vec<usize>, f64) {
    let k = centroids.len();
    let dim = points[0].len();
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
    for _ in 0..MAX_ITERATIONS {
        fill_empty(points, &mut labels, &centroids, k);
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for (c, (s, n)) in centroids.iter_mut().zip(sums.into_iter().zip(counts)) {
            *c = s.into_iter().map(|v| v / n as f64).collect();
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    fill_empty(points, &mut labels, &centroids, k);
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l]))
        .sum();
    (labels, inertia)
}

/// k-means++ with seeded restarts; the lowest-inertia run wins (earliest on
/// ties). Every one of the `k` clusters is nonempty when `k <= n`.
pub fn kmeans(points: &[Vec<f64>], k: usize, options: KMeansOptions) -> Vec<usize> {
    let n = points.len();
    assert!(k >= 1 && k <= n, "k = {k} with {n} points");
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..options.restarts.max(1) {
        let init = plus_plus_init(points, k, &mut rng);
        let (labels, inertia) = lloyd(points, init);
        if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
            best = Some((labels, inertia));
        }
    }
    super::relabel_first_occurrence(&best.expect("at least one restart").0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(rng: &mut ChaCha8Rng, centers: &[[f64; 2]], per: usize) -> Vec<Vec<f64>> {
        centers
            .iter()
            .flat_map(|c| {
                (0..per)
                    .map(|_| vec![c[0] + rng.gen_range(-0.1..0.1), c[1] + rng.gen_range(-0.1..0.1)])
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    #[test]
    fn separates_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let points = blobs(&mut rng, &[[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]], 10);
        let labels = kmeans(&points, 3, KMeansOptions::default());
        for g in 0..3 {
            let group = &labels[g * 10..(g + 1) * 10];
            assert!(group.iter().all(|&l| l == group[0]));
        }
        assert_eq!(labels[0], 0);
        assert_ne!(labels[10], labels[20]);
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let points: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.gen(), rng.gen(), rng.gen()]).collect();
        let opts = KMeansOptions { restarts: 10, seed: 9 };
        assert_eq!(kmeans(&points, 4, opts), kmeans(&points, 4, opts));
    }

    #[test]
    fn every_cluster_nonempty_even_for_duplicates() {
        let points = vec![vec![1.0, 1.0]; 5];
        let labels = kmeans(&points, 3, KMeansOptions::default());
        for c in 0..3 {
            assert!(labels.contains(&c), "{labels:?}");
        }
        let distinct: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        assert_eq!(kmeans(&distinct, 6, KMeansOptions::default()), (0..6).collect::<Vec<_>>());
    }
}
