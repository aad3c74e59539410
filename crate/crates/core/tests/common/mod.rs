#![allow(dead_code)]

use arraydiar::assignment::max_weight_matching;
use arraydiar::io::{EmbeddingSegment, EmbeddingSet};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// `count` mutually orthogonal unit vectors (Gram-Schmidt on Gaussians).
pub fn orthonormal(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < count {
        let mut v = gaussian(rng, dim);
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= d * y;
            }
        }
        basis.push(unit(v));
    }
    basis
}

/// Points scattered around unit centroids; `spread` is the expected norm
/// of the isotropic offset.
pub fn blobs(rng: &mut ChaCha8Rng, centroids: &[Vec<f64>], sizes: &[usize], spread: f64) -> (EmbeddingSet, Vec<usize>) {
    let dim = centroids[0].len();
    let sigma = spread / (dim as f64).sqrt();
    let mut segments = Vec::new();
    let mut truth = Vec::new();
    let mut t = 0.0;
    for (c, (centroid, &size)) in centroids.iter().zip(sizes).enumerate() {
        for _ in 0..size {
            let vector = centroid.iter().map(|x| x + sigma * rng.sample::<f64, _>(StandardNormal)).collect();
            segments.push(EmbeddingSegment {
                start: t,
                end: t + 1.44,
                vector,
            });
            truth.push(c);
            t += 0.72;
        }
    }
    (EmbeddingSet::new(segments).unwrap(), truth)
}

/// Fraction of points whose label agrees with the truth under the best
/// one-to-one relabeling.
pub fn label_accuracy(truth: &[usize], labels: &[usize]) -> f64 {
    let kt = truth.iter().max().unwrap() + 1;
    let kl = labels.iter().max().unwrap() + 1;
    let mut overlap = vec![vec![0.0; kl]; kt];
    for (&t, &l) in truth.iter().zip(labels) {
        overlap[t][l] += 1.0;
    }
    let matched: f64 = max_weight_matching(&overlap)
        .iter()
        .enumerate()
        .filter_map(|(t, l)| l.map(|l| overlap[t][l]))
        .sum();
    matched / truth.len() as f64
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / (na * nb)
}

/// Sliding 1.44 s / 0.72 s windows over the reference, each embedded near
/// the centroid of the speaker talking at its center.
pub fn embeddings_for(
    rng: &mut ChaCha8Rng,
    reference: &arraydiar::io::SegmentList,
    centroids: &std::collections::BTreeMap<String, Vec<f64>>,
    spread: f64,
) -> EmbeddingSet {
    let end = reference.iter().map(|s| s.end()).fold(0.0, f64::max);
    let dim = centroids.values().next().unwrap().len();
    let sigma = spread / (dim as f64).sqrt();
    let mut segments = Vec::new();
    let mut t = 0.0;
    while t + 1.44 <= end + 1e-9 {
        let center = t + 0.72;
        if let Some(seg) = reference.iter().find(|s| s.start <= center && center < s.end()) {
            let vector = centroids[&seg.speaker]
                .iter()
                .map(|x| x + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            segments.push(EmbeddingSegment {
                start: t,
                end: t + 1.44,
                vector,
            });
        }
        t += 0.72;
    }
    EmbeddingSet::new(segments).unwrap()
}
