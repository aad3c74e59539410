use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use super::kmeans::{kmeans, KMeansOptions};
use super::{AffinityMatrix, ClusterAssignment, Method};
use crate::{Error, Result};

/// Upper bound on the speaker count searched by NME-SC.
pub const DEFAULT_MAX_SPEAKERS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectralOptions {
    pub max_speakers: usize,
    pub kmeans: KMeansOptions,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            max_speakers: DEFAULT_MAX_SPEAKERS,
            kmeans: KMeansOptions::default(),
        }
    }
}

/// Keeps the `p` largest entries of each row (ties to the lower column),
/// then averages with the transpose.
pub fn binarize(aff: &AffinityMatrix, p: usize) -> DMatrix<f64> {
    let n = aff.len();
    let mut b = DMatrix::zeros(n, n);
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend(0..n);
        order.sort_by(|&x, &y| aff.get(i, y).total_cmp(&aff.get(i, x)).then(x.cmp(&y)));
        for &j in order.iter().take(p) {
            b[(i, j)] = 1.0;
        }
    }
    (&b + b.transpose()) * 0.5
}

pub fn laplacian(adjacency: &DMatrix<f64>) -> DMatrix<f64> {
    let degrees = adjacency.column_sum();
    DMatrix::from_diagonal(&degrees) - adjacency
}

/// Eigenpairs sorted by ascending eigenvalue.
struct Spectrum {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

fn spectrum(matrix: DMatrix<f64>) -> Result<Spectrum> {
    let n = matrix.nrows();
    let eig = SymmetricEigen::try_new(matrix, 1e-12, 10_000)
        .ok_or_else(|| Error::Eigen(format!("symmetric eigensolver did not converge ({n}x{n})")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Spectrum { values, vectors })
}

/// Result of evaluating one binarization parameter `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub p: usize,
    /// Cluster count at the largest eigengap.
    pub k: usize,
    /// Largest eigengap divided by the largest eigenvalue.
    pub normalized_gap: f64,
}

impl SweepPoint {
    /// NME criterion, larger is better.
    pub fn score(&self) -> f64 {
        self.normalized_gap / self.p as f64
    }
}

fn normalized(gap: f64, values: &[f64]) -> f64 {
    let max = values.last().copied().unwrap_or(0.0);
    if max > 1e-12 {
        gap / max
    } else {
        0.0
    }
}

fn sweep_point(aff: &AffinityMatrix, p: usize, max_speakers: usize) -> Result<SweepPoint> {
    let s = spectrum(laplacian(&binarize(aff, p)))?;
    let limit = max_speakers.min(s.values.len() - 1);
    let mut k = 1;
    let mut gap = f64::NEG_INFINITY;
    for i in 0..limit {
        let g = s.values[i + 1] - s.values[i];
        if g > gap {
            gap = g;
            k = i + 1;
        }
    }
    Ok(SweepPoint {
        p,
        k,
        normalized_gap: normalized(gap.max(0.0), &s.values),
    })
}

fn sweep_range(n: usize) -> std::ops::RangeInclusive<usize> {
    1..=(n / 2).max(1)
}

fn best_by_score(points: Vec<SweepPoint>) -> SweepPoint {
    // sequential reduction: ties keep the smaller p
    points
        .into_iter()
        .reduce(|best, c| if c.score() > best.score() { c } else { best })
        .expect("nonempty sweep")
}

/// NME scores for every `p` in `1..=n/2`.
pub fn nme_sweep(aff: &AffinityMatrix, max_speakers: usize) -> Result<Vec<SweepPoint>> {
    sweep_range(aff.len())
        .into_par_iter()
        .map(|p| sweep_point(aff, p, max_speakers))
        .collect()
}

fn check_size(aff: &AffinityMatrix) -> Result<()> {
    if aff.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "spectral clustering needs at least 2 segments, got {}",
            aff.len()
        )));
    }
    Ok(())
}

/// Spectral clustering with the binarization parameter and the cluster
/// count both chosen by the normalized maximum eigengap.
pub fn nme_sc(aff: &AffinityMatrix, options: SpectralOptions) -> Result<ClusterAssignment> {
    check_size(aff)?;
    if options.max_speakers == 0 {
        return Err(Error::InvalidInput("max_speakers must be positive".into()));
    }
    let best = best_by_score(nme_sweep(aff, options.max_speakers)?);
    let labels = embed_and_cluster(aff, best.p, best.k, options.kmeans)?;
    Ok(ClusterAssignment::new(labels, Method::NmeSc, Some(best.p)))
}

/// Spectral clustering with `k` fixed. `p` is re-tuned by the eigengap
/// at `k`, normalized the same way as in [`nme_sc`].
pub fn sc_fixed_k(aff: &AffinityMatrix, k: usize, kmeans_options: KMeansOptions) -> Result<ClusterAssignment> {
    check_size(aff)?;
    let n = aff.len();
    check_k(k, n)?;
    if k == n {
        return Ok(ClusterAssignment::new((0..n).collect(), Method::ScFixedK, None));
    }
    let points: Vec<SweepPoint> = sweep_range(n)
        .into_par_iter()
        .map(|p| {
            let s = spectrum(laplacian(&binarize(aff, p)))?;
            let gap = (s.values[k] - s.values[k - 1]).max(0.0);
            Ok(SweepPoint {
                p,
                k,
                normalized_gap: normalized(gap, &s.values),
            })
        })
        .collect::<Result<_>>()?;
    let best = best_by_score(points);
    sc_fixed_k_with_p(aff, k, best.p, kmeans_options)
}

/// Spectral clustering with both `k` and the binarization parameter fixed.
pub fn sc_fixed_k_with_p(
    aff: &AffinityMatrix,
    k: usize,
    p: usize,
    kmeans_options: KMeansOptions,
) -> Result<ClusterAssignment> {
    check_size(aff)?;
    check_k(k, aff.len())?;
    if p == 0 || p > aff.len() {
        return Err(Error::InvalidInput(format!("p = {p} outside 1..={}", aff.len())));
    }
    let labels = embed_and_cluster(aff, p, k, kmeans_options)?;
    Ok(ClusterAssignment::new(labels, Method::ScFixedK, Some(p)))
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("k = {k} outside 1..={n}")));
    }
    Ok(())
}

fn embed_and_cluster(aff: &AffinityMatrix, p: usize, k: usize, options: KMeansOptions) -> Result<Vec<usize>> {
    let n = aff.len();
    if k == 1 {
        return Ok(vec![0; n]);
    }
    let s = spectrum(laplacian(&binarize(aff, p)))?;
    let rows: Vec<Vec<f64>> = (0..n).map(|r| (0..k).map(|c| s.vectors[(r, c)]).collect()).collect();
    Ok(kmeans(&rows, k, options))
}
