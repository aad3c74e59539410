use nalgebra::DMatrix;

use crate::io::EmbeddingSet;
use crate::{Error, Result};

/// Symmetric cosine-similarity matrix with a unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    values: DMatrix<f64>,
}

impl AffinityMatrix {
    /// Wraps an existing similarity matrix after checking shape, symmetry,
    /// range and diagonal.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::InvalidInput(format!("affinity is {}x{}", n, values.ncols())));
        }
        for i in 0..n {
            if (values[(i, i)] - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!("affinity diagonal at {i} is not 1")));
            }
            for j in 0..i {
                let v = values[(i, j)];
                if !v.is_finite() || !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&v) {
                    return Err(Error::InvalidInput(format!("affinity ({i},{j}) = {v} out of range")));
                }
                if (v - values[(j, i)]).abs() > 1e-9 {
                    return Err(Error::InvalidInput(format!("affinity not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("affinity rows are ragged".into()));
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Same matrix with rows and columns reordered so that new index `i`
    /// is old index `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let n = self.len();
        assert_eq!(order.len(), n);
        Self {
            values: DMatrix::from_fn(n, n, |i, j| self.values[(order[i], order[j])]),
        }
    }
}

pub fn cosine_affinity(set: &EmbeddingSet) -> Result<AffinityMatrix> {
    let n = set.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 embeddings, got {n}")));
    }
    let mut unit = Vec::with_capacity(n);
    for (i, s) in set.segments().iter().enumerate() {
        let norm = s.vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidInput(format!(
                "embedding {i} ({:.3}-{:.3} s) has zero norm",
                s.start, s.end
            )));
        }
        unit.push(s.vector.iter().map(|v| v / norm).collect::<Vec<f64>>());
    }
    let mut values = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..i {
            let dot: f64 = unit[i].iter().zip(&unit[j]).map(|(a, b)| a * b).sum();
            let v = dot.clamp(-1.0, 1.0);
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    Ok(AffinityMatrix { values })
}
