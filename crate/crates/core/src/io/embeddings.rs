use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSegment {
    pub start: f64,
    pub end: f64,
    pub vector: Vec<f64>,
}

/// Fixed-dimension speaker embeddings, one per time segment.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    segments: Vec<EmbeddingSegment>,
    dim: usize,
}

impl EmbeddingSet {
    pub fn new(segments: Vec<EmbeddingSegment>) -> Result<Self> {
        let dim = segments.first().map_or(0, |s| s.vector.len());
        for (i, s) in segments.iter().enumerate() {
            if s.vector.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "segment {i}: dimension {} differs from {dim}",
                    s.vector.len()
                )));
            }
            if s.end.partial_cmp(&s.start) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::InvalidInput(format!("segment {i}: end <= start")));
            }
            if s.vector.iter().any(|v| !v.is_finite()) || !s.start.is_finite() || !s.end.is_finite() {
                return Err(Error::InvalidInput(format!("segment {i}: non-finite value")));
            }
        }
        Ok(Self { segments, dim })
    }

    pub fn segments(&self) -> &[EmbeddingSegment] {
        &self.segments
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            segments: self
                .segments
                .iter()
                .map(|s| EmbeddingSegment {
                    vector: s.vector.iter().map(|v| v * factor).collect(),
                    ..s.clone()
                })
                .collect(),
            dim: self.dim,
        }
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (header_no, header) = lines
            .next()
            .ok_or_else(|| Error::parse(source, 1, "missing dim=<D> header"))?;
        let declared: usize = header
            .strip_prefix("dim=")
            .and_then(|d| d.trim().parse().ok())
            .ok_or_else(|| Error::parse(source, header_no, format!("bad header {header:?}")))?;

        let mut segments = Vec::new();
        for (line_no, line) in lines {
            let values = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| {
                        Error::parse(source, line_no, format!("not a number: {tok:?}"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.len() < 3 {
                return Err(Error::parse(source, line_no, "row needs start, end and a vector"));
            }
            let vector = values[2..].to_vec();
            let expected = segments
                .first()
                .map_or(declared, |s: &EmbeddingSegment| s.vector.len());
            if vector.len() != expected {
                return Err(Error::parse(
                    source,
                    line_no,
                    format!("row has {} components, expected {expected}", vector.len()),
                ));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse(source, line_no, "row contains NaN or Inf"));
            }
            let (start, end) = (values[0], values[1]);
            if end <= start {
                return Err(Error::parse(
                    source,
                    line_no,
                    format!("row end {end} is not after start {start}"),
                ));
            }
            segments.push(EmbeddingSegment { start, end, vector });
        }
        let mut set = Self::new(segments)?;
        set.dim = declared;
        Ok(set)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("dim={}\n", self.dim);
        for s in &self.segments {
            write!(out, "{} {}", s.start, s.end).expect("string write");
            for v in &s.vector {
                write!(out, " {v}").expect("string write");
            }
            out.push('\n');
        }
        out
    }
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EmbeddingSet::parse(&text, &path.display().to_string())
}

pub fn write_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, set.to_text()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn header_sets_dimension() {
        let mut text = String::from("dim=256\n");
        for k in 0..3 {
            text.push_str(&format!("{} {}", k as f64 * 0.72, k as f64 * 0.72 + 1.44));
            for d in 0..256 {
                text.push_str(&format!(" {}", (d + k) as f64 * 0.01));
            }
            text.push('\n');
        }
        let set = EmbeddingSet::parse(&text, "e").unwrap();
        assert_eq!(set.dim(), 256);
        assert_eq!(set.len(), 3);
    }

    #[test]
    fn row_errors_name_the_line() {
        let bad_order = "dim=2\n0 1 0.1 0.2\n3 2 0.1 0.2\n";
        match EmbeddingSet::parse(bad_order, "e") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(EmbeddingSet::parse("dim=2\n0 1 0.1\n", "e").is_err());
        assert!(EmbeddingSet::parse("dim=2\n0 1 0.1 NaN\n", "e").is_err());
        assert!(EmbeddingSet::parse("dim=2\n0 1 0.1 0.2\n1 2 0.1 0.2 0.3\n", "e").is_err());
        assert!(EmbeddingSet::parse("0 1 0.1 0.2\n", "e").is_err());
    }

    #[test]
    fn random_matrix_round_trips_through_file() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let segments = (0..40)
            .map(|k| EmbeddingSegment {
                start: k as f64 * 0.6,
                end: k as f64 * 0.6 + 1.44,
                vector: (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            })
            .collect();
        let set = EmbeddingSet::new(segments).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        write_embeddings(&set, &path).unwrap();
        assert_eq!(read_embeddings(&path).unwrap(), set);
    }
}
