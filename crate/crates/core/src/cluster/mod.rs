//! Clustering of externally extracted speaker embeddings: cosine affinity,
//! average-linkage AHC, NME-tuned spectral clustering and spectral
//! clustering with a known speaker count.

mod affinity;
pub mod ahc;
pub mod kmeans;
pub mod spectral;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::io::{EmbeddingSet, Segment, SegmentList};
use crate::{Error, Result};

pub use affinity::{cosine_affinity, AffinityMatrix};
pub use ahc::{agglomerate, ahc, Merge, DEFAULT_AHC_THRESHOLD};
pub use kmeans::{kmeans, KMeansOptions};
pub use spectral::{nme_sc, nme_sweep, sc_fixed_k, sc_fixed_k_with_p, SpectralOptions, SweepPoint, DEFAULT_MAX_SPEAKERS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ahc,
    NmeSc,
    ScFixedK,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ahc => "ahc",
            Method::NmeSc => "nme-sc",
            Method::ScFixedK => "sc-fixed-k",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    /// Cluster index per segment, numbered by first occurrence.
    pub labels: Vec<usize>,
    pub k: usize,
    pub method: Method,
    /// Row-binarization parameter used by the spectral methods.
    pub p: Option<usize>,
}

impl ClusterAssignment {
    pub(crate) fn new(labels: Vec<usize>, method: Method, p: Option<usize>) -> Self {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Self { labels, k, method, p }
    }
}

pub(crate) fn relabel_first_occurrence(raw: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    raw.iter()
        .map(|r| {
            let next = map.len();
            *map.entry(*r).or_insert(next)
        })
        .collect()
}

/// One RTTM entry per segment labeled `spk<cluster>`. Where segments
/// overlap, each instant belongs to the covering segment whose center is
/// closest (the earlier one on ties), which splits two overlapping windows
/// at the middle of their overlap; equal neighbors are then merged.
pub fn assignment_to_rttm(assign: &ClusterAssignment, set: &EmbeddingSet, recording_id: &str) -> Result<SegmentList> {
    if assign.labels.len() != set.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} embedding segments",
            assign.labels.len(),
            set.len()
        )));
    }
    let segments = set.segments();
    let mut cuts: Vec<f64> = segments.iter().flat_map(|s| [s.start, s.end]).collect();
    let mut by_start: Vec<usize> = (0..segments.len()).collect();
    by_start.sort_by(|&a, &b| segments[a].start.total_cmp(&segments[b].start).then(a.cmp(&b)));
    for w in by_start.windows(2) {
        let (a, b) = (&segments[w[0]], &segments[w[1]]);
        cuts.push((a.start + a.end + b.start + b.end) / 4.0);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut out: Vec<Segment> = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo < 1e-9 {
            continue;
        }
        let mid = (lo + hi) / 2.0;
        let owner = by_start
            .iter()
            .copied()
            .filter(|&i| segments[i].start <= mid && mid < segments[i].end)
            .min_by(|&a, &b| {
                let ca = (segments[a].start + segments[a].end) / 2.0;
                let cb = (segments[b].start + segments[b].end) / 2.0;
                (mid - ca).abs().total_cmp(&(mid - cb).abs())
            });
        let Some(owner) = owner else { continue };
        let speaker = format!("spk{}", assign.labels[owner]);
        match out.last_mut() {
            Some(last) if last.speaker == speaker && (last.end() - lo).abs() < 1e-9 => {
                last.duration = hi - last.start;
            }
            _ => out.push(Segment::new(recording_id, lo, hi - lo, speaker)),
        }
    }
    Ok(SegmentList::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{parse_rttm, EmbeddingSegment};
    use proptest::prelude::*;

    fn windows(spans: &[(f64, f64)]) -> EmbeddingSet {
        EmbeddingSet::new(
            spans
                .iter()
                .map(|&(start, end)| EmbeddingSegment {
                    start,
                    end,
                    vector: vec![1.0],
                })
                .collect(),
        )
        .unwrap()
    }

    fn assignment(labels: Vec<usize>) -> ClusterAssignment {
        ClusterAssignment::new(labels, Method::Ahc, None)
    }

    #[test]
    fn relabels_by_first_occurrence() {
        assert_eq!(relabel_first_occurrence(&[7, 3, 7, 9, 3]), vec![0, 1, 0, 2, 1]);
    }

    #[test]
    fn same_label_windows_merge() {
        let set = windows(&[(0.0, 1.44), (0.72, 2.16)]);
        let rttm = assignment_to_rttm(&assignment(vec![0, 0]), &set, "r").unwrap();
        assert_eq!(rttm.len(), 1);
        assert_eq!(rttm.entries[0].start, 0.0);
        assert!((rttm.entries[0].duration - 2.16).abs() < 1e-12);
    }

    #[test]
    fn different_labels_split_at_overlap_midpoint() {
        let set = windows(&[(0.0, 1.44), (0.72, 2.16)]);
        let rttm = assignment_to_rttm(&assignment(vec![0, 1]), &set, "r").unwrap();
        assert_eq!(rttm.len(), 2);
        assert!((rttm.entries[0].end() - 1.08).abs() < 1e-12);
        assert!((rttm.entries[1].start - 1.08).abs() < 1e-12);
        assert_eq!(rttm.entries[1].speaker, "spk1");
    }

    #[test]
    fn label_count_must_match() {
        let set = windows(&[(0.0, 1.0)]);
        assert!(assignment_to_rttm(&assignment(vec![0, 1]), &set, "r").is_err());
    }

    proptest! {
        #[test]
        fn output_is_non_overlapping_and_round_trips(
            labels in prop::collection::vec(0usize..3, 1..25),
            shift in prop::sample::select(vec![0.6, 0.72, 1.44, 2.0]),
        ) {
            let spans: Vec<(f64, f64)> = (0..labels.len()).map(|i| (i as f64 * shift, i as f64 * shift + 1.44)).collect();
            let set = windows(&spans);
            let a = assignment(relabel_first_occurrence(&labels));
            let rttm = assignment_to_rttm(&a, &set, "rec").unwrap();
            for w in rttm.entries.windows(2) {
                prop_assert!(w[0].end() <= w[1].start + 1e-9);
                prop_assert!(w[0].speaker != w[1].speaker || w[0].end() < w[1].start - 1e-9);
            }
            prop_assert!(rttm.entries.iter().all(|s| s.duration > 0.0));
            // coverage equals the union of the windows
            let union: f64 = if shift <= 1.44 { spans.last().unwrap().1 } else { 1.44 * spans.len() as f64 };
            prop_assert!((rttm.total_duration() - union).abs() < 1e-6);
            let back = parse_rttm(&rttm.to_rttm_string(), "mem").unwrap();
            prop_assert_eq!(back.len(), rttm.len());
            for (b, r) in back.entries.iter().zip(&rttm.entries) {
                prop_assert_eq!(&b.speaker, &r.speaker);
                prop_assert!((b.start - r.start).abs() <= 5e-4 && (b.duration - r.duration).abs() <= 1e-3);
            }
        }
    }
}
