//! Millisecond-quantized views of segment lists shared by scoring and
//! fusion.

use crate::io::{from_millis, to_millis, Segment, SegmentList};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Span {
    pub start: i64,
    pub end: i64,
    pub label: String,
}

/// Quantized spans, dropping any that vanish after rounding.
pub(crate) fn spans(list: &SegmentList) -> Vec<Span> {
    list.iter()
        .map(|s| Span {
            start: to_millis(s.start),
            end: to_millis(s.end()),
            label: s.speaker.clone(),
        })
        .filter(|s| s.end > s.start)
        .collect()
}

/// Sorted, deduplicated cut points.
pub(crate) fn cuts(points: impl IntoIterator<Item = i64>) -> Vec<i64> {
    let mut v: Vec<i64> = points.into_iter().collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Distinct labels active over `[lo, hi)`, which must not straddle any
/// span edge; sorted.
pub(crate) fn active(spans: &[Span], lo: i64, hi: i64) -> Vec<&str> {
    let mut v: Vec<&str> = spans
        .iter()
        .filter(|s| s.start <= lo && hi <= s.end)
        .map(|s| s.label.as_str())
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

pub(crate) fn segment(recording_id: &str, start: i64, end: i64, label: &str) -> Segment {
    Segment::new(recording_id, from_millis(start), from_millis(end - start), label)
}
