//! Diarization error rate with a forgiveness collar around reference
//! boundaries and optional exclusion of overlapped reference speech.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assignment::max_weight_matching;
use crate::io::{from_millis, to_millis, SegmentList};
use crate::timeline::{self, Span};
use crate::{Error, Result};

pub const DEFAULT_COLLAR: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreOptions {
    /// Seconds excluded on each side of every reference boundary.
    pub collar: f64,
    /// Skip regions where two or more reference speakers talk at once.
    pub ignore_overlap: bool,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self {
            collar: DEFAULT_COLLAR,
            ignore_overlap: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorComponent {
    pub seconds: f64,
    /// Percent of scored reference speech.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerReport {
    pub scored_time: f64,
    pub missed_speech: ErrorComponent,
    pub false_alarm: ErrorComponent,
    pub speaker_error: ErrorComponent,
    /// Percent.
    pub der: f64,
    /// Reference speaker to hypothesis speaker.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub mapping: BTreeMap<String, String>,
}

impl DerReport {
    fn from_millis(scored: i64, missed: i64, false_alarm: i64, speaker: i64, mapping: BTreeMap<String, String>) -> Self {
        let scored_time = from_millis(scored);
        Self::from_seconds(
            scored_time,
            from_millis(missed),
            from_millis(false_alarm),
            from_millis(speaker),
            mapping,
        )
    }

    fn from_seconds(scored_time: f64, missed: f64, false_alarm: f64, speaker: f64, mapping: BTreeMap<String, String>) -> Self {
        let pct = |s: f64| 100.0 * s / scored_time;
        let component = |s: f64| ErrorComponent {
            seconds: s,
            percent: pct(s),
        };
        Self {
            scored_time,
            missed_speech: component(missed),
            false_alarm: component(false_alarm),
            speaker_error: component(speaker),
            der: pct(missed + false_alarm + speaker),
            mapping,
        }
    }

    pub fn error_seconds(&self) -> f64 {
        self.missed_speech.seconds + self.false_alarm.seconds + self.speaker_error.seconds
    }

    /// Pools several recordings: error and scored seconds are summed, so
    /// each recording weighs in by its scored time.
    pub fn combine(reports: &[DerReport]) -> Result<Self> {
        let scored: f64 = reports.iter().map(|r| r.scored_time).sum();
        if scored <= 0.0 {
            return Err(Error::NoScoredTime);
        }
        let sum = |f: fn(&DerReport) -> f64| reports.iter().map(f).sum::<f64>();
        Ok(Self::from_seconds(
            scored,
            sum(|r| r.missed_speech.seconds),
            sum(|r| r.false_alarm.seconds),
            sum(|r| r.speaker_error.seconds),
            BTreeMap::new(),
        ))
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<16}{:>10.3} s", "scored time", self.scored_time);
        for (name, c) in [
            ("missed speech", &self.missed_speech),
            ("false alarm", &self.false_alarm),
            ("speaker error", &self.speaker_error),
        ] {
            let _ = writeln!(out, "{:<16}{:>10.3} s{:>9.2} %", name, c.seconds, c.percent);
        }
        let _ = writeln!(out, "{:<16}{:>10.3} s{:>9.2} %", "DER", self.error_seconds(), self.der);
        out
    }
}

/// Elementary region of the scoring timeline.
struct Region<'a> {
    duration: i64,
    reference: Vec<&'a str>,
    hypothesis: Vec<&'a str>,
}

fn scored_regions<'a>(reference: &'a [Span], hypothesis: &'a [Span], options: &ScoreOptions) -> Vec<Region<'a>> {
    let collar = to_millis(options.collar);
    let boundaries: Vec<i64> = reference.iter().flat_map(|s| [s.start, s.end]).collect();
    let mut collars: Vec<(i64, i64)> = boundaries.iter().map(|&b| (b - collar, b + collar)).collect();
    collars.sort_unstable();
    let points = reference
        .iter()
        .chain(hypothesis)
        .flat_map(|s| [s.start, s.end])
        .chain(collars.iter().flat_map(|&(a, b)| [a, b]));
    let cuts = timeline::cuts(points);
    let mut regions = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if collar > 0 && collars.iter().any(|&(a, b)| a <= lo && hi <= b) {
            continue;
        }
        let reference = timeline::active(reference, lo, hi);
        if options.ignore_overlap && reference.len() >= 2 {
            continue;
        }
        let hypothesis = timeline::active(hypothesis, lo, hi);
        if reference.is_empty() && hypothesis.is_empty() {
            continue;
        }
        regions.push(Region {
            duration: hi - lo,
            reference,
            hypothesis,
        });
    }
    regions
}

fn distinct_labels(spans: &[Span]) -> Vec<&str> {
    let mut v: Vec<&str> = spans.iter().map(|s| s.label.as_str()).collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Scores one recording. Recording ids are not inspected; use
/// [`score_recordings`] for multi-recording lists.
pub fn score(reference: &SegmentList, hypothesis: &SegmentList, options: &ScoreOptions) -> Result<DerReport> {
    if options.collar.is_nan() || options.collar < 0.0 {
        return Err(Error::InvalidInput(format!("collar must be >= 0, got {}", options.collar)));
    }
    let ref_spans = timeline::spans(reference);
    let hyp_spans = timeline::spans(hypothesis);
    let regions = scored_regions(&ref_spans, &hyp_spans, options);

    let ref_labels = distinct_labels(&ref_spans);
    let hyp_labels = distinct_labels(&hyp_spans);
    let ref_index: BTreeMap<&str, usize> = ref_labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let hyp_index: BTreeMap<&str, usize> = hyp_labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();

    let mut overlap = vec![vec![0.0; hyp_labels.len()]; ref_labels.len()];
    let (mut scored, mut missed, mut false_alarm, mut matched_total) = (0i64, 0i64, 0i64, 0i64);
    for r in &regions {
        let (nr, nh) = (r.reference.len() as i64, r.hypothesis.len() as i64);
        scored += r.duration * nr;
        missed += r.duration * (nr - nh).max(0);
        false_alarm += r.duration * (nh - nr).max(0);
        matched_total += r.duration * nr.min(nh);
        for a in &r.reference {
            for b in &r.hypothesis {
                overlap[ref_index[a]][hyp_index[b]] += r.duration as f64;
            }
        }
    }
    if scored == 0 {
        return Err(Error::NoScoredTime);
    }
    let matching = max_weight_matching(&overlap);
    let correct: i64 = matching
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| overlap[i][j] as i64))
        .sum();
    let mapping = matching
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| (ref_labels[i].to_string(), hyp_labels[j].to_string())))
        .collect();
    Ok(DerReport::from_millis(
        scored,
        missed,
        false_alarm,
        matched_total - correct,
        mapping,
    ))
}

/// Scores every recording present in the reference and pools the result.
/// Hypothesis recordings without a reference are skipped with a warning.
pub fn score_recordings(
    reference: &SegmentList,
    hypothesis: &SegmentList,
    options: &ScoreOptions,
) -> Result<(BTreeMap<String, DerReport>, DerReport)> {
    let ref_ids = reference.recording_ids();
    for id in hypothesis.recording_ids().difference(&ref_ids) {
        log::warn!("hypothesis recording {id} has no reference; skipped");
    }
    let mut per_recording = BTreeMap::new();
    for id in ref_ids {
        let report = score(&reference.for_recording(&id), &hypothesis.for_recording(&id), options)?;
        per_recording.insert(id, report);
    }
    let reports: Vec<DerReport> = per_recording.values().cloned().collect();
    let total = DerReport::combine(&reports)?;
    Ok((per_recording, total))
}
