use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

/// Speaker name used for voice-activity RTTM files.
pub const VAD_SPEAKER: &str = "speech";

/// Seconds to whole milliseconds.
pub fn to_millis(seconds: f64) -> i64 {
    (seconds * 1000.0).round() as i64
}

pub fn from_millis(ms: i64) -> f64 {
    ms as f64 / 1000.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub recording_id: String,
    pub start: f64,
    pub duration: f64,
    pub speaker: String,
}

impl Segment {
    pub fn new(recording_id: impl Into<String>, start: f64, duration: f64, speaker: impl Into<String>) -> Self {
        Self {
            recording_id: recording_id.into(),
            start,
            duration,
            speaker: speaker.into(),
        }
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end()
    }
}

/// Speaker-labeled segments, the in-memory form of an RTTM file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentList {
    pub entries: Vec<Segment>,
}

impl SegmentList {
    pub fn new(entries: Vec<Segment>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Segment> {
        self.entries.iter()
    }

    /// Sorts by recording, start, then speaker.
    pub fn normalize(&mut self) {
        self.entries.sort_by(|a, b| {
            a.recording_id
                .cmp(&b.recording_id)
                .then(a.start.total_cmp(&b.start))
                .then(a.speaker.cmp(&b.speaker))
                .then(a.duration.total_cmp(&b.duration))
        });
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    pub fn speakers(&self) -> BTreeSet<String> {
        self.entries.iter().map(|s| s.speaker.clone()).collect()
    }

    pub fn recording_ids(&self) -> BTreeSet<String> {
        self.entries.iter().map(|s| s.recording_id.clone()).collect()
    }

    pub fn for_recording(&self, recording_id: &str) -> Self {
        Self::new(
            self.entries
                .iter()
                .filter(|s| s.recording_id == recording_id)
                .cloned()
                .collect(),
        )
    }

    /// Entries of `recording_id`, or every entry when the list never
    /// mentions that id (single-recording files named differently).
    pub fn for_recording_or_all(&self, recording_id: &str) -> Self {
        if self.entries.iter().any(|s| s.recording_id == recording_id) {
            self.for_recording(recording_id)
        } else {
            self.clone()
        }
    }

    /// Sum of segment durations, counting overlapping speakers separately.
    pub fn total_duration(&self) -> f64 {
        self.entries.iter().map(|s| s.duration).sum()
    }

    pub fn with_recording_id(mut self, recording_id: &str) -> Self {
        for s in &mut self.entries {
            s.recording_id = recording_id.to_string();
        }
        self
    }

    /// Returns whether `t` lies inside any segment (closed intervals).
    pub fn covers(&self, t: f64) -> bool {
        self.entries.iter().any(|s| s.contains(t))
    }

    pub fn to_rttm_string(&self) -> String {
        let mut out = String::new();
        for s in &self.entries {
            writeln!(
                out,
                "SPEAKER {} 1 {:.3} {:.3} <NA> <NA> {} <NA> <NA>",
                s.recording_id, s.start, s.duration, s.speaker
            )
            .expect("writing to a String cannot fail");
        }
        out
    }
}

impl<'a> IntoIterator for &'a SegmentList {
    type Item = &'a Segment;
    type IntoIter = std::slice::Iter<'a, Segment>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

impl FromIterator<Segment> for SegmentList {
    fn from_iter<I: IntoIterator<Item = Segment>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

/// Parses RTTM text. `source` names the input in error messages.
pub fn parse_rttm(text: &str, source: &str) -> Result<SegmentList> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] != "SPEAKER" {
            log::warn!("{source}:{line_no}: skipping {} line", fields[0]);
            continue;
        }
        if fields.len() != 10 {
            return Err(Error::parse(
                source,
                line_no,
                format!("expected 10 fields, found {}", fields.len()),
            ));
        }
        let number = |s: &str, what: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(source, line_no, format!("{what} is not a number: {s:?}")))
        };
        let start = number(fields[3], "start")?;
        let duration = number(fields[4], "duration")?;
        if start < 0.0 {
            return Err(Error::parse(source, line_no, "negative start time"));
        }
        if duration <= 0.0 {
            return Err(Error::parse(source, line_no, "duration must be positive"));
        }
        entries.push(Segment::new(fields[1], start, duration, fields[7]));
    }
    Ok(SegmentList::new(entries))
}

pub fn read_rttm(path: impl AsRef<Path>) -> Result<SegmentList> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_rttm(&text, &path.display().to_string())
}

pub fn write_rttm(list: &SegmentList, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, list.to_rttm_string()).map_err(|e| Error::io(path, e))
}
