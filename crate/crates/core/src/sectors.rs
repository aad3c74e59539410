//! Spatial diarization: accepted peak directions split the circle into
//! sectors at circular midpoints, and every localized frame takes the label
//! of the sector its azimuth falls in.

use serde::{Deserialize, Serialize};

use crate::census::SpeakerCensus;
use crate::doa::{circular_distance, DoaTrack, TrackPoint};
use crate::io::{FramePlan, Segment, SegmentList};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub label: String,
    /// Inclusive start, degrees.
    pub lower: f64,
    /// Exclusive end, degrees; may be smaller than `lower` when the sector
    /// crosses 0°.
    pub upper: f64,
    pub peak_azimuth: f64,
}

impl Sector {
    fn width(&self) -> f64 {
        let w = (self.upper - self.lower).rem_euclid(360.0);
        if w == 0.0 {
            360.0
        } else {
            w
        }
    }

    pub fn contains(&self, azimuth: f64) -> bool {
        (azimuth - self.lower).rem_euclid(360.0) < self.width()
    }
}

/// Half-open angular sectors that partition the circle, ordered by peak
/// azimuth and labeled `spk0..`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorMap {
    pub sectors: Vec<Sector>,
}

impl SectorMap {
    pub fn from_peaks(peaks: &[f64]) -> Result<Self> {
        if peaks.is_empty() {
            return Err(Error::InvalidInput("no peak azimuths".into()));
        }
        let mut sorted: Vec<f64> = peaks.iter().map(|a| a.rem_euclid(360.0)).collect();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("duplicate peak azimuths".into()));
        }
        let k = sorted.len();
        if k == 1 {
            return Ok(Self {
                sectors: vec![Sector {
                    label: "spk0".into(),
                    lower: 0.0,
                    upper: 360.0,
                    peak_azimuth: sorted[0],
                }],
            });
        }
        // boundary i sits between peak i and the next peak going up
        let boundaries: Vec<f64> = (0..k)
            .map(|i| {
                let a = sorted[i];
                let b = sorted[(i + 1) % k];
                (a + (b - a).rem_euclid(360.0) / 2.0).rem_euclid(360.0)
            })
            .collect();
        let sectors = (0..k)
            .map(|i| Sector {
                label: format!("spk{i}"),
                lower: boundaries[(i + k - 1) % k],
                upper: boundaries[i],
                peak_azimuth: sorted[i],
            })
            .collect();
        Ok(Self { sectors })
    }

    pub fn len(&self) -> usize {
        self.sectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sectors.is_empty()
    }

    /// Boundaries in ascending order (empty for a single full-circle sector).
    pub fn boundaries(&self) -> Vec<f64> {
        if self.sectors.len() < 2 {
            return Vec::new();
        }
        let mut b: Vec<f64> = self.sectors.iter().map(|s| s.upper).collect();
        b.sort_by(f64::total_cmp);
        b
    }

    pub fn sector_of(&self, azimuth: f64) -> usize {
        self.sectors
            .iter()
            .position(|s| s.contains(azimuth))
            .expect("sectors cover the circle")
    }

    pub fn label_of(&self, azimuth: f64) -> &str {
        &self.sectors[self.sector_of(azimuth)].label
    }
}

pub fn build_sectors(census: &SpeakerCensus) -> Result<SectorMap> {
    if census.count == 0 {
        return Err(Error::InvalidInput("census has no speakers".into()));
    }
    SectorMap::from_peaks(&census.peak_azimuths)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrame {
    pub frame_start: f64,
    pub label: String,
}

/// Labels every frame by sector. With `carry_forward`, low-confidence
/// frames repeat the previous confident frame's label and are dropped when
/// no confident frame precedes them; otherwise they use their own azimuth.
pub fn assign_frames(track: &DoaTrack, map: &SectorMap, carry_forward: bool) -> Vec<LabeledFrame> {
    let mut out = Vec::with_capacity(track.len());
    let mut last_confident: Option<&str> = None;
    for p in &track.points {
        let label = if p.confident || !carry_forward {
            let l = map.label_of(p.azimuth_deg);
            if p.confident {
                last_confident = Some(l);
            }
            Some(l)
        } else {
            last_confident
        };
        if let Some(label) = label {
            out.push(LabeledFrame {
                frame_start: p.frame_start,
                label: label.to_string(),
            });
        }
    }
    out
}

/// Merges runs of equally labeled, back-to-back frames into segments
/// spanning `[first_start, last_start + frame_length]`.
pub fn frames_to_rttm(labels: &[LabeledFrame], plan: &FramePlan, recording_id: &str) -> SegmentList {
    let mut entries = Vec::new();
    let mut run: Option<(f64, f64, &str)> = None;
    for f in labels {
        run = match run {
            Some((first, last, label))
                if label == f.label && (f.frame_start - last - plan.frame_shift).abs() < 1e-6 =>
            {
                Some((first, f.frame_start, label))
            }
            Some((first, last, label)) => {
                entries.push(run_segment(recording_id, first, last, label, plan));
                Some((f.frame_start, f.frame_start, f.label.as_str()))
            }
            None => Some((f.frame_start, f.frame_start, f.label.as_str())),
        };
    }
    if let Some((first, last, label)) = run {
        entries.push(run_segment(recording_id, first, last, label, plan));
    }
    SegmentList::new(entries)
}

fn run_segment(recording_id: &str, first: f64, last: f64, label: &str, plan: &FramePlan) -> Segment {
    Segment::new(recording_id, first, last - first + plan.frame_length, label)
}

/// Circular median filter of odd length `window` over the track azimuths.
/// Each output is the window member with the smallest summed angular
/// distance to the others.
pub fn smooth_track(track: &DoaTrack, window: usize) -> Result<DoaTrack> {
    if window.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!("smoothing window must be odd, got {window}")));
    }
    let half = window / 2;
    let n = track.len();
    let points = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let members = &track.points[lo..hi];
            let median = members
                .iter()
                .map(|c| {
                    let cost: f64 = members
                        .iter()
                        .map(|o| circular_distance(c.azimuth_deg, o.azimuth_deg))
                        .sum();
                    (cost, c.azimuth_deg)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, az)| az)
                .expect("window is nonempty");
            TrackPoint {
                azimuth_deg: median,
                ..track.points[i]
            }
        })
        .collect();
    Ok(DoaTrack::new(points, track.plan))
}

/// Sector diarization of a whole track: sectors from the census, frame
/// labels, then RTTM runs.
pub fn diarize_track(
    track: &DoaTrack,
    census: &SpeakerCensus,
    carry_forward: bool,
    recording_id: &str,
) -> Result<SegmentList> {
    let map = build_sectors(census)?;
    let labels = assign_frames(track, &map, carry_forward);
    Ok(frames_to_rttm(&labels, &track.plan, recording_id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(start: f64, az: f64, confident: bool) -> TrackPoint {
        TrackPoint {
            frame_start: start,
            azimuth_deg: az,
            power: 1.0,
            confident,
        }
    }

    fn labeled(starts_labels: &[(f64, &str)]) -> Vec<LabeledFrame> {
        starts_labels
            .iter()
            .map(|&(s, l)| LabeledFrame {
                frame_start: s,
                label: l.into(),
            })
            .collect()
    }

    #[test]
    fn two_opposite_peaks() {
        let map = SectorMap::from_peaks(&[90.0, 270.0]).unwrap();
        assert_eq!(map.boundaries(), vec![0.0, 180.0]);
        let s0 = &map.sectors[0];
        assert_eq!((s0.label.as_str(), s0.lower, s0.upper), ("spk0", 0.0, 180.0));
        assert_eq!(map.label_of(95.0), "spk0");
        assert_eq!(map.label_of(180.0), "spk1");
        assert_eq!(map.label_of(0.0), "spk0");
        assert_eq!(map.label_of(359.9), "spk1");
    }

    #[test]
    fn three_symmetric_peaks() {
        let map = SectorMap::from_peaks(&[0.0, 120.0, 240.0]).unwrap();
        assert_eq!(map.boundaries(), vec![60.0, 180.0, 300.0]);
        assert_eq!(map.label_of(330.0), "spk0");
    }

    #[test]
    fn wraparound_midpoint() {
        let map = SectorMap::from_peaks(&[350.0, 10.0]).unwrap();
        assert_eq!(map.boundaries(), vec![0.0, 180.0]);
        // sorted ascending: 10° is spk0, 350° is spk1
        assert_eq!(map.label_of(5.0), "spk0");
        assert_eq!(map.label_of(355.0), "spk1");
    }

    #[test]
    fn single_peak_is_full_circle_and_duplicates_fail() {
        let map = SectorMap::from_peaks(&[42.0]).unwrap();
        assert!((0..360).all(|a| map.label_of(a as f64) == "spk0"));
        assert!(SectorMap::from_peaks(&[10.0, 10.0]).is_err());
        assert!(SectorMap::from_peaks(&[]).is_err());
    }

    #[test]
    fn low_confidence_frames_carry_forward() {
        let map = SectorMap::from_peaks(&[90.0, 270.0]).unwrap();
        let track = DoaTrack::new(
            vec![
                frame(0.0, 300.0, false),
                frame(0.5, 90.0, true),
                frame(1.0, 270.0, false),
                frame(1.5, 270.0, true),
            ],
            FramePlan::default(),
        );
        let got = assign_frames(&track, &map, true);
        assert_eq!(got, labeled(&[(0.5, "spk0"), (1.0, "spk0"), (1.5, "spk1")]));
        let raw = assign_frames(&track, &map, false);
        assert_eq!(raw.len(), 4);
        assert_eq!(raw[2].label, "spk1");
    }

    #[test]
    fn runs_merge_into_segments() {
        let plan = FramePlan::default();
        let one = frames_to_rttm(&labeled(&[(0.0, "A"), (0.5, "A"), (1.0, "A")]), &plan, "r");
        assert_eq!(one.entries, vec![Segment::new("r", 0.0, 1.5, "A")]);
        let two = frames_to_rttm(&labeled(&[(0.0, "A"), (0.5, "B")]), &plan, "r");
        assert_eq!(
            two.entries,
            vec![Segment::new("r", 0.0, 0.5, "A"), Segment::new("r", 0.5, 0.5, "B")]
        );
        let gap = frames_to_rttm(&labeled(&[(0.0, "A"), (1.5, "A")]), &plan, "r");
        assert_eq!(gap.len(), 2);
        assert!(frames_to_rttm(&[], &plan, "r").is_empty());
    }

    #[test]
    fn median_smoothing_removes_isolated_outliers() {
        let track = DoaTrack::new(
            vec![
                frame(0.0, 358.0, true),
                frame(0.5, 2.0, true),
                frame(1.0, 180.0, true),
                frame(1.5, 1.0, true),
                frame(2.0, 359.0, true),
            ],
            FramePlan::default(),
        );
        let smoothed = smooth_track(&track, 3).unwrap();
        let az: Vec<f64> = smoothed.points.iter().map(|p| p.azimuth_deg).collect();
        assert!(az.iter().all(|&a| circular_distance(a, 0.0) <= 2.0), "{az:?}");
        assert!(smooth_track(&track, 4).is_err());
    }

    /// Plain run-length encoding over frame indices.
    fn rle_oracle(labels: &[Option<u8>], plan: &FramePlan) -> Vec<Segment> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < labels.len() {
            if let Some(l) = labels[i] {
                let mut j = i;
                while j + 1 < labels.len() && labels[j + 1] == Some(l) {
                    j += 1;
                }
                let start = i as f64 * plan.frame_shift;
                let dur = (j - i) as f64 * plan.frame_shift + plan.frame_length;
                out.push(Segment::new("r", start, dur, format!("s{l}")));
                i = j + 1;
            } else {
                i += 1;
            }
        }
        out
    }

    proptest! {
        #[test]
        fn rle_matches_oracle(raw in prop::collection::vec(prop::option::weighted(0.85, 0u8..3), 0..60)) {
            let plan = FramePlan::new(0.5, 0.25).unwrap();
            let frames: Vec<LabeledFrame> = raw
                .iter()
                .enumerate()
                .filter_map(|(k, l)| l.map(|l| LabeledFrame { frame_start: k as f64 * 0.25, label: format!("s{l}") }))
                .collect();
            let got = frames_to_rttm(&frames, &plan, "r");
            let want = rle_oracle(&raw, &plan);
            prop_assert_eq!(got.entries.len(), want.len());
            for (g, w) in got.entries.iter().zip(&want) {
                prop_assert_eq!(&g.speaker, &w.speaker);
                prop_assert!((g.start - w.start).abs() < 1e-9 && (g.duration - w.duration).abs() < 1e-9);
            }
            // total labelled time = sum over runs of length + (n - 1) * shift
            let total: f64 = want.iter().map(|s| s.duration).sum();
            prop_assert!((got.total_duration() - total).abs() < 1e-9);
        }

        #[test]
        fn sectors_partition_and_rotate(
            peaks in prop::collection::btree_set(0u32..3600, 1..5),
            phi in 0u32..3600,
            probe in 0u32..3600,
        ) {
            let peaks: Vec<f64> = peaks.into_iter().map(|p| p as f64 / 10.0).collect();
            let map = SectorMap::from_peaks(&peaks).unwrap();
            let az = probe as f64 / 10.0;
            prop_assert_eq!(map.sectors.iter().filter(|s| s.contains(az)).count(), 1);
            for s in &map.sectors {
                prop_assert!(s.contains(s.peak_azimuth));
            }
            let total: f64 = map.sectors.iter().map(Sector::width).sum();
            prop_assert!((total - 360.0).abs() < 1e-9);

            let shift = phi as f64 / 10.0;
            let turned: Vec<f64> = peaks.iter().map(|p| (p + shift) % 360.0).collect();
            let turned_map = SectorMap::from_peaks(&turned).unwrap();
            let mut want: Vec<f64> = map.boundaries().iter().map(|b| (b + shift) % 360.0).collect();
            want.sort_by(f64::total_cmp);
            let got = turned_map.boundaries();
            for (w, g) in want.iter().zip(&got) {
                prop_assert!(circular_distance(*w, *g) < 1e-9);
            }
        }
    }
}
