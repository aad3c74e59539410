use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::SteeringGrid;
use super::srp::SrpPhat;
use crate::io::{frame_clip, FramePlan, MultichannelClip, SegmentList};
use crate::{Error, Result};

/// Per-frame localization result, one row of the track CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub frame_start: f64,
    pub azimuth_deg: f64,
    pub power: f64,
    pub confident: bool,
}

/// Time-ordered per-frame azimuth estimates of one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct DoaTrack {
    pub points: Vec<TrackPoint>,
    pub plan: FramePlan,
}

impl DoaTrack {
    pub fn new(points: Vec<TrackPoint>, plan: FramePlan) -> Self {
        Self { points, plan }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("frame_start,azimuth_deg,power,confident\n");
        for p in &self.points {
            out.push_str(&format!(
                "{:.3},{:.5},{:.6},{}\n",
                p.frame_start, p.azimuth_deg, p.power, p.confident
            ));
        }
        out
    }

    /// Reads a track CSV; the frame plan is not stored in the file.
    pub fn read_csv(path: impl AsRef<Path>, plan: FramePlan) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path)?;
        let points = reader
            .deserialize()
            .collect::<std::result::Result<Vec<TrackPoint>, _>>()?;
        Ok(Self::new(points, plan))
    }
}

/// Runs SRP-PHAT on every frame whose center falls inside the VAD speech
/// regions.
pub fn localize(
    clip: &MultichannelClip,
    plan: &FramePlan,
    grid: &SteeringGrid,
    vad: &SegmentList,
) -> Result<DoaTrack> {
    plan.validate()?;
    if clip.channel_count() != grid.mic_count() {
        return Err(Error::ChannelMismatch {
            clip: clip.channel_count(),
            geometry: grid.mic_count(),
        });
    }
    if clip.sample_rate() != grid.sample_rate() {
        return Err(Error::InvalidInput(format!(
            "clip sample rate {} differs from geometry sample rate {}",
            clip.sample_rate(),
            grid.sample_rate()
        )));
    }
    if vad.is_empty() {
        log::warn!("empty VAD: no frames will be localized");
        return Ok(DoaTrack::new(Vec::new(), *plan));
    }
    let (frame_len, _) = plan.in_samples(clip.sample_rate());
    let frames: Vec<_> = frame_clip(clip, plan)
        .into_iter()
        .filter(|f| vad.covers(f.start + plan.frame_length / 2.0))
        .collect();
    let srp = SrpPhat::new(grid, frame_len);
    let points = frames
        .par_iter()
        .map(|f| {
            srp.frame(&f.channels, f.start).map(|r| TrackPoint {
                frame_start: r.frame_start,
                azimuth_deg: r.argmax_azimuth,
                power: r.argmax_power,
                confident: r.confident,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DoaTrack::new(points, *plan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doa::circular_distance;
    use crate::io::{MicArrayGeometry, Segment, VAD_SPEAKER};
    use crate::synth::{render, SceneSpec, SignalKind, SourceSpec};

    fn vad(start: f64, end: f64) -> SegmentList {
        SegmentList::new(vec![Segment::new("r", start, end - start, VAD_SPEAKER)])
    }

    fn scene(sources: Vec<SourceSpec>, duration: f64, snr_db: f64) -> SceneSpec {
        SceneSpec {
            recording_id: "r".into(),
            geometry: MicArrayGeometry::circular(4, 0.1, 16000).unwrap(),
            sources,
            snr_db,
            duration,
            seed: 21,
            gain: 0.25,
        }
    }

    #[test]
    fn full_vad_keeps_every_frame() {
        let spec = scene(
            vec![SourceSpec::new(45.0, vec![(0.0, 20.0)], SignalKind::SpeechLike)],
            20.0,
            f64::INFINITY,
        );
        let out = render(&spec).unwrap();
        let grid = SteeringGrid::build(&spec.geometry, 256).unwrap();
        let track = localize(&out.clip, &FramePlan::default(), &grid, &vad(0.0, 20.0)).unwrap();
        assert_eq!(track.len(), 40);
        assert!(track
            .points
            .iter()
            .all(|p| circular_distance(p.azimuth_deg, 45.0) <= grid.step() + 1e-9));
    }

    #[test]
    fn vad_filters_on_frame_center() {
        let spec = scene(
            vec![SourceSpec::new(45.0, vec![(0.0, 10.0)], SignalKind::SpeechLike)],
            10.0,
            30.0,
        );
        let out = render(&spec).unwrap();
        let grid = SteeringGrid::build(&spec.geometry, 64).unwrap();
        let track = localize(&out.clip, &FramePlan::default(), &grid, &vad(0.0, 5.0)).unwrap();
        assert_eq!(track.len(), 10);
        assert!(track.points.iter().all(|p| p.frame_start + 0.25 <= 5.0));
        let none = localize(&out.clip, &FramePlan::default(), &grid, &SegmentList::default()).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn alternating_speakers_are_tracked() {
        let a: Vec<(f64, f64)> = (0..5).map(|k| (4.0 * k as f64, 4.0 * k as f64 + 2.0)).collect();
        let b: Vec<(f64, f64)> = a.iter().map(|(s, e)| (s + 2.0, e + 2.0)).collect();
        let spec = scene(
            vec![
                SourceSpec::new(0.0, a, SignalKind::SpeechLike),
                SourceSpec::new(120.0, b, SignalKind::SpeechLike),
            ],
            20.0,
            20.0,
        );
        let out = render(&spec).unwrap();
        let grid = SteeringGrid::build(&spec.geometry, 256).unwrap();
        let track = localize(&out.clip, &FramePlan::default(), &grid, &out.vad).unwrap();
        let hits = track
            .points
            .iter()
            .filter(|p| {
                let turn = (p.frame_start / 2.0).floor() as usize;
                let truth = if turn.is_multiple_of(2) { 0.0 } else { 120.0 };
                circular_distance(p.azimuth_deg, truth) <= grid.step() + 1e-9
            })
            .count();
        assert!(hits as f64 >= 0.9 * track.len() as f64, "{hits}/{}", track.len());
    }

    #[test]
    fn mono_clip_with_eight_mic_geometry_fails() {
        let clip = MultichannelClip::new(vec![vec![0.0; 16000]], 16000).unwrap();
        let grid = SteeringGrid::build(&MicArrayGeometry::circular(8, 0.1, 16000).unwrap(), 64).unwrap();
        assert!(matches!(
            localize(&clip, &FramePlan::default(), &grid, &vad(0.0, 1.0)),
            Err(Error::ChannelMismatch { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let track = DoaTrack::new(
            vec![
                TrackPoint { frame_start: 0.0, azimuth_deg: 1.40625, power: 3.5, confident: true },
                TrackPoint { frame_start: 0.5, azimuth_deg: 358.59375, power: 0.25, confident: false },
            ],
            FramePlan::default(),
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        track.write_csv(&path).unwrap();
        assert_eq!(DoaTrack::read_csv(&path, FramePlan::default()).unwrap(), track);
    }
}
