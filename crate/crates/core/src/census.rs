//! Speaker counting from a 10° histogram of frame directions.
//!
//! Local maxima of the circular histogram are ranked by frame count. The
//! two strongest are always speakers; the third and fourth count only when
//! they hold more than a quarter of the frames of the second strongest.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::doa::DoaTrack;
use crate::{Error, Result};

pub const BIN_COUNT: usize = 36;
pub const BIN_WIDTH_DEG: f64 = 10.0;
pub const MAX_SPEAKERS: usize = 4;

/// Frame counts per 10° azimuth bin; bin `k` covers `[10k, 10k + 10)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct AngularHistogram {
    bins: Vec<u32>,
}

impl TryFrom<Vec<u32>> for AngularHistogram {
    type Error = Error;

    fn try_from(bins: Vec<u32>) -> Result<Self> {
        if bins.len() != BIN_COUNT {
            return Err(Error::InvalidInput(format!(
                "histogram needs {BIN_COUNT} bins, got {}",
                bins.len()
            )));
        }
        Ok(Self { bins })
    }
}

impl From<AngularHistogram> for Vec<u32> {
    fn from(h: AngularHistogram) -> Self {
        h.bins
    }
}

impl Default for AngularHistogram {
    fn default() -> Self {
        Self {
            bins: vec![0; BIN_COUNT],
        }
    }
}

impl AngularHistogram {
    pub fn from_counts(bins: Vec<u32>) -> Result<Self> {
        Self::try_from(bins)
    }

    pub fn bins(&self) -> &[u32] {
        &self.bins
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn bin_of(azimuth_deg: f64) -> usize {
        ((azimuth_deg.rem_euclid(360.0) / BIN_WIDTH_DEG).floor() as usize).min(BIN_COUNT - 1)
    }

    pub fn bin_center(bin: usize) -> f64 {
        (bin as f64 + 0.5) * BIN_WIDTH_DEG
    }

    pub fn add(&mut self, azimuth_deg: f64) {
        self.bins[Self::bin_of(azimuth_deg)] += 1;
    }

    /// Histogram turned by `shift` bins (bin k moves to k + shift).
    pub fn rotated(&self, shift: usize) -> Self {
        let mut bins = vec![0; BIN_COUNT];
        for (k, &c) in self.bins.iter().enumerate() {
            bins[(k + shift) % BIN_COUNT] = c;
        }
        Self { bins }
    }

    pub fn scaled(&self, factor: u32) -> Self {
        Self {
            bins: self.bins.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("bin,lower_deg,upper_deg,center_deg,count\n");
        for (k, c) in self.bins.iter().enumerate() {
            let lower = k as f64 * BIN_WIDTH_DEG;
            out.push_str(&format!(
                "{k},{lower:.0},{:.0},{:.0},{c}\n",
                lower + BIN_WIDTH_DEG,
                Self::bin_center(k)
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

/// Histograms the track's frame directions. Low-confidence frames are
/// skipped unless `include_low_confidence` is set.
pub fn build_histogram(track: &DoaTrack, include_low_confidence: bool) -> Result<AngularHistogram> {
    if track.is_empty() {
        return Err(Error::NoLocalizedFrames);
    }
    let mut hist = AngularHistogram::default();
    for p in &track.points {
        if p.confident || include_low_confidence {
            hist.add(p.azimuth_deg);
        }
    }
    if hist.total() == 0 {
        return Err(Error::NoLocalizedFrames);
    }
    Ok(hist)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub bin: usize,
    pub azimuth: f64,
    pub count: u32,
}

/// Circular local maxima. A run of equal bins is a peak when both
/// neighbouring runs are strictly lower; it is reported at the run's first
/// bin in increasing-azimuth order. Zero bins are never peaks.
pub fn find_local_maxima(hist: &AngularHistogram) -> Vec<Peak> {
    let bins = hist.bins();
    let n = bins.len();
    // start the scan at a run boundary; a constant histogram has no peak
    let Some(origin) = (0..n).find(|&k| bins[k] != bins[(k + n - 1) % n]) else {
        return Vec::new();
    };
    let mut runs: Vec<(usize, u32)> = Vec::new();
    for step in 0..n {
        let k = (origin + step) % n;
        if step == 0 || bins[k] != runs.last().expect("nonempty").1 {
            runs.push((k, bins[k]));
        }
    }
    let r = runs.len();
    let mut peaks: Vec<Peak> = (0..r)
        .filter(|&i| {
            let v = runs[i].1;
            v > 0 && runs[(i + r - 1) % r].1 < v && runs[(i + 1) % r].1 < v
        })
        .map(|i| Peak {
            bin: runs[i].0,
            azimuth: AngularHistogram::bin_center(runs[i].0),
            count: runs[i].1,
        })
        .collect();
    peaks.sort_by_key(|p| p.bin);
    peaks
}

/// Estimated number of speakers and the directions that support it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerCensus {
    pub count: usize,
    /// Bin-center azimuths of accepted peaks, strongest first.
    pub peak_azimuths: Vec<f64>,
    pub peak_counts: Vec<u32>,
    pub histogram: AngularHistogram,
}

impl SpeakerCensus {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let census: Self = serde_json::from_str(&text)?;
        if !(1..=MAX_SPEAKERS).contains(&census.count)
            || census.peak_azimuths.len() != census.count
            || census.peak_counts.len() != census.count
        {
            return Err(Error::InvalidInput(format!(
                "{}: inconsistent census",
                path.display()
            )));
        }
        Ok(census)
    }
}

/// Peaks ranked by count, strongest first; equal counts keep azimuth order.
pub fn rank_peaks(mut peaks: Vec<Peak>) -> Vec<Peak> {
    peaks.sort_by(|a, b| b.count.cmp(&a.count).then(a.bin.cmp(&b.bin)));
    peaks
}

/// Applies the quarter-of-second-peak rule to ranked peaks and returns how
/// many are accepted.
pub fn accepted_peak_count(ranked: &[Peak]) -> usize {
    match ranked.len() {
        0 => 0,
        1 => 1,
        _ => {
            let second = u64::from(ranked[1].count);
            2 + ranked[2..]
                .iter()
                .take(MAX_SPEAKERS - 2)
                .take_while(|p| 4 * u64::from(p.count) > second)
                .count()
        }
    }
}

pub fn count_speakers(hist: &AngularHistogram) -> Result<SpeakerCensus> {
    let ranked = rank_peaks(find_local_maxima(hist));
    if ranked.is_empty() {
        return Err(Error::NoPeaks);
    }
    let count = accepted_peak_count(&ranked);
    let accepted = &ranked[..count];
    Ok(SpeakerCensus {
        count,
        peak_azimuths: accepted.iter().map(|p| p.azimuth).collect(),
        peak_counts: accepted.iter().map(|p| p.count).collect(),
        histogram: hist.clone(),
    })
}
