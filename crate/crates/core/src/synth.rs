//! Far-field scene renderer used as ground truth for localization,
//! counting and diarization tests.
//!
//! Each source is a plane wave reaching every mic with its exact geometric
//! delay, applied with a 32-tap windowed-sinc fractional-delay filter.
//! Rendering is a pure function of the [`SceneSpec`] and its seed.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::io::{load_wav, MicArrayGeometry, MultichannelClip, Segment, SegmentList, VAD_SPEAKER};
use crate::{Error, Result};

const HALF_TAPS: i64 = 16;
const SPEECH_BAND_HZ: (f64, f64) = (300.0, 3400.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalKind {
    /// White noise through a 300–3400 Hz band-pass.
    SpeechLike,
    /// Harmonic complex with a seeded fundamental.
    ToneComplex,
    /// First channel of a WAV file, looped to length.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub azimuth: f64,
    pub schedule: Vec<(f64, f64)>,
    #[serde(default = "default_signal")]
    pub signal: SignalKind,
    #[serde(default)]
    pub label: Option<String>,
}

fn default_signal() -> SignalKind {
    SignalKind::SpeechLike
}

impl SourceSpec {
    pub fn new(azimuth: f64, schedule: Vec<(f64, f64)>, signal: SignalKind) -> Self {
        Self {
            azimuth,
            schedule,
            signal,
            label: None,
        }
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

fn default_recording_id() -> String {
    "synth".into()
}

fn default_gain() -> f64 {
    0.25
}

fn default_snr() -> f64 {
    f64::INFINITY
}

/// Everything needed to render one synthetic recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(default = "default_recording_id")]
    pub recording_id: String,
    pub geometry: MicArrayGeometry,
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
    /// Per-source signal to per-channel noise ratio; `inf` disables noise.
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    /// Output scale applied to the unit-power mixture.
    #[serde(default = "default_gain")]
    pub gain: f64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Config("scene duration must be positive".into()));
        }
        if !(self.gain.is_finite() && self.gain > 0.0) {
            return Err(Error::Config("gain must be positive".into()));
        }
        if self.snr_db.is_nan() {
            return Err(Error::Config("snr_db is NaN".into()));
        }
        for (i, s) in self.sources.iter().enumerate() {
            if !(0.0..360.0).contains(&s.azimuth) {
                return Err(Error::Config(format!("source {i}: azimuth must be in [0, 360)")));
            }
            for &(a, b) in &s.schedule {
                if !(a >= 0.0 && b > a && b <= self.duration) {
                    return Err(Error::Config(format!(
                        "source {i}: schedule interval ({a}, {b}) outside (0, {})",
                        self.duration
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn source_label(&self, index: usize) -> String {
        self.sources[index]
            .label
            .clone()
            .unwrap_or_else(|| format!("src{index}"))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(format!("scene: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Same scene with the array and every source turned by `degrees`.
    pub fn rotated(&self, degrees: f64) -> Self {
        let mut out = self.clone();
        out.geometry = self.geometry.rotated(degrees);
        for s in &mut out.sources {
            s.azimuth = (s.azimuth + degrees).rem_euclid(360.0);
        }
        out
    }

    /// Reference RTTM built from the schedules.
    pub fn reference(&self) -> SegmentList {
        let mut list: SegmentList = self
            .sources
            .iter()
            .enumerate()
            .flat_map(|(i, s)| {
                let label = self.source_label(i);
                s.schedule
                    .iter()
                    .map(move |&(a, b)| Segment::new(self.recording_id.clone(), a, b - a, label.clone()))
            })
            .collect();
        list.normalize();
        list
    }

    /// Union of all schedules, labeled as speech.
    pub fn vad(&self) -> SegmentList {
        let mut spans: Vec<(f64, f64)> = self
            .sources
            .iter()
            .flat_map(|s| s.schedule.iter().copied())
            .collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (a, b) in spans {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        merged
            .into_iter()
            .map(|(a, b)| Segment::new(self.recording_id.clone(), a, b - a, VAD_SPEAKER))
            .collect()
    }
}

/// Rendered audio with its ground truth.
#[derive(Debug, Clone)]
pub struct RenderedScene {
    pub clip: MultichannelClip,
    pub reference: SegmentList,
    pub vad: SegmentList,
}

pub fn render(spec: &SceneSpec) -> Result<RenderedScene> {
    spec.validate()?;
    let rate = spec.geometry.sample_rate;
    let n = (spec.duration * rate as f64).round() as usize;
    let mut mix = vec![vec![0.0f64; n]; spec.geometry.mic_count()];
    let pad = padding(&spec.geometry);

    for (i, source) in spec.sources.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64 + 1);
        let mut signal = source_signal(&source.signal, n + 2 * pad, rate, &mut rng)?;
        // gate by schedule, in source time
        let mut active = vec![false; signal.len()];
        for &(a, b) in &source.schedule {
            let lo = (a * rate as f64).round() as usize + pad;
            let hi = ((b * rate as f64).round() as usize + pad).min(active.len());
            active[lo..hi].iter_mut().for_each(|v| *v = true);
        }
        for (v, on) in signal.iter_mut().zip(&active) {
            if !on {
                *v = 0.0;
            }
        }
        add_plane_wave(&mut mix, &spec.geometry, source.azimuth, &signal, pad);
    }

    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(0);
    add_noise(&mut mix, spec.snr_db, &mut noise_rng);

    let channels = mix
        .into_iter()
        .map(|c| c.into_iter().map(|v| (v * spec.gain) as f32).collect())
        .collect();
    Ok(RenderedScene {
        clip: MultichannelClip::new(channels, rate)?,
        reference: spec.reference(),
        vad: spec.vad(),
    })
}

/// One always-active unit-power source at `azimuth`, optionally with noise
/// at `snr_db`; output scaled like [`render`] with the default gain.
pub fn render_plane_wave(
    geometry: &MicArrayGeometry,
    azimuth: f64,
    samples: usize,
    kind: SignalKind,
    seed: u64,
    snr_db: Option<f64>,
) -> Vec<Vec<f32>> {
    let pad = padding(geometry);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let signal = source_signal(&kind, samples + 2 * pad, geometry.sample_rate, &mut rng)
        .expect("synthetic signal kinds do not fail");
    let mut mix = vec![vec![0.0; samples]; geometry.mic_count()];
    add_plane_wave(&mut mix, geometry, azimuth, &signal, pad);
    if let Some(snr) = snr_db {
        let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
        add_noise(&mut mix, snr, &mut noise_rng);
    }
    mix.into_iter()
        .map(|c| c.into_iter().map(|v| (v * default_gain()) as f32).collect())
        .collect()
}

/// Delay of the plane wave at each mic relative to the array origin, in samples.
pub fn arrival_delays(geometry: &MicArrayGeometry, azimuth: f64) -> Vec<f64> {
    let (s, c) = azimuth.to_radians().sin_cos();
    let scale = geometry.sample_rate as f64 / geometry.speed_of_sound;
    geometry
        .mics
        .iter()
        .map(|p| -(p[0] * c + p[1] * s) * scale)
        .collect()
}

fn padding(geometry: &MicArrayGeometry) -> usize {
    let max_delay = geometry
        .mics
        .iter()
        .map(|p| p[0].hypot(p[1]))
        .fold(0.0, f64::max)
        * geometry.sample_rate as f64
        / geometry.speed_of_sound;
    max_delay.ceil() as usize + HALF_TAPS as usize + 2
}

fn add_plane_wave(mix: &mut [Vec<f64>], geometry: &MicArrayGeometry, azimuth: f64, signal: &[f64], pad: usize) {
    for (channel, delay) in mix.iter_mut().zip(arrival_delays(geometry, azimuth)) {
        let delayed = fractional_delay(signal, delay, pad, channel.len());
        for (out, v) in channel.iter_mut().zip(delayed) {
            *out += v;
        }
    }
}

fn add_noise(mix: &mut [Vec<f64>], snr_db: f64, rng: &mut ChaCha8Rng) {
    if snr_db.is_infinite() && snr_db > 0.0 {
        return;
    }
    let sigma = 10f64.powf(-snr_db / 20.0);
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    for channel in mix.iter_mut() {
        for v in channel.iter_mut() {
            *v += normal.sample(rng);
        }
    }
}

/// `out[k] = signal(k + offset - delay)` for `k < len`, band-limited.
pub fn fractional_delay(signal: &[f64], delay: f64, offset: usize, len: usize) -> Vec<f64> {
    let whole = delay.floor();
    let frac = delay - whole;
    let whole = whole as i64;
    let at = |i: i64| -> f64 {
        if i >= 0 && (i as usize) < signal.len() {
            signal[i as usize]
        } else {
            0.0
        }
    };
    if frac == 0.0 {
        return (0..len as i64).map(|k| at(k + offset as i64 - whole)).collect();
    }
    // taps m = -15..=16 around the fractional position
    let weights: Vec<f64> = (-HALF_TAPS + 1..=HALF_TAPS)
        .map(|m| {
            let u = m as f64 - frac;
            sinc(u) * blackman(u)
        })
        .collect();
    (0..len as i64)
        .map(|k| {
            let base = k + offset as i64 - whole;
            (-HALF_TAPS + 1..=HALF_TAPS)
                .zip(&weights)
                .map(|(m, w)| w * at(base - m))
                .sum()
        })
        .collect()
}

fn sinc(u: f64) -> f64 {
    if u == 0.0 {
        1.0
    } else {
        let x = std::f64::consts::PI * u;
        x.sin() / x
    }
}

fn blackman(u: f64) -> f64 {
    let r = u / HALF_TAPS as f64;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let x = std::f64::consts::PI * r;
    0.42 + 0.5 * x.cos() + 0.08 * (2.0 * x).cos()
}

fn source_signal(kind: &SignalKind, n: usize, rate: u32, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let mut signal = match kind {
        SignalKind::SpeechLike => {
            let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            band_pass(&white, rate, SPEECH_BAND_HZ)
        }
        SignalKind::ToneComplex => {
            use rand::Rng;
            let f0: f64 = rng.gen_range(100.0..250.0);
            let harmonics = (SPEECH_BAND_HZ.1 / f0).floor() as usize;
            let phases: Vec<f64> = (0..harmonics)
                .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
                .collect();
            (0..n)
                .map(|k| {
                    let t = k as f64 / rate as f64;
                    phases
                        .iter()
                        .enumerate()
                        .map(|(h, ph)| (std::f64::consts::TAU * f0 * (h + 1) as f64 * t + ph).sin())
                        .sum()
                })
                .collect()
        }
        SignalKind::File(path) => {
            let clip = load_wav(path)?;
            if clip.sample_rate() != rate {
                return Err(Error::Config(format!(
                    "{}: sample rate {} differs from scene rate {rate}",
                    path.display(),
                    clip.sample_rate()
                )));
            }
            let src = &clip.channels()[0];
            (0..n).map(|k| f64::from(src[k % src.len()])).collect()
        }
    };
    let power = signal.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64;
    if power > 0.0 {
        let scale = power.sqrt().recip();
        signal.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(signal)
}

fn band_pass(signal: &[f64], rate: u32, (lo, hi): (f64, f64)) -> Vec<f64> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    // zero-phase 2nd-order Butterworth high-pass at `lo` and low-pass at `hi`
    for (k, bin) in buf.iter_mut().enumerate() {
        let freq = k.min(n - k) as f64 * rate as f64 / n as f64;
        let high = (freq / lo).powi(4);
        let gain = (high / (1.0 + high) / (1.0 + (freq / hi).powi(4))).sqrt();
        *bin *= gain;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}
