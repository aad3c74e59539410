use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Multichannel audio with amplitudes normalized to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelClip {
    channels: Vec<Vec<f32>>,
    sample_rate: u32,
}

impl MultichannelClip {
    pub fn new(channels: Vec<Vec<f32>>, sample_rate: u32) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidInput("clip has no channels".into()));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::InvalidInput("channels differ in length".into()));
        }
        Ok(Self {
            channels,
            sample_rate,
        })
    }

    pub fn channels(&self) -> &[Vec<f32>] {
        &self.channels
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleFormat {
    Int16,
    #[default]
    Float32,
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<MultichannelClip> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => {
            return Err(Error::UnsupportedAudio(format!(
                "{}: {bits}-bit {fmt:?} (expected 16-bit PCM or 32-bit float)",
                path.display()
            )))
        }
    };
    if interleaved.is_empty() {
        return Err(Error::UnsupportedAudio(format!(
            "{}: zero-length audio",
            path.display()
        )));
    }
    if !interleaved.len().is_multiple_of(n_ch) {
        return Err(Error::UnsupportedAudio(format!(
            "{}: truncated sample frame",
            path.display()
        )));
    }
    let frames = interleaved.len() / n_ch;
    let mut channels = vec![Vec::with_capacity(frames); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (ch, &v) in channels.iter_mut().zip(frame) {
            ch.push(v);
        }
    }
    MultichannelClip::new(channels, spec.sample_rate)
}

pub fn write_wav(clip: &MultichannelClip, path: impl AsRef<Path>, format: SampleFormat) -> Result<()> {
    let (bits, sample_format) = match format {
        SampleFormat::Int16 => (16, hound::SampleFormat::Int),
        SampleFormat::Float32 => (32, hound::SampleFormat::Float),
    };
    let spec = hound::WavSpec {
        channels: clip.channel_count() as u16,
        sample_rate: clip.sample_rate(),
        bits_per_sample: bits,
        sample_format,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for n in 0..clip.len() {
        for ch in clip.channels() {
            match format {
                SampleFormat::Int16 => {
                    let v = (ch[n] * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    writer.write_sample(v)?;
                }
                SampleFormat::Float32 => writer.write_sample(ch[n])?,
            }
        }
    }
    writer.finalize()?;
    Ok(())
}

/// Analysis window length and hop, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePlan {
    pub frame_length: f64,
    pub frame_shift: f64,
}

impl Default for FramePlan {
    fn default() -> Self {
        Self {
            frame_length: 0.5,
            frame_shift: 0.5,
        }
    }
}

impl FramePlan {
    pub fn new(frame_length: f64, frame_shift: f64) -> Result<Self> {
        let plan = Self {
            frame_length,
            frame_shift,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.frame_length) || !ok(self.frame_shift) {
            return Err(Error::InvalidInput(format!(
                "frame length and shift must be positive, got {} / {}",
                self.frame_length, self.frame_shift
            )));
        }
        Ok(())
    }

    /// `(frame_length, frame_shift)` in whole samples.
    pub fn in_samples(&self, sample_rate: u32) -> (usize, usize) {
        let rate = sample_rate as f64;
        (
            (self.frame_length * rate).round() as usize,
            (self.frame_shift * rate).round() as usize,
        )
    }

    pub fn frame_start(&self, index: usize) -> f64 {
        index as f64 * self.frame_shift
    }
}

/// One analysis frame borrowed from a clip.
#[derive(Debug, Clone)]
pub struct Frame<'a> {
    pub index: usize,
    pub start_sample: usize,
    pub start: f64,
    pub channels: Vec<&'a [f32]>,
}

/// Cuts a clip into fixed frames; a trailing partial frame is dropped.
pub fn frame_clip<'a>(clip: &'a MultichannelClip, plan: &FramePlan) -> Vec<Frame<'a>> {
    let (len, shift) = plan.in_samples(clip.sample_rate());
    if len == 0 || shift == 0 || clip.len() < len {
        return Vec::new();
    }
    let count = (clip.len() - len) / shift + 1;
    (0..count)
        .map(|k| {
            let start_sample = k * shift;
            Frame {
                index: k,
                start_sample,
                start: plan.frame_start(k),
                channels: clip
                    .channels()
                    .iter()
                    .map(|c| &c[start_sample..start_sample + len])
                    .collect(),
            }
        })
        .collect()
}
