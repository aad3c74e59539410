use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

/// Relative floor of the PHAT denominator.
const PHAT_FLOOR: f64 = 1e-12;

/// PHAT-weighted cross-correlation of two equal-length frames.
///
/// Lags are expressed in units of `1 / resolution` samples; a positive lag
/// means the second signal lags the first.
#[derive(Debug, Clone)]
pub struct GccPhat {
    // circular layout: lag k at index k mod len, negative lags at the tail
    circular: Vec<f64>,
    frame_len: usize,
    // largest unaliased lag, whole samples
    max_lag: usize,
    resolution: usize,
    silent: bool,
}

impl GccPhat {
    /// Correlation at a lag given in resolution units; zero beyond
    /// [`Self::max_lag`] samples.
    pub fn at(&self, lag: i64) -> f64 {
        let max = (self.max_lag * self.resolution) as i64;
        if lag.abs() > max {
            return 0.0;
        }
        self.circular[lag.rem_euclid(self.circular.len() as i64) as usize]
    }

    /// Correlation at the integer-sample lag `lag`.
    pub fn at_sample_lag(&self, lag: i64) -> f64 {
        self.at(lag * self.resolution as i64)
    }

    /// Largest lag magnitude in samples: `L - 1` capped below half the DFT
    /// length, so every reported lag maps to a distinct circular bin.
    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    /// `(lag, value)` for every lag within [`Self::max_lag`], ascending.
    pub fn lags(&self) -> Vec<(i64, f64)> {
        let max = (self.max_lag * self.resolution) as i64;
        (-max..=max).map(|k| (k, self.at(k))).collect()
    }

    /// Lag (resolution units) of the global maximum; ties go to the smaller lag.
    pub fn peak_lag(&self) -> i64 {
        let mut best = (i64::MIN, f64::NEG_INFINITY);
        for (k, v) in self.lags() {
            if v > best.1 {
                best = (k, v);
            }
        }
        best.0
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    /// True when the cross-spectrum was identically zero.
    pub fn is_silent(&self) -> bool {
        self.silent
    }
}

/// FFT plans for one frame length and lag resolution.
#[derive(Clone)]
pub(crate) struct GccEngine {
    frame_len: usize,
    n_fft: usize,
    resolution: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl GccEngine {
    pub(crate) fn new(frame_len: usize, resolution: usize) -> Self {
        let n_fft = frame_len.next_power_of_two();
        let resolution = resolution.max(1);
        let mut planner = FftPlanner::new();
        Self {
            frame_len,
            n_fft,
            resolution,
            forward: planner.plan_fft_forward(n_fft),
            inverse: planner.plan_fft_inverse(n_fft * resolution),
        }
    }

    pub(crate) fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub(crate) fn spectrum(&self, samples: impl Iterator<Item = f64>) -> Vec<Complex<f64>> {
        let mut buf = vec![Complex::new(0.0, 0.0); self.n_fft];
        for (slot, v) in buf.iter_mut().zip(samples) {
            slot.re = v;
        }
        self.forward.process(&mut buf);
        buf
    }

    pub(crate) fn correlate(&self, x: &[Complex<f64>], y: &[Complex<f64>]) -> GccPhat {
        let n = self.n_fft;
        let mut cross: Vec<Complex<f64>> = x.iter().zip(y).map(|(a, b)| a.conj() * b).collect();
        let peak = cross.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let silent = peak == 0.0;
        if !silent {
            let floor = PHAT_FLOOR * peak;
            for c in &mut cross {
                *c /= c.norm().max(floor);
            }
        }

        let up = n * self.resolution;
        let mut spec = vec![Complex::new(0.0, 0.0); up];
        if self.resolution == 1 {
            spec.copy_from_slice(&cross);
        } else {
            // band-limited interpolation: zero-pad between the halves and
            // split the Nyquist bin so the result stays real
            let half = n / 2;
            spec[..half].copy_from_slice(&cross[..half]);
            for k in half + 1..n {
                spec[up - n + k] = cross[k];
            }
            if n >= 2 {
                spec[half] = cross[half] * 0.5;
                spec[up - half] += cross[half] * 0.5;
            } else {
                spec[0] = cross[0];
            }
        }
        self.inverse.process(&mut spec);
        let scale = 1.0 / n as f64;
        GccPhat {
            circular: spec.iter().map(|c| c.re * scale).collect(),
            frame_len: self.frame_len,
            max_lag: (n / 2).saturating_sub(1).min(self.frame_len - 1),
            resolution: self.resolution,
            silent,
        }
    }
}

/// GCC-PHAT at whole-sample lags.
pub fn gcc_phat(x: &[f64], y: &[f64]) -> Result<GccPhat> {
    gcc_phat_upsampled(x, y, 1)
}

/// GCC-PHAT evaluated on a lag grid `resolution` times finer than the
/// sample period.
pub fn gcc_phat_upsampled(x: &[f64], y: &[f64], resolution: usize) -> Result<GccPhat> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "frames differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput("frames need at least 2 samples".into()));
    }
    let engine = GccEngine::new(x.len(), resolution);
    let sx = engine.spectrum(x.iter().copied());
    let sy = engine.spectrum(y.iter().copied());
    Ok(engine.correlate(&sx, &sy))
}
