use super::gcc::{GccEngine, GccPhat};
use super::grid::SteeringGrid;
use crate::{Error, Result};

/// Steered response power of one frame over the whole grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SrpFrame {
    pub frame_start: f64,
    pub powers: Vec<f64>,
    pub argmax_index: usize,
    pub argmax_azimuth: f64,
    pub argmax_power: f64,
    /// False when the peak is below a tenth of the pair count.
    pub confident: bool,
}

/// Reusable SRP-PHAT evaluator for a fixed grid and frame length.
#[derive(Clone)]
pub struct SrpPhat<'g> {
    grid: &'g SteeringGrid,
    engine: GccEngine,
}

impl<'g> SrpPhat<'g> {
    pub fn new(grid: &'g SteeringGrid, frame_len: usize) -> Self {
        Self {
            grid,
            engine: GccEngine::new(frame_len, grid.lag_resolution()),
        }
    }

    pub fn grid(&self) -> &SteeringGrid {
        self.grid
    }

    /// PHAT-weighted cross-correlations of every mic pair, in grid pair order.
    pub fn pair_correlations(&self, channels: &[&[f32]]) -> Result<Vec<GccPhat>> {
        if channels.len() != self.grid.mic_count() {
            return Err(Error::ChannelMismatch {
                clip: channels.len(),
                geometry: self.grid.mic_count(),
            });
        }
        let frame_len = self.engine.frame_len();
        if let Some(c) = channels.iter().find(|c| c.len() != frame_len) {
            return Err(Error::InvalidInput(format!(
                "frame has {} samples, expected {frame_len}",
                c.len()
            )));
        }
        let spectra: Vec<_> = channels
            .iter()
            .map(|c| self.engine.spectrum(c.iter().map(|&v| f64::from(v))))
            .collect();
        Ok(self
            .grid
            .pairs()
            .iter()
            .map(|&(i, j)| self.engine.correlate(&spectra[i], &spectra[j]))
            .collect())
    }

    pub fn frame(&self, channels: &[&[f32]], frame_start: f64) -> Result<SrpFrame> {
        let correlations = self.pair_correlations(channels)?;
        let n_pairs = correlations.len();
        let powers: Vec<f64> = (0..self.grid.len())
            .map(|d| {
                correlations
                    .iter()
                    .enumerate()
                    .map(|(p, gcc)| gcc.at(self.grid.lag_index(d, p)))
                    .sum()
            })
            .collect();
        // strict comparison keeps the smallest azimuth on ties
        let mut argmax_index = 0;
        for (d, &p) in powers.iter().enumerate() {
            if p > powers[argmax_index] {
                argmax_index = d;
            }
        }
        let argmax_power = powers[argmax_index];
        Ok(SrpFrame {
            frame_start,
            argmax_index,
            argmax_azimuth: self.grid.azimuths()[argmax_index],
            argmax_power,
            confident: argmax_power >= 0.1 * n_pairs as f64,
            powers,
        })
    }
}

/// SRP-PHAT of a single multichannel frame.
pub fn srp_phat_frame(channels: &[&[f32]], frame_start: f64, grid: &SteeringGrid) -> Result<SrpFrame> {
    let len = channels.first().map_or(0, |c| c.len());
    if len < 2 {
        return Err(Error::InvalidInput("frame needs at least 2 samples".into()));
    }
    SrpPhat::new(grid, len).frame(channels, frame_start)
}
