use crate::io::MicArrayGeometry;
use crate::{Error, Result};

/// Number of steering directions over the full circle.
pub const DEFAULT_DIRECTIONS: usize = 256;

/// GCC lags per sample used when looking up steering delays.
pub const DEFAULT_LAG_RESOLUTION: usize = 8;

/// Far-field steering delays for every (direction, mic pair).
///
/// Azimuth 0° points along +x of the geometry and grows towards +y. For a
/// plane wave arriving from unit direction `u`, mic `j` hears the wavefront
/// `tau_ij = (p_i - p_j) · u / c` seconds after mic `i`.
#[derive(Debug, Clone)]
pub struct SteeringGrid {
    azimuths: Vec<f64>,
    pairs: Vec<(usize, usize)>,
    // direction-major: delays[d * pairs.len() + p]
    delays: Vec<f64>,
    mic_count: usize,
    sample_rate: u32,
    lag_resolution: usize,
}

impl SteeringGrid {
    pub fn build(geometry: &MicArrayGeometry, n_directions: usize) -> Result<Self> {
        geometry.validate()?;
        if n_directions < 8 {
            return Err(Error::InvalidInput(format!(
                "need at least 8 directions, got {n_directions}"
            )));
        }
        let pairs = geometry.pairs();
        let planar_extent = pairs
            .iter()
            .map(|&(i, j)| {
                let (a, b) = (geometry.mics[i], geometry.mics[j]);
                (a[0] - b[0]).hypot(a[1] - b[1])
            })
            .fold(0.0, f64::max);
        if planar_extent < 1e-9 {
            return Err(Error::Geometry(
                "all mics lie on one vertical line; azimuth is unobservable".into(),
            ));
        }
        let step = 360.0 / n_directions as f64;
        let azimuths: Vec<f64> = (0..n_directions).map(|d| d as f64 * step).collect();
        let c = geometry.speed_of_sound;
        let mut delays = Vec::with_capacity(n_directions * pairs.len());
        for &az in &azimuths {
            let (s, co) = az.to_radians().sin_cos();
            for &(i, j) in &pairs {
                let (a, b) = (geometry.mics[i], geometry.mics[j]);
                delays.push(((a[0] - b[0]) * co + (a[1] - b[1]) * s) / c);
            }
        }
        Ok(Self {
            azimuths,
            pairs,
            delays,
            mic_count: geometry.mic_count(),
            sample_rate: geometry.sample_rate,
            lag_resolution: DEFAULT_LAG_RESOLUTION,
        })
    }

    /// Sets how many GCC lags per sample the steering lookup resolves
    /// (1 = whole-sample lags).
    pub fn with_lag_resolution(mut self, lags_per_sample: usize) -> Self {
        self.lag_resolution = lags_per_sample.max(1);
        self
    }

    pub fn lag_resolution(&self) -> usize {
        self.lag_resolution
    }

    pub fn azimuths(&self) -> &[f64] {
        &self.azimuths
    }

    pub fn len(&self) -> usize {
        self.azimuths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.azimuths.is_empty()
    }

    /// Angular spacing in degrees.
    pub fn step(&self) -> f64 {
        360.0 / self.azimuths.len() as f64
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn mic_count(&self) -> usize {
        self.mic_count
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Delays (seconds) of every pair, in [`Self::pairs`] order.
    pub fn pair_delays(&self, direction: usize) -> &[f64] {
        let n = self.pairs.len();
        &self.delays[direction * n..(direction + 1) * n]
    }

    /// Delay of mic `j` relative to mic `i` for a grid direction; `delay(d, j, i) == -delay(d, i, j)`.
    pub fn delay(&self, direction: usize, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (lo, hi, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        let idx = self
            .pairs
            .iter()
            .position(|&p| p == (lo, hi))
            .expect("mic index out of range");
        sign * self.pair_delays(direction)[idx]
    }

    /// Steering delay in GCC lag units (1/lag_resolution samples), rounded.
    pub fn lag_index(&self, direction: usize, pair: usize) -> i64 {
        let units = self.sample_rate as f64 * self.lag_resolution as f64;
        (self.pair_delays(direction)[pair] * units).round() as i64
    }
}
