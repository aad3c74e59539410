use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Speed of sound in air at 20 °C, m/s.
pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

fn default_speed_of_sound() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

/// Microphone positions (meters) plus the acquisition parameters needed to
/// turn geometric path differences into sample delays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicArrayGeometry {
    pub mics: Vec<[f64; 3]>,
    pub sample_rate: u32,
    #[serde(default = "default_speed_of_sound")]
    pub speed_of_sound: f64,
}

impl MicArrayGeometry {
    pub fn new(mics: Vec<[f64; 3]>, sample_rate: u32, speed_of_sound: f64) -> Result<Self> {
        let geometry = Self {
            mics,
            sample_rate,
            speed_of_sound,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    /// `count` mics evenly spaced on a horizontal circle, mic 0 on the +x axis.
    pub fn circular(count: usize, radius: f64, sample_rate: u32) -> Result<Self> {
        let mics = (0..count)
            .map(|m| {
                let phi = 2.0 * std::f64::consts::PI * m as f64 / count as f64;
                [radius * phi.cos(), radius * phi.sin(), 0.0]
            })
            .collect();
        Self::new(mics, sample_rate, DEFAULT_SPEED_OF_SOUND)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mics.len() < 2 {
            return Err(Error::Geometry(format!(
                "need at least 2 mics, got {}",
                self.mics.len()
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::Geometry("sample_rate must be positive".into()));
        }
        if !(self.speed_of_sound.is_finite() && self.speed_of_sound > 0.0) {
            return Err(Error::Geometry("speed_of_sound must be positive".into()));
        }
        for (m, p) in self.mics.iter().enumerate() {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::Geometry(format!("mic {m} has a non-finite coordinate")));
            }
        }
        for (i, j) in self.pairs() {
            if self.mics[i] == self.mics[j] {
                return Err(Error::Geometry(format!("mics {i} and {j} share a position")));
            }
        }
        Ok(())
    }

    pub fn mic_count(&self) -> usize {
        self.mics.len()
    }

    /// All unordered pairs `(i, j)` with `i < j`, in lexicographic order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let m = self.mics.len();
        (0..m)
            .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
            .collect()
    }

    /// Largest inter-mic distance in meters.
    pub fn aperture(&self) -> f64 {
        self.pairs()
            .into_iter()
            .map(|(i, j)| distance(self.mics[i], self.mics[j]))
            .fold(0.0, f64::max)
    }

    /// The same array rotated by `degrees` about the z-axis.
    pub fn rotated(&self, degrees: f64) -> Self {
        let (s, c) = degrees.to_radians().sin_cos();
        Self {
            mics: self
                .mics
                .iter()
                .map(|&[x, y, z]| [c * x - s * y, s * x + c * y, z])
                .collect(),
            ..self.clone()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let geometry: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("geometry: {e}")))?;
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let mut out = format!(
            "sample_rate = {}\nspeed_of_sound = {:?}\nmics = [\n",
            self.sample_rate, self.speed_of_sound
        );
        for [x, y, z] in &self.mics {
            out.push_str(&format!("  [{x:?}, {y:?}, {z:?}],\n"));
        }
        out.push_str("]\n");
        out
    }
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_count_is_m_choose_2() {
        for m in 2..9 {
            let g = MicArrayGeometry::circular(m, 0.1, 16000).unwrap();
            let pairs = g.pairs();
            assert_eq!(pairs.len(), m * (m - 1) / 2);
            assert!(pairs.iter().all(|&(i, j)| i < j));
        }
    }

    #[test]
    fn parses_config_with_default_speed() {
        let g = MicArrayGeometry::from_toml_str(
            "sample_rate = 16000\nmics = [[0.05, 0.0, 0.0], [-0.05, 0.0, 0.0]]\n",
        )
        .unwrap();
        assert_eq!(g.speed_of_sound, 343.0);
        assert_eq!(g.mic_count(), 2);
        assert!((g.aperture() - 0.1).abs() < 1e-12);
        let again = MicArrayGeometry::from_toml_str(&g.to_toml_string()).unwrap();
        assert_eq!(again, g);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(MicArrayGeometry::new(vec![[0.0; 3]], 16000, 343.0).is_err());
        assert!(MicArrayGeometry::new(vec![[0.0; 3], [0.0; 3]], 16000, 343.0).is_err());
        assert!(MicArrayGeometry::new(vec![[0.0; 3], [1.0, 0.0, 0.0]], 0, 343.0).is_err());
        assert!(MicArrayGeometry::new(vec![[0.0; 3], [1.0, 0.0, 0.0]], 16000, -1.0).is_err());
        assert!(
            MicArrayGeometry::new(vec![[f64::NAN, 0.0, 0.0], [1.0, 0.0, 0.0]], 16000, 343.0)
                .is_err()
        );
    }
}
