//! Direction-of-arrival estimation with PHAT-weighted steered response
//! power over a circular azimuth grid.

mod gcc;
mod grid;
mod srp;
mod track;

pub use gcc::{gcc_phat, gcc_phat_upsampled, GccPhat};
pub use grid::{SteeringGrid, DEFAULT_DIRECTIONS, DEFAULT_LAG_RESOLUTION};
pub use srp::{srp_phat_frame, SrpFrame, SrpPhat};
pub use track::{localize, DoaTrack, TrackPoint};

/// Smallest angular distance between two azimuths, degrees in [0, 180].
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}
