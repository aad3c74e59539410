//! Speaker diarization for small meetings recorded with a multichannel
//! microphone array.
//!
//! The crate localizes speech frames with SRP-PHAT ([`doa`]), counts
//! speakers from a direction-of-arrival histogram ([`census`]), turns the
//! accepted directions into angular sectors ([`sectors`]), clusters
//! externally extracted speaker embeddings ([`cluster`]), fuses several
//! hypotheses by weighted voting ([`fusion`]) and scores the result with
//! the diarization error rate ([`der`]). [`synth`] renders far-field
//! scenes with known ground truth for testing.

pub mod assignment;
pub mod census;
pub mod cluster;
pub mod der;
pub mod doa;
mod error;
pub mod fusion;
pub mod io;
pub mod pipeline;
pub mod sectors;
pub mod synth;
mod timeline;

pub use error::{Error, Result};
