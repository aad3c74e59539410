//! Input and output: array geometry, multichannel audio, RTTM segment
//! lists and embedding files.

mod audio;
mod embeddings;
mod geometry;
mod rttm;

pub use audio::{frame_clip, load_wav, write_wav, Frame, FramePlan, MultichannelClip, SampleFormat};
pub use embeddings::{read_embeddings, write_embeddings, EmbeddingSegment, EmbeddingSet};
pub use geometry::{MicArrayGeometry, DEFAULT_SPEED_OF_SOUND};
pub use rttm::{
    from_millis, parse_rttm, read_rttm, to_millis, write_rttm, Segment, SegmentList,
    VAD_SPEAKER,
};
