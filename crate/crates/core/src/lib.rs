//! Detection, tracking, recognition and timeline summarization of the
//! actions of several people in fixed-camera video.

pub mod error;
pub mod geometry;
pub mod model;
pub mod motion;
pub mod pipeline;
pub mod sequence;
pub mod summary;
pub mod synth;
pub mod tensor;
pub mod track;
pub mod video;

pub use error::{Error, Result};
pub use tensor::{Scalar, Tensor};
