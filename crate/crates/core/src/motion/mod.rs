//! Background modeling, foreground masks, morphology and connected
//! components: finds the moving people in fixed-camera frames.

mod background;
mod components;
mod detector;
mod morph;

pub use background::{to_gray, BackgroundModel, Gray, Mask};
pub use components::{connected_components, Detection};
pub use detector::{DetectorConfig, MotionDetector};
pub use morph::{close, dilate, erode, morph, open, MorphOp};
