//! Correlation-filter tracking and multi-person track management.
mod associate;
mod fft;
mod kcf;
mod multi;

pub use associate::{associate, greedy_assign, Association};
pub use fft::Fft2;
pub use kcf::{extract_patch, gaussian_correlation, gaussian_label, hann_window, KcfConfig, KcfState};
pub use multi::{read_track_dump, write_track_dump, DumpRecord, MultiTracker, Track, TrackState, TrackStatus, TrackerConfig};
