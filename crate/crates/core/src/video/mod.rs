//! Frame loading, clip utilities, the clip archive format and dataset splits.

mod archive;
mod clip;
mod frame;
mod split;

pub(crate) use archive::Reader;
pub use archive::{ArchiveRecord, ClipArchive, ARCHIVE_MAGIC, ARCHIVE_VERSION};
pub use clip::{resize_bilinear, segment_into_clips, subsample_indices, subsample_time, Clip};
pub use frame::{list_frames, load_frame_dir, write_frame_dir, Frame};
pub use split::{split_dataset, Split, SplitRatios};
