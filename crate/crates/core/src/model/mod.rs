//! The action classification network: spec, parameters, training and
//! checkpoint serialization.

mod checkpoint;
mod gradcheck;
mod network;
mod spec;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{network_grad_check, tiny_spec, NETWORK_STEP};
pub use network::{parameter_count, ConvUnit, Network, Trace};
pub use spec::{Mode, NetworkSpec, ENCODER_POOLS, HEAD_POOLS};
pub use train::{
    evaluate, metrics_csv, network_sample, predict, train, Dataset, EpochMetrics, Evaluation, TrainConfig, TrainReport,
};
