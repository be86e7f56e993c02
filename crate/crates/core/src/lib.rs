//! Radio-frequency-interference flagging with spiking neural networks.
//!
//! Spectrograms are normalized, cut into square patches, encoded into spike
//! trains and fed to a two-layer leaky integrate-and-fire network trained with
//! surrogate gradients. The decoded output is a per-pixel RFI mask.

pub mod data;
pub mod encoding;
pub mod error;
pub mod hpo;
pub mod losses;
pub mod metrics;
pub mod pipeline;
pub mod snn;

pub use data::{
    generate_synthetic, load_dataset, normalize, save_dataset, Dataset, DatasetItem, GeneratorConfig, Patch, RfiMask,
    Spectrogram,
};
pub use encoding::{EncodingConfig, EncodingMethod, SpikeTrain};
pub use error::{Error, Result};
pub use hpo::{Experiment, Method, TrialParams};
pub use losses::{LossConfig, LossKind};
pub use metrics::{EvalRecord, Metric};
pub use pipeline::Model;
pub use snn::{Network, NetworkConfig, TrainingConfig};
