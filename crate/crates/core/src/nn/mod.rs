//! A small neural-network engine: tensors, conv / pool / dense / LSTM
//! kernels with hand-written backward passes, Adam, a deterministic
//! training loop, and a self-contained model file format.

mod adam;
mod classifier;
mod gemm;
mod model;
mod modelfile;
pub mod ops;
mod tensor;
mod train;

pub use adam::{adam_step, AdamState};
pub use classifier::{Classifier, FeatureSetup, Prediction};
pub use model::{
    Activation, BatchGradients, LayerSpec, LstmReadout, ModelKind, ModelParams, ModelSpec, Network, CHUNK,
};
pub use modelfile::{load_model, save_model, ModelMetadata, MODEL_MAGIC, MODEL_VERSION};
pub use tensor::Tensor;
pub use train::{evaluate, train, EpochStats, LabeledSample, Standardizer, TrainConfig, TrainedModel};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("label index {0} outside the two classes")]
    Label(usize),
    #[error("invalid model spec: {0}")]
    Spec(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("empty training set")]
    EmptyDataset,
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("model file version {found} is not supported (expected {expected})")]
    Version { found: u16, expected: u16 },
    #[error("model file checksum mismatch")]
    Checksum,
    #[error("model file truncated")]
    Truncated,
    #[error("model file corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Features(#[from] crate::features::FeatureError),
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;
