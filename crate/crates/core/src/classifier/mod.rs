//! Point-set classification: taxonomy and merging, canonicalization, the
//! max-pool network with its trainer, confidence gating and OFF sampling.

pub mod canon;
pub mod dataset;
pub mod gate;
pub mod model;
pub mod off;
pub mod taxonomy;
pub mod train;

use thiserror::Error;

pub use canon::{augment, augment_with_angle, normalize_unit_sphere, resample};
pub use dataset::{synthetic_split, Dataset, LabeledCloud, Taxonomy};
pub use gate::{gate, predict, predict_gated, Gated, Prediction, DEFAULT_THRESHOLD};
pub use model::PointSetModel;
pub use off::{parse_off, sample_mesh, sample_mesh_off, TriMesh};
pub use taxonomy::{merge_for_labeling, merge_labels, CoarseClass, FineClass, LabelClass};
pub use train::{evaluate, grad_check, train, EpochStats, Evaluation, History, TrainConfig};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("malformed OFF: {0}")]
    MalformedOff(String),
    #[error("mesh has zero total area")]
    ZeroArea,
    #[error("width mismatch: {0}")]
    WidthMismatch(String),
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("malformed model file: {0}")]
    MalformedModel(String),
    #[error("class {0:?} has no training samples")]
    EmptyClass(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}, sample {sample}")]
    NonFiniteLoss { epoch: usize, batch: usize, sample: usize },
    #[error("training: {0}")]
    Training(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
