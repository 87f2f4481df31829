//! Kernel whitening for debiased linear classification.
//!
//! The pipeline maps a batch of embeddings, together with a running bank of
//! global features, through a Nyström feature map, learns per-sample weights
//! that suppress cross-feature covariance, and trains a softmax classifier
//! with the weighted loss.

pub mod data;
pub mod error;
pub mod hsic;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod nystrom;
pub mod trainer;
pub mod whitening;

pub use data::{BiasGenConfig, DatasetSplits, FileFormat, LabeledSplit, SplitTag, SpuriousMode};
pub use error::{KwError, Result};
pub use hsic::{optimize_weights, HsicOptConfig, SampleWeights, WeightSolution};
pub use kernel::{KernelConfig, KernelKind};
pub use linalg::DenseMatrix;
pub use model::LinearClassifier;
pub use nystrom::NystromMap;
pub use trainer::{train_run, KernelSetting, Method, TrainConfig, TrainOutcome, TrainReport, TransformState, WhitenScope};
pub use whitening::Whitener;
