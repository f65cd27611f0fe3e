//! Dimensionality reduction via regression (DRR): an invertible,
//! volume-preserving nonlinear extension of PCA, with PCA and Principal
//! Polynomial Analysis baselines, synthetic manifold benchmarks and the
//! reconstruction, classification and retrieval protocols used to compare
//! them.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod drr;
pub mod error;
pub mod eval;
pub mod krr;
mod linalg;
pub mod manifolds;
pub mod pca;
pub mod persistence;
pub mod ppa;
pub mod transform;

pub use config::RunConfig;
pub use dataset::{DataMatrix, LabeledDataset, SplitSpec, Targets};
pub use drr::{DrrConfig, DrrModel, RegressorKind};
pub use error::{DrrError, Result};
pub use krr::{KrrModel, KrrSettings};
pub use pca::PcaModel;
pub use persistence::{load_model, save_model, Model};
pub use ppa::PpaModel;
pub use transform::{InvertibleTransform, Method};
