//! Zero-shot recognition with an expanded semantic feature space.
//!
//! Pre-defined class prototypes (attributes or word vectors) are extended by
//! `k` auxiliary dimensions learned by an autoencoder whose codes are pulled
//! toward an embedding of the visual class-center manifold. Unseen classes
//! receive expanded prototypes by reusing the least-squares weights that
//! reconstruct their pre-defined prototype from nearby seen classes.

pub mod autoencoder;
pub mod data;
pub mod error;
pub mod io;
pub mod manifold;
pub mod numerics;
pub mod pipeline;
pub mod prototypes;
pub mod recognition;
pub mod synthetic;

pub use data::{ClassId, Dataset, SeenDataset, UnseenDataset};
pub use error::{Error, ErrorKind, Result, Stage};
pub use numerics::DenseMatrix;
pub use pipeline::{run_ablation, run_pipeline, PipelineConfig, PipelineOutcome};
pub use prototypes::{PrototypeTable, SemanticView};
pub use recognition::{EvaluationReport, Metric};
