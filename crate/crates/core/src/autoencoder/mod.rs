//! Semantic feature expansion: a dense autoencoder trained jointly on
//! reconstruction and alignment to the embedded class manifold.

mod checkpoint;
mod loss;
mod model;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use loss::{
    alignment_loss, backward, reconstruction_loss, total_loss, AlignmentTargets, Gradients, LayerGradient, LossBreakdown,
    Objective,
};
pub use model::{hidden_widths, Activation, AutoencoderModel, DenseLayer};
pub use train::{train, train_model, Adam, TrainingConfig, TrainingReport, DEFAULT_ALPHA, DEFAULT_BETA};
