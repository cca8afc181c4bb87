//! Softmax multilayer perceptrons, masked projection training and datasets.
//!
//! Parameters live in one flat vector; each layer contributes its
//! `n_out × n_in` weights (row-major) followed by `n_out` biases. Labels are
//! `0..K`.

pub mod checkpoint;
mod data;
mod masks;
mod mlp;
mod sigmoid;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use data::{load_mnist, synth_blobs, write_idx, Dataset};
pub use masks::{
    dropped_units, enumerate_unit_masks, mask_log_likelihood, sample_masks, unit_mask, MaskScheme,
    MAX_ENUMERATED_UNITS,
};
pub(crate) use mlp::{backward, forward, Trace};
pub use mlp::{sigmoid, Activation, Architecture, LayerLayout, MlpModel};
pub use sigmoid::{jacobian_rank, SigmoidUnit, RANK_TOL};
pub use train::{draw_unit_scales, train_dropout, train_projection, TrainConfig, TrainOutcome, PHI_BATCH};
