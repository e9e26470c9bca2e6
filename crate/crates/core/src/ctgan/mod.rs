//! Conditional tabular GAN: mode-specific normalization, conditional
//! vectors with training-by-sampling, and small MLPs trained with Adam.
//!
//! This is a simplification of the published design: a non-saturating loss
//! with one-sided label smoothing replaces the Wasserstein loss with gradient
//! penalty. The discriminator scores packs of rows, as in the published
//! design, to discourage dropped modes.

mod encode;
mod gmm;
mod nn;
mod train;

pub use encode::{decode_row, encode_row, encode_rows, EncodedLayout, Normalizers, Span, SpanKind};
pub use gmm::{fit_normalizer, GmmNormalizer, PRUNE_WEIGHT, STD_FLOOR};
pub use nn::{
    adam_step, sample_gumbel, Activation, AdamState, ForwardOptions, Gradients, Layer, MlpNetwork,
    NetworkRole, Segment, Trace,
};
pub use train::{sample, train_ctgan, ConditionSlot, CtganConfig, CtganModel, EpochLoss};
