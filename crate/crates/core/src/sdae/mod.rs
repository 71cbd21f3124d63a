//! Stacked denoising autoencoder with plain and sample-weighted
//! reconstruction losses.

mod backprop;
mod checkpoint;
mod loss;
mod model;
mod train;

pub use backprop::{backward, backward_with_latent, sgd_step, Gradients, LayerGradient};
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use loss::{
    feature_errors, latent_penalty, latent_penalty_with_grad, mse_loss, sample_errors, weighted_loss,
    FeatureErrors,
};
pub use model::{
    encode, forward, init_model, reconstruct, ActivationPreset, Architecture, AutoencoderModel, ForwardPass,
    Layer, LayerSpec,
};
pub use train::{
    corrupt, corrupt_gaussian, corrupt_mask, train, LossKind, LossReport, NoiseKind, TrainConfig, TrainSet,
};

/// Per-feature reconstruction error of `model` on clean `data`.
pub fn per_feature_errors(model: &AutoencoderModel, data: &crate::numcore::Matrix) -> crate::Result<FeatureErrors> {
    feature_errors(data, &reconstruct(model, data)?)
}
