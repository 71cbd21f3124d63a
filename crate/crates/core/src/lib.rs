//! Fairness-aware patient representation learning.
//!
//! Structured EHR-like tables are cleaned into a [`preprocess::FeatureMatrix`],
//! clinical notes become per-patient topic weights through collapsed-Gibbs LDA
//! ([`textmodel`]), and a stacked denoising autoencoder ([`sdae`]) learns a
//! low-dimensional representation, optionally with per-sample loss weights
//! from [`fairness`]. Downstream mortality classifiers ([`classify`]) are then
//! scored for accuracy, AUROC and three group-fairness metrics. The
//! [`pipeline`] module ties the stages together behind the `fpm` CLI.

pub mod classify;
pub mod error;
pub mod fairness;
pub mod numcore;
pub mod pipeline;
pub mod preprocess;
pub mod sdae;
pub mod textmodel;

pub use error::{Error, Result};
