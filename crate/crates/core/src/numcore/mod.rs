//! Dense matrices, activations and seeded randomness shared by every stage.

mod activation;
mod matrix;
mod rng;

pub use activation::{activate, activation_derivative, sigmoid, ActivationKind};
pub use matrix::{matmul, Matrix};
pub use rng::{bernoulli_mask, derive_seed, gaussian, Rng};
