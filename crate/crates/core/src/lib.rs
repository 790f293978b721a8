//! Unsupervised anomaly detection for paired volumetric images.
//!
//! The library covers the full pipeline: procedural phantom generation
//! ([`phantoms`]), a small reverse-mode autodiff engine with the 3D
//! convolutional primitives the models need ([`diffcore`]), a VQ-GAN over
//! volumes ([`vqcore`]), an autoregressive latent transformer with optional
//! cross-attention conditioning and a FAVOR+ linear-attention backend
//! ([`armodel`]), latent healing plus residual/KDE anomaly maps ([`anomaly`]),
//! and segmentation metrics ([`segmetrics`]). [`pipeline`] wires the stages
//! together behind the `anomalens` CLI.
//!
//! Core numerics are generic over the scalar type via [`Scalar`]: training
//! runs in `f32`, gradient checking and KDE scoring in `f64`.

pub mod anomaly;
pub mod armodel;
pub mod diffcore;
pub mod error;
pub mod io;
pub mod phantoms;
pub mod pipeline;
pub mod scalar;
pub mod seed;
pub mod segmetrics;
pub mod vqcore;

pub use error::{CoreError, Result};
pub use scalar::Scalar;

/// Scalar type used for training and stored volume payloads.
pub type Real = f32;
/// Scalar type used for gradient checking and density scoring.
pub type Wide = f64;

/// Autodiff graph over the training scalar.
pub type Graph32 = diffcore::Graph<f32>;
/// Autodiff graph over the checking scalar.
pub type Graph64 = diffcore::Graph<f64>;

/// A volume channel: `[depth, height, width]`, last axis fastest.
pub type Volume = ndarray::Array3<Real>;
/// A binary mask over a volume.
pub type MaskVolume = ndarray::Array3<u8>;
