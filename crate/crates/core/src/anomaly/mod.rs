//! Detection pipeline: rasterization, likelihood thresholding, latent
//! healing, reconstruction stacks, and residual / KDE anomaly maps.

mod heal;
mod kde;
mod maps;
mod raster;
mod stack;

pub use heal::{heal, resample_mask, ResampleMask};
pub use kde::{kde_anomaly_map, kde_logdensity, silverman_bandwidth, KdeConfig, Kernel};
pub use maps::residual_map;
pub use raster::{derasterize, rasterize, TokenSequence};
pub use stack::{sample_reconstructions, ReconstructionStack, StackOptions};
