//! Segmentation post-processing and evaluation metrics.

mod auprc;
mod components;
mod dice;
mod grow;
mod ttest;

pub use auprc::auprc;
pub use components::connected_components;
pub use dice::{best_dice, dice};
pub use grow::{clinical_grow, SegmentationMask};
pub use ttest::paired_ttest;
