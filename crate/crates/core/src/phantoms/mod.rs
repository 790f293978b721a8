//! Procedural paired-volume phantoms.
//!
//! Each phantom is a pure function of `(config, index)`: a body ellipsoid
//! with anatomically anchored hot organs visible in both channels, plus
//! optional lesions that are hyperintense in the uptake channel and absent
//! from the anatomy channel. Gaussian noise is applied to the uptake channel
//! only, after lesion voxels are recorded, so the mask marks exactly the
//! voxels that carry lesion intensity.

mod augment;
mod generate;
mod split;

pub use augment::{augment, AugmentConfig};
pub use generate::generate_phantom;
pub use split::split_dataset;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::{MaskVolume, Volume};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomConfig {
    /// Volume shape (D, H, W); every axis must be divisible by 8.
    pub shape: (usize, usize, usize),
    pub spacing_mm: [f32; 3],
    /// Number of physiological hotspots.
    pub organ_count: usize,
    /// Inclusive range of lesion counts for contaminated samples.
    pub lesion_count_range: (usize, usize),
    /// Lesion intensity as a multiple of the hottest organ peak.
    pub lesion_intensity_range: (f32, f32),
    /// Fraction of samples containing at least one lesion.
    pub contamination_rate: f64,
    /// Std-dev of additive Gaussian noise on the uptake channel.
    pub noise_sigma: f32,
    pub seed: u64,
    /// Organ center jitter in voxels (healthy-variability free parameter).
    pub organ_center_jitter: f32,
    /// Relative organ peak-intensity jitter (free parameter).
    pub organ_intensity_jitter: f32,
    /// Lesion radius range in voxels.
    pub lesion_radius_range: (f32, f32),
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            shape: (32, 32, 32),
            spacing_mm: [3.0, 3.0, 3.0],
            organ_count: 3,
            lesion_count_range: (0, 3),
            lesion_intensity_range: (1.5, 3.0),
            contamination_rate: 0.8,
            noise_sigma: 0.02,
            seed: 0,
            organ_center_jitter: 4.0,
            organ_intensity_jitter: 0.3,
            lesion_radius_range: (1.6, 3.0),
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        let (d, h, w) = self.shape;
        for (axis, n) in [("D", d), ("H", h), ("W", w)] {
            if n == 0 || n % 8 != 0 {
                return Err(CoreError::Config(format!(
                    "shape axis {axis} = {n} must be a positive multiple of 8 \
                     (three stride-2 downsamples)"
                )));
            }
        }
        if self.spacing_mm.iter().any(|&s| s <= 0.0) {
            return Err(CoreError::Config("spacing_mm must be positive".into()));
        }
        if self.lesion_count_range.0 > self.lesion_count_range.1 {
            return Err(CoreError::Config("lesion_count_range is inverted".into()));
        }
        if self.lesion_intensity_range.0 <= 1.0 {
            return Err(CoreError::Config(
                "lesion_intensity_range lower bound must exceed 1.0 \
                 (the hottest organ peak) for separability"
                    .into(),
            ));
        }
        if self.lesion_intensity_range.0 > self.lesion_intensity_range.1 {
            return Err(CoreError::Config("lesion_intensity_range is inverted".into()));
        }
        if !(0.0..=1.0).contains(&self.contamination_rate) {
            return Err(CoreError::Config("contamination_rate must be in [0,1]".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(CoreError::Config("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Two aligned channels plus lesion ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedVolume {
    /// Uptake channel, nonnegative.
    pub pet: Volume,
    /// Anatomy channel in [0,1].
    pub ct: Volume,
    /// Lesion mask, {0,1}.
    pub mask: MaskVolume,
    pub id: String,
    pub seed: u64,
    pub spacing_mm: [f32; 3],
}

impl PairedVolume {
    pub fn has_lesion(&self) -> bool {
        self.mask.iter().any(|&m| m != 0)
    }

    pub fn empty(shape: (usize, usize, usize)) -> Self {
        PairedVolume {
            pet: Array3::zeros(shape),
            ct: Array3::zeros(shape),
            mask: Array3::zeros(shape),
            id: String::new(),
            seed: 0,
            spacing_mm: [1.0, 1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Train,
    Val,
    Test,
}

impl std::fmt::Display for SplitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SplitKind::Train => write!(f, "train"),
            SplitKind::Val => write!(f, "val"),
            SplitKind::Test => write!(f, "test"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: String,
    pub split: SplitKind,
    pub has_lesion: bool,
}

/// Index of a generated dataset: disjoint splits covering all entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub seed: u64,
    pub config_digest: String,
}

impl DatasetManifest {
    pub fn ids_in(&self, split: SplitKind) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.split == split).collect()
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).map_err(|e| CoreError::io(path.display().to_string(), e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CoreError::io(path.display().to_string(), e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
