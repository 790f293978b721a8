//! Training-time augmentation: Gaussian noise, global intensity scaling,
//! and Gaussian blur.

use ndarray::Array3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::Volume;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub noise_prob: f64,
    pub noise_sigma_max: f32,
    pub scale_prob: f64,
    pub scale_range: (f32, f32),
    pub blur_prob: f64,
    pub blur_sigma_range: (f32, f32),
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            noise_prob: 0.5,
            noise_sigma_max: 0.03,
            scale_prob: 0.5,
            scale_range: (0.9, 1.1),
            blur_prob: 0.3,
            blur_sigma_range: (0.3, 0.8),
        }
    }
}

fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f32> = (-radius..=radius)
        .map(|i| (-(i as f32).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f32 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

fn blur_axis(vol: &Volume, kernel: &[f32], axis: usize) -> Volume {
    let dim = vol.dim();
    let n = [dim.0, dim.1, dim.2][axis] as isize;
    let radius = (kernel.len() / 2) as isize;
    let mut out = Array3::zeros(dim);
    for z in 0..dim.0 {
        for y in 0..dim.1 {
            for x in 0..dim.2 {
                let pos = [z as isize, y as isize, x as isize];
                let mut acc = 0.0f32;
                for (ki, &kv) in kernel.iter().enumerate() {
                    let mut q = pos;
                    // clamp to edge
                    q[axis] = (pos[axis] + ki as isize - radius).clamp(0, n - 1);
                    acc += kv * vol[[q[0] as usize, q[1] as usize, q[2] as usize]];
                }
                out[[z, y, x]] = acc;
            }
        }
    }
    out
}

/// Separable 3D Gaussian blur with edge clamping.
pub fn gaussian_blur(vol: &Volume, sigma: f32) -> Volume {
    let kernel = gaussian_kernel(sigma);
    let mut out = blur_axis(vol, &kernel, 0);
    out = blur_axis(&out, &kernel, 1);
    blur_axis(&out, &kernel, 2)
}

/// Randomly perturb one channel. Values are clipped at zero to preserve the
/// nonnegativity of the uptake channel.
pub fn augment(vol: &Volume, cfg: &AugmentConfig, rng: &mut ChaCha8Rng) -> Volume {
    let mut out = vol.clone();
    if rng.random::<f64>() < cfg.scale_prob {
        let s = cfg.scale_range.0
            + (cfg.scale_range.1 - cfg.scale_range.0) * rng.random::<f64>() as f32;
        out.mapv_inplace(|v| v * s);
    }
    if rng.random::<f64>() < cfg.blur_prob {
        let s = cfg.blur_sigma_range.0
            + (cfg.blur_sigma_range.1 - cfg.blur_sigma_range.0) * rng.random::<f64>() as f32;
        out = gaussian_blur(&out, s);
    }
    if rng.random::<f64>() < cfg.noise_prob {
        let sigma = cfg.noise_sigma_max * rng.random::<f64>() as f32;
        for v in out.iter_mut() {
            let u1: f64 = rng.random::<f64>().max(1e-12);
            let u2: f64 = rng.random::<f64>();
            let g = ((-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()) as f32;
            *v += sigma * g;
        }
    }
    out.mapv_inplace(|v| v.max(0.0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn blur_preserves_mass_roughly() {
        let mut v = Array3::<f32>::zeros((8, 8, 8));
        v[[4, 4, 4]] = 1.0;
        let b = gaussian_blur(&v, 0.8);
        let total: f32 = b.iter().sum();
        assert!((total - 1.0).abs() < 1e-4);
        assert!(b[[4, 4, 4]] < 1.0);
    }

    #[test]
    fn augment_is_seeded() {
        let v = Array3::<f32>::from_elem((8, 8, 8), 0.5);
        let cfg = AugmentConfig::default();
        let a = augment(&v, &cfg, &mut seed::rng(3));
        let b = augment(&v, &cfg, &mut seed::rng(3));
        assert_eq!(a, b);
        assert!(a.iter().all(|&x| x >= 0.0));
    }
}
