//! Per-voxel kernel density scoring over reconstruction stacks.

use ndarray::Array3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ReconstructionStack;
use crate::error::{CoreError, Result};
use crate::scalar::Scalar;
use crate::Volume;

/// The six supported kernel shapes, each normalized to unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Gaussian,
    Tophat,
    Epanechnikov,
    Exponential,
    Linear,
    Cosine,
}

impl Kernel {
    pub const ALL: [Kernel; 6] = [
        Kernel::Gaussian,
        Kernel::Tophat,
        Kernel::Epanechnikov,
        Kernel::Exponential,
        Kernel::Linear,
        Kernel::Cosine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Gaussian => "gaussian",
            Kernel::Tophat => "tophat",
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Exponential => "exponential",
            Kernel::Linear => "linear",
            Kernel::Cosine => "cosine",
        }
    }

    pub fn parse(name: &str) -> Result<Kernel> {
        Kernel::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| CoreError::Config(format!("unknown kernel: {name}")))
    }

    /// K(u), normalized so the kernel integrates to one.
    pub fn eval<S: Scalar>(self, u: S) -> S {
        let au = u.abs();
        let one = S::one();
        match self {
            Kernel::Gaussian => {
                let norm = S::from_f(1.0 / (2.0 * std::f64::consts::PI).sqrt());
                norm * (-u * u / S::from_f(2.0)).exp()
            }
            Kernel::Tophat => {
                if au < one {
                    S::from_f(0.5)
                } else {
                    S::zero()
                }
            }
            Kernel::Epanechnikov => {
                if au < one {
                    S::from_f(0.75) * (one - u * u)
                } else {
                    S::zero()
                }
            }
            Kernel::Exponential => S::from_f(0.5) * (-au).exp(),
            Kernel::Linear => {
                if au < one {
                    one - au
                } else {
                    S::zero()
                }
            }
            Kernel::Cosine => {
                if au < one {
                    let quarter_pi = S::from_f(std::f64::consts::FRAC_PI_4);
                    let half_pi = S::from_f(std::f64::consts::FRAC_PI_2);
                    quarter_pi * (half_pi * u).cos()
                } else {
                    S::zero()
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct KdeConfig {
    pub kernel: Kernel,
    /// Additive bandwidth regularizer.
    pub epsilon: f64,
    /// Density floor applied before taking the log.
    pub density_floor: f64,
    /// Zero the score where the observation is at or below the stack mean.
    pub one_sided: bool,
}

impl Default for KdeConfig {
    fn default() -> Self {
        KdeConfig {
            kernel: Kernel::Exponential,
            epsilon: 0.05,
            density_floor: 1e-12,
            one_sided: true,
        }
    }
}

/// `h = (4 sigma^5 / (3n))^(1/5) + eps` with the population standard
/// deviation; all samples equal gives exactly `eps`.
pub fn silverman_bandwidth<S: Scalar>(samples: &[S], eps: S) -> S {
    assert!(!samples.is_empty(), "bandwidth needs at least one sample");
    let n = S::from_n(samples.len());
    let mean = samples.iter().copied().fold(S::zero(), |a, b| a + b) / n;
    let var = samples
        .iter()
        .map(|&x| (x - mean) * (x - mean))
        .fold(S::zero(), |a, b| a + b)
        / n;
    let sigma = var.sqrt();
    if sigma == S::zero() {
        return eps;
    }
    let four = S::from_f(4.0);
    let three = S::from_f(3.0);
    (four * sigma.powi(5) / (three * n)).powf(S::from_f(0.2)) + eps
}

/// `log( max(floor, (1/nh) sum K((x - x_i)/h)) )`.
pub fn kde_logdensity<S: Scalar>(
    samples: &[S],
    x: S,
    kernel: Kernel,
    h: S,
    floor: S,
) -> Result<S> {
    if h <= S::zero() {
        return Err(CoreError::Contract(format!(
            "kde bandwidth must be positive, got {h}"
        )));
    }
    if samples.is_empty() {
        return Err(CoreError::Contract("kde needs at least one sample".into()));
    }
    let n = S::from_n(samples.len());
    let density = samples
        .iter()
        .map(|&xi| kernel.eval((x - xi) / h))
        .fold(S::zero(), |a, b| a + b)
        / (n * h);
    Ok(density.max(floor).ln())
}

/// Negative KDE log-likelihood of the observed volume under the stack,
/// bandwidth per voxel from [`silverman_bandwidth`].
pub fn kde_anomaly_map(
    stack: &ReconstructionStack,
    observed: &Volume,
    config: &KdeConfig,
) -> Result<Volume> {
    if stack.volumes.is_empty() {
        return Err(CoreError::Contract("empty reconstruction stack".into()));
    }
    for v in &stack.volumes {
        if v.dim() != observed.dim() {
            return Err(CoreError::Contract(format!(
                "stack volume shape {:?} vs observed shape {:?}",
                v.dim(),
                observed.dim()
            )));
        }
    }
    let dims = observed.dim();
    let n_vox = observed.len();
    let obs = observed.as_slice().expect("standard layout");
    let slices: Vec<&[f32]> = stack
        .volumes
        .iter()
        .map(|v| v.as_slice().expect("standard layout"))
        .collect();
    let eps = config.epsilon;
    let floor = config.density_floor;
    let kernel = config.kernel;
    let one_sided = config.one_sided;
    let scores: Result<Vec<f32>> = (0..n_vox)
        .into_par_iter()
        .map(|i| {
            let samples: Vec<f64> = slices.iter().map(|s| s[i] as f64).collect();
            let x = obs[i] as f64;
            if one_sided {
                let mean = samples.iter().sum::<f64>() / samples.len() as f64;
                if x <= mean {
                    return Ok(0.0f32);
                }
            }
            let h = silverman_bandwidth(&samples, eps);
            let logd = kde_logdensity(&samples, x, kernel, h, floor)?;
            Ok((-logd) as f32)
        })
        .collect();
    Ok(Array3::from_shape_vec(dims, scores?).expect("shape"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silverman_reference_value() {
        // sigma = 1 exactly for these two samples (population convention)
        let samples: Vec<f64> = vec![-1.0, 1.0];
        let h = silverman_bandwidth(&samples, 0.0);
        assert!((h - (4.0f64 / 6.0).powf(0.2)).abs() < 1e-14);

        // n = 240, sigma = 1: h = (4/720)^(1/5) + 0.05
        let mut samples = vec![0.0f64; 240];
        for (i, s) in samples.iter_mut().enumerate() {
            *s = if i % 2 == 0 { -1.0 } else { 1.0 };
        }
        let h = silverman_bandwidth(&samples, 0.05);
        assert!((h - ((4.0f64 / 720.0).powf(0.2) + 0.05)).abs() < 1e-14);
        assert!((h - 0.4040).abs() < 1e-4);
    }

    #[test]
    fn zero_variance_gives_eps() {
        let samples = vec![2.5f64; 17];
        assert_eq!(silverman_bandwidth(&samples, 0.05), 0.05);
        assert_eq!(silverman_bandwidth(&samples, 0.0), 0.0);
    }

    #[test]
    fn bandwidth_scales_linearly() {
        let samples: Vec<f64> = (0..50).map(|i| (i as f64 * 0.713).sin()).collect();
        let h1 = silverman_bandwidth(&samples, 0.0);
        let scaled: Vec<f64> = samples.iter().map(|x| x * 3.0).collect();
        let h3 = silverman_bandwidth(&scaled, 0.0);
        assert!((h3 - 3.0 * h1).abs() < 1e-12);
    }

    #[test]
    fn gaussian_point_mass_at_zero() {
        let logd = kde_logdensity(&[0.0f64], 0.0, Kernel::Gaussian, 1.0, 1e-12).unwrap();
        assert!((logd - (1.0 / (2.0 * std::f64::consts::PI).sqrt()).ln()).abs() < 1e-14);
        assert!((logd + 0.9189).abs() < 1e-4);
    }

    #[test]
    fn tophat_outside_support_hits_floor() {
        let logd = kde_logdensity(&[0.0f64], 5.0, Kernel::Tophat, 1.0, 1e-12).unwrap();
        assert!((logd - 1e-12f64.ln()).abs() < 1e-10);
        assert!((logd + 27.631).abs() < 1e-3);
    }

    #[test]
    fn symmetric_samples_give_symmetric_density() {
        let samples = vec![-0.8f64, 0.8];
        for kernel in Kernel::ALL {
            let h = 0.9;
            let a = kde_logdensity(&samples, 0.3, kernel, h, 1e-12).unwrap();
            let b = kde_logdensity(&samples, -0.3, kernel, h, 1e-12).unwrap();
            assert!((a - b).abs() < 1e-12, "{kernel:?}");
        }
    }

    #[test]
    fn nonpositive_bandwidth_rejected() {
        assert!(kde_logdensity(&[0.0f64], 0.0, Kernel::Gaussian, 0.0, 1e-12).is_err());
    }

    #[test]
    fn kernels_integrate_to_one() {
        // trapezoid quadrature over a wide support
        for kernel in Kernel::ALL {
            let (lo, hi, steps) = (-40.0f64, 40.0, 4_000_000usize);
            let dx = (hi - lo) / steps as f64;
            let mut total = 0.5 * (kernel.eval(lo) + kernel.eval(hi));
            for i in 1..steps {
                total += kernel.eval(lo + i as f64 * dx);
            }
            total *= dx;
            assert!((total - 1.0).abs() < 1e-6, "{kernel:?}: {total}");
        }
    }
}
