//! Phantom rasterization.

use ndarray::Array3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{PairedVolume, PhantomConfig};
use crate::error::Result;
use crate::seed;

struct Organ {
    center: [f32; 3],
    radius: f32,
    pet_peak: f32,
    ct_value: f32,
}

struct Lesion {
    center: [f32; 3],
    radius: f32,
    value: f32,
}

fn uniform(rng: &mut ChaCha8Rng, lo: f32, hi: f32) -> f32 {
    lo + (hi - lo) * rng.random::<f64>() as f32
}

fn normal(rng: &mut ChaCha8Rng) -> f32 {
    // Box-Muller keeps the draw order independent of the distribution crate.
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random::<f64>();
    ((-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()) as f32
}

fn dist2(a: [f32; 3], b: [f32; 3]) -> f32 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

const TISSUE_PET: f32 = 0.2;
const TISSUE_CT: f32 = 0.3;

// Anchors as fractions of (D,H,W): brain / heart / bladder analogs.
const ORGAN_ANCHORS: [[f32; 3]; 3] = [[0.22, 0.50, 0.50], [0.48, 0.44, 0.42], [0.78, 0.52, 0.50]];
const ORGAN_RADII: [f32; 3] = [3.4, 3.6, 2.8];
const ORGAN_PET: [f32; 3] = [1.2, 1.0, 1.5];
const ORGAN_CT: [f32; 3] = [0.75, 0.62, 0.55];

/// Generate one paired phantom. Pure in `(config, index)`.
pub fn generate_phantom(config: &PhantomConfig, index: u64) -> Result<PairedVolume> {
    config.validate()?;
    let sample_seed = seed::derive_indexed(config.seed, "phantom", index);
    let mut rng = seed::rng(sample_seed);
    let (d, h, w) = config.shape;
    let dims = [d as f32, h as f32, w as f32];

    let body_center = [
        dims[0] * 0.5 + uniform(&mut rng, -1.0, 1.0),
        dims[1] * 0.5 + uniform(&mut rng, -1.0, 1.0),
        dims[2] * 0.5 + uniform(&mut rng, -1.0, 1.0),
    ];
    let body_axes = [
        dims[0] * 0.44 * uniform(&mut rng, 0.95, 1.05),
        dims[1] * 0.42 * uniform(&mut rng, 0.95, 1.05),
        dims[2] * 0.40 * uniform(&mut rng, 0.95, 1.05),
    ];

    let jitter = config.organ_center_jitter;
    let ij = config.organ_intensity_jitter;
    let mut organs = Vec::with_capacity(config.organ_count);
    for k in 0..config.organ_count {
        let (anchor, base_r, base_pet, base_ct) = if k < ORGAN_ANCHORS.len() {
            (ORGAN_ANCHORS[k], ORGAN_RADII[k], ORGAN_PET[k], ORGAN_CT[k])
        } else {
            // extra organs drop at random anchors inside the torso band
            let anchor = [
                uniform(&mut rng, 0.3, 0.7),
                uniform(&mut rng, 0.35, 0.65),
                uniform(&mut rng, 0.35, 0.65),
            ];
            (anchor, 2.6, 0.9, 0.6)
        };
        let center = [
            anchor[0] * dims[0] + uniform(&mut rng, -jitter, jitter),
            anchor[1] * dims[1] + uniform(&mut rng, -jitter, jitter),
            anchor[2] * dims[2] + uniform(&mut rng, -jitter, jitter),
        ];
        organs.push(Organ {
            center,
            radius: base_r * uniform(&mut rng, 0.85, 1.15),
            pet_peak: base_pet * uniform(&mut rng, 1.0 - ij, 1.0 + ij),
            ct_value: (base_ct * uniform(&mut rng, 0.9, 1.1)).min(1.0),
        });
    }
    let hottest = organs
        .iter()
        .map(|o| o.pet_peak)
        .fold(1.0f32, f32::max);

    let contaminated = rng.random::<f64>() < config.contamination_rate;
    let (lo, hi) = config.lesion_count_range;
    let count = if contaminated && hi > 0 {
        let lo = lo.max(1);
        rng.random_range(lo..=hi)
    } else {
        0
    };
    let mut lesions: Vec<Lesion> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut placed = None;
        for _attempt in 0..100 {
            let radius = uniform(
                &mut rng,
                config.lesion_radius_range.0,
                config.lesion_radius_range.1,
            );
            let center = [
                body_center[0] + uniform(&mut rng, -0.6, 0.6) * body_axes[0],
                body_center[1] + uniform(&mut rng, -0.6, 0.6) * body_axes[1],
                body_center[2] + uniform(&mut rng, -0.6, 0.6) * body_axes[2],
            ];
            let clear_of_organs = organs
                .iter()
                .all(|o| dist2(center, o.center) > (radius + o.radius + 1.5).powi(2));
            let clear_of_lesions = lesions
                .iter()
                .all(|l| dist2(center, l.center) > (radius + l.radius + 1.5).powi(2));
            placed = Some((center, radius));
            if clear_of_organs && clear_of_lesions {
                break;
            }
        }
        let (center, radius) = placed.expect("at least one attempt");
        let value = uniform(
            &mut rng,
            config.lesion_intensity_range.0,
            config.lesion_intensity_range.1,
        ) * hottest;
        lesions.push(Lesion {
            center,
            radius,
            value,
        });
    }

    let shape = (d, h, w);
    let mut pet = Array3::<f32>::zeros(shape);
    let mut ct = Array3::<f32>::zeros(shape);
    let mut mask = Array3::<u8>::zeros(shape);

    let spine_y = dims[1] * 0.68;
    let spine_x = dims[2] * 0.5;
    for z in 0..d {
        for y in 0..h {
            for x in 0..w {
                let p = [z as f32, y as f32, x as f32];
                let e = ((p[0] - body_center[0]) / body_axes[0]).powi(2)
                    + ((p[1] - body_center[1]) / body_axes[1]).powi(2)
                    + ((p[2] - body_center[2]) / body_axes[2]).powi(2);
                if e > 1.0 {
                    continue;
                }
                let mut pet_v = TISSUE_PET;
                let mut ct_v = TISSUE_CT;
                if (p[1] - spine_y).powi(2) + (p[2] - spine_x).powi(2) <= 1.6f32.powi(2) {
                    ct_v = 0.9;
                }
                for o in &organs {
                    let d2 = dist2(p, o.center);
                    if d2 <= o.radius.powi(2) {
                        ct_v = ct_v.max(o.ct_value);
                    }
                    // smooth uptake profile peaking at the organ center
                    let sigma2 = (o.radius / 1.5).powi(2);
                    let profile = o.pet_peak * (-d2 / (2.0 * sigma2)).exp();
                    pet_v = pet_v.max(profile);
                }
                pet[[z, y, x]] = pet_v;
                ct[[z, y, x]] = ct_v.min(1.0);
            }
        }
    }

    for l in &lesions {
        let r = l.radius.ceil() as isize;
        let c = [l.center[0], l.center[1], l.center[2]];
        for dz in -r..=r {
            for dy in -r..=r {
                for dx in -r..=r {
                    let z = c[0].round() as isize + dz;
                    let y = c[1].round() as isize + dy;
                    let x = c[2].round() as isize + dx;
                    if z < 0 || y < 0 || x < 0 || z >= d as isize || y >= h as isize || x >= w as isize
                    {
                        continue;
                    }
                    let p = [z as f32, y as f32, x as f32];
                    if dist2(p, c) <= l.radius.powi(2) {
                        pet[[z as usize, y as usize, x as usize]] = l.value;
                        mask[[z as usize, y as usize, x as usize]] = 1;
                    }
                }
            }
        }
    }

    if config.noise_sigma > 0.0 {
        for v in pet.iter_mut() {
            *v = (*v + config.noise_sigma * normal(&mut rng)).max(0.0);
        }
    }

    Ok(PairedVolume {
        pet,
        ct,
        mask,
        id: format!("ph{index:05}"),
        seed: sample_seed,
        spacing_mm: config.spacing_mm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flood_fill_components(mask: &ndarray::Array3<u8>) -> usize {
        // independent 6-connectivity component counter
        let (d, h, w) = mask.dim();
        let mut seen = ndarray::Array3::<u8>::zeros((d, h, w));
        let mut count = 0;
        for z in 0..d {
            for y in 0..h {
                for x in 0..w {
                    if mask[[z, y, x]] == 0 || seen[[z, y, x]] != 0 {
                        continue;
                    }
                    count += 1;
                    let mut stack = vec![(z, y, x)];
                    seen[[z, y, x]] = 1;
                    while let Some((cz, cy, cx)) = stack.pop() {
                        let neighbors = [
                            (cz.wrapping_sub(1), cy, cx),
                            (cz + 1, cy, cx),
                            (cz, cy.wrapping_sub(1), cx),
                            (cz, cy + 1, cx),
                            (cz, cy, cx.wrapping_sub(1)),
                            (cz, cy, cx + 1),
                        ];
                        for (nz, ny, nx) in neighbors {
                            if nz < d
                                && ny < h
                                && nx < w
                                && mask[[nz, ny, nx]] != 0
                                && seen[[nz, ny, nx]] == 0
                            {
                                seen[[nz, ny, nx]] = 1;
                                stack.push((nz, ny, nx));
                            }
                        }
                    }
                }
            }
        }
        count
    }

    #[test]
    fn same_inputs_bit_identical() {
        let cfg = PhantomConfig::default();
        let a = generate_phantom(&cfg, 5).unwrap();
        let b = generate_phantom(&cfg, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_lesion_range_means_clean() {
        let cfg = PhantomConfig {
            lesion_count_range: (0, 0),
            contamination_rate: 1.0,
            ..PhantomConfig::default()
        };
        for i in 0..4 {
            let v = generate_phantom(&cfg, i).unwrap();
            assert!(!v.has_lesion());
            assert!(v.mask.iter().all(|&m| m == 0));
        }
    }

    #[test]
    fn two_lesions_make_two_components() {
        let cfg = PhantomConfig {
            lesion_count_range: (2, 2),
            contamination_rate: 1.0,
            ..PhantomConfig::default()
        };
        for i in 0..6 {
            let v = generate_phantom(&cfg, i).unwrap();
            assert_eq!(flood_fill_components(&v.mask), 2, "index {i}");
        }
    }

    #[test]
    fn invalid_shape_rejected() {
        let cfg = PhantomConfig {
            shape: (30, 32, 32),
            ..PhantomConfig::default()
        };
        assert!(matches!(
            generate_phantom(&cfg, 0),
            Err(crate::CoreError::Config(_))
        ));
    }

    #[test]
    fn channels_within_declared_ranges() {
        let cfg = PhantomConfig::default();
        for i in 0..4 {
            let v = generate_phantom(&cfg, i).unwrap();
            assert!(v.pet.iter().all(|&p| p >= 0.0));
            assert!(v.ct.iter().all(|&c| (0.0..=1.0).contains(&c)));
            assert_eq!(v.pet.dim(), v.ct.dim());
            assert_eq!(v.pet.dim(), v.mask.dim());
        }
    }

    #[test]
    fn lesion_voxels_exceed_p99_of_rest() {
        let cfg = PhantomConfig {
            contamination_rate: 1.0,
            ..PhantomConfig::default()
        };
        for i in 0..6 {
            let v = generate_phantom(&cfg, i).unwrap();
            if !v.has_lesion() {
                continue;
            }
            let mut normals: Vec<f32> = v
                .pet
                .iter()
                .zip(v.mask.iter())
                .filter(|(_, &m)| m == 0)
                .map(|(&p, _)| p)
                .collect();
            normals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let p99 = normals[(normals.len() as f64 * 0.99) as usize];
            for (&p, &m) in v.pet.iter().zip(v.mask.iter()) {
                if m != 0 {
                    assert!(p > p99, "lesion voxel {p} not above p99 {p99} (index {i})");
                }
            }
        }
    }
}
