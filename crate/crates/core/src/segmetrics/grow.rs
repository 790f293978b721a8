//! Clinically consistent region growing: each detected component expands to
//! the connected superlevel set above a fraction of its own maximum
//! intensity.

use ndarray::Array3;

use super::connected_components;
use crate::error::{CoreError, Result};
use crate::{MaskVolume, Volume};

/// A binary segmentation plus how it was produced.
#[derive(Debug, Clone)]
pub struct SegmentationMask {
    pub mask: MaskVolume,
    /// Map threshold that produced the seed mask (context from the caller).
    pub source_threshold: f64,
    pub grown: bool,
    /// Per seed component: the absolute intensity level used for growth.
    pub component_thresholds: Vec<f32>,
}

/// Grow every component of `seed_mask` to the connected region of
/// `{intensity >= fraction * component max}` that touches it. Components are
/// processed in label order; the output is the union of the grown regions.
pub fn clinical_grow(
    seed_mask: &MaskVolume,
    intensity: &Volume,
    fraction: f64,
) -> Result<SegmentationMask> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CoreError::Contract(format!(
            "grow fraction must be in (0,1], got {fraction}"
        )));
    }
    if seed_mask.dim() != intensity.dim() {
        return Err(CoreError::Contract(format!(
            "seed mask shape {:?} vs intensity shape {:?}",
            seed_mask.dim(),
            intensity.dim()
        )));
    }
    let (labels, count) = connected_components(seed_mask);
    let (d, h, w) = seed_mask.dim();
    let mut out = Array3::<u8>::zeros((d, h, w));
    let mut thresholds = Vec::with_capacity(count);
    for comp in 1..=count as u32 {
        let mut comp_max = f32::NEG_INFINITY;
        for z in 0..d {
            for y in 0..h {
                for x in 0..w {
                    if labels[[z, y, x]] == comp {
                        comp_max = comp_max.max(intensity[[z, y, x]]);
                    }
                }
            }
        }
        let level = fraction as f32 * comp_max;
        thresholds.push(level);
        // flood the superlevel set from every seed voxel already in it
        let mut visited = Array3::<u8>::zeros((d, h, w));
        let mut stack = Vec::new();
        for z in 0..d {
            for y in 0..h {
                for x in 0..w {
                    if labels[[z, y, x]] == comp && intensity[[z, y, x]] >= level {
                        if visited[[z, y, x]] == 0 {
                            visited[[z, y, x]] = 1;
                            stack.push((z, y, x));
                        }
                    }
                }
            }
        }
        while let Some((cz, cy, cx)) = stack.pop() {
            out[[cz, cy, cx]] = 1;
            let visit = |nz: usize, ny: usize, nx: usize,
                             visited: &mut Array3<u8>,
                             stack: &mut Vec<(usize, usize, usize)>| {
                if visited[[nz, ny, nx]] == 0 && intensity[[nz, ny, nx]] >= level {
                    visited[[nz, ny, nx]] = 1;
                    stack.push((nz, ny, nx));
                }
            };
            if cz > 0 {
                visit(cz - 1, cy, cx, &mut visited, &mut stack);
            }
            if cz + 1 < d {
                visit(cz + 1, cy, cx, &mut visited, &mut stack);
            }
            if cy > 0 {
                visit(cz, cy - 1, cx, &mut visited, &mut stack);
            }
            if cy + 1 < h {
                visit(cz, cy + 1, cx, &mut visited, &mut stack);
            }
            if cx > 0 {
                visit(cz, cy, cx - 1, &mut visited, &mut stack);
            }
            if cx + 1 < w {
                visit(cz, cy, cx + 1, &mut visited, &mut stack);
            }
        }
    }
    Ok(SegmentationMask {
        mask: out,
        source_threshold: f64::NAN,
        grown: true,
        component_thresholds: thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(vals: &[f32]) -> Volume {
        Array3::from_shape_vec((1, 1, vals.len()), vals.to_vec()).unwrap()
    }

    #[test]
    fn growth_stops_at_sublevel_gap() {
        let intensity = line(&[10.0, 5.0, 3.0, 10.0]);
        let mut seed = Array3::<u8>::zeros((1, 1, 4));
        seed[[0, 0, 0]] = 1;
        let grown = clinical_grow(&seed, &intensity, 0.4).unwrap();
        assert_eq!(grown.mask.as_slice().unwrap(), &[1, 1, 0, 0]);
        assert_eq!(grown.component_thresholds, vec![4.0]);
    }

    #[test]
    fn fixed_point_when_seed_equals_superlevel_component() {
        let intensity = line(&[10.0, 9.0, 0.0, 1.0]);
        let mut seed = Array3::<u8>::zeros((1, 1, 4));
        seed[[0, 0, 0]] = 1;
        seed[[0, 0, 1]] = 1;
        let grown = clinical_grow(&seed, &intensity, 0.4).unwrap();
        assert_eq!(grown.mask.as_slice().unwrap(), &[1, 1, 0, 0]);
    }

    #[test]
    fn uniform_intensity_floods_connected_foreground() {
        let intensity = line(&[2.0, 2.0, 2.0, 2.0]);
        let mut seed = Array3::<u8>::zeros((1, 1, 4));
        seed[[0, 0, 2]] = 1;
        let grown = clinical_grow(&seed, &intensity, 0.4).unwrap();
        assert_eq!(grown.mask.as_slice().unwrap(), &[1, 1, 1, 1]);
    }

    #[test]
    fn bad_fraction_rejected() {
        let intensity = line(&[1.0]);
        let seed = Array3::<u8>::zeros((1, 1, 1));
        assert!(clinical_grow(&seed, &intensity, 0.0).is_err());
        assert!(clinical_grow(&seed, &intensity, 1.5).is_err());
    }

    #[test]
    fn grown_voxels_meet_their_threshold() {
        let intensity = line(&[8.0, 4.0, 3.9, 5.0, 0.0, 6.0, 2.5]);
        let mut seed = Array3::<u8>::zeros((1, 1, 7));
        seed[[0, 0, 0]] = 1;
        seed[[0, 0, 5]] = 1;
        let grown = clinical_grow(&seed, &intensity, 0.4).unwrap();
        // component 1: max 8 -> level 3.2 -> {0,1,2,3}; component 2: max 6
        // -> level 2.4 -> {5,6}
        assert_eq!(grown.mask.as_slice().unwrap(), &[1, 1, 1, 1, 0, 1, 1]);
        assert_eq!(grown.component_thresholds, vec![3.2, 2.4]);
    }
}
