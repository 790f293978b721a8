//! Residual anomaly maps.

use crate::error::{CoreError, Result};
use crate::Volume;

/// Positive residual `max(x - x_r, 0)` voxelwise.
pub fn residual_map(x: &Volume, x_r: &Volume) -> Result<Volume> {
    if x.dim() != x_r.dim() {
        return Err(CoreError::Contract(format!(
            "residual_map: {:?} vs {:?}",
            x.dim(),
            x_r.dim()
        )));
    }
    let mut out = x - x_r;
    out.mapv_inplace(|v| v.max(0.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    #[test]
    fn identical_volumes_give_zero_map() {
        let x = Array3::from_elem((2, 2, 2), 1.5f32);
        let m = residual_map(&x, &x).unwrap();
        assert!(m.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_residuals_clipped_positive_kept() {
        let x = Array3::from_shape_vec((1, 1, 2), vec![5.0f32, 1.0]).unwrap();
        let r = Array3::from_shape_vec((1, 1, 2), vec![3.0f32, 4.0]).unwrap();
        let m = residual_map(&x, &r).unwrap();
        assert_eq!(m[[0, 0, 0]], 2.0);
        assert_eq!(m[[0, 0, 1]], 0.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let x = Array3::<f32>::zeros((2, 2, 2));
        let r = Array3::<f32>::zeros((2, 2, 4));
        assert!(residual_map(&x, &r).is_err());
    }
}
