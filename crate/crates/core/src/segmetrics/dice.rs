//! DICE coefficient and its best-achievable value over map thresholds.

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;
use crate::MaskVolume;
use ndarray::Array3;

/// `2|P∩G| / (|P|+|G|)`; 1 when both masks are empty.
pub fn dice(pred: &MaskVolume, gt: &MaskVolume) -> Result<f64> {
    if pred.dim() != gt.dim() {
        return Err(CoreError::Contract(format!(
            "dice: pred shape {:?} vs gt shape {:?}",
            pred.dim(),
            gt.dim()
        )));
    }
    let mut inter = 0usize;
    let mut p = 0usize;
    let mut g = 0usize;
    for (&a, &b) in pred.iter().zip(gt.iter()) {
        let a = (a != 0) as usize;
        let b = (b != 0) as usize;
        inter += a & b;
        p += a;
        g += b;
    }
    if p + g == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (p + g) as f64)
}

/// Candidate thresholds: all distinct map values when there are at most 256
/// of them, otherwise 256 empirical quantiles, plus `±inf` sentinels. The
/// sweep depends only on value order, so any strictly increasing transform
/// of the map yields the same result.
pub(crate) fn threshold_sweep<S: Scalar>(map: &Array3<S>) -> Vec<S> {
    let mut values: Vec<S> = map.iter().copied().collect();
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite map values"));
    values.dedup();
    let mut sweep = Vec::with_capacity(258);
    sweep.push(S::neg_infinity());
    if values.len() <= 256 {
        sweep.extend_from_slice(&values);
    } else {
        for k in 0..256 {
            let idx = k * (values.len() - 1) / 255;
            sweep.push(values[idx]);
        }
        sweep.dedup();
    }
    sweep.push(S::infinity());
    sweep
}

/// Max DICE over the threshold sweep of `map >= t` against `gt`.
pub fn best_dice<S: Scalar>(map: &Array3<S>, gt: &MaskVolume) -> Result<(S, f64)> {
    if map.dim() != gt.dim() {
        return Err(CoreError::Contract(format!(
            "best_dice: map shape {:?} vs gt shape {:?}",
            map.dim(),
            gt.dim()
        )));
    }
    if map.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Numeric("best_dice: non-finite map values".into()));
    }
    let gt_count = gt.iter().filter(|&&g| g != 0).count();
    // sort voxels by descending score once; sweeping a threshold then moves
    // one prefix boundary
    let mut order: Vec<(S, bool)> = map
        .iter()
        .zip(gt.iter())
        .map(|(&s, &g)| (s, g != 0))
        .collect();
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite"));
    let sweep = threshold_sweep(map);
    let mut best = (S::infinity(), f64::NEG_INFINITY);
    for &t in sweep.iter().rev() {
        // pred = {score >= t}
        let mut inter = 0usize;
        let mut p = 0usize;
        for &(s, is_gt) in &order {
            if s < t {
                break;
            }
            p += 1;
            inter += is_gt as usize;
        }
        let d = if p + gt_count == 0 {
            1.0
        } else {
            2.0 * inter as f64 / (p + gt_count) as f64
        };
        if d > best.1 {
            best = (t, d);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn mask(vals: &[u8]) -> MaskVolume {
        Array3::from_shape_vec((1, 1, vals.len()), vals.to_vec()).unwrap()
    }

    #[test]
    fn identical_nonempty_masks() {
        let m = mask(&[1, 0, 1]);
        assert_eq!(dice(&m, &m).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_masks() {
        assert_eq!(dice(&mask(&[1, 0]), &mask(&[0, 1])).unwrap(), 0.0);
    }

    #[test]
    fn half_overlap() {
        let p = mask(&[1, 1, 0, 0]);
        let g = mask(&[0, 1, 1, 0]);
        assert_eq!(dice(&p, &g).unwrap(), 0.5);
    }

    #[test]
    fn both_empty_is_one() {
        assert_eq!(dice(&mask(&[0, 0]), &mask(&[0, 0])).unwrap(), 1.0);
    }

    #[test]
    fn dice_is_symmetric() {
        let p = mask(&[1, 1, 0, 1, 0]);
        let g = mask(&[0, 1, 1, 1, 0]);
        assert_eq!(dice(&p, &g).unwrap(), dice(&g, &p).unwrap());
    }

    #[test]
    fn perfect_separation_scores_one() {
        let map = Array3::from_shape_vec((1, 1, 4), vec![0.1f64, 0.9, 0.8, 0.2]).unwrap();
        let gt = mask(&[0, 1, 1, 0]);
        let (_, d) = best_dice(&map, &gt).unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn constant_map_gives_best_of_two_masks() {
        let map = Array3::from_shape_vec((1, 1, 4), vec![0.5f64; 4]).unwrap();
        let gt = mask(&[1, 1, 1, 0]);
        let (_, d) = best_dice(&map, &gt).unwrap();
        // all-positive: 2*3/(4+3); all-negative: 0
        assert!((d - 6.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_transform_invariance() {
        let map = Array3::from_shape_vec(
            (1, 1, 6),
            vec![0.3f64, 0.1, 0.9, 0.5, 0.2, 0.7],
        )
        .unwrap();
        let gt = mask(&[0, 0, 1, 1, 0, 0]);
        let (_, d1) = best_dice(&map, &gt).unwrap();
        let transformed = map.mapv(|v| (v * 3.0).exp());
        let (_, d2) = best_dice(&transformed, &gt).unwrap();
        assert_eq!(d1, d2);
    }
}
