//! Average-precision AUPRC with exported curve points.

use ndarray::Array3;

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;
use crate::MaskVolume;

/// One point of the precision-recall sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Average precision: `AP = sum_k (R_k - R_{k-1}) * P_k` over descending
/// unique score thresholds. Requires at least one positive voxel.
pub fn auprc<S: Scalar>(map: &Array3<S>, gt: &MaskVolume) -> Result<(f64, Vec<PrPoint>)> {
    if map.dim() != gt.dim() {
        return Err(CoreError::Contract(format!(
            "auprc: map shape {:?} vs gt shape {:?}",
            map.dim(),
            gt.dim()
        )));
    }
    let total_pos = gt.iter().filter(|&&g| g != 0).count();
    if total_pos == 0 {
        return Err(CoreError::UndefinedMetric(
            "auprc needs at least one positive ground-truth voxel".into(),
        ));
    }
    let mut scored: Vec<(S, bool)> = map
        .iter()
        .zip(gt.iter())
        .map(|(&s, &g)| (s, g != 0))
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite map values"));

    let mut curve = Vec::new();
    let mut ap = 0.0f64;
    let mut tp = 0usize;
    let mut taken = 0usize;
    let mut prev_recall = 0.0f64;
    let mut i = 0usize;
    while i < scored.len() {
        // advance over the tie group at this threshold
        let threshold = scored[i].0;
        while i < scored.len() && scored[i].0 == threshold {
            taken += 1;
            tp += scored[i].1 as usize;
            i += 1;
        }
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / taken as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        curve.push(PrPoint { recall, precision });
    }
    Ok((ap, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn map(vals: &[f64]) -> Array3<f64> {
        Array3::from_shape_vec((1, 1, vals.len()), vals.to_vec()).unwrap()
    }

    fn mask(vals: &[u8]) -> MaskVolume {
        Array3::from_shape_vec((1, 1, vals.len()), vals.to_vec()).unwrap()
    }

    #[test]
    fn perfect_ranking() {
        let (ap, _) = auprc(&map(&[0.9, 0.8, 0.1, 0.2]), &mask(&[1, 1, 0, 0])).unwrap();
        assert_eq!(ap, 1.0);
    }

    #[test]
    fn constant_scores_give_prevalence() {
        let (ap, curve) = auprc(&map(&[0.5; 8]), &mask(&[1, 0, 0, 1, 0, 0, 0, 0])).unwrap();
        assert!((ap - 0.25).abs() < 1e-12);
        assert_eq!(curve.len(), 1);
    }

    #[test]
    fn hand_enumerated_example() {
        // scores [4,3,2,1] with gt [1,0,1,0] by descending position
        let (ap, _) = auprc(&map(&[4.0, 3.0, 2.0, 1.0]), &mask(&[1, 0, 1, 0])).unwrap();
        assert!((ap - (0.5 + 0.5 * (2.0 / 3.0))).abs() < 1e-12);
    }

    #[test]
    fn all_negative_gt_is_undefined() {
        assert!(matches!(
            auprc(&map(&[1.0, 2.0]), &mask(&[0, 0])),
            Err(CoreError::UndefinedMetric(_))
        ));
    }

    #[test]
    fn recall_is_nondecreasing() {
        let (_, curve) = auprc(
            &map(&[0.3, 0.1, 0.9, 0.5, 0.2, 0.7, 0.7]),
            &mask(&[0, 1, 1, 0, 0, 1, 0]),
        )
        .unwrap();
        for pair in curve.windows(2) {
            assert!(pair[1].recall >= pair[0].recall);
        }
    }
}
