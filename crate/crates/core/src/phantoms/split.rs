//! Deterministic dataset partitioning.

use rand::seq::SliceRandom;

use super::SplitKind;
use crate::error::{CoreError, Result};
use crate::seed;

/// Shuffle `0..n` with `seed` and cut it at the cumulative-fraction
/// boundaries `floor(n*f_train)` and `floor(n*(f_train+f_val))`, so the
/// val/test remainders round down and the leftover goes to train. Returns
/// the split of each index.
pub fn split_dataset(n: usize, fractions: (f64, f64, f64), seed_value: u64) -> Result<Vec<SplitKind>> {
    if n == 0 {
        return Err(CoreError::Config("cannot split an empty manifest (n = 0)".into()));
    }
    let (ft, fv, fs) = fractions;
    if ft <= 0.0 || fv <= 0.0 || fs <= 0.0 {
        return Err(CoreError::Config("split fractions must be positive".into()));
    }
    if (ft + fv + fs - 1.0).abs() > 1e-9 {
        return Err(CoreError::Config(format!(
            "split fractions must sum to 1, got {}",
            ft + fv + fs
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng(seed::derive(seed_value, &["split"]));
    order.shuffle(&mut rng);

    let c1 = (n as f64 * ft).floor() as usize;
    let c2 = (n as f64 * (ft + fv)).floor() as usize;
    let mut splits = vec![SplitKind::Train; n];
    for (rank, &idx) in order.iter().enumerate() {
        splits[idx] = if rank < c1 {
            SplitKind::Train
        } else if rank < c2 {
            SplitKind::Val
        } else {
            SplitKind::Test
        };
    }
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sizes(splits: &[SplitKind]) -> (usize, usize, usize) {
        let t = splits.iter().filter(|s| **s == SplitKind::Train).count();
        let v = splits.iter().filter(|s| **s == SplitKind::Val).count();
        let e = splits.iter().filter(|s| **s == SplitKind::Test).count();
        (t, v, e)
    }

    #[test]
    fn exact_division() {
        let s = split_dataset(100, (0.6, 0.2, 0.2), 1).unwrap();
        assert_eq!(sizes(&s), (60, 20, 20));
    }

    #[test]
    fn deterministic() {
        let a = split_dataset(50, (0.6, 0.2, 0.2), 9).unwrap();
        let b = split_dataset(50, (0.6, 0.2, 0.2), 9).unwrap();
        assert_eq!(a, b);
        let c = split_dataset(50, (0.6, 0.2, 0.2), 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn uneven_rounding() {
        let s = split_dataset(10, (0.7, 0.15, 0.15), 3).unwrap();
        assert_eq!(sizes(&s), (7, 1, 2));
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(
            split_dataset(0, (0.6, 0.2, 0.2), 0),
            Err(CoreError::Config(_))
        ));
    }

    #[test]
    fn covers_all_and_disjoint() {
        // every index gets exactly one split by construction; check totals
        for n in [1usize, 2, 3, 7, 23] {
            let s = split_dataset(n, (0.5, 0.25, 0.25), 4).unwrap();
            let (t, v, e) = sizes(&s);
            assert_eq!(t + v + e, n);
        }
    }
}
