//! Attention functions on plain matrices.
//!
//! These are the reference semantics for the in-graph attention layers: an
//! exact causal softmax attention, an unmasked cross-attention, and the
//! FAVOR+ positive-random-feature approximation with a causal prefix-sum.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::scalar::Scalar;
use crate::seed;

/// `softmax(Q K^T / sqrt(d_k)) V` where row `i` sees columns `0..=i`.
pub fn causal_self_attention<S: Scalar>(
    q: &Array2<S>,
    k: &Array2<S>,
    v: &Array2<S>,
) -> Array2<S> {
    let l = q.nrows();
    let dk = q.ncols();
    assert_eq!(k.nrows(), l, "sequence lengths must match");
    assert_eq!(v.nrows(), l, "sequence lengths must match");
    assert!(dk > 0);
    let scale = S::one() / S::from_n(dk).sqrt();
    let mut out = Array2::<S>::zeros((l, v.ncols()));
    let mut weights = vec![S::zero(); l];
    for i in 0..l {
        let qi = q.row(i);
        let visible = &mut weights[..=i];
        let mut max = S::neg_infinity();
        for (j, w) in visible.iter_mut().enumerate() {
            let s = qi.dot(&k.row(j)) * scale;
            *w = s;
            max = max.max(s);
        }
        let mut sum = S::zero();
        for w in visible.iter_mut() {
            *w = (*w - max).exp();
            sum += *w;
        }
        let mut row = out.row_mut(i);
        for (j, w) in visible.iter().enumerate() {
            let a = *w / sum;
            row.scaled_add(a, &v.row(j));
        }
    }
    out
}

/// `softmax(Q_s K_c^T / sqrt(d_k)) V_c` with no mask: every query attends
/// to the whole conditioning sequence. Keys and values are the conditioning
/// rows themselves.
pub fn cross_attention<S: Scalar>(h: &Array2<S>, c: &Array2<S>) -> Array2<S> {
    assert!(c.nrows() > 0, "conditioning must be nonempty");
    let dk = h.ncols();
    assert_eq!(c.ncols(), dk, "query/conditioning widths must match");
    let scale = S::one() / S::from_n(dk).sqrt();
    let l = h.nrows();
    let lc = c.nrows();
    let mut out = Array2::<S>::zeros((l, dk));
    let mut weights = vec![S::zero(); lc];
    for i in 0..l {
        let qi = h.row(i);
        let mut max = S::neg_infinity();
        for (j, w) in weights.iter_mut().enumerate() {
            let s = qi.dot(&c.row(j)) * scale;
            *w = s;
            max = max.max(s);
        }
        let mut sum = S::zero();
        for w in weights.iter_mut() {
            *w = (*w - max).exp();
            sum += *w;
        }
        let mut row = out.row_mut(i);
        for (j, w) in weights.iter().enumerate() {
            row.scaled_add(*w / sum, &c.row(j));
        }
    }
    out
}

/// Draw the FAVOR+ projection: blocks of orthogonalized Gaussian rows, each
/// rescaled to the norm of an independent Gaussian vector, `[m, d_k]`.
pub fn favor_projection<S: Scalar>(m: usize, dk: usize, seed_value: u64) -> Array2<S> {
    let mut rng = seed::rng(seed::derive(seed_value, &["favor-projection"]));
    let mut gaussian = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| {
                let u1: f64 = rng.random::<f64>().max(1e-12);
                let u2: f64 = rng.random::<f64>();
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect()
    };
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    while rows.len() < m {
        let block_size = dk.min(m - rows.len());
        // Gram-Schmidt on a fresh Gaussian block
        let mut block: Vec<Vec<f64>> = Vec::with_capacity(block_size);
        while block.len() < block_size {
            let mut v = gaussian(dk);
            for b in &block {
                let dot: f64 = v.iter().zip(b.iter()).map(|(a, c)| a * c).sum();
                for (vi, bi) in v.iter_mut().zip(b.iter()) {
                    *vi -= dot * bi;
                }
            }
            let norm: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm < 1e-8 {
                continue; // degenerate draw, resample
            }
            for vi in &mut v {
                *vi /= norm;
            }
            block.push(v);
        }
        for mut row in block {
            // rescale to a chi(d_k)-distributed norm
            let target: f64 = gaussian(dk).iter().map(|a| a * a).sum::<f64>().sqrt();
            for vi in &mut row {
                *vi *= target;
            }
            rows.push(row);
        }
    }
    let flat: Vec<S> = rows
        .into_iter()
        .flatten()
        .map(S::from_f)
        .collect();
    Array2::from_shape_vec((m, dk), flat).expect("projection shape")
}

/// Positive softmax-kernel features `exp(Wx - |x|^2/2) / sqrt(m)` of
/// pre-scaled rows.
pub fn favor_features<S: Scalar>(x: &Array2<S>, proj: &Array2<S>) -> Array2<S> {
    let m = proj.nrows();
    let scale = S::one() / S::from_n(m).sqrt();
    let scores = x.dot(&proj.t()); // [L, m]
    let mut out = scores;
    for (mut row, xrow) in out.rows_mut().into_iter().zip(x.rows()) {
        let half_sq = xrow.dot(&xrow) / S::from_f(2.0);
        row.mapv_inplace(|s| (s - half_sq).exp() * scale);
    }
    out
}

/// Causal linear attention with `m` positive random features approximating
/// the softmax kernel; deterministic given `seed_value`.
pub fn favor_attention<S: Scalar>(
    q: &Array2<S>,
    k: &Array2<S>,
    v: &Array2<S>,
    m: usize,
    seed_value: u64,
) -> Array2<S> {
    assert!(m >= 1, "feature count must be at least 1");
    let l = q.nrows();
    let dk = q.ncols();
    let dv = v.ncols();
    let proj = favor_projection::<S>(m, dk, seed_value);
    // pre-scale by d_k^(1/4) so phi(q).phi(k) estimates exp(q.k / sqrt(d_k))
    let pre = S::one() / S::from_n(dk).sqrt().sqrt();
    let phi_q = favor_features(&q.mapv(|x| x * pre), &proj);
    let phi_k = favor_features(&k.mapv(|x| x * pre), &proj);

    let tiny = S::from_f(1e-30);
    let mut state = Array2::<S>::zeros((m, dv));
    let mut zstate = Array1::<S>::zeros(m);
    let mut out = Array2::<S>::zeros((l, dv));
    for i in 0..l {
        let pk = phi_k.row(i);
        let vi = v.row(i);
        for (r, &pkr) in pk.iter().enumerate() {
            let mut srow = state.row_mut(r);
            srow.scaled_add(pkr, &vi);
        }
        zstate += &pk;
        let pq = phi_q.row(i);
        let denom = pq.dot(&zstate).max(tiny);
        let num = pq.dot(&state); // [dv]
        let mut row = out.row_mut(i);
        row.assign(&num);
        row.mapv_inplace(|x| x / denom);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn random_mat(l: usize, d: usize, s: u64) -> Array2<f64> {
        let mut rng = seed::rng(s);
        Array2::from_shape_fn((l, d), |_| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn single_row_returns_value() {
        let q = arr2(&[[0.3f64, -0.7]]);
        let k = arr2(&[[1.0f64, 2.0]]);
        let v = arr2(&[[5.0f64, -1.0]]);
        let out = causal_self_attention(&q, &k, &v);
        assert!((out[[0, 0]] - 5.0).abs() < 1e-12);
        assert!((out[[0, 1]] + 1.0).abs() < 1e-12);
        let f = favor_attention(&q, &k, &v, 8, 1);
        assert!((f[[0, 0]] - 5.0).abs() < 1e-9);
        assert!((f[[0, 1]] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn identical_keys_average_values_at_last_position() {
        let l = 5;
        let k = Array2::from_elem((l, 3), 0.4);
        let q = random_mat(l, 3, 2);
        let v = random_mat(l, 3, 3);
        let out = causal_self_attention(&q, &k, &v);
        let mean = v.sum_axis(ndarray::Axis(0)) / l as f64;
        for c in 0..3 {
            assert!((out[[l - 1, c]] - mean[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn causal_prefix_is_invariant_to_suffix_edits() {
        let l = 9;
        let (q, k, v) = (random_mat(l, 4, 4), random_mat(l, 4, 5), random_mat(l, 4, 6));
        let j = 6;
        let mut k2 = k.clone();
        let mut v2 = v.clone();
        for c in 0..4 {
            k2[[j, c]] += 10.0;
            v2[[j, c]] -= 3.0;
        }
        for (a, b) in [
            (causal_self_attention(&q, &k, &v), causal_self_attention(&q, &k2, &v2)),
            (favor_attention(&q, &k, &v, 16, 7), favor_attention(&q, &k2, &v2, 16, 7)),
        ] {
            for i in 0..j {
                for c in 0..4 {
                    assert!((a[[i, c]] - b[[i, c]]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cross_attention_constant_conditioning() {
        let h = random_mat(6, 3, 8);
        let c = Array2::from_shape_fn((4, 3), |(_, j)| [0.5, -1.0, 2.0][j]);
        let out = cross_attention(&h, &c);
        for i in 0..6 {
            assert!((out[[i, 0]] - 0.5).abs() < 1e-12);
            assert!((out[[i, 1]] + 1.0).abs() < 1e-12);
            assert!((out[[i, 2]] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_attention_single_conditioning_row() {
        let h = random_mat(5, 3, 9);
        let c = arr2(&[[1.0f64, 2.0, 3.0]]);
        let out = cross_attention(&h, &c);
        for i in 0..5 {
            for j in 0..3 {
                assert_eq!(out[[i, j]], c[[0, j]]);
            }
        }
    }

    #[test]
    fn cross_attention_sees_all_conditioning_positions() {
        let h = random_mat(4, 3, 10);
        let c = random_mat(5, 3, 11);
        let mut c2 = c.clone();
        c2[[4, 1]] += 5.0; // change the LAST conditioning token
        let a = cross_attention(&h, &c);
        let b = cross_attention(&h, &c2);
        assert!((a[[0, 1]] - b[[0, 1]]).abs() > 1e-9);
    }

    #[test]
    fn favor_error_decreases_with_feature_count() {
        let mut medians = Vec::new();
        for &m in &[16usize, 64, 256] {
            let mut errs = Vec::new();
            for inst in 0..20u64 {
                let q = random_mat(32, 16, 100 + inst);
                let k = random_mat(32, 16, 200 + inst);
                let v = random_mat(32, 16, 300 + inst);
                let exact = causal_self_attention(&q, &k, &v);
                let approx = favor_attention(&q, &k, &v, m, 400 + inst);
                let num = (&exact - &approx).mapv(|x| x * x).sum().sqrt();
                let den = exact.mapv(|x| x * x).sum().sqrt();
                errs.push(num / den);
            }
            errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            medians.push(errs[errs.len() / 2]);
        }
        assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
        assert!(medians[2] < 0.15, "median at m=256: {}", medians[2]);
    }
}
