//! Neural-network primitives: bias, layer norm, softmax variants,
//! embedding lookup, dropout, cross-entropy.

use ndarray::{ArrayD, Axis, IxDyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{BwdArgs, Graph, Var};
use crate::scalar::Scalar;

pub(crate) const LN_EPS: f64 = 1e-5;

impl<S: Scalar> Graph<S> {
    /// Add a bias row vector `[c]` to every row of `a [r,c]`.
    pub fn add_bias_rows(&mut self, a: Var, bias: Var) -> Var {
        let av = self.value(a);
        let bv = self.value(bias);
        let v = av + &bv.broadcast(av.raw_dim()).expect("bias broadcasts");
        self.push(
            v,
            &[a, bias],
            Box::new(|args: &BwdArgs<'_, S>| {
                let db = args.out_grad.sum_axis(Axis(0));
                vec![args.out_grad.clone(), db]
            }),
        )
    }

    /// Row-wise layer normalization with learned gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let eps = S::from_f(LN_EPS);
        let xv = self.value(x);
        let rows = xv.shape()[0];
        let cols = xv.shape()[1];
        let n = S::from_n(cols);
        let mut out = xv.clone();
        for r in 0..rows {
            let mut row = out.index_axis_mut(Axis(0), r);
            let mu = row.iter().copied().fold(S::zero(), |a, v| a + v) / n;
            let var = row
                .iter()
                .map(|&v| (v - mu) * (v - mu))
                .fold(S::zero(), |a, v| a + v)
                / n;
            let inv = S::one() / (var + eps).sqrt();
            row.mapv_inplace(|v| (v - mu) * inv);
        }
        let gv = self.value(gain);
        let bv = self.value(bias);
        let v = &out * &gv.broadcast(out.raw_dim()).expect("gain broadcasts")
            + &bv.broadcast(out.raw_dim()).expect("bias broadcasts");
        self.push(
            v,
            &[x, gain, bias],
            Box::new(move |args: &BwdArgs<'_, S>| {
                let x = args.inputs[0];
                let gain = args.inputs[1];
                let g = args.out_grad;
                let rows = x.shape()[0];
                let cols = x.shape()[1];
                let n = S::from_n(cols);
                let mut dx = ArrayD::<S>::zeros(x.raw_dim());
                let mut dgain = ArrayD::<S>::zeros(gain.raw_dim());
                let mut dbias = ArrayD::<S>::zeros(gain.raw_dim());
                for r in 0..rows {
                    let xr = x.index_axis(Axis(0), r);
                    let gr = g.index_axis(Axis(0), r);
                    let mu = xr.iter().copied().fold(S::zero(), |a, v| a + v) / n;
                    let var = xr
                        .iter()
                        .map(|&v| (v - mu) * (v - mu))
                        .fold(S::zero(), |a, v| a + v)
                        / n;
                    let inv = S::one() / (var + eps).sqrt();
                    // xhat and the two row means the LN backward needs
                    let xhat: Vec<S> = xr.iter().map(|&v| (v - mu) * inv).collect();
                    let dxhat: Vec<S> = gr
                        .iter()
                        .zip(gain.iter())
                        .map(|(&gi, &ga)| gi * ga)
                        .collect();
                    let mean_dxhat =
                        dxhat.iter().copied().fold(S::zero(), |a, v| a + v) / n;
                    let mean_dxhat_xhat = dxhat
                        .iter()
                        .zip(xhat.iter())
                        .map(|(&a, &b)| a * b)
                        .fold(S::zero(), |a, v| a + v)
                        / n;
                    for c in 0..cols {
                        dx[[r, c]] =
                            inv * (dxhat[c] - mean_dxhat - xhat[c] * mean_dxhat_xhat);
                        dgain[c] += gr[c] * xhat[c];
                        dbias[c] += gr[c];
                    }
                }
                vec![dx, dgain, dbias]
            }),
        )
    }

    /// Softmax over the last axis of a 2-d node; rows sum to one.
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let mut v = self.value(x).clone();
        for mut row in v.axis_iter_mut(Axis(0)) {
            let m = row.iter().copied().fold(S::neg_infinity(), S::max);
            row.mapv_inplace(|a| (a - m).exp());
            let s = row.iter().copied().fold(S::zero(), |a, b| a + b);
            row.mapv_inplace(|a| a / s);
        }
        self.push(
            v,
            &[x],
            Box::new(|args: &BwdArgs<'_, S>| {
                let y = args.out_value;
                let g = args.out_grad;
                let mut dx = y * g;
                for r in 0..dx.shape()[0] {
                    let dot = dx
                        .index_axis(Axis(0), r)
                        .iter()
                        .copied()
                        .fold(S::zero(), |a, b| a + b);
                    let yr = y.index_axis(Axis(0), r).to_owned();
                    let mut dr = dx.index_axis_mut(Axis(0), r);
                    dr.zip_mut_with(&yr, |d, &yv| *d = *d - yv * dot);
                }
                vec![dx]
            }),
        )
    }

    /// Softmax over the visible prefix of each row of an `[L,L]` score
    /// matrix: row `i` normalizes over columns `0..=i`, the rest are zero.
    pub fn causal_softmax(&mut self, scores: Var) -> Var {
        let sv = self.value(scores);
        let rows = sv.shape()[0];
        let mut v = ArrayD::<S>::zeros(sv.raw_dim());
        for r in 0..rows {
            let row = sv.index_axis(Axis(0), r);
            let m = row
                .iter()
                .take(r + 1)
                .copied()
                .fold(S::neg_infinity(), S::max);
            let mut sum = S::zero();
            for c in 0..=r {
                let e = (row[c] - m).exp();
                v[[r, c]] = e;
                sum += e;
            }
            for c in 0..=r {
                v[[r, c]] = v[[r, c]] / sum;
            }
        }
        self.push(
            v,
            &[scores],
            Box::new(|args: &BwdArgs<'_, S>| {
                let y = args.out_value;
                let g = args.out_grad;
                let rows = y.shape()[0];
                let mut dx = ArrayD::<S>::zeros(y.raw_dim());
                for r in 0..rows {
                    let mut dot = S::zero();
                    for c in 0..=r {
                        dot += g[[r, c]] * y[[r, c]];
                    }
                    for c in 0..=r {
                        dx[[r, c]] = y[[r, c]] * (g[[r, c]] - dot);
                    }
                }
                vec![dx]
            }),
        )
    }

    /// Look up `indices` rows of an embedding table `[V,d] -> [L,d]`.
    pub fn embedding(&mut self, table: Var, indices: &[usize]) -> Var {
        let tv = self.value(table);
        let d = tv.shape()[1];
        let mut v = ArrayD::<S>::zeros(IxDyn(&[indices.len(), d]));
        for (r, &idx) in indices.iter().enumerate() {
            v.index_axis_mut(Axis(0), r)
                .assign(&tv.index_axis(Axis(0), idx));
        }
        let idx = indices.to_vec();
        self.push(
            v,
            &[table],
            Box::new(move |args: &BwdArgs<'_, S>| {
                let mut dt = ArrayD::<S>::zeros(args.inputs[0].raw_dim());
                for (r, &i) in idx.iter().enumerate() {
                    let gr = args.out_grad.index_axis(Axis(0), r);
                    let mut row = dt.index_axis_mut(Axis(0), i);
                    row += &gr;
                }
                vec![dt]
            }),
        )
    }

    /// Inverted dropout. `rate == 0` or `active == false` is the identity.
    pub fn dropout(&mut self, x: Var, rate: f64, active: bool, rng: &mut ChaCha8Rng) -> Var {
        if !active || rate == 0.0 {
            return x;
        }
        assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0,1)");
        let keep = S::from_f(1.0 - rate);
        let xv = self.value(x);
        let mask_vec: Vec<S> = (0..xv.len())
            .map(|_| {
                if rng.random::<f64>() < rate {
                    S::zero()
                } else {
                    S::one() / keep
                }
            })
            .collect();
        let mask = ArrayD::from_shape_vec(xv.raw_dim(), mask_vec).expect("mask shape");
        let v = xv * &mask;
        self.push(
            v,
            &[x],
            Box::new(move |args: &BwdArgs<'_, S>| vec![args.out_grad * &mask]),
        )
    }

    /// Mean next-token negative log-likelihood of `targets` under `logits
    /// [L,M]`.
    pub fn cross_entropy_mean(&mut self, logits: Var, targets: &[usize]) -> Var {
        let lv = self.value(logits);
        let rows = lv.shape()[0];
        assert_eq!(rows, targets.len(), "one target per row");
        let mut total = S::zero();
        for (r, &t) in targets.iter().enumerate() {
            let row = lv.index_axis(Axis(0), r);
            let m = row.iter().copied().fold(S::neg_infinity(), S::max);
            let lse = m + row
                .iter()
                .map(|&v| (v - m).exp())
                .fold(S::zero(), |a, b| a + b)
                .ln();
            total += lse - row[t];
        }
        let n = S::from_n(rows);
        let v = ArrayD::from_elem(IxDyn(&[]), total / n);
        let tgt = targets.to_vec();
        self.push(
            v,
            &[logits],
            Box::new(move |args: &BwdArgs<'_, S>| {
                let g = *args.out_grad.iter().next().expect("scalar");
                let lv = args.inputs[0];
                let rows = lv.shape()[0];
                let n = S::from_n(rows);
                let mut dx = ArrayD::<S>::zeros(lv.raw_dim());
                for (r, &t) in tgt.iter().enumerate() {
                    let row = lv.index_axis(Axis(0), r);
                    let m = row.iter().copied().fold(S::neg_infinity(), S::max);
                    let exps: Vec<S> = row.iter().map(|&v| (v - m).exp()).collect();
                    let sum = exps.iter().copied().fold(S::zero(), |a, b| a + b);
                    let mut dr = dx.index_axis_mut(Axis(0), r);
                    for (c, &e) in exps.iter().enumerate() {
                        let p = e / sum;
                        let onehot = if c == t { S::one() } else { S::zero() };
                        dr[c] = g * (p - onehot) / n;
                    }
                }
                vec![dx]
            }),
        )
    }
}
