//! Differentiable FAVOR+ causal attention for the training graph.
//!
//! The numerator `y_i = phi(q_i)^T sum_{j<=i} phi(k_j) v_j^T` is one fused
//! node with a hand-derived adjoint; the denominator reuses the generic
//! cumulative-sum and row-dot primitives.

use ndarray::{Array2, ArrayD, Axis, IxDyn};

use crate::diffcore::{Graph, Var};

/// phi features of pre-scaled rows, built from differentiable primitives:
/// `exp(x W^T - |x|^2/2) / sqrt(m)`.
fn phi(g: &mut Graph<f32>, x: Var, proj: &Array2<f32>) -> Var {
    let m = proj.nrows();
    let proj_var = g.input(proj.clone().into_dyn());
    let scores = g.matmul_nt(x, proj_var);
    let sq = g.row_dot(x, x);
    let half_sq = g.scale(sq, 0.5);
    let centered = g.sub_col_broadcast(scores, half_sq);
    let e = g.exp(centered);
    g.scale(e, 1.0 / (m as f32).sqrt())
}

/// Fused causal numerator over feature maps.
fn favor_numerator(g: &mut Graph<f32>, phi_q: Var, phi_k: Var, v: Var) -> Var {
    let pq = g.value(phi_q).clone();
    let pk = g.value(phi_k).clone();
    let vv = g.value(v).clone();
    let l = pq.shape()[0];
    let m = pq.shape()[1];
    let dv = vv.shape()[1];
    let mut state = vec![0.0f32; m * dv];
    let mut out = ArrayD::<f32>::zeros(IxDyn(&[l, dv]));
    for i in 0..l {
        let pk_i = pk.index_axis(Axis(0), i);
        let v_i = vv.index_axis(Axis(0), i);
        for (r, &pkr) in pk_i.iter().enumerate() {
            let row = &mut state[r * dv..(r + 1) * dv];
            for (s, &vc) in row.iter_mut().zip(v_i.iter()) {
                *s += pkr * vc;
            }
        }
        let pq_i = pq.index_axis(Axis(0), i);
        let mut out_i = out.index_axis_mut(Axis(0), i);
        for (r, &pqr) in pq_i.iter().enumerate() {
            let row = &state[r * dv..(r + 1) * dv];
            for (o, &s) in out_i.iter_mut().zip(row.iter()) {
                *o += pqr * s;
            }
        }
    }
    g.push(
        out,
        &[phi_q, phi_k, v],
        Box::new(move |args| {
            let pq = args.inputs[0];
            let pk = args.inputs[1];
            let vv = args.inputs[2];
            let gr = args.out_grad;
            let l = pq.shape()[0];
            let m = pq.shape()[1];
            let dv = vv.shape()[1];
            let mut d_pq = ArrayD::<f32>::zeros(pq.raw_dim());
            let mut d_pk = ArrayD::<f32>::zeros(pk.raw_dim());
            let mut d_v = ArrayD::<f32>::zeros(vv.raw_dim());
            // forward pass again for d_phi_q = S_i g_i
            let mut state = vec![0.0f32; m * dv];
            for i in 0..l {
                let pk_i = pk.index_axis(Axis(0), i);
                let v_i = vv.index_axis(Axis(0), i);
                for (r, &pkr) in pk_i.iter().enumerate() {
                    let row = &mut state[r * dv..(r + 1) * dv];
                    for (s, &vc) in row.iter_mut().zip(v_i.iter()) {
                        *s += pkr * vc;
                    }
                }
                let g_i = gr.index_axis(Axis(0), i);
                let mut dq_i = d_pq.index_axis_mut(Axis(0), i);
                for (r, dq) in dq_i.iter_mut().enumerate() {
                    let row = &state[r * dv..(r + 1) * dv];
                    *dq = row.iter().zip(g_i.iter()).map(|(&s, &gc)| s * gc).sum();
                }
            }
            // reverse pass: R_i = sum_{j>=i} phi(q_j) g_j^T
            let mut rstate = vec![0.0f32; m * dv];
            for i in (0..l).rev() {
                let pq_i = pq.index_axis(Axis(0), i);
                let g_i = gr.index_axis(Axis(0), i);
                for (r, &pqr) in pq_i.iter().enumerate() {
                    let row = &mut rstate[r * dv..(r + 1) * dv];
                    for (s, &gc) in row.iter_mut().zip(g_i.iter()) {
                        *s += pqr * gc;
                    }
                }
                let pk_i = pk.index_axis(Axis(0), i);
                let v_i = vv.index_axis(Axis(0), i);
                let mut dk_i = d_pk.index_axis_mut(Axis(0), i);
                for (r, dk) in dk_i.iter_mut().enumerate() {
                    let row = &rstate[r * dv..(r + 1) * dv];
                    *dk = row.iter().zip(v_i.iter()).map(|(&s, &vc)| s * vc).sum();
                }
                let mut dv_i = d_v.index_axis_mut(Axis(0), i);
                for (c, dvc) in dv_i.iter_mut().enumerate() {
                    *dvc = pk_i
                        .iter()
                        .enumerate()
                        .map(|(r, &pkr)| pkr * rstate[r * dv + c])
                        .sum();
                }
            }
            vec![d_pq, d_pk, d_v]
        }),
    )
}

/// Full causal FAVOR+ attention over one head.
pub fn favor_causal_attention(
    g: &mut Graph<f32>,
    q: Var,
    k: Var,
    v: Var,
    proj: &Array2<f32>,
) -> Var {
    let dk = g.value(q).shape()[1];
    let pre = 1.0f32 / (dk as f32).sqrt().sqrt();
    let qs = g.scale(q, pre);
    let ks = g.scale(k, pre);
    let phi_q = phi(g, qs, proj);
    let phi_k = phi(g, ks, proj);
    let num = favor_numerator(g, phi_q, phi_k, v);
    let ksum = g.cumsum_rows(phi_k);
    let denom = g.row_dot(phi_q, ksum);
    g.div_rows(num, denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::armodel::attention::{favor_attention, favor_projection};
    use crate::seed;
    use rand::Rng;

    #[test]
    fn graph_favor_matches_plain_function() {
        let mut rng = seed::rng(5);
        let l = 7;
        let dk = 4;
        let m = 32;
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            ArrayD::from_shape_vec(
                IxDyn(&[l, dk]),
                (0..l * dk)
                    .map(|_| (rng.random::<f64>() * 2.0 - 1.0) as f32)
                    .collect(),
            )
            .unwrap()
        };
        let (qa, ka, va) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
        let seed_value = 99u64;
        let proj = favor_projection::<f32>(m, dk, seed_value);

        let mut g = Graph::<f32>::new();
        let q = g.input(qa.clone());
        let k = g.input(ka.clone());
        let v = g.input(va.clone());
        let pre = 1.0f32 / (dk as f32).sqrt().sqrt();
        let qs = g.scale(q, pre);
        let ks = g.scale(k, pre);
        let pq = phi(&mut g, qs, &proj);
        let pk = phi(&mut g, ks, &proj);
        let num = favor_numerator(&mut g, pq, pk, v);
        let ksum = g.cumsum_rows(pk);
        let den = g.row_dot(pq, ksum);
        let out = g.div_rows(num, den);

        let q2 = qa.into_dimensionality::<ndarray::Ix2>().unwrap();
        let k2 = ka.into_dimensionality::<ndarray::Ix2>().unwrap();
        let v2 = va.into_dimensionality::<ndarray::Ix2>().unwrap();
        let reference = favor_attention(&q2, &k2, &v2, m, seed_value);
        for (a, b) in g.value(out).iter().zip(reference.iter()) {
            assert!((a - b).abs() < 2e-4, "{a} vs {b}");
        }
    }
}
