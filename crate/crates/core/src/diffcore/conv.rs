//! 3-d convolution and transposed convolution over `[N, C, D, H, W]` nodes,
//! implemented as im2col / col2im plus a matrix product.
//!
//! With stride 2, kernel 4, padding 1 the convolution halves every spatial
//! axis and the transposed convolution exactly doubles it.

use ndarray::{Array2, ArrayD, ArrayView2, IxDyn};

use super::{BwdArgs, Graph, Var};
use crate::scalar::Scalar;

#[derive(Clone, Copy)]
struct Geom {
    channels: usize,
    src: (usize, usize, usize),
    dst: (usize, usize, usize),
    k: usize,
    stride: usize,
    pad: usize,
}

fn conv_out(n: usize, k: usize, s: usize, p: usize) -> usize {
    (n + 2 * p - k) / s + 1
}

fn convt_out(n: usize, k: usize, s: usize, p: usize) -> usize {
    (n - 1) * s + k - 2 * p
}

/// Gather kernel windows of `src` (layout `[C, src]`) into a matrix with one
/// row per `dst` position and `C*k^3` columns.
fn im2col<S: Scalar>(x: &[S], g: Geom) -> Array2<S> {
    let (d, h, w) = g.src;
    let (od, oh, ow) = g.dst;
    let k = g.k;
    let cols = g.channels * k * k * k;
    let mut out = Array2::<S>::zeros((od * oh * ow, cols));
    let out_slice = out.as_slice_mut().expect("freshly allocated");
    let mut row_base = 0;
    for oz in 0..od {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut cc = row_base;
                for ci in 0..g.channels {
                    let cbase = ci * d * h * w;
                    for kz in 0..k {
                        let iz = (oz * g.stride + kz) as isize - g.pad as isize;
                        let z_ok = iz >= 0 && (iz as usize) < d;
                        for ky in 0..k {
                            let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                            let zy_ok = z_ok && iy >= 0 && (iy as usize) < h;
                            for kx in 0..k {
                                let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                                if zy_ok && ix >= 0 && (ix as usize) < w {
                                    out_slice[cc] = x[cbase
                                        + (iz as usize * h + iy as usize) * w
                                        + ix as usize];
                                }
                                cc += 1;
                            }
                        }
                    }
                }
                row_base += cols;
            }
        }
    }
    out
}

/// Scatter-add the adjoint of [`im2col`]: rows over `dst` positions
/// accumulate back into a `[C, src]` buffer.
fn col2im<S: Scalar>(cols_mat: &ArrayView2<'_, S>, g: Geom, out: &mut [S]) {
    let (d, h, w) = g.src;
    let (od, oh, ow) = g.dst;
    let k = g.k;
    let cols = g.channels * k * k * k;
    let data = cols_mat.as_slice().expect("contiguous col matrix");
    let mut row_base = 0;
    for oz in 0..od {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut cc = row_base;
                for ci in 0..g.channels {
                    let cbase = ci * d * h * w;
                    for kz in 0..k {
                        let iz = (oz * g.stride + kz) as isize - g.pad as isize;
                        let z_ok = iz >= 0 && (iz as usize) < d;
                        for ky in 0..k {
                            let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                            let zy_ok = z_ok && iy >= 0 && (iy as usize) < h;
                            for kx in 0..k {
                                let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                                if zy_ok && ix >= 0 && (ix as usize) < w {
                                    out[cbase
                                        + (iz as usize * h + iy as usize) * w
                                        + ix as usize] += data[cc];
                                }
                                cc += 1;
                            }
                        }
                    }
                }
                row_base += cols;
            }
        }
    }
}

fn spatial(shape: &[usize]) -> (usize, usize, usize) {
    (shape[2], shape[3], shape[4])
}

impl<S: Scalar> Graph<S> {
    /// Convolution: `x [N,Cin,D,H,W]`, `w [Cout,Cin,k,k,k]`, `b [Cout]`.
    pub fn conv3d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Var {
        let xv = self.value(x);
        let wv = self.value(w);
        let bv = self.value(b);
        assert_eq!(xv.ndim(), 5, "conv3d input must be [N,C,D,H,W]");
        let n = xv.shape()[0];
        let cin = xv.shape()[1];
        assert_eq!(wv.shape()[1], cin, "weight Cin mismatch");
        let cout = wv.shape()[0];
        let k = wv.shape()[2];
        let (d, h, wd) = spatial(xv.shape());
        let dst = (
            conv_out(d, k, stride, pad),
            conv_out(h, k, stride, pad),
            conv_out(wd, k, stride, pad),
        );
        let geom = Geom {
            channels: cin,
            src: (d, h, wd),
            dst,
            k,
            stride,
            pad,
        };
        let npos = dst.0 * dst.1 * dst.2;
        let sample = cin * d * h * wd;
        let w_mat = as2_weights(wv, cout);
        let xs = xv.as_slice().expect("standard layout");
        let mut out = ArrayD::<S>::zeros(IxDyn(&[n, cout, dst.0, dst.1, dst.2]));
        {
            let os = out.as_slice_mut().expect("standard layout");
            for s_i in 0..n {
                let col = im2col(&xs[s_i * sample..(s_i + 1) * sample], geom);
                let out_mat = col.dot(&w_mat.t()); // [npos, cout]
                let base = s_i * cout * npos;
                for (pos, row) in out_mat.rows().into_iter().enumerate() {
                    for (co, &v) in row.iter().enumerate() {
                        os[base + co * npos + pos] = v + bv[co];
                    }
                }
            }
        }
        self.push(
            out,
            &[x, w, b],
            Box::new(move |args: &BwdArgs<'_, S>| {
                let xv = args.inputs[0];
                let wv = args.inputs[1];
                let gv = args.out_grad;
                let cout = wv.shape()[0];
                let w_mat = as2_weights(wv, cout);
                let xs = xv.as_slice().expect("standard layout");
                let gs = gv.as_slice().expect("standard layout");
                let n = xv.shape()[0];
                let mut dx = vec![S::zero(); xs.len()];
                let mut dw_mat = Array2::<S>::zeros((cout, w_mat.shape()[1]));
                let mut db = ArrayD::<S>::zeros(args.inputs[2].raw_dim());
                for s_i in 0..n {
                    let col = im2col(&xs[s_i * sample..(s_i + 1) * sample], geom);
                    let base = s_i * cout * npos;
                    let mut g_mat = Array2::<S>::zeros((npos, cout));
                    for co in 0..cout {
                        let mut colsum = S::zero();
                        for pos in 0..npos {
                            let g = gs[base + co * npos + pos];
                            g_mat[[pos, co]] = g;
                            colsum += g;
                        }
                        db[co] += colsum;
                    }
                    dw_mat = dw_mat + g_mat.t().dot(&col);
                    let dcol = g_mat.dot(&w_mat);
                    col2im(
                        &dcol.view(),
                        geom,
                        &mut dx[s_i * sample..(s_i + 1) * sample],
                    );
                }
                let dxa = ArrayD::from_shape_vec(xv.raw_dim(), dx).expect("shape");
                let dwa = dw_mat
                    .into_dyn()
                    .into_shape_with_order(wv.raw_dim())
                    .expect("weight shape");
                vec![dxa, dwa, db]
            }),
        )
    }

    /// Transposed convolution: `x [N,Cin,D,H,W]`, `w [Cin,Cout,k,k,k]`,
    /// `b [Cout]`. Exactly inverts the shape map of [`Graph::conv3d`] with
    /// the same `(k, stride, pad)`.
    pub fn conv3d_transpose(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Var {
        let xv = self.value(x);
        let wv = self.value(w);
        let bv = self.value(b);
        assert_eq!(xv.ndim(), 5, "conv3d_transpose input must be [N,C,D,H,W]");
        let n = xv.shape()[0];
        let cin = xv.shape()[1];
        assert_eq!(wv.shape()[0], cin, "weight Cin mismatch");
        let cout = wv.shape()[1];
        let k = wv.shape()[2];
        let (d, h, wd) = spatial(xv.shape());
        let dst = (
            convt_out(d, k, stride, pad),
            convt_out(h, k, stride, pad),
            convt_out(wd, k, stride, pad),
        );
        // scatter geometry: kernel windows over the *output* grid, one
        // window per input position
        let geom = Geom {
            channels: cout,
            src: dst,
            dst: (d, h, wd),
            k,
            stride,
            pad,
        };
        let npos_in = d * h * wd;
        let sample_in = cin * npos_in;
        let npos_out = dst.0 * dst.1 * dst.2;
        let sample_out = cout * npos_out;
        let w_mat = as2_weights(wv, cin); // [cin, cout*k^3]
        let xs = xv.as_slice().expect("standard layout");
        let mut out = ArrayD::<S>::zeros(IxDyn(&[n, cout, dst.0, dst.1, dst.2]));
        {
            let os = out.as_slice_mut().expect("standard layout");
            for s_i in 0..n {
                let mut x_mat = Array2::<S>::zeros((npos_in, cin));
                for ci in 0..cin {
                    for pos in 0..npos_in {
                        x_mat[[pos, ci]] = xs[s_i * sample_in + ci * npos_in + pos];
                    }
                }
                let prod = x_mat.dot(&w_mat); // [npos_in, cout*k^3]
                let target = &mut os[s_i * sample_out..(s_i + 1) * sample_out];
                col2im(&prod.view(), geom, target);
                for co in 0..cout {
                    for v in &mut target[co * npos_out..(co + 1) * npos_out] {
                        *v += bv[co];
                    }
                }
            }
        }
        self.push(
            out,
            &[x, w, b],
            Box::new(move |args: &BwdArgs<'_, S>| {
                let xv = args.inputs[0];
                let wv = args.inputs[1];
                let gv = args.out_grad;
                let cin = wv.shape()[0];
                let w_mat = as2_weights(wv, cin);
                let xs = xv.as_slice().expect("standard layout");
                let gs = gv.as_slice().expect("standard layout");
                let n = xv.shape()[0];
                let mut dx = vec![S::zero(); xs.len()];
                let mut dw_mat = Array2::<S>::zeros((cin, w_mat.shape()[1]));
                let mut db = ArrayD::<S>::zeros(args.inputs[2].raw_dim());
                let cout = wv.shape()[1];
                for s_i in 0..n {
                    let gsample = &gs[s_i * sample_out..(s_i + 1) * sample_out];
                    for co in 0..cout {
                        let mut colsum = S::zero();
                        for v in &gsample[co * npos_out..(co + 1) * npos_out] {
                            colsum += *v;
                        }
                        db[co] += colsum;
                    }
                    // windows of the output gradient seen from input positions
                    let col_d = im2col(gsample, geom);
                    let dx_mat = col_d.dot(&w_mat.t()); // [npos_in, cin]
                    for ci in 0..cin {
                        for pos in 0..npos_in {
                            dx[s_i * sample_in + ci * npos_in + pos] = dx_mat[[pos, ci]];
                        }
                    }
                    let mut x_mat = Array2::<S>::zeros((npos_in, cin));
                    for ci in 0..cin {
                        for pos in 0..npos_in {
                            x_mat[[pos, ci]] = xs[s_i * sample_in + ci * npos_in + pos];
                        }
                    }
                    dw_mat = dw_mat + x_mat.t().dot(&col_d);
                }
                let dxa = ArrayD::from_shape_vec(xv.raw_dim(), dx).expect("shape");
                let dwa = dw_mat
                    .into_dyn()
                    .into_shape_with_order(wv.raw_dim())
                    .expect("weight shape");
                vec![dxa, dwa, db]
            }),
        )
    }
}

fn as2_weights<S: Scalar>(w: &ArrayD<S>, rows: usize) -> Array2<S> {
    let cols = w.len() / rows;
    let flat: Vec<S> = w.iter().copied().collect();
    Array2::from_shape_vec((rows, cols), flat).expect("weight reshape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_halving_and_inversion() {
        let mut g = Graph::<f32>::new();
        let x = g.input(ArrayD::zeros(IxDyn(&[1, 2, 8, 8, 8])));
        let w = g.input(ArrayD::zeros(IxDyn(&[3, 2, 4, 4, 4])));
        let b = g.input(ArrayD::zeros(IxDyn(&[3])));
        let y = g.conv3d(x, w, b, 2, 1);
        assert_eq!(g.value(y).shape(), &[1, 3, 4, 4, 4]);
        let wt = g.input(ArrayD::zeros(IxDyn(&[3, 2, 4, 4, 4])));
        let bt = g.input(ArrayD::zeros(IxDyn(&[2])));
        let z = g.conv3d_transpose(y, wt, bt, 2, 1);
        assert_eq!(g.value(z).shape(), &[1, 2, 8, 8, 8]);
    }

    #[test]
    fn conv_matches_direct_sum() {
        // 1x1 channel, k=3, s=1, p=1 on a 3x3x3 input: center output is the
        // full dot product of kernel and input
        let mut g = Graph::<f64>::new();
        let xv: Vec<f64> = (0..27).map(|i| i as f64 * 0.1).collect();
        let wv: Vec<f64> = (0..27).map(|i| (i as f64 - 13.0) * 0.01).collect();
        let expected_center: f64 = xv.iter().zip(wv.iter()).map(|(a, b)| a * b).sum();
        let x = g.input(ArrayD::from_shape_vec(IxDyn(&[1, 1, 3, 3, 3]), xv).unwrap());
        let w = g.input(ArrayD::from_shape_vec(IxDyn(&[1, 1, 3, 3, 3]), wv).unwrap());
        let b = g.input(ArrayD::from_elem(IxDyn(&[1]), 0.5));
        let y = g.conv3d(x, w, b, 1, 1);
        let center = g.value(y)[[0, 0, 1, 1, 1]];
        assert!((center - (expected_center + 0.5)).abs() < 1e-12);
    }
}
