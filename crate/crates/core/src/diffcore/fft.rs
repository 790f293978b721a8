//! 3-d discrete Fourier transform magnitude, differentiable.
//!
//! The transform is the unnormalized separable DFT. For a real input `x`
//! with spectrum `F` and magnitude output `m = |F|`, the adjoint of a
//! cotangent `g` is `Re(DFT(g * conj(F) / |F|))`, with zero where the
//! magnitude vanishes; the DFT matrix is symmetric, so the same forward
//! kernel serves both directions.

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex;

use super::{BwdArgs, Graph, Var};
use crate::scalar::Scalar;

fn twiddle<S: Scalar>(n: usize) -> Vec<Complex<S>> {
    // T[k*n + j] = exp(-2*pi*i*k*j/n)
    let mut t = Vec::with_capacity(n * n);
    for k in 0..n {
        for j in 0..n {
            let angle = -2.0 * std::f64::consts::PI * (k * j % n) as f64 / n as f64;
            t.push(Complex::new(
                S::from_f(angle.cos()),
                S::from_f(angle.sin()),
            ));
        }
    }
    t
}

fn apply_axis<S: Scalar>(
    data: &mut [Complex<S>],
    dims: (usize, usize, usize),
    axis: usize,
    t: &[Complex<S>],
) {
    let (d, h, w) = dims;
    let n = [d, h, w][axis];
    let mut line = vec![Complex::new(S::zero(), S::zero()); n];
    let (outer_a, outer_b, stride, base_stride): (usize, usize, usize, [usize; 2]) = match axis {
        0 => (h, w, h * w, [w, 1]),
        1 => (d, w, w, [h * w, 1]),
        _ => (d, h, 1, [h * w, w]),
    };
    for a in 0..outer_a {
        for b in 0..outer_b {
            let base = a * base_stride[0] + b * base_stride[1];
            for (i, slot) in line.iter_mut().enumerate() {
                *slot = data[base + i * stride];
            }
            for k in 0..n {
                let mut acc = Complex::new(S::zero(), S::zero());
                let trow = &t[k * n..(k + 1) * n];
                for (j, &v) in line.iter().enumerate() {
                    acc += trow[j] * v;
                }
                data[base + k * stride] = acc;
            }
        }
    }
}

/// In-place unnormalized 3-d DFT of a flattened `[D,H,W]` complex buffer.
pub fn dft3<S: Scalar>(data: &mut [Complex<S>], dims: (usize, usize, usize)) {
    let (d, h, w) = dims;
    assert_eq!(data.len(), d * h * w);
    let tw = twiddle::<S>(w);
    apply_axis(data, dims, 2, &tw);
    let th = if h == w { tw } else { twiddle::<S>(h) };
    apply_axis(data, dims, 1, &th);
    let td = if d == h { th } else { twiddle::<S>(d) };
    apply_axis(data, dims, 0, &td);
}

/// Magnitude spectrum of a real `[D,H,W]` volume.
pub fn dft3_mag<S: Scalar>(x: &ArrayD<S>) -> (Vec<Complex<S>>, ArrayD<S>) {
    let shape = x.shape();
    let dims = (shape[0], shape[1], shape[2]);
    let mut buf: Vec<Complex<S>> = x.iter().map(|&v| Complex::new(v, S::zero())).collect();
    dft3(&mut buf, dims);
    let mag: Vec<S> = buf.iter().map(|c| c.norm()).collect();
    (buf, ArrayD::from_shape_vec(x.raw_dim(), mag).expect("shape"))
}

impl<S: Scalar> Graph<S> {
    /// `|DFT(x)|` of a 3-d node, same shape as the input.
    pub fn spectral_mag(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        assert_eq!(xv.ndim(), 3, "spectral_mag expects a [D,H,W] node");
        let (spectrum, mag) = dft3_mag(xv);
        self.push(
            mag,
            &[x],
            Box::new(move |args: &BwdArgs<'_, S>| {
                let shape = args.inputs[0].shape();
                let dims = (shape[0], shape[1], shape[2]);
                let mut u: Vec<Complex<S>> = spectrum
                    .iter()
                    .zip(args.out_grad.iter())
                    .zip(args.out_value.iter())
                    .map(|((f, &g), &m)| {
                        if m > S::zero() {
                            f.conj() * (g / m)
                        } else {
                            Complex::new(S::zero(), S::zero())
                        }
                    })
                    .collect();
                dft3(&mut u, dims);
                let dx: Vec<S> = u.iter().map(|c| c.re).collect();
                vec![ArrayD::from_shape_vec(IxDyn(shape), dx).expect("shape")]
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impulse_has_flat_unit_magnitude() {
        let mut g = Graph::<f64>::new();
        let mut x = ArrayD::<f64>::zeros(IxDyn(&[8, 8, 8]));
        x[[0, 0, 0]] = 1.0;
        let v = g.input(x);
        let m = g.spectral_mag(v);
        assert!(g.value(m).iter().all(|&b| (b - 1.0).abs() < 1e-12));
    }

    #[test]
    fn magnitude_is_sign_invariant() {
        let mut g = Graph::<f64>::new();
        let x: ArrayD<f64> = ArrayD::from_shape_vec(
            IxDyn(&[4, 4, 4]),
            (0..64).map(|i| (i as f64 * 0.37).sin()).collect(),
        )
        .unwrap();
        let neg = x.mapv(|v| -v);
        let a = g.input(x);
        let b = g.input(neg);
        let ma = g.spectral_mag(a);
        let mb = g.spectral_mag(b);
        for (u, v) in g.value(ma).iter().zip(g.value(mb).iter()) {
            assert!((u - v).abs() < 1e-9);
        }
    }
}
