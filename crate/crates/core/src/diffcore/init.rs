//! Parameter initialization: Kaiming-style uniform for conv/linear weights,
//! small normal for embeddings.

use ndarray::ArrayD;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

pub fn kaiming_uniform<S: Scalar>(
    shape: &[usize],
    fan_in: usize,
    rng: &mut ChaCha8Rng,
) -> ArrayD<S> {
    let bound = (6.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let vals: Vec<S> = (0..n)
        .map(|_| S::from_f((rng.random::<f64>() * 2.0 - 1.0) * bound))
        .collect();
    ArrayD::from_shape_vec(ndarray::IxDyn(shape), vals).expect("shape")
}

pub fn normal<S: Scalar>(shape: &[usize], std: f64, rng: &mut ChaCha8Rng) -> ArrayD<S> {
    let n: usize = shape.iter().product();
    let vals: Vec<S> = (0..n)
        .map(|_| {
            let u1: f64 = rng.random::<f64>().max(1e-12);
            let u2: f64 = rng.random::<f64>();
            S::from_f(std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos())
        })
        .collect();
    ArrayD::from_shape_vec(ndarray::IxDyn(shape), vals).expect("shape")
}

pub fn zeros<S: Scalar>(shape: &[usize]) -> ArrayD<S> {
    ArrayD::zeros(ndarray::IxDyn(shape))
}

pub fn ones<S: Scalar>(shape: &[usize]) -> ArrayD<S> {
    ArrayD::from_elem(ndarray::IxDyn(shape), S::one())
}
