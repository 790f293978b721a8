//! Finite-difference verification of reverse-mode gradients.
//!
//! The scalar probe is `sum(op(x) * r)` with a fixed random cotangent `r`,
//! so the check covers the full vector-Jacobian product of the primitive.

use ndarray::ArrayD;
use rand::Rng;

use super::{Graph, Var};
use crate::error::{CoreError, Result};
use crate::seed;

#[derive(Debug, Clone)]
pub struct GradcheckReport {
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

const FD_STEP: f64 = 1e-5;

/// Compare the reverse-mode gradient of `op` at `input` against central
/// finite differences in 64-bit precision.
pub fn gradcheck<F>(op: F, input: &ArrayD<f64>, tolerance: f64) -> Result<GradcheckReport>
where
    F: Fn(&mut Graph<f64>, Var) -> Var,
{
    let cotangent = {
        let mut rng = seed::rng(seed::derive(0xC0_5E_ED, &["gradcheck-cotangent"]));
        let out_shape: Vec<usize> = {
            let mut g = Graph::<f64>::new();
            let x = g.input(input.clone());
            let y = op(&mut g, x);
            g.value(y).shape().to_vec()
        };
        let n_out: usize = out_shape.iter().product();
        let vals: Vec<f64> = (0..n_out)
            .map(|_| 0.5 + rng.random::<f64>())
            .collect();
        ArrayD::from_shape_vec(ndarray::IxDyn(&out_shape), vals).expect("cotangent shape")
    };

    let probe = |x_val: &ArrayD<f64>| -> f64 {
        let mut g = Graph::<f64>::new();
        let x = g.input(x_val.clone());
        let y = op(&mut g, x);
        g.value(y)
            .iter()
            .zip(cotangent.iter())
            .map(|(a, b)| a * b)
            .sum()
    };

    // reverse-mode gradient
    let analytic = {
        let mut g = Graph::<f64>::new();
        let x = g.param(input.clone());
        let y = op(&mut g, x);
        let r = g.input(cotangent.clone());
        let prod = g.mul(y, r);
        let loss = g.sum_all(prod);
        g.backward(loss);
        g.grad(x)
            .cloned()
            .unwrap_or_else(|| ArrayD::zeros(input.raw_dim()))
    };
    if analytic.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Numeric(
            "gradcheck: non-finite reverse-mode gradient".into(),
        ));
    }

    let flat_input: Vec<f64> = input.iter().copied().collect();
    let mut max_rel = 0.0f64;
    for i in 0..flat_input.len() {
        let mut plus = flat_input.clone();
        plus[i] += FD_STEP;
        let mut minus = flat_input.clone();
        minus[i] -= FD_STEP;
        let lp = probe(&ArrayD::from_shape_vec(input.raw_dim(), plus).expect("shape"));
        let lm = probe(&ArrayD::from_shape_vec(input.raw_dim(), minus).expect("shape"));
        let numeric = (lp - lm) / (2.0 * FD_STEP);
        let ga = analytic.as_slice().expect("standard layout")[i];
        let denom = 1.0f64.max(ga.abs()).max(numeric.abs());
        max_rel = max_rel.max((ga - numeric).abs() / denom);
    }
    Ok(GradcheckReport {
        max_rel_err: max_rel,
        tolerance,
        pass: max_rel <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    #[test]
    fn elementwise_square_at_three() {
        let input = ArrayD::from_elem(IxDyn(&[1]), 3.0);
        let report = gradcheck(|g, x| g.square(x), &input, 1e-6).unwrap();
        assert!(report.pass, "rel err {}", report.max_rel_err);
    }

    #[test]
    fn relu_flat_region_gradient_is_zero() {
        let input = ArrayD::from_elem(IxDyn(&[1]), -1.0);
        let mut g = Graph::<f64>::new();
        let x = g.param(input);
        let y = g.relu(x);
        let loss = g.sum_all(y);
        g.backward(loss);
        assert_eq!(g.grad(x).unwrap()[[0]], 0.0);
    }

    #[test]
    fn softmax_jacobian_vector_product() {
        let mut rng = seed::rng(11);
        let vals: Vec<f64> = (0..8).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let input = ArrayD::from_shape_vec(IxDyn(&[1, 8]), vals).unwrap();
        let report = gradcheck(|g, x| g.softmax_rows(x), &input, 1e-6).unwrap();
        assert!(report.pass, "rel err {}", report.max_rel_err);
    }
}
