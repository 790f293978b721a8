//! Bias-corrected ADAM and the exponential learning-rate schedule.

use ndarray::ArrayD;

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter first/second moments and the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState<S: Scalar> {
    pub m: Vec<ArrayD<S>>,
    pub v: Vec<ArrayD<S>>,
    pub t: u64,
    pub hyper: AdamHyper,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(params: &[ArrayD<S>], hyper: AdamHyper) -> Self {
        AdamState {
            m: params.iter().map(|p| ArrayD::zeros(p.raw_dim())).collect(),
            v: params.iter().map(|p| ArrayD::zeros(p.raw_dim())).collect(),
            t: 0,
            hyper,
        }
    }
}

/// One in-place ADAM update; increments `state.t`.
pub fn adam_step<S: Scalar>(
    params: &mut [ArrayD<S>],
    grads: &[ArrayD<S>],
    state: &mut AdamState<S>,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(CoreError::Contract(format!(
            "adam_step: {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads.iter()).enumerate() {
        if p.shape() != g.shape() {
            return Err(CoreError::Contract(format!(
                "adam_step: param {i} shape {:?} vs grad shape {:?}",
                p.shape(),
                g.shape()
            )));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let h = state.hyper;
    let b1 = S::from_f(h.beta1);
    let b2 = S::from_f(h.beta2);
    let one_m_b1 = S::from_f(1.0 - h.beta1);
    let one_m_b2 = S::from_f(1.0 - h.beta2);
    let corr1 = S::from_f(1.0 - h.beta1.powi(t));
    let corr2 = S::from_f(1.0 - h.beta2.powi(t));
    let eps = S::from_f(h.eps);
    let lr_s = S::from_f(lr);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads.iter())
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        m.zip_mut_with(g, |mi, &gi| *mi = b1 * *mi + one_m_b1 * gi);
        v.zip_mut_with(g, |vi, &gi| *vi = b2 * *vi + one_m_b2 * gi * gi);
        ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|pi, &mi, &vi| {
            let mhat = mi / corr1;
            let vhat = vi / corr2;
            *pi = *pi - lr_s * mhat / (vhat.sqrt() + eps);
        });
    }
    Ok(())
}

/// `lr0 * gamma^step`.
pub fn lr_schedule(lr0: f64, gamma: f64, step: u64) -> f64 {
    assert!(lr0 > 0.0, "lr0 must be positive");
    assert!(gamma > 0.0 && gamma <= 1.0, "gamma must be in (0,1]");
    lr0 * gamma.powf(step as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    fn scalar_param(v: f64) -> Vec<ArrayD<f64>> {
        vec![ArrayD::from_elem(IxDyn(&[]), v)]
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut p = scalar_param(1.5);
        let g = scalar_param(0.0);
        let mut st = AdamState::new(&p, AdamHyper::default());
        adam_step(&mut p, &g, &mut st, 1e-3).unwrap();
        assert_eq!(p[0][[]], 1.5);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn first_step_matches_hand_evaluation() {
        let mut p = scalar_param(0.0);
        let g = scalar_param(1.0);
        let mut st = AdamState::new(&p, AdamHyper::default());
        adam_step(&mut p, &g, &mut st, 1e-3).unwrap();
        // bias-corrected mhat = vhat = 1 -> step = lr/(1 + eps)
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((p[0][[]] - expected).abs() < 1e-12);
    }

    #[test]
    fn constant_positive_gradient_decreases_monotonically() {
        let mut p = scalar_param(1.0);
        let g = scalar_param(0.3);
        let mut st = AdamState::new(&p, AdamHyper::default());
        let mut last = p[0][[]];
        for _ in 0..10 {
            adam_step(&mut p, &g, &mut st, 1e-2).unwrap();
            assert!(p[0][[]] < last);
            last = p[0][[]];
        }
    }

    #[test]
    fn shape_mismatch_is_contract_error() {
        let mut p = scalar_param(1.0);
        let g = vec![ArrayD::<f64>::zeros(IxDyn(&[2]))];
        let mut st = AdamState::new(&p, AdamHyper::default());
        assert!(matches!(
            adam_step(&mut p, &g, &mut st, 1e-3),
            Err(CoreError::Contract(_))
        ));
    }

    #[test]
    fn schedule_values() {
        assert_eq!(lr_schedule(1e-4, 0.9999, 0), 1e-4);
        assert_eq!(lr_schedule(1e-4, 1.0, 12345), 1e-4);
        let lr = lr_schedule(1e-4, 0.9999, 10_000);
        assert!((lr - 3.6786e-5).abs() < 1e-8, "got {lr}");
    }
}
