//! Minimal n-dimensional reverse-mode autodiff.
//!
//! A [`Graph`] is a single-use tape: every operation appends a node holding
//! its forward value, its parent indices, and a closure that maps the output
//! gradient to parent-gradient contributions. Creation order is a valid
//! topological order, so [`Graph::backward`] is one reverse sweep.
//!
//! The engine is generic over [`Scalar`]: models train in `f32` and the
//! gradient checker re-runs the same primitives in `f64`.
//!
//! One step = one graph. Parameters live outside the tape (see
//! [`crate::io::ckpt::ParamSet`]) and are injected with [`Graph::param`];
//! after `backward` their gradients are read back out for the optimizer.

mod adam;
mod conv;
mod fft;
mod gradcheck;
pub mod init;
mod matmul;
mod nn;
mod ops;

pub use adam::{adam_step, lr_schedule, AdamHyper, AdamState};
pub use gradcheck::{gradcheck, GradcheckReport};

use ndarray::ArrayD;

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

pub(crate) struct BwdArgs<'a, S: Scalar> {
    pub out_value: &'a ArrayD<S>,
    pub out_grad: &'a ArrayD<S>,
    pub inputs: Vec<&'a ArrayD<S>>,
}

pub(crate) type BackwardFn<S> = Box<dyn Fn(&BwdArgs<'_, S>) -> Vec<ArrayD<S>>>;

struct Meta<S: Scalar> {
    parents: Vec<usize>,
    backward: Option<BackwardFn<S>>,
    needs_grad: bool,
}

pub struct Graph<S: Scalar> {
    values: Vec<ArrayD<S>>,
    grads: Vec<Option<ArrayD<S>>>,
    metas: Vec<Meta<S>>,
}

impl<S: Scalar> Default for Graph<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Graph {
            values: Vec::new(),
            grads: Vec::new(),
            metas: Vec::new(),
        }
    }

    fn leaf(&mut self, value: ArrayD<S>, needs_grad: bool) -> Var {
        self.values.push(value);
        self.grads.push(None);
        self.metas.push(Meta {
            parents: Vec::new(),
            backward: None,
            needs_grad,
        });
        Var(self.values.len() - 1)
    }

    /// Constant input; no gradient is tracked through it.
    pub fn input(&mut self, value: ArrayD<S>) -> Var {
        self.leaf(value, false)
    }

    /// Trainable leaf; its gradient is retained after [`Graph::backward`].
    pub fn param(&mut self, value: ArrayD<S>) -> Var {
        self.leaf(value, true)
    }

    /// Append an interior node. `backward` must return one gradient
    /// contribution per parent, each matching that parent's shape.
    pub(crate) fn push(
        &mut self,
        value: ArrayD<S>,
        parents: &[Var],
        backward: BackwardFn<S>,
    ) -> Var {
        let needs_grad = parents.iter().any(|p| self.metas[p.0].needs_grad);
        self.values.push(value);
        self.grads.push(None);
        self.metas.push(Meta {
            parents: parents.iter().map(|p| p.0).collect(),
            backward: if needs_grad { Some(backward) } else { None },
            needs_grad,
        });
        Var(self.values.len() - 1)
    }

    pub fn value(&self, v: Var) -> &ArrayD<S> {
        &self.values[v.0]
    }

    /// Scalar value of a 0-d node.
    pub fn scalar(&self, v: Var) -> S {
        *self.values[v.0]
            .iter()
            .next()
            .expect("scalar node is non-empty")
    }

    pub fn grad(&self, v: Var) -> Option<&ArrayD<S>> {
        self.grads[v.0].as_ref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Error if any node value is non-finite; names the offending node index.
    pub fn check_finite(&self) -> Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(CoreError::Numeric(format!(
                    "non-finite value in graph node {i}"
                )));
            }
        }
        Ok(())
    }

    /// Reverse sweep from a scalar loss node.
    pub fn backward(&mut self, loss: Var) {
        assert_eq!(
            self.values[loss.0].len(),
            1,
            "backward requires a scalar loss"
        );
        let seed = ArrayD::from_elem(self.values[loss.0].raw_dim(), S::one());
        self.grads[loss.0] = Some(seed);
        for i in (0..=loss.0).rev() {
            if self.grads[i].is_none() || self.metas[i].backward.is_none() {
                continue;
            }
            let g = self.grads[i].take().expect("checked above");
            let parents = self.metas[i].parents.clone();
            let contribs = {
                let backward = self.metas[i].backward.as_ref().expect("checked above");
                let args = BwdArgs {
                    out_value: &self.values[i],
                    out_grad: &g,
                    inputs: parents.iter().map(|&p| &self.values[p]).collect(),
                };
                backward(&args)
            };
            debug_assert_eq!(contribs.len(), parents.len());
            for (&p, c) in parents.iter().zip(contribs) {
                if !self.metas[p].needs_grad {
                    continue;
                }
                debug_assert_eq!(c.shape(), self.values[p].shape());
                match &mut self.grads[p] {
                    Some(acc) => *acc += &c,
                    slot @ None => *slot = Some(c),
                }
            }
            self.grads[i] = Some(g);
        }
    }
}
