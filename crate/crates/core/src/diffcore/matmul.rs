//! 2-d matrix products.

use ndarray::{Array2, ArrayD, ArrayView2, Ix2};

use super::{BwdArgs, Graph, Var};
use crate::scalar::Scalar;

pub(crate) fn as2<S: Scalar>(a: &ArrayD<S>) -> ArrayView2<'_, S> {
    a.view().into_dimensionality::<Ix2>().expect("2-d node")
}

fn dyn2<S: Scalar>(a: Array2<S>) -> ArrayD<S> {
    a.into_dyn()
}

impl<S: Scalar> Graph<S> {
    /// `a [m,k] · b [k,n] -> [m,n]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = as2(self.value(a)).dot(&as2(self.value(b)));
        self.push(
            dyn2(v),
            &[a, b],
            Box::new(|args: &BwdArgs<'_, S>| {
                let g = as2(args.out_grad);
                let a = as2(args.inputs[0]);
                let b = as2(args.inputs[1]);
                vec![dyn2(g.dot(&b.t())), dyn2(a.t().dot(&g))]
            }),
        )
    }

    /// `a [m,k] · bᵀ, b [n,k] -> [m,n]`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let v = as2(self.value(a)).dot(&as2(self.value(b)).t());
        self.push(
            dyn2(v),
            &[a, b],
            Box::new(|args: &BwdArgs<'_, S>| {
                let g = as2(args.out_grad);
                let a = as2(args.inputs[0]);
                let b = as2(args.inputs[1]);
                vec![dyn2(g.dot(&b)), dyn2(g.t().dot(&a))]
            }),
        )
    }
}
