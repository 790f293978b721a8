//! Elementwise, reduction, and shape primitives.

use ndarray::{ArrayD, Axis, IxDyn};

use super::{BwdArgs, Graph, Var};
use crate::scalar::Scalar;

impl<S: Scalar> Graph<S> {
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(
            v,
            &[a, b],
            Box::new(|args: &BwdArgs<'_, S>| {
                vec![args.out_grad.clone(), args.out_grad.clone()]
            }),
        )
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(
            v,
            &[a, b],
            Box::new(|args: &BwdArgs<'_, S>| {
                vec![args.out_grad.clone(), args.out_grad.mapv(|g| -g)]
            }),
        )
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(
            v,
            &[a, b],
            Box::new(|args: &BwdArgs<'_, S>| {
                vec![args.out_grad * args.inputs[1], args.out_grad * args.inputs[0]]
            }),
        )
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) / self.value(b);
        self.push(
            v,
            &[a, b],
            Box::new(|args: &BwdArgs<'_, S>| {
                let da = args.out_grad / args.inputs[1];
                let db = args
                    .out_grad
                    .iter()
                    .zip(args.inputs[0].iter())
                    .zip(args.inputs[1].iter())
                    .map(|((&g, &a), &b)| -g * a / (b * b))
                    .collect::<Vec<S>>();
                vec![
                    da,
                    ArrayD::from_shape_vec(args.inputs[1].raw_dim(), db).expect("same shape"),
                ]
            }),
        )
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -S::one())
    }

    pub fn scale(&mut self, a: Var, c: S) -> Var {
        let v = self.value(a).mapv(|x| x * c);
        self.push(
            v,
            &[a],
            Box::new(move |args: &BwdArgs<'_, S>| vec![args.out_grad.mapv(|g| g * c)]),
        )
    }

    pub fn add_scalar(&mut self, a: Var, c: S) -> Var {
        let v = self.value(a).mapv(|x| x + c);
        self.push(
            v,
            &[a],
            Box::new(|args: &BwdArgs<'_, S>| vec![args.out_grad.clone()]),
        )
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.exp());
        self.push(
            v,
            &[a],
            Box::new(|args: &BwdArgs<'_, S>| vec![args.out_grad * args.out_value]),
        )
    }

    /// ReLU; the gradient at exactly zero is zero.
    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| if x > S::zero() { x } else { S::zero() });
        self.push(
            v,
            &[a],
            Box::new(|args: &BwdArgs<'_, S>| {
                let mut g = args.out_grad.clone();
                g.zip_mut_with(args.inputs[0], |gi, &x| {
                    if x <= S::zero() {
                        *gi = S::zero();
                    }
                });
                vec![g]
            }),
        )
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x * x);
        self.push(
            v,
            &[a],
            Box::new(|args: &BwdArgs<'_, S>| {
                let two = S::from_f(2.0);
                let mut g = args.out_grad.clone();
                g.zip_mut_with(args.inputs[0], |gi, &x| *gi = *gi * two * x);
                vec![g]
            }),
        )
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().copied().fold(S::zero(), |acc, x| acc + x);
        let v = ArrayD::from_elem(IxDyn(&[]), s);
        self.push(
            v,
            &[a],
            Box::new(|args: &BwdArgs<'_, S>| {
                let g = *args.out_grad.iter().next().expect("scalar");
                vec![ArrayD::from_elem(args.inputs[0].raw_dim(), g)]
            }),
        )
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = S::from_n(self.value(a).len());
        let s = self.sum_all(a);
        self.scale(s, S::one() / n)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Var {
        let v = self
            .value(a)
            .clone()
            .into_shape_with_order(IxDyn(shape))
            .expect("reshape preserves element count");
        self.push(
            v,
            &[a],
            Box::new(|args: &BwdArgs<'_, S>| {
                vec![args
                    .out_grad
                    .clone()
                    .into_shape_with_order(args.inputs[0].raw_dim())
                    .expect("reshape back")]
            }),
        )
    }

    /// Rows `[start, start+len)` of a 2-d node.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self
            .value(a)
            .slice_axis(Axis(0), (start..start + len).into())
            .to_owned();
        self.push(
            v,
            &[a],
            Box::new(move |args: &BwdArgs<'_, S>| {
                let mut g = ArrayD::zeros(args.inputs[0].raw_dim());
                g.slice_axis_mut(Axis(0), (start..start + len).into())
                    .assign(args.out_grad);
                vec![g]
            }),
        )
    }

    /// Subtract a per-row scalar column `s [r,1]` from every column of `a [r,c]`.
    pub fn sub_col_broadcast(&mut self, a: Var, s: Var) -> Var {
        let av = self.value(a);
        let sv = self.value(s);
        let v = av - &sv.broadcast(av.raw_dim()).expect("column broadcasts");
        self.push(
            v,
            &[a, s],
            Box::new(|args: &BwdArgs<'_, S>| {
                let rows = args.inputs[0].shape()[0];
                let mut ds = ArrayD::zeros(IxDyn(&[rows, 1]));
                for r in 0..rows {
                    let sum = args
                        .out_grad
                        .index_axis(Axis(0), r)
                        .iter()
                        .copied()
                        .fold(S::zero(), |acc, x| acc + x);
                    ds[[r, 0]] = -sum;
                }
                vec![args.out_grad.clone(), ds]
            }),
        )
    }

    /// Columns `[start, start+len)` of a 2-d node.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self
            .value(a)
            .slice_axis(Axis(1), (start..start + len).into())
            .to_owned();
        self.push(
            v,
            &[a],
            Box::new(move |args: &BwdArgs<'_, S>| {
                let mut g = ArrayD::zeros(args.inputs[0].raw_dim());
                g.slice_axis_mut(Axis(1), (start..start + len).into())
                    .assign(args.out_grad);
                vec![g]
            }),
        )
    }

    /// Concatenate 2-d nodes along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("row counts match");
        let widths: Vec<usize> = parts.iter().map(|p| self.value(*p).shape()[1]).collect();
        self.push(
            v,
            parts,
            Box::new(move |args: &BwdArgs<'_, S>| {
                let mut out = Vec::with_capacity(widths.len());
                let mut start = 0;
                for &w in &widths {
                    out.push(
                        args.out_grad
                            .slice_axis(Axis(1), (start..start + w).into())
                            .to_owned(),
                    );
                    start += w;
                }
                out
            }),
        )
    }

    pub fn transpose2(&mut self, a: Var) -> Var {
        let v = self.value(a).t().to_owned();
        self.push(
            v,
            &[a],
            Box::new(|args: &BwdArgs<'_, S>| vec![args.out_grad.t().to_owned()]),
        )
    }

    /// Cumulative sum along axis 0 of a 2-d node.
    pub fn cumsum_rows(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        let rows = v.shape()[0];
        for r in 1..rows {
            let (prev, mut cur) = v.view_mut().split_at(Axis(0), r);
            let last = prev.index_axis(Axis(0), r - 1).to_owned();
            let mut first = cur.index_axis_mut(Axis(0), 0);
            first += &last;
        }
        self.push(
            v,
            &[a],
            Box::new(|args: &BwdArgs<'_, S>| {
                // reverse cumulative sum
                let mut g = args.out_grad.clone();
                let rows = g.shape()[0];
                for r in (1..rows).rev() {
                    let (mut head, tail) = g.view_mut().split_at(Axis(0), r);
                    let cur = tail.index_axis(Axis(0), 0).to_owned();
                    let mut prev = head.index_axis_mut(Axis(0), r - 1);
                    prev += &cur;
                }
                vec![g]
            }),
        )
    }

    /// Row-wise dot product of two equally shaped 2-d nodes -> `[rows, 1]`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Var {
        let av = self.value(a);
        let bv = self.value(b);
        let rows = av.shape()[0];
        let prod = av * bv;
        let sums: Vec<S> = prod
            .axis_iter(Axis(0))
            .map(|row| row.iter().copied().fold(S::zero(), |acc, x| acc + x))
            .collect();
        let v = ArrayD::from_shape_vec(IxDyn(&[rows, 1]), sums).expect("rows");
        self.push(
            v,
            &[a, b],
            Box::new(|args: &BwdArgs<'_, S>| {
                let g = args.out_grad; // [rows,1]
                let da = args.inputs[1] * &g.broadcast(args.inputs[1].raw_dim()).expect("bcast");
                let db = args.inputs[0] * &g.broadcast(args.inputs[0].raw_dim()).expect("bcast");
                vec![da, db]
            }),
        )
    }

    /// Divide each row of `a` by the per-row scalar `d` (`[rows,1]`).
    pub fn div_rows(&mut self, a: Var, d: Var) -> Var {
        let av = self.value(a);
        let dv = self.value(d);
        let v = av / &dv.broadcast(av.raw_dim()).expect("bcast");
        self.push(
            v,
            &[a, d],
            Box::new(|args: &BwdArgs<'_, S>| {
                let a = args.inputs[0];
                let d = args.inputs[1];
                let db = d.broadcast(a.raw_dim()).expect("bcast");
                let da = args.out_grad / &db;
                let rows = a.shape()[0];
                let mut dd = ArrayD::zeros(IxDyn(&[rows, 1]));
                for r in 0..rows {
                    let gr = args.out_grad.index_axis(Axis(0), r);
                    let ar = a.index_axis(Axis(0), r);
                    let dr = *d.index_axis(Axis(0), r).iter().next().expect("col");
                    let s = gr
                        .iter()
                        .zip(ar.iter())
                        .map(|(&g, &av)| g * av)
                        .fold(S::zero(), |acc, x| acc + x);
                    dd[[r, 0]] = -s / (dr * dr);
                }
                vec![da, dd]
            }),
        )
    }
}
