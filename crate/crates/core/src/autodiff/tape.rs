//! Dynamically recorded computation graph with reverse-mode gradients.

use alloc::borrow::Cow;
use alloc::vec;
use alloc::vec::Vec;

use super::kernels;
use super::tensor::Tensor;
use crate::{Error, Result};

/// Predictions are clamped into `[BCE_CLAMP, 1 - BCE_CLAMP]` inside
/// [`Tape::bce_loss`].
pub const BCE_CLAMP: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatVec(Var, Var),
    VecMat(Var, Var),
    MatMul(Var, Var),
    Mul(Var, Var),
    Add(Var, Var),
    Concat(Vec<Var>),
    Relu(Var),
    Sigmoid(Var),
    Softmax(Var),
    Mean(Var),
    Bce { pred: Var, target: f64 },
}

#[derive(Debug)]
struct Node<'a> {
    shape: Vec<usize>,
    value: Cow<'a, [f64]>,
    op: Op,
    requires_grad: bool,
}

/// Records values as operations run. Leaves may borrow their data, so a tape
/// over model parameters does not copy them.
#[derive(Debug, Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

/// Gradients of one scalar with respect to every node that requires them.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// `None` if `var` does not influence the loss or needs no gradient.
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    /// Gradient of `var`, zeros if it does not influence the loss.
    pub fn get_or_zeros(&self, var: Var, len: usize) -> Vec<f64> {
        self.get(var).map_or_else(|| vec![0.0; len], <[f64]>::to_vec)
    }
}

fn mismatch(op: &'static str, left: &[usize], right: &[usize]) -> Error {
    Error::ShapeMismatch {
        op,
        left: left.to_vec(),
        right: right.to_vec(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Cow<'a, [f64]>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            shape,
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_op(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, inputs: &[Var]) -> Var {
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(shape, Cow::Owned(value), op, rg)
    }

    /// A trainable leaf borrowing `t`.
    pub fn param(&mut self, t: &'a Tensor) -> Var {
        self.push(t.shape().to_vec(), Cow::Borrowed(t.data()), Op::Leaf, true)
    }

    /// A trainable leaf owning its data.
    pub fn param_owned(&mut self, t: Tensor) -> Var {
        let shape = t.shape().to_vec();
        self.push(shape, Cow::Owned(t.into_data()), Op::Leaf, true)
    }

    /// A constant leaf borrowing `data` with the given shape.
    pub fn constant(&mut self, shape: &[usize], data: &'a [f64]) -> Result<Var> {
        if shape.iter().product::<usize>() != data.len() || shape.is_empty() {
            return Err(mismatch("constant", shape, &[data.len()]));
        }
        Ok(self.push(shape.to_vec(), Cow::Borrowed(data), Op::Leaf, false))
    }

    pub fn constant_owned(&mut self, t: Tensor) -> Var {
        let shape = t.shape().to_vec();
        self.push(shape, Cow::Owned(t.into_data()), Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    /// Scalar value of a `[1]` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    /// `m [r, c] * x [c] -> [r]`
    pub fn matvec(&mut self, m: Var, x: Var) -> Result<Var> {
        let (ms, xs) = (self.shape(m), self.shape(x));
        if ms.len() != 2 || xs.len() != 1 || ms[1] != xs[0] {
            return Err(mismatch("matvec", ms, xs));
        }
        let rows = ms[0];
        let mut out = vec![0.0; rows];
        kernels::matvec(self.value(m), self.value(x), &mut out);
        Ok(self.push_op(vec![rows], out, Op::MatVec(m, x), &[m, x]))
    }

    /// `x [r] * m [r, c] -> [c]`, i.e. `m^T x`.
    pub fn vecmat(&mut self, x: Var, m: Var) -> Result<Var> {
        let (xs, ms) = (self.shape(x), self.shape(m));
        if ms.len() != 2 || xs.len() != 1 || ms[0] != xs[0] {
            return Err(mismatch("vecmat", xs, ms));
        }
        let cols = ms[1];
        let mut out = vec![0.0; cols];
        kernels::vecmat(self.value(x), self.value(m), &mut out);
        Ok(self.push_op(vec![cols], out, Op::VecMat(x, m), &[x, m]))
    }

    /// `a [m, n] * b [n, p] -> [m, p]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (as_, bs) = (self.shape(a), self.shape(b));
        if as_.len() != 2 || bs.len() != 2 || as_[1] != bs[0] {
            return Err(mismatch("matmul", as_, bs));
        }
        let (m, n, p) = (as_[0], as_[1], bs[1]);
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = vec![0.0; m * p];
        for i in 0..m {
            let row = &mut out[i * p..(i + 1) * p];
            for k in 0..n {
                kernels::axpy(av[i * n + k], &bv[k * p..(k + 1) * p], row);
            }
        }
        Ok(self.push_op(vec![m, p], out, Op::MatMul(a, b), &[a, b]))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push_op(shape, out, Op::Mul(a, b), &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push_op(shape, out, Op::Add(a, b), &[a, b]))
    }

    /// Concatenates 1-D nodes.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut out = Vec::new();
        for &p in parts {
            if self.shape(p).len() != 1 {
                return Err(mismatch("concat", self.shape(p), &[]));
            }
            out.extend_from_slice(self.value(p));
        }
        if out.is_empty() {
            return Err(mismatch("concat", &[], &[]));
        }
        let n = out.len();
        Ok(self.push_op(vec![n], out, Op::Concat(parts.to_vec()), parts))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).iter().map(|&v| v.max(0.0)).collect();
        let shape = self.shape(x).to_vec();
        self.push_op(shape, out, Op::Relu(x), &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).iter().map(|&v| sigmoid(v)).collect();
        let shape = self.shape(x).to_vec();
        self.push_op(shape, out, Op::Sigmoid(x), &[x])
    }

    /// Softmax over a 1-D node, max-shifted.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        if self.shape(x).len() != 1 {
            return Err(mismatch("softmax", self.shape(x), &[]));
        }
        let out = softmax(self.value(x));
        let shape = self.shape(x).to_vec();
        Ok(self.push_op(shape, out, Op::Softmax(x), &[x]))
    }

    /// Mean of all elements, shape `[1]`.
    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let m = v.iter().sum::<f64>() / v.len() as f64;
        self.push_op(vec![1], vec![m], Op::Mean(x), &[x])
    }

    /// Binary cross-entropy of a `[1]` prediction against `target`, with the
    /// prediction clamped into `[BCE_CLAMP, 1 - BCE_CLAMP]`.
    pub fn bce_loss(&mut self, pred: Var, target: f64) -> Result<Var> {
        if self.shape(pred) != [1] {
            return Err(mismatch("bce_loss", self.shape(pred), &[1]));
        }
        let p = self.scalar(pred).clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        let loss = -(target * libm::log(p) + (1.0 - target) * libm::log(1.0 - p));
        Ok(self.push_op(vec![1], vec![loss], Op::Bce { pred, target }, &[pred]))
    }

    /// Reverse pass from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != [1] {
            return Err(Error::NonScalarLoss {
                shape: self.shape(loss).to_vec(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, node: &Node<'a>, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match node.op {
            Op::Leaf => {}
            Op::MatVec(m, x) => {
                let cols = self.shape(m)[1];
                if self.needs(m) {
                    let xv = self.value(x);
                    let gm = slot(grads, m, g.len() * cols);
                    for (r, &gr) in g.iter().enumerate() {
                        if gr != 0.0 {
                            kernels::axpy(gr, xv, &mut gm[r * cols..(r + 1) * cols]);
                        }
                    }
                }
                if self.needs(x) {
                    let mv = self.value(m);
                    let gx = slot(grads, x, cols);
                    for (r, &gr) in g.iter().enumerate() {
                        if gr != 0.0 {
                            kernels::axpy(gr, &mv[r * cols..(r + 1) * cols], gx);
                        }
                    }
                }
            }
            Op::VecMat(x, m) => {
                let rows = self.shape(m)[0];
                let cols = g.len();
                if self.needs(m) {
                    let xv = self.value(x);
                    let gm = slot(grads, m, rows * cols);
                    for (r, &xr) in xv.iter().enumerate() {
                        if xr != 0.0 {
                            kernels::axpy(xr, g, &mut gm[r * cols..(r + 1) * cols]);
                        }
                    }
                }
                if self.needs(x) {
                    let mv = self.value(m);
                    let gx = slot(grads, x, rows);
                    for (r, gxr) in gx.iter_mut().enumerate() {
                        *gxr += kernels::dot(&mv[r * cols..(r + 1) * cols], g);
                    }
                }
            }
            Op::MatMul(a, b) => {
                let (m, n) = (self.shape(a)[0], self.shape(a)[1]);
                let p = self.shape(b)[1];
                if self.needs(a) {
                    let bv = self.value(b);
                    let ga = slot(grads, a, m * n);
                    for i in 0..m {
                        for k in 0..n {
                            ga[i * n + k] +=
                                kernels::dot(&g[i * p..(i + 1) * p], &bv[k * p..(k + 1) * p]);
                        }
                    }
                }
                if self.needs(b) {
                    let av = self.value(a);
                    let gb = slot(grads, b, n * p);
                    for i in 0..m {
                        for k in 0..n {
                            kernels::axpy(av[i * n + k], &g[i * p..(i + 1) * p], &mut gb[k * p..(k + 1) * p]);
                        }
                    }
                }
            }
            Op::Mul(a, b) => {
                if self.needs(a) {
                    let bv = self.value(b);
                    let ga = slot(grads, a, g.len());
                    for ((o, gi), bi) in ga.iter_mut().zip(g).zip(bv.iter()) {
                        *o += gi * bi;
                    }
                }
                if self.needs(b) {
                    let av = self.value(a);
                    let gb = slot(grads, b, g.len());
                    for ((o, gi), ai) in gb.iter_mut().zip(g).zip(av.iter()) {
                        *o += gi * ai;
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if self.needs(v) {
                        kernels::axpy(1.0, g, slot(grads, v, g.len()));
                    }
                }
            }
            Op::Concat(ref parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.shape(p)[0];
                    if self.needs(p) {
                        kernels::axpy(1.0, &g[offset..offset + len], slot(grads, p, len));
                    }
                    offset += len;
                }
            }
            Op::Relu(x) => {
                let xv = self.value(x);
                let gx = slot(grads, x, g.len());
                for ((o, gi), xi) in gx.iter_mut().zip(g).zip(xv.iter()) {
                    if *xi > 0.0 {
                        *o += gi;
                    }
                }
            }
            Op::Sigmoid(x) => {
                let gx = slot(grads, x, g.len());
                for ((o, gi), yi) in gx.iter_mut().zip(g).zip(node.value.iter()) {
                    *o += gi * yi * (1.0 - yi);
                }
            }
            Op::Softmax(x) => {
                let y = &node.value;
                let inner = kernels::dot(g, y);
                let gx = slot(grads, x, g.len());
                for ((o, gi), yi) in gx.iter_mut().zip(g).zip(y.iter()) {
                    *o += yi * (gi - inner);
                }
            }
            Op::Mean(x) => {
                let n = self.nodes[x.0].value.len();
                let share = g[0] / n as f64;
                slot(grads, x, n).iter_mut().for_each(|o| *o += share);
            }
            Op::Bce { pred, target } => {
                let p = self.scalar(pred);
                if p > BCE_CLAMP && p < 1.0 - BCE_CLAMP {
                    let d = -target / p + (1.0 - target) / (1.0 - p);
                    slot(grads, pred, 1)[0] += g[0] * d;
                }
            }
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

/// Numerically stable softmax.
pub(crate) fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|&v| libm::exp(v - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub(crate) fn sigmoid_scalar(x: f64) -> f64 {
    sigmoid(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    #[test]
    fn primitive_values() {
        let mut tape = Tape::new();
        let z = tape.constant_owned(Tensor::vector(vec![0.0]));
        let s = tape.sigmoid(z);
        assert_eq!(tape.value(s), [0.5]);

        let a = tape.constant_owned(Tensor::vector(vec![1.0, 2.0]));
        let b = tape.constant_owned(Tensor::vector(vec![3.0, 4.0]));
        let p = tape.mul(a, b).unwrap();
        assert_eq!(tape.value(p), [3.0, 8.0]);

        let zz = tape.constant_owned(Tensor::vector(vec![0.0, 0.0]));
        let sm = tape.softmax(zz).unwrap();
        assert_eq!(tape.value(sm), [0.5, 0.5]);
    }

    #[test]
    fn sigmoid_gradient_at_zero() {
        let x = Tensor::vector(vec![0.0]);
        let mut tape = Tape::new();
        let xv = tape.param(&x);
        let y = tape.sigmoid(xv);
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(xv).unwrap(), [0.25]);
    }

    #[test]
    fn sum_of_product_gradient_is_other_factor() {
        let a = Tensor::vector(vec![1.0, -2.0, 3.0]);
        let b = Tensor::vector(vec![4.0, 5.0, -6.0]);
        let mut tape = Tape::new();
        let (av, bv) = (tape.param(&a), tape.param(&b));
        let p = tape.mul(av, bv).unwrap();
        let m = tape.mean(p);
        let g = tape.backward(m).unwrap();
        // mean = sum / 3
        let ga: Vec<f64> = g.get(av).unwrap().iter().map(|x| x * 3.0).collect();
        assert_eq!(ga, b.data());
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let mut tape = Tape::new();
        let m = tape.constant_owned(Tensor::zeros(&[2, 3]));
        let x = tape.constant_owned(Tensor::zeros(&[2]));
        match tape.matvec(m, x) {
            Err(Error::ShapeMismatch { op, left, right }) => {
                assert_eq!(op, "matvec");
                assert_eq!(left, [2, 3]);
                assert_eq!(right, [2]);
            }
            other => panic!("{other:?}"),
        }
        assert!(tape.add(m, x).is_err());
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut tape = Tape::new();
        let x = tape.param_owned(Tensor::vector(vec![1.0, 2.0]));
        let y = tape.relu(x);
        assert!(matches!(tape.backward(y), Err(Error::NonScalarLoss { .. })));
    }

    #[test]
    fn bce_clamp_boundary() {
        let mut tape = Tape::new();
        let one = tape.constant_owned(Tensor::scalar(1.0));
        let zero = tape.constant_owned(Tensor::scalar(0.0));
        let l1 = tape.bce_loss(one, 1.0).unwrap();
        let l0 = tape.bce_loss(zero, 0.0).unwrap();
        // -ln(1 - 1e-12) ~ 1e-12: non-negative, zero only in the limit.
        for l in [l1, l0] {
            let v = tape.scalar(l);
            assert!((0.0..1.1e-12).contains(&v), "{v}");
        }
        let wrong = tape.bce_loss(one, 0.0).unwrap();
        assert!((tape.scalar(wrong) + libm::log(BCE_CLAMP)).abs() < 1e-3);
        let half = tape.constant_owned(Tensor::scalar(0.5));
        let lh = tape.bce_loss(half, 1.0).unwrap();
        assert!((tape.scalar(lh) - core::f64::consts::LN_2).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            xs in proptest::collection::vec(-30.0f64..30.0, 1..12),
            c in -100.0f64..100.0,
        ) {
            let a = softmax(&xs);
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let b = softmax(&shifted);
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn bce_is_non_negative(p in 0.0f64..=1.0, y in prop_oneof![Just(0.0), Just(1.0)]) {
            let mut tape = Tape::new();
            let pv = tape.constant_owned(Tensor::scalar(p));
            let l = tape.bce_loss(pv, y).unwrap();
            prop_assert!(tape.scalar(l) >= 0.0);
        }
    }

    /// Every primitive against central differences on random shapes.
    #[test]
    fn primitive_backward_rules_match_finite_differences() {
        use crate::autodiff::{grad_check, Selection};
        let mut rng = SeededRng::new(1234);
        for case in 0..40 {
            let r = 1 + rng.below(5);
            let c = 1 + rng.below(5);
            let p = 1 + rng.below(4);
            let mut rand_t = |shape: &[usize]| {
                let n = shape.iter().product();
                Tensor::new(shape.to_vec(), (0..n).map(|_| rng.normal()).collect()).unwrap()
            };
            let params = vec![
                rand_t(&[r, c]),
                rand_t(&[c]),
                rand_t(&[r]),
                rand_t(&[c, p]),
                rand_t(&[r]),
            ];
            let target = (case % 2) as f64;
            let report = grad_check(&params, 1e-5, Selection::All, |tape, v| {
                let mv = tape.matvec(v[0], v[1])?; // [r]
                let added = tape.add(mv, v[2])?;
                let act = tape.relu(added);
                let prod = tape.mul(act, v[4])?;
                let vm = tape.vecmat(prod, v[0])?; // [c]
                let mm = tape.matmul(v[0], v[3])?; // [r, p]
                let mm_flat_mean = tape.mean(mm);
                let sm = tape.softmax(vm)?;
                let weighted = tape.mul(sm, v[1])?;
                let cat = tape.concat(&[weighted, v[2], mm_flat_mean])?;
                let m = tape.mean(cat);
                let s = tape.sigmoid(m);
                tape.bce_loss(s, target)
            })
            .unwrap();
            assert!(report.max_rel_error < 1e-6, "case {case}: {report:?}");
        }
    }
}
