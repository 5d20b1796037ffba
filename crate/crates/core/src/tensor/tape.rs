//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every primitive in execution order together with the
//! values it needs for the backward pass. [`Tape::backward`] walks the record
//! in reverse and accumulates gradients into every node that depends on a
//! parameter. Recorded values are never mutated.

use std::rc::Rc;

use rand::Rng as _;

use super::matrix::{gemm, gemm_into};
use super::{CsrMatrix, Matrix};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Lower and upper clamp applied to probabilities inside [`Tape::bce`].
pub const PROB_CLAMP: f64 = 1e-7;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    LeakyRelu(f64),
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
        }
    }

    /// Local derivative given the input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

enum Op {
    Leaf,
    MatMul { a: Var, b: Var, trans_b: bool },
    Gram(Var),
    Spmm { adj: Rc<CsrMatrix>, x: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow { a: Var, bias: Var },
    Scale(Var, f64),
    AddScalar(Var),
    Act(Activation, Var),
    Dropout { x: Var, mask: Matrix },
    Transpose(Var),
    Sum(Var),
    SqError {
        pred: Var,
        target: Rc<Matrix>,
        weight: Option<Rc<Matrix>>,
    },
    Bce {
        pred: Var,
        target: Rc<Matrix>,
        weight: Option<Rc<Matrix>>,
    },
    RowSqDist(Var, Var),
    NeighborDiff {
        h: Var,
        adj: Rc<CsrMatrix>,
        coef: Vec<f64>,
    },
    EdgeDot {
        z: Var,
        edges: Rc<Vec<(usize, usize)>>,
    },
    Attention {
        h: Var,
        src: Var,
        dst: Var,
        adj: Rc<CsrMatrix>,
        slope: f64,
        alpha: Vec<f64>,
        pre: Vec<f64>,
    },
}

struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Removes and returns the gradient of `v`, or zeros shaped like `like`
    /// when `v` did not influence the loss.
    pub fn take_or_zeros(&mut self, v: Var, like: &Matrix) -> Matrix {
        self.grads
            .get_mut(v.0)
            .and_then(Option::take)
            .unwrap_or_else(|| Matrix::zeros(like.rows(), like.cols()))
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn mismatch(op: &'static str, a: &Matrix, b: &Matrix) -> Error {
    Error::ShapeMismatch {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Matrix, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A trainable leaf; gradients flow into it.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A constant leaf; no gradient is tracked.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = gemm(self.value(a), false, self.value(b), false)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::MatMul { a, b, trans_b: false }, ng))
    }

    /// `a * b^T`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = gemm(self.value(a), false, self.value(b), true)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::MatMul { a, b, trans_b: true }, ng))
    }

    /// Inner-product decoder `z * z^T`.
    pub fn gram(&mut self, z: Var) -> Result<Var> {
        let value = gemm(self.value(z), false, self.value(z), true)?;
        let ng = self.ng(z);
        Ok(self.push(value, Op::Gram(z), ng))
    }

    pub fn spmm(&mut self, adj: &Rc<CsrMatrix>, x: Var) -> Result<Var> {
        let value = adj.spmm(self.value(x))?;
        let ng = self.ng(x);
        Ok(self.push(
            value,
            Op::Spmm {
                adj: Rc::clone(adj),
                x,
            },
            ng,
        ))
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(mismatch(name, va, vb));
        }
        let value = va.zip_map(vb, f);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, op, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds the `1 x c` row vector `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(bias));
        if vb.rows() != 1 || vb.cols() != va.cols() {
            return Err(mismatch("add_row", va, vb));
        }
        let mut value = va.clone();
        let b = vb.row(0).to_vec();
        for r in 0..value.rows() {
            for (x, y) in value.row_mut(r).iter_mut().zip(&b) {
                *x += y;
            }
        }
        let ng = self.ng(a) || self.ng(bias);
        Ok(self.push(value, Op::AddRow { a, bias }, ng))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).scaled(s);
        let ng = self.ng(a);
        self.push(value, Op::Scale(a, s), ng)
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).map(|x| x + s);
        let ng = self.ng(a);
        self.push(value, Op::AddScalar(a), ng)
    }

    pub fn act(&mut self, kind: Activation, a: Var) -> Var {
        let value = self.value(a).map(|x| kind.apply(x));
        let ng = self.ng(a);
        self.push(value, Op::Act(kind, a), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.act(Activation::Relu, a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.act(Activation::Sigmoid, a)
    }

    /// Inverted dropout. Identity when `training` is false or `p == 0`.
    pub fn dropout(&mut self, x: Var, p: f64, training: bool, rng: &mut Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::param(format!("dropout rate {p} not in [0, 1)")));
        }
        if !training || p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let v = self.value(x);
        let mask = Matrix::from_fn(v.rows(), v.cols(), |_, _| {
            if rng.random::<f64>() < p {
                0.0
            } else {
                keep
            }
        });
        let value = v.zip_map(&mask, |a, m| a * m);
        let ng = self.ng(x);
        Ok(self.push(value, Op::Dropout { x, mask }, ng))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        let ng = self.ng(a);
        self.push(value, Op::Transpose(a), ng)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        let ng = self.ng(a);
        self.push(value, Op::Sum(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1) as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// `sum(weight * (pred - target)^2)`, unit weights when `weight` is `None`.
    pub fn sq_error(
        &mut self,
        pred: Var,
        target: &Rc<Matrix>,
        weight: Option<&Rc<Matrix>>,
    ) -> Result<Var> {
        let p = self.value(pred);
        if p.shape() != target.shape() {
            return Err(mismatch("sq_error", p, target));
        }
        if let Some(w) = weight {
            if w.shape() != p.shape() {
                return Err(mismatch("sq_error weight", p, w));
            }
        }
        let mut total = 0.0;
        for (i, (a, b)) in p.as_slice().iter().zip(target.as_slice()).enumerate() {
            let w = weight.map_or(1.0, |w| w.as_slice()[i]);
            total += w * (a - b) * (a - b);
        }
        let ng = self.ng(pred);
        Ok(self.push(
            Matrix::scalar(total),
            Op::SqError {
                pred,
                target: Rc::clone(target),
                weight: weight.cloned(),
            },
            ng,
        ))
    }

    /// Binary cross-entropy of probabilities `pred` against `target`,
    /// summed over entries. Probabilities are clamped to
    /// `[PROB_CLAMP, 1 - PROB_CLAMP]`.
    pub fn bce(
        &mut self,
        pred: Var,
        target: &Rc<Matrix>,
        weight: Option<&Rc<Matrix>>,
    ) -> Result<Var> {
        let p = self.value(pred);
        if p.shape() != target.shape() {
            return Err(mismatch("bce", p, target));
        }
        if let Some(w) = weight {
            if w.shape() != p.shape() {
                return Err(mismatch("bce weight", p, w));
            }
        }
        let mut total = 0.0;
        for (i, (&a, &t)) in p.as_slice().iter().zip(target.as_slice()).enumerate() {
            let w = weight.map_or(1.0, |w| w.as_slice()[i]);
            let q = a.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            total -= w * (t * q.ln() + (1.0 - t) * (1.0 - q).ln());
        }
        let ng = self.ng(pred);
        Ok(self.push(
            Matrix::scalar(total),
            Op::Bce {
                pred,
                target: Rc::clone(target),
                weight: weight.cloned(),
            },
            ng,
        ))
    }

    /// Per-row squared distance `||a_i - b_i||^2` as an `n x 1` column.
    pub fn row_sq_dist(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(mismatch("row_sq_dist", va, vb));
        }
        let d = va
            .iter_rows()
            .zip(vb.iter_rows())
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum())
            .collect();
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Matrix::column(d), Op::RowSqDist(a, b), ng))
    }

    /// Weighted neighbor smoothness
    /// `sum_i node_weight_i / |N(i)| * sum_{j in N(i)} ||h_i - h_j||^2`
    /// over the sparsity pattern of `adj` (values ignored, diagonal skipped).
    pub fn neighbor_diff(
        &mut self,
        h: Var,
        adj: &Rc<CsrMatrix>,
        node_weights: &[f64],
    ) -> Result<Var> {
        let hv = self.value(h);
        if adj.rows() != hv.rows() || adj.cols() != hv.rows() || node_weights.len() != hv.rows() {
            return Err(Error::ShapeMismatch {
                op: "neighbor_diff",
                left: (adj.rows(), adj.cols()),
                right: hv.shape(),
            });
        }
        let mut coef = vec![0.0; hv.rows()];
        let mut total = 0.0;
        for i in 0..hv.rows() {
            let deg = adj.row(i).filter(|&(j, _)| j != i).count();
            if deg == 0 {
                continue;
            }
            coef[i] = node_weights[i] / deg as f64;
            let hi = hv.row(i);
            let mut acc = 0.0;
            for (j, _) in adj.row(i).filter(|&(j, _)| j != i) {
                acc += hi
                    .iter()
                    .zip(hv.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
            }
            total += coef[i] * acc;
        }
        let ng = self.ng(h);
        Ok(self.push(
            Matrix::scalar(total),
            Op::NeighborDiff {
                h,
                adj: Rc::clone(adj),
                coef,
            },
            ng,
        ))
    }

    /// Dot products `z_u . z_v` for each listed pair, as an `E x 1` column.
    pub fn edge_dot(&mut self, z: Var, edges: &Rc<Vec<(usize, usize)>>) -> Result<Var> {
        let zv = self.value(z);
        if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= zv.rows() || v >= zv.rows()) {
            return Err(Error::NodeOutOfRange {
                index: u.max(v),
                num_nodes: zv.rows(),
            });
        }
        let out = edges
            .iter()
            .map(|&(u, v)| zv.row(u).iter().zip(zv.row(v)).map(|(a, b)| a * b).sum())
            .collect();
        let ng = self.ng(z);
        Ok(self.push(
            Matrix::column(out),
            Op::EdgeDot {
                z,
                edges: Rc::clone(edges),
            },
            ng,
        ))
    }

    /// Single-head additive graph attention:
    /// `e_ij = leaky(src_i + dst_j)`, `a_ij = softmax_j(e_ij)` over the
    /// pattern of row `i` of `adj`, output row `i = sum_j a_ij h_j`.
    pub fn attention(
        &mut self,
        h: Var,
        src: Var,
        dst: Var,
        adj: &Rc<CsrMatrix>,
        slope: f64,
    ) -> Result<Var> {
        let (hv, sv, dv) = (self.value(h), self.value(src), self.value(dst));
        let n = hv.rows();
        if sv.shape() != (n, 1) || dv.shape() != (n, 1) || adj.rows() != n || adj.cols() != n {
            return Err(Error::ShapeMismatch {
                op: "attention",
                left: hv.shape(),
                right: sv.shape(),
            });
        }
        let mut alpha = Vec::with_capacity(adj.nnz());
        let mut pre = Vec::with_capacity(adj.nnz());
        let mut out = Matrix::zeros(n, hv.cols());
        for i in 0..n {
            let start = pre.len();
            for (j, _) in adj.row(i) {
                pre.push(sv[(i, 0)] + dv[(j, 0)]);
            }
            let logits: Vec<f64> = pre[start..]
                .iter()
                .map(|&x| Activation::LeakyRelu(slope).apply(x))
                .collect();
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            let dst_row = out.row_mut(i);
            for ((j, _), e) in adj.row(i).zip(&exps) {
                let a = e / z;
                alpha.push(a);
                for (o, x) in dst_row.iter_mut().zip(hv.row(j)) {
                    *o += a * x;
                }
            }
        }
        let ng = self.ng(h) || self.ng(src) || self.ng(dst);
        Ok(self.push(
            out,
            Op::Attention {
                h,
                src,
                dst,
                adj: Rc::clone(adj),
                slope,
                alpha,
                pre,
            },
            ng,
        ))
    }

    /// Reverse pass from a `1 x 1` loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::ShapeMismatch {
                op: "backward",
                left: lv.shape(),
                right: (1, 1),
            });
        }
        let mut grads: Vec<Option<Matrix>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.backprop(node, &g, &mut grads);
            // Keep the loss gradient and leaf gradients; intermediates are
            // dropped once consumed.
            if idx == loss.0 {
                grads[idx] = Some(g);
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
        if !self.ng(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn backprop(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b, trans_b } => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.ng(*a) {
                    // c = a b   -> ga = g b^T ;  c = a b^T -> ga = g b
                    let ga = gemm(g, false, vb, !*trans_b).expect("matmul backward");
                    self.accumulate(grads, *a, ga);
                }
                if self.ng(*b) {
                    // c = a b   -> gb = a^T g ;  c = a b^T -> gb = g^T a
                    let gb = if *trans_b {
                        gemm(g, true, va, false)
                    } else {
                        gemm(va, true, g, false)
                    }
                    .expect("matmul backward");
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Gram(z) => {
                let zv = self.value(*z);
                let sym = g.zip_map(&g.transpose(), |x, y| x + y);
                let mut gz = Matrix::zeros(zv.rows(), zv.cols());
                gemm_into(1.0, &sym, false, zv, false, 0.0, &mut gz);
                self.accumulate(grads, *z, gz);
            }
            Op::Spmm { adj, x } => {
                let gx = adj.transpose().spmm(g).expect("spmm backward");
                self.accumulate(grads, *x, gx);
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.scaled(-1.0));
            }
            Op::Mul(a, b) => {
                if self.ng(*a) {
                    self.accumulate(grads, *a, g.zip_map(self.value(*b), |x, y| x * y));
                }
                if self.ng(*b) {
                    self.accumulate(grads, *b, g.zip_map(self.value(*a), |x, y| x * y));
                }
            }
            Op::AddRow { a, bias } => {
                self.accumulate(grads, *a, g.clone());
                if self.ng(*bias) {
                    let sums = Matrix::from_vec(1, g.cols(), {
                        let mut s = vec![0.0; g.cols()];
                        for r in g.iter_rows() {
                            for (acc, v) in s.iter_mut().zip(r) {
                                *acc += v;
                            }
                        }
                        s
                    })
                    .expect("bias shape");
                    self.accumulate(grads, *bias, sums);
                }
            }
            Op::Scale(a, s) => self.accumulate(grads, *a, g.scaled(*s)),
            Op::AddScalar(a) => self.accumulate(grads, *a, g.clone()),
            Op::Act(kind, a) => {
                let x = self.value(*a);
                let y = &node.value;
                let mut out = g.clone();
                for ((o, &xv), &yv) in out.as_mut_slice().iter_mut().zip(x.as_slice()).zip(y.as_slice()) {
                    *o *= kind.derivative(xv, yv);
                }
                self.accumulate(grads, *a, out);
            }
            Op::Dropout { x, mask } => {
                self.accumulate(grads, *x, g.zip_map(mask, |a, m| a * m));
            }
            Op::Transpose(a) => self.accumulate(grads, *a, g.transpose()),
            Op::Sum(a) => {
                let v = self.value(*a);
                self.accumulate(grads, *a, Matrix::filled(v.rows(), v.cols(), g.item()));
            }
            Op::SqError {
                pred,
                target,
                weight,
            } => {
                let gs = g.item();
                let p = self.value(*pred);
                let mut out = p.zip_map(target, |a, b| 2.0 * gs * (a - b));
                if let Some(w) = weight {
                    for (o, wv) in out.as_mut_slice().iter_mut().zip(w.as_slice()) {
                        *o *= wv;
                    }
                }
                self.accumulate(grads, *pred, out);
            }
            Op::Bce {
                pred,
                target,
                weight,
            } => {
                let gs = g.item();
                let p = self.value(*pred);
                let mut out = p.zip_map(target, |a, t| {
                    if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&a) {
                        0.0
                    } else {
                        -gs * (t / a - (1.0 - t) / (1.0 - a))
                    }
                });
                if let Some(w) = weight {
                    for (o, wv) in out.as_mut_slice().iter_mut().zip(w.as_slice()) {
                        *o *= wv;
                    }
                }
                self.accumulate(grads, *pred, out);
            }
            Op::RowSqDist(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let mut ga = va.zip_map(vb, |x, y| 2.0 * (x - y));
                for r in 0..ga.rows() {
                    let s = g[(r, 0)];
                    for v in ga.row_mut(r) {
                        *v *= s;
                    }
                }
                if self.ng(*b) {
                    self.accumulate(grads, *b, ga.scaled(-1.0));
                }
                self.accumulate(grads, *a, ga);
            }
            Op::NeighborDiff { h, adj, coef } => {
                let gs = g.item();
                let hv = self.value(*h);
                let mut gh = Matrix::zeros(hv.rows(), hv.cols());
                for i in 0..hv.rows() {
                    if coef[i] == 0.0 {
                        continue;
                    }
                    let c = 2.0 * gs * coef[i];
                    for (j, _) in adj.row(i).filter(|&(j, _)| j != i) {
                        for k in 0..hv.cols() {
                            let d = c * (hv[(i, k)] - hv[(j, k)]);
                            gh[(i, k)] += d;
                            gh[(j, k)] -= d;
                        }
                    }
                }
                self.accumulate(grads, *h, gh);
            }
            Op::EdgeDot { z, edges } => {
                let zv = self.value(*z);
                let mut gz = Matrix::zeros(zv.rows(), zv.cols());
                for (e, &(u, v)) in edges.iter().enumerate() {
                    let ge = g[(e, 0)];
                    for k in 0..zv.cols() {
                        gz[(u, k)] += ge * zv[(v, k)];
                        gz[(v, k)] += ge * zv[(u, k)];
                    }
                }
                self.accumulate(grads, *z, gz);
            }
            Op::Attention {
                h,
                src,
                dst,
                adj,
                slope,
                alpha,
                pre,
            } => {
                let hv = self.value(*h);
                let n = hv.rows();
                let mut gh = Matrix::zeros(n, hv.cols());
                let mut gsrc = Matrix::zeros(n, 1);
                let mut gdst = Matrix::zeros(n, 1);
                let mut e = 0;
                for i in 0..n {
                    let gi = g.row(i);
                    let start = e;
                    let mut galpha = Vec::new();
                    for (j, _) in adj.row(i) {
                        let a = alpha[e];
                        let hj = hv.row(j);
                        galpha.push(gi.iter().zip(hj).map(|(x, y)| x * y).sum::<f64>());
                        for (o, x) in gh.row_mut(j).iter_mut().zip(gi) {
                            *o += a * x;
                        }
                        e += 1;
                    }
                    let dot: f64 = alpha[start..e].iter().zip(&galpha).map(|(a, b)| a * b).sum();
                    for (k, (j, _)) in adj.row(i).enumerate() {
                        let idx = start + k;
                        let glogit = alpha[idx] * (galpha[k] - dot);
                        let x = pre[idx];
                        let gpre = glogit * if x > 0.0 { 1.0 } else { *slope };
                        gsrc[(i, 0)] += gpre;
                        gdst[(j, 0)] += gpre;
                    }
                }
                self.accumulate(grads, *h, gh);
                self.accumulate(grads, *src, gsrc);
                self.accumulate(grads, *dst, gdst);
            }
        }
    }
}

/// Per-row `sum_k weight_ik (pred_ik - target_ik)^2`, evaluated outside any tape.
pub fn row_sq_errors(pred: &Matrix, target: &Matrix, weight: Option<&Matrix>) -> Vec<f64> {
    debug_assert_eq!(pred.shape(), target.shape());
    (0..pred.rows())
        .map(|r| {
            let p = pred.row(r);
            let t = target.row(r);
            match weight {
                Some(w) => p
                    .iter()
                    .zip(t)
                    .zip(w.row(r))
                    .map(|((a, b), w)| w * (a - b) * (a - b))
                    .sum(),
                None => p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum(),
            }
        })
        .collect()
}
