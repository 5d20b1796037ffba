//! Parameter storage and the two layer types used by the deep detectors.

use std::rc::Rc;

use rand::Rng as _;

use super::{Adam, CsrMatrix, Gradients, Matrix, Tape, Var};
use crate::error::Result;
use crate::rng::Rng;

/// Uniform Glorot initialization in `[-b, b]`, `b = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let bound = (6.0 / (rows + cols).max(1) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

/// Owns the trainable matrices of one model.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    values: Vec<Matrix>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: Matrix) -> ParamId {
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Matrix] {
        &mut self.values
    }

    pub fn set_values(&mut self, values: Vec<Matrix>) {
        assert_eq!(values.len(), self.values.len());
        self.values = values;
    }

    /// Copies every parameter onto the tape as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        Bound {
            vars: self.values.iter().map(|v| tape.param(v.clone())).collect(),
        }
    }

    /// Gradients for every parameter, zeros where a parameter was unused.
    pub fn collect_grads(&self, bound: &Bound, grads: &mut Gradients) -> Vec<Matrix> {
        bound
            .vars
            .iter()
            .zip(&self.values)
            .map(|(&v, p)| grads.take_or_zeros(v, p))
            .collect()
    }

    /// Runs backward from `loss` and applies one optimizer step.
    pub fn step(&mut self, tape: &Tape, bound: &Bound, loss: Var, opt: &mut Adam) -> Result<()> {
        let mut grads = tape.backward(loss)?;
        let g = self.collect_grads(bound, &mut grads);
        opt.step(&mut self.values, &g);
        Ok(())
    }
}

/// Tape handles for a [`ParamSet`] bound to one tape.
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }
}

/// Fully connected layer `x W + b`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new(params: &mut ParamSet, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        let weight = params.add(glorot(fan_in, fan_out, rng));
        let bias = params.add(Matrix::zeros(1, fan_out));
        Self { weight, bias }
    }

    pub fn forward(&self, tape: &mut Tape, b: &Bound, x: Var) -> Result<Var> {
        let xw = tape.matmul(x, b.var(self.weight))?;
        tape.add_row(xw, b.var(self.bias))
    }
}

/// Graph convolution `A_hat x W + b` with a fixed propagation matrix.
#[derive(Debug, Clone, Copy)]
pub struct GcnLayer {
    pub lin: Linear,
}

impl GcnLayer {
    pub fn new(params: &mut ParamSet, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        Self {
            lin: Linear::new(params, fan_in, fan_out, rng),
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        b: &Bound,
        adj: &Rc<CsrMatrix>,
        x: Var,
    ) -> Result<Var> {
        let xw = tape.matmul(x, b.var(self.lin.weight))?;
        let prop = tape.spmm(adj, xw)?;
        tape.add_row(prop, b.var(self.lin.bias))
    }
}
