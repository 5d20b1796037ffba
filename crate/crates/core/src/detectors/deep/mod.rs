//! Reconstruction-based deep detectors trained full-batch with Adam.
//!
//! Every model is built from two-layer encoder and decoder stacks of width
//! `hid_dim`. Losses are averaged over nodes. Each model implements
//! [`Objective`], which exposes its full training loss (dropout off) as a
//! function of its parameters for gradient checking.

use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use crate::detectors::params::Reader;
use crate::error::{Error, Result};
use crate::graph::ScoreVector;
use crate::rng::Rng;
use crate::tensor::nn::{Bound, Linear, ParamSet};
use crate::tensor::{CsrMatrix, Matrix, Tape, Var};

pub mod anomalydae;
pub mod autoencoder;
pub mod conad;
pub mod dominant;
pub mod done;
pub mod gaan;
pub mod guide;

/// Weight of the attribute term in dual-objective detectors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Alpha {
    /// Balance the two terms by the spread of their first-epoch errors.
    #[default]
    Auto,
    Fixed(f64),
}

impl FromStr for Alpha {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Alpha::Auto);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::param(format!("alpha must be 'auto' or a number, got '{s}'")))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::param("alpha must lie in [0, 1]"));
        }
        Ok(Alpha::Fixed(v))
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Auto => f.write_str("auto"),
            Alpha::Fixed(v) => write!(f, "{v}"),
        }
    }
}

fn population_std(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// Attribute weight for a dual objective.
///
/// `Auto` picks `sigma_s / (sigma_a + sigma_s)` so both weighted error
/// vectors have the same spread; 0.5 when neither varies.
pub fn resolve_alpha(alpha: Alpha, attr_errors: &[f64], struct_errors: &[f64]) -> f64 {
    match alpha {
        Alpha::Fixed(v) => v,
        Alpha::Auto => {
            let (sa, ss) = (population_std(attr_errors), population_std(struct_errors));
            if sa + ss == 0.0 {
                0.5
            } else {
                ss / (sa + ss)
            }
        }
    }
}

/// Attribute weight used before automatic balancing takes over.
pub(crate) fn initial_alpha(alpha: Alpha) -> f64 {
    match alpha {
        Alpha::Fixed(v) => v,
        Alpha::Auto => 0.5,
    }
}

/// Epochs trained at the initial weight before `Auto` is resolved. Freshly
/// initialized decoders have error spreads unrelated to the trained model,
/// so balancing happens after a tenth of training.
pub fn warmup_epochs(epochs: usize) -> usize {
    epochs / 10
}

/// Hyperparameters shared by every deep detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeepParams {
    pub hid_dim: usize,
    pub lr: f64,
    pub dropout: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub alpha: Alpha,
}

impl Default for DeepParams {
    fn default() -> Self {
        Self {
            hid_dim: 64,
            lr: 0.01,
            dropout: 0.0,
            weight_decay: 0.0,
            epochs: 100,
            alpha: Alpha::Auto,
        }
    }
}

impl DeepParams {
    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self> {
        let d = Self::default();
        let p = Self {
            hid_dim: r.get("hid_dim", d.hid_dim)?,
            lr: r.get("lr", d.lr)?,
            dropout: r.get("dropout", d.dropout)?,
            weight_decay: r.get("weight_decay", d.weight_decay)?,
            epochs: r.get("epochs", d.epochs)?,
            alpha: r.get("alpha", d.alpha)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hid_dim == 0 || self.epochs == 0 {
            return Err(Error::param("hid_dim and epochs must be >= 1"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::param("lr must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::param("dropout must lie in [0, 1)"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::param("weight_decay must be >= 0"));
        }
        if let Alpha::Fixed(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::param("alpha must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Outcome of one deep training run.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub scores: ScoreVector,
    /// Training loss per epoch.
    pub losses: Vec<f64>,
    /// Attribute weight after resolution, for dual-objective models.
    pub alpha: Option<f64>,
    /// Detector-specific per-epoch trace (discriminator or margin loss).
    pub aux: Vec<f64>,
}

/// A model whose training loss can be evaluated as a pure function of its
/// parameters.
pub trait Objective {
    fn param_sets(&self) -> Vec<&ParamSet>;
    fn param_sets_mut(&mut self) -> Vec<&mut ParamSet>;
    /// Total loss with dropout disabled and any per-epoch state held fixed.
    fn loss(&self, tape: &mut Tape, bound: &[Bound]) -> Result<Var>;

    fn bind(&self, tape: &mut Tape) -> Vec<Bound> {
        self.param_sets().iter().map(|p| p.bind(tape)).collect()
    }
}

/// Adds uniform noise in `[-scale, scale]` to every parameter. Zero-initialized
/// biases put ReLU inputs exactly on the kink; gradient checks jitter first.
pub fn jitter_params(model: &mut dyn Objective, scale: f64, rng: &mut Rng) {
    use rand::Rng as _;

    for set in model.param_sets_mut() {
        for m in set.values_mut() {
            for v in m.as_mut_slice() {
                *v += rng.random_range(-scale..=scale);
            }
        }
    }
}

/// Relative discrepancy between the analytic gradient of `model`'s loss and
/// central finite differences with step `h`, over up to `per_param` random
/// entries of every parameter matrix: `||g - f|| / (||g|| + ||f||)`.
pub fn gradient_check(
    model: &mut dyn Objective,
    per_param: usize,
    h: f64,
    rng: &mut Rng,
) -> Result<f64> {
    use rand::seq::index;

    let eval = |m: &dyn Objective| -> Result<f64> {
        let mut tape = Tape::new();
        let bound = m.bind(&mut tape);
        let loss = m.loss(&mut tape, &bound)?;
        Ok(tape.value(loss).item())
    };
    let analytic: Vec<Vec<Matrix>> = {
        let mut tape = Tape::new();
        let bound = model.bind(&mut tape);
        let loss = model.loss(&mut tape, &bound)?;
        let mut grads = tape.backward(loss)?;
        model
            .param_sets()
            .iter()
            .zip(&bound)
            .map(|(set, b)| set.collect_grads(b, &mut grads))
            .collect()
    };
    let shapes: Vec<Vec<usize>> = model
        .param_sets()
        .iter()
        .map(|s| s.values().iter().map(Matrix::len).collect())
        .collect();
    let (mut diff, mut norm) = (0.0, 0.0);
    for (si, lens) in shapes.iter().enumerate() {
        for (pi, &len) in lens.iter().enumerate() {
            let picks = index::sample(rng, len, per_param.min(len));
            for i in picks {
                let set = |m: &mut dyn Objective, v: f64| {
                    m.param_sets_mut()[si].values_mut()[pi].as_mut_slice()[i] = v;
                };
                let orig = model.param_sets()[si].values()[pi].as_slice()[i];
                set(model, orig + h);
                let up = eval(model);
                set(model, orig - h);
                let down = eval(model);
                set(model, orig);
                let numeric = (up? - down?) / (2.0 * h);
                let a = analytic[si][pi].as_slice()[i];
                diff += (a - numeric) * (a - numeric);
                norm += a * a + numeric * numeric;
            }
        }
    }
    Ok(diff.sqrt() / norm.sqrt().max(1e-12))
}

/// One forward pass: the tape plus dropout state.
pub(crate) struct Pass<'t, 'r> {
    pub tape: &'t mut Tape,
    pub dropout: f64,
    pub rng: Option<&'r mut Rng>,
}

impl<'t> Pass<'t, '_> {
    pub fn eval(tape: &'t mut Tape) -> Self {
        Pass {
            tape,
            dropout: 0.0,
            rng: None,
        }
    }

    pub fn drop(&mut self, x: Var) -> Result<Var> {
        match self.rng.as_deref_mut() {
            Some(rng) if self.dropout > 0.0 => self.tape.dropout(x, self.dropout, true, rng),
            _ => Ok(x),
        }
    }
}

/// Stack of dense or graph-convolution layers with ReLU in between.
#[derive(Debug, Clone)]
pub(crate) struct Stack {
    layers: Vec<Linear>,
    adj: Option<Rc<CsrMatrix>>,
    final_act: bool,
}

impl Stack {
    pub fn mlp(params: &mut ParamSet, dims: &[usize], final_act: bool, rng: &mut Rng) -> Self {
        Self::build(params, dims, None, final_act, rng)
    }

    pub fn gcn(
        params: &mut ParamSet,
        dims: &[usize],
        adj: &Rc<CsrMatrix>,
        final_act: bool,
        rng: &mut Rng,
    ) -> Self {
        Self::build(params, dims, Some(Rc::clone(adj)), final_act, rng)
    }

    fn build(
        params: &mut ParamSet,
        dims: &[usize],
        adj: Option<Rc<CsrMatrix>>,
        final_act: bool,
        rng: &mut Rng,
    ) -> Self {
        let layers = dims
            .windows(2)
            .map(|w| Linear::new(params, w[0], w[1], rng))
            .collect();
        Self {
            layers,
            adj,
            final_act,
        }
    }

    /// Same layers propagating over a different graph.
    pub fn with_adj(&self, adj: &Rc<CsrMatrix>) -> Self {
        Self {
            adj: Some(Rc::clone(adj)),
            ..self.clone()
        }
    }

    pub fn forward(&self, pass: &mut Pass<'_, '_>, b: &Bound, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                h = pass.drop(h)?;
            }
            h = pass.tape.matmul(h, b.var(layer.weight))?;
            if let Some(adj) = &self.adj {
                h = pass.tape.spmm(adj, h)?;
            }
            h = pass.tape.add_row(h, b.var(layer.bias))?;
            if i + 1 < self.layers.len() || self.final_act {
                h = pass.tape.relu(h);
            }
        }
        Ok(h)
    }
}

/// Encoder `in -> hid -> hid` with activations.
pub(crate) fn encoder_dims(input: usize, hid: usize) -> [usize; 3] {
    [input, hid, hid]
}

/// Decoder `hid -> hid -> out`, linear output.
pub(crate) fn decoder_dims(hid: usize, output: usize) -> [usize; 3] {
    [hid, hid, output]
}

/// `||pred_i - target_i||_2` per row.
pub(crate) fn row_errors(pred: &Matrix, target: &Matrix, weight: Option<&Matrix>) -> Vec<f64> {
    crate::tensor::row_sq_errors(pred, target, weight)
        .into_iter()
        .map(f64::sqrt)
        .collect()
}

/// `alpha * a + (1 - alpha) * s` elementwise.
pub(crate) fn blend(alpha: f64, a: &[f64], s: &[f64]) -> Vec<f64> {
    a.iter()
        .zip(s)
        .map(|(x, y)| alpha * x + (1.0 - alpha) * y)
        .collect()
}

pub(crate) fn check_loss(value: f64, epoch: usize) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Divergence { epoch })
    }
}

/// Scores must be finite; anything else means training blew up.
pub(crate) fn finish_scores(scores: Vec<f64>, epochs: usize) -> Result<ScoreVector> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Divergence { epoch: epochs });
    }
    ScoreVector::new(scores)
}

/// `sum_i w_i ||a_i - b_i||^2` on the tape.
pub(crate) fn weighted_rows(tape: &mut Tape, a: Var, b: Var, w: &[f64]) -> Result<Var> {
    let d = tape.row_sq_dist(a, b)?;
    let w = tape.constant(Matrix::column(w.to_vec()));
    let prod = tape.mul(d, w)?;
    Ok(tape.sum(prod))
}
