//! DOMINANT: shared GCN encoder with attribute and structure decoders.

use std::rc::Rc;

use super::{
    blend, check_loss, decoder_dims, encoder_dims, finish_scores, resolve_alpha, row_errors,
    DeepParams, FitReport, Objective, Pass, Stack,
};
use crate::error::Result;
use crate::graph::AttributedGraph;
use crate::rng;
use crate::tensor::nn::{Bound, ParamSet};
use crate::tensor::{Adam, CsrMatrix, Matrix, Tape, Var};

/// Largest graph whose dense adjacency the structure decoders will build.
pub const DENSE_CAP: usize = 20_000;

pub struct Dominant {
    pub(crate) params: ParamSet,
    enc: Stack,
    attr_dec: Stack,
    struct_dec: Stack,
    pub(crate) x: Rc<Matrix>,
    a: Rc<Matrix>,
    /// Attribute weight; resolved on the first training epoch when automatic.
    pub(crate) alpha: f64,
}

/// Decoder outputs of one pass.
pub(crate) struct Recon {
    pub h: Var,
    pub x_hat: Var,
    pub a_hat: Var,
}

impl Dominant {
    pub fn new(graph: &AttributedGraph, p: &DeepParams, seed: u64) -> Result<Self> {
        p.validate()?;
        let g = graph.symmetrized();
        let a = g.dense_adjacency(DENSE_CAP)?;
        let adj = Rc::new(g.normalized_adjacency());
        let mut init = rng::seeded(rng::derive(seed, "init"));
        let d = g.num_features();
        let h = p.hid_dim;
        let mut params = ParamSet::new();
        let enc = Stack::gcn(&mut params, &encoder_dims(d, h), &adj, true, &mut init);
        let attr_dec = Stack::gcn(&mut params, &decoder_dims(h, d), &adj, false, &mut init);
        let struct_dec = Stack::gcn(&mut params, &[h, h], &adj, false, &mut init);
        Ok(Self {
            params,
            enc,
            attr_dec,
            struct_dec,
            x: Rc::new(g.features().clone()),
            a: Rc::new(a),
            alpha: super::initial_alpha(p.alpha),
        })
    }

    pub(crate) fn encode_with(
        &self,
        pass: &mut Pass<'_, '_>,
        b: &Bound,
        adj: &Rc<CsrMatrix>,
        x: &Matrix,
    ) -> Result<Var> {
        let x = pass.tape.constant(x.clone());
        self.enc.with_adj(adj).forward(pass, b, x)
    }

    pub(crate) fn forward(&self, pass: &mut Pass<'_, '_>, b: &Bound) -> Result<Recon> {
        let x = pass.tape.constant((*self.x).clone());
        let h = self.enc.forward(pass, b, x)?;
        let x_hat = self.attr_dec.forward(pass, b, h)?;
        let z = self.struct_dec.forward(pass, b, h)?;
        // Linear inner-product decoder: a logistic link keeps every entry
        // near 0.5 and hides degree from the row errors.
        let a_hat = pass.tape.gram(z)?;
        Ok(Recon { h, x_hat, a_hat })
    }

    /// Per-node attribute and structure errors of a pass.
    pub(crate) fn errors(&self, tape: &Tape, r: &Recon) -> (Vec<f64>, Vec<f64>) {
        (
            row_errors(tape.value(r.x_hat), &self.x, None),
            row_errors(tape.value(r.a_hat), &self.a, None),
        )
    }

    pub(crate) fn recon_loss(&self, tape: &mut Tape, r: &Recon) -> Result<Var> {
        let n = self.x.rows().max(1) as f64;
        let ea = tape.sq_error(r.x_hat, &self.x, None)?;
        let es = tape.sq_error(r.a_hat, &self.a, None)?;
        let ea = tape.scale(ea, self.alpha / n);
        let es = tape.scale(es, (1.0 - self.alpha) / n);
        tape.add(ea, es)
    }

    pub(crate) fn scores(&self) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let b = self.params.bind(&mut tape);
        let r = self.forward(&mut Pass::eval(&mut tape), &b)?;
        let (ea, es) = self.errors(&tape, &r);
        Ok(blend(self.alpha, &ea, &es))
    }

    pub fn train(mut self, p: &DeepParams, seed: u64) -> Result<FitReport> {
        let mut drop = rng::seeded(rng::derive(seed, "dropout"));
        let mut opt = Adam::new(p.lr, p.weight_decay);
        let mut losses = Vec::with_capacity(p.epochs);
        let warmup = super::warmup_epochs(p.epochs);
        for epoch in 0..p.epochs {
            let mut tape = Tape::new();
            let b = self.params.bind(&mut tape);
            let mut pass = Pass {
                tape: &mut tape,
                dropout: p.dropout,
                rng: Some(&mut drop),
            };
            let r = self.forward(&mut pass, &b)?;
            if epoch == warmup {
                let (ea, es) = self.errors(&tape, &r);
                self.alpha = resolve_alpha(p.alpha, &ea, &es);
            }
            let loss = self.recon_loss(&mut tape, &r)?;
            losses.push(check_loss(tape.value(loss).item(), epoch)?);
            self.params.step(&tape, &b, loss, &mut opt)?;
        }
        Ok(FitReport {
            scores: finish_scores(self.scores()?, p.epochs)?,
            losses,
            alpha: Some(self.alpha),
            aux: Vec::new(),
        })
    }
}

impl Objective for Dominant {
    fn param_sets(&self) -> Vec<&ParamSet> {
        vec![&self.params]
    }

    fn param_sets_mut(&mut self) -> Vec<&mut ParamSet> {
        vec![&mut self.params]
    }

    fn loss(&self, tape: &mut Tape, bound: &[Bound]) -> Result<Var> {
        let r = self.forward(&mut Pass::eval(tape), &bound[0])?;
        self.recon_loss(tape, &r)
    }
}

pub fn dominant_fit(graph: &AttributedGraph, p: &DeepParams, seed: u64) -> Result<FitReport> {
    Dominant::new(graph, p, seed)?.train(p, seed)
}
