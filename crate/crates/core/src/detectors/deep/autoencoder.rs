//! Attribute autoencoders: MLPAE (dense layers) and GCNAE (graph convolutions).

use std::rc::Rc;

use super::{
    check_loss, decoder_dims, encoder_dims, finish_scores, row_errors, DeepParams, FitReport,
    Objective, Pass, Stack,
};
use crate::error::Result;
use crate::graph::AttributedGraph;
use crate::rng;
use crate::tensor::nn::{Bound, ParamSet};
use crate::tensor::{Adam, Matrix, Tape, Var};

pub struct AutoEncoder {
    params: ParamSet,
    enc: Stack,
    dec: Stack,
    x: Rc<Matrix>,
}

impl AutoEncoder {
    pub fn mlp(graph: &AttributedGraph, p: &DeepParams, seed: u64) -> Result<Self> {
        p.validate()?;
        let mut init = rng::seeded(rng::derive(seed, "init"));
        let d = graph.num_features();
        let mut params = ParamSet::new();
        let enc = Stack::mlp(&mut params, &encoder_dims(d, p.hid_dim), true, &mut init);
        let dec = Stack::mlp(&mut params, &decoder_dims(p.hid_dim, d), false, &mut init);
        Ok(Self {
            params,
            enc,
            dec,
            x: Rc::new(graph.features().clone()),
        })
    }

    pub fn gcn(graph: &AttributedGraph, p: &DeepParams, seed: u64) -> Result<Self> {
        p.validate()?;
        let mut init = rng::seeded(rng::derive(seed, "init"));
        let adj = Rc::new(graph.symmetrized().normalized_adjacency());
        let d = graph.num_features();
        let mut params = ParamSet::new();
        let enc = Stack::gcn(&mut params, &encoder_dims(d, p.hid_dim), &adj, true, &mut init);
        let dec = Stack::gcn(&mut params, &decoder_dims(p.hid_dim, d), &adj, false, &mut init);
        Ok(Self {
            params,
            enc,
            dec,
            x: Rc::new(graph.features().clone()),
        })
    }

    fn reconstruct(&self, pass: &mut Pass<'_, '_>, b: &Bound) -> Result<Var> {
        let x = pass.tape.constant((*self.x).clone());
        let h = self.enc.forward(pass, b, x)?;
        self.dec.forward(pass, b, h)
    }

    fn loss_of(&self, tape: &mut Tape, recon: Var) -> Result<Var> {
        let err = tape.sq_error(recon, &self.x, None)?;
        Ok(tape.scale(err, 1.0 / self.x.rows().max(1) as f64))
    }

    /// Per-node reconstruction error in eval mode.
    pub fn scores(&self) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let b = self.params.bind(&mut tape);
        let recon = self.reconstruct(&mut Pass::eval(&mut tape), &b)?;
        Ok(row_errors(tape.value(recon), &self.x, None))
    }

    pub fn train(mut self, p: &DeepParams, seed: u64) -> Result<FitReport> {
        let mut drop = rng::seeded(rng::derive(seed, "dropout"));
        let mut opt = Adam::new(p.lr, p.weight_decay);
        let mut losses = Vec::with_capacity(p.epochs);
        for epoch in 0..p.epochs {
            let mut tape = Tape::new();
            let b = self.params.bind(&mut tape);
            let mut pass = Pass {
                tape: &mut tape,
                dropout: p.dropout,
                rng: Some(&mut drop),
            };
            let recon = self.reconstruct(&mut pass, &b)?;
            let loss = self.loss_of(&mut tape, recon)?;
            losses.push(check_loss(tape.value(loss).item(), epoch)?);
            self.params.step(&tape, &b, loss, &mut opt)?;
        }
        Ok(FitReport {
            scores: finish_scores(self.scores()?, p.epochs)?,
            losses,
            alpha: None,
            aux: Vec::new(),
        })
    }
}

impl Objective for AutoEncoder {
    fn param_sets(&self) -> Vec<&ParamSet> {
        vec![&self.params]
    }

    fn param_sets_mut(&mut self) -> Vec<&mut ParamSet> {
        vec![&mut self.params]
    }

    fn loss(&self, tape: &mut Tape, bound: &[Bound]) -> Result<Var> {
        let recon = self.reconstruct(&mut Pass::eval(tape), &bound[0])?;
        self.loss_of(tape, recon)
    }
}

pub fn mlpae_fit(graph: &AttributedGraph, p: &DeepParams, seed: u64) -> Result<FitReport> {
    AutoEncoder::mlp(graph, p, seed)?.train(p, seed)
}

pub fn gcnae_fit(graph: &AttributedGraph, p: &DeepParams, seed: u64) -> Result<FitReport> {
    AutoEncoder::gcn(graph, p, seed)?.train(p, seed)
}
