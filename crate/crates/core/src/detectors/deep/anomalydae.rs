//! AnomalyDAE: attention-based structure encoder and an attribute encoder
//! over the transposed feature matrix, decoded jointly.

use std::rc::Rc;

use super::dominant::DENSE_CAP;
use super::{
    blend, check_loss, finish_scores, resolve_alpha, row_errors, DeepParams, FitReport, Objective,
    Pass, Stack,
};
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::rng;
use crate::tensor::nn::{glorot, Bound, Linear, ParamId, ParamSet};
use crate::tensor::{Adam, CsrMatrix, Matrix, Tape, Var};

/// Negative slope of the attention logits.
const ATTENTION_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalyDaeParams {
    /// Weight on nonzero adjacency entries.
    pub theta: f64,
    /// Weight on nonzero feature entries.
    pub eta: f64,
}

impl Default for AnomalyDaeParams {
    fn default() -> Self {
        Self {
            theta: 10.0,
            eta: 3.0,
        }
    }
}

/// `weight` where `m` is nonzero, 1 elsewhere.
pub fn penalty_mask(m: &Matrix, weight: f64) -> Matrix {
    m.map(|v| if v != 0.0 { weight } else { 1.0 })
}

pub struct AnomalyDae {
    params: ParamSet,
    feat: Linear,
    embed: Linear,
    att_src: ParamId,
    att_dst: ParamId,
    attr_enc: Stack,
    pattern: Rc<CsrMatrix>,
    x: Rc<Matrix>,
    a: Rc<Matrix>,
    /// Squared masks, so the loss is `||(A - A_hat) . Theta||_F^2`.
    theta_sq: Rc<Matrix>,
    eta_sq: Rc<Matrix>,
    alpha: f64,
}

struct Recon {
    x_hat: Var,
    a_hat: Var,
}

impl AnomalyDae {
    pub fn new(
        graph: &AttributedGraph,
        p: &DeepParams,
        q: &AnomalyDaeParams,
        seed: u64,
    ) -> Result<Self> {
        p.validate()?;
        if !(q.theta >= 1.0 && q.eta >= 1.0) {
            return Err(Error::param("theta and eta must be >= 1"));
        }
        let g = graph.symmetrized();
        let (n, d, h) = (g.num_nodes(), g.num_features(), p.hid_dim);
        let a = g.dense_adjacency(DENSE_CAP)?;
        let x = g.features().clone();
        let mut init = rng::seeded(rng::derive(seed, "init"));
        let mut params = ParamSet::new();
        let feat = Linear::new(&mut params, d, h, &mut init);
        let embed = Linear::new(&mut params, h, h, &mut init);
        let att_src = params.add(glorot(h, 1, &mut init));
        let att_dst = params.add(glorot(h, 1, &mut init));
        let attr_enc = Stack::mlp(&mut params, &[n, h, h], false, &mut init);
        let theta_sq = penalty_mask(&a, q.theta).map(|w| w * w);
        let eta_sq = penalty_mask(&x, q.eta).map(|w| w * w);
        Ok(Self {
            params,
            feat,
            embed,
            att_src,
            att_dst,
            attr_enc,
            pattern: Rc::new(g.adjacency(true)),
            x: Rc::new(x),
            a: Rc::new(a),
            theta_sq: Rc::new(theta_sq),
            eta_sq: Rc::new(eta_sq),
            alpha: super::initial_alpha(p.alpha),
        })
    }

    fn forward(&self, pass: &mut Pass<'_, '_>, b: &Bound) -> Result<Recon> {
        let x = pass.tape.constant((*self.x).clone());
        let h = self.feat.forward(pass.tape, b, x)?;
        let h = pass.tape.relu(h);
        let h = pass.drop(h)?;
        let g = self.embed.forward(pass.tape, b, h)?;
        let src = pass.tape.matmul(g, b.var(self.att_src))?;
        let dst = pass.tape.matmul(g, b.var(self.att_dst))?;
        let zv = pass.tape.attention(g, src, dst, &self.pattern, ATTENTION_SLOPE)?;

        let xt = pass.tape.constant(self.x.transpose());
        let za = self.attr_enc.forward(pass, b, xt)?;

        let x_hat = pass.tape.matmul_nt(zv, za)?;
        let logits = pass.tape.gram(zv)?;
        let a_hat = pass.tape.sigmoid(logits);
        Ok(Recon { x_hat, a_hat })
    }

    fn errors(&self, tape: &Tape, r: &Recon) -> (Vec<f64>, Vec<f64>) {
        (
            row_errors(tape.value(r.x_hat), &self.x, Some(&self.eta_sq)),
            row_errors(tape.value(r.a_hat), &self.a, Some(&self.theta_sq)),
        )
    }

    fn loss_of(&self, tape: &mut Tape, r: &Recon) -> Result<Var> {
        let n = self.x.rows().max(1) as f64;
        let es = tape.sq_error(r.a_hat, &self.a, Some(&self.theta_sq))?;
        let ea = tape.sq_error(r.x_hat, &self.x, Some(&self.eta_sq))?;
        let total = tape.add(es, ea)?;
        Ok(tape.scale(total, 1.0 / n))
    }

    pub fn train(mut self, p: &DeepParams, seed: u64) -> Result<FitReport> {
        let mut drop = rng::seeded(rng::derive(seed, "dropout"));
        let mut opt = Adam::new(p.lr, p.weight_decay);
        let mut losses = Vec::with_capacity(p.epochs);
        let warmup = super::warmup_epochs(p.epochs);
        for epoch in 0..p.epochs {
            let mut tape = Tape::new();
            let b = self.params.bind(&mut tape);
            let r = self.forward(
                &mut Pass {
                    tape: &mut tape,
                    dropout: p.dropout,
                    rng: Some(&mut drop),
                },
                &b,
            )?;
            if epoch == warmup {
                let (ea, es) = self.errors(&tape, &r);
                self.alpha = resolve_alpha(p.alpha, &ea, &es);
            }
            let loss = self.loss_of(&mut tape, &r)?;
            losses.push(check_loss(tape.value(loss).item(), epoch)?);
            self.params.step(&tape, &b, loss, &mut opt)?;
        }
        let mut tape = Tape::new();
        let b = self.params.bind(&mut tape);
        let r = self.forward(&mut Pass::eval(&mut tape), &b)?;
        let (ea, es) = self.errors(&tape, &r);
        Ok(FitReport {
            scores: finish_scores(blend(self.alpha, &ea, &es), p.epochs)?,
            losses,
            alpha: Some(self.alpha),
            aux: Vec::new(),
        })
    }
}

impl Objective for AnomalyDae {
    fn param_sets(&self) -> Vec<&ParamSet> {
        vec![&self.params]
    }

    fn param_sets_mut(&mut self) -> Vec<&mut ParamSet> {
        vec![&mut self.params]
    }

    fn loss(&self, tape: &mut Tape, bound: &[Bound]) -> Result<Var> {
        let r = self.forward(&mut Pass::eval(tape), &bound[0])?;
        self.loss_of(tape, &r)
    }
}

pub fn anomalydae_fit(
    graph: &AttributedGraph,
    p: &DeepParams,
    q: &AnomalyDaeParams,
    seed: u64,
) -> Result<FitReport> {
    AnomalyDae::new(graph, p, q, seed)?.train(p, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_marks_exactly_the_nonzeros() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(penalty_mask(&a, 10.0).as_slice(), &[1.0, 10.0, 10.0, 1.0]);
        assert_eq!(penalty_mask(&a, 1.0), Matrix::filled(2, 2, 1.0));
    }
}
