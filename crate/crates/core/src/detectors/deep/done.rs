//! DONE and AdONE: twin structure/attribute autoencoders whose loss terms
//! are reweighted per node by learned outlier scores.
//!
//! Each component `c` keeps a score vector `o_c` (positive, summing to one).
//! A node's contribution to the component's loss terms is weighted by
//! `log(1 / o_c,i)`, and `o_c` is re-estimated every epoch as the node's
//! share of the component error.

use std::rc::Rc;

use super::{
    check_loss, decoder_dims, encoder_dims, finish_scores, weighted_rows, DeepParams, FitReport,
    Objective, Pass, Stack,
};
use super::dominant::DENSE_CAP;
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::rng;
use crate::tensor::nn::{Bound, ParamSet};
use crate::tensor::{Adam, CsrMatrix, Matrix, Tape, Var};

const SCORE_FLOOR: f64 = 1e-12;

/// Per-node component outlier scores.
#[derive(Debug, Clone, PartialEq)]
pub struct DoneScores {
    pub o_struct: Vec<f64>,
    pub o_attr: Vec<f64>,
    pub o_comb: Vec<f64>,
}

impl DoneScores {
    fn uniform(n: usize) -> Self {
        let u = vec![1.0 / n.max(1) as f64; n];
        Self {
            o_struct: u.clone(),
            o_attr: u.clone(),
            o_comb: u,
        }
    }

    /// Mean of the three components.
    pub fn combined(&self) -> Vec<f64> {
        (0..self.o_struct.len())
            .map(|i| (self.o_struct[i] + self.o_attr[i] + self.o_comb[i]) / 3.0)
            .collect()
    }
}

/// Errors as shares of their total; a small floor keeps every share positive.
pub fn normalize_errors(errors: &[f64]) -> Vec<f64> {
    let total: f64 = errors.iter().map(|e| e + SCORE_FLOOR).sum();
    errors.iter().map(|e| (e + SCORE_FLOOR) / total).collect()
}

fn log_weights(o: &[f64]) -> Vec<f64> {
    o.iter().map(|v| -v.ln()).collect()
}

/// Mean squared embedding distance to neighbors, 0 for isolated nodes.
fn neighbor_spread(h: &Matrix, pattern: &CsrMatrix) -> Vec<f64> {
    (0..h.rows())
        .map(|i| {
            let mut acc = 0.0;
            let mut deg = 0usize;
            for (j, _) in pattern.row(i).filter(|&(j, _)| j != i) {
                deg += 1;
                acc += h
                    .row(i)
                    .iter()
                    .zip(h.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
            }
            if deg == 0 {
                0.0
            } else {
                acc / deg as f64
            }
        })
        .collect()
}

fn row_sq(a: &Matrix, b: &Matrix) -> Vec<f64> {
    crate::tensor::row_sq_errors(a, b, None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdoneParams {
    /// Weight of the encoders' fool-the-discriminator term.
    pub adv_weight: f64,
}

impl Default for AdoneParams {
    fn default() -> Self {
        Self { adv_weight: 1.0 }
    }
}

struct Discriminator {
    params: ParamSet,
    net: Stack,
    weight: f64,
}

pub struct Done {
    params: ParamSet,
    s_enc: Stack,
    s_dec: Stack,
    a_enc: Stack,
    a_dec: Stack,
    a: Rc<Matrix>,
    x: Rc<Matrix>,
    pattern: Rc<CsrMatrix>,
    scores: DoneScores,
    disc: Option<Discriminator>,
}

struct Embed {
    hs: Var,
    ha: Var,
    a_hat: Var,
    x_hat: Var,
}

impl Done {
    pub fn new(graph: &AttributedGraph, p: &DeepParams, seed: u64) -> Result<Self> {
        Self::build(graph, p, None, seed)
    }

    pub fn adversarial(
        graph: &AttributedGraph,
        p: &DeepParams,
        adv: &AdoneParams,
        seed: u64,
    ) -> Result<Self> {
        if !(adv.adv_weight.is_finite() && adv.adv_weight >= 0.0) {
            return Err(Error::param("adv_weight must be >= 0"));
        }
        Self::build(graph, p, Some(adv.adv_weight), seed)
    }

    fn build(graph: &AttributedGraph, p: &DeepParams, adv: Option<f64>, seed: u64) -> Result<Self> {
        p.validate()?;
        let g = graph.symmetrized();
        let n = g.num_nodes();
        let d = g.num_features();
        let h = p.hid_dim;
        let a = g.dense_adjacency(DENSE_CAP)?;
        let mut init = rng::seeded(rng::derive(seed, "init"));
        let mut params = ParamSet::new();
        let s_enc = Stack::mlp(&mut params, &encoder_dims(n, h), true, &mut init);
        let s_dec = Stack::mlp(&mut params, &decoder_dims(h, n), false, &mut init);
        let a_enc = Stack::mlp(&mut params, &encoder_dims(d, h), true, &mut init);
        let a_dec = Stack::mlp(&mut params, &decoder_dims(h, d), false, &mut init);
        let disc = adv.map(|weight| {
            let mut dinit = rng::seeded(rng::derive(seed, "discriminator"));
            let mut dp = ParamSet::new();
            let net = Stack::mlp(&mut dp, &[h, h, 1], false, &mut dinit);
            Discriminator {
                params: dp,
                net,
                weight,
            }
        });
        Ok(Self {
            params,
            s_enc,
            s_dec,
            a_enc,
            a_dec,
            a: Rc::new(a),
            x: Rc::new(g.features().clone()),
            pattern: Rc::new(g.adjacency(false)),
            scores: DoneScores::uniform(n),
            disc,
        })
    }

    fn embed(&self, pass: &mut Pass<'_, '_>, b: &Bound) -> Result<Embed> {
        let a = pass.tape.constant((*self.a).clone());
        let x = pass.tape.constant((*self.x).clone());
        let hs = self.s_enc.forward(pass, b, a)?;
        let a_hat = self.s_dec.forward(pass, b, hs)?;
        let ha = self.a_enc.forward(pass, b, x)?;
        let x_hat = self.a_dec.forward(pass, b, ha)?;
        Ok(Embed {
            hs,
            ha,
            a_hat,
            x_hat,
        })
    }

    /// Component errors of a pass: structure, attribute, alignment.
    fn component_errors(&self, tape: &Tape, e: &Embed) -> [Vec<f64>; 3] {
        let (hs, ha) = (tape.value(e.hs), tape.value(e.ha));
        let s: Vec<f64> = row_sq(tape.value(e.a_hat), &self.a)
            .into_iter()
            .zip(neighbor_spread(hs, &self.pattern))
            .map(|(r, h)| r + h)
            .collect();
        let a: Vec<f64> = row_sq(tape.value(e.x_hat), &self.x)
            .into_iter()
            .zip(neighbor_spread(ha, &self.pattern))
            .map(|(r, h)| r + h)
            .collect();
        [s, a, row_sq(hs, ha)]
    }

    fn update_scores(&mut self, tape: &Tape, e: &Embed) {
        let [s, a, c] = self.component_errors(tape, e);
        self.scores = DoneScores {
            o_struct: normalize_errors(&s),
            o_attr: normalize_errors(&a),
            o_comb: normalize_errors(&c),
        };
    }

    /// Reconstruction and homophily terms plus either the alignment term
    /// (DONE) or the encoders' adversarial term (AdONE).
    fn ae_loss(&self, tape: &mut Tape, e: &Embed, disc: Option<&Bound>) -> Result<Var> {
        let n = self.x.rows().max(1) as f64;
        let ws = log_weights(&self.scores.o_struct);
        let wa = log_weights(&self.scores.o_attr);
        let wc = log_weights(&self.scores.o_comb);
        let a = tape.constant((*self.a).clone());
        let x = tape.constant((*self.x).clone());
        let mut terms = vec![
            weighted_rows(tape, e.a_hat, a, &ws)?,
            tape.neighbor_diff(e.hs, &self.pattern, &ws)?,
            weighted_rows(tape, e.x_hat, x, &wa)?,
            tape.neighbor_diff(e.ha, &self.pattern, &wa)?,
        ];
        match (&self.disc, disc) {
            (Some(d), Some(db)) => {
                if d.weight > 0.0 {
                    let fool = self.disc_bce(tape, d, db, e.hs, e.ha, &wc, true)?;
                    terms.push(tape.scale(fool, d.weight));
                }
            }
            _ => terms.push(weighted_rows(tape, e.hs, e.ha, &wc)?),
        }
        let mut total = terms[0];
        for &t in &terms[1..] {
            total = tape.add(total, t)?;
        }
        Ok(tape.scale(total, 1.0 / n))
    }

    /// Discriminator cross-entropy with structure embeddings labeled 1 and
    /// attribute embeddings 0, or the reverse when `flip` is set.
    #[allow(clippy::too_many_arguments)]
    fn disc_bce(
        &self,
        tape: &mut Tape,
        d: &Discriminator,
        db: &Bound,
        hs: Var,
        ha: Var,
        w: &[f64],
        flip: bool,
    ) -> Result<Var> {
        let n = w.len();
        let weight = Rc::new(Matrix::column(w.to_vec()));
        let (ts, ta) = if flip { (0.0, 1.0) } else { (1.0, 0.0) };
        let mut pass = Pass::eval(tape);
        let ls = d.net.forward(&mut pass, db, hs)?;
        let la = d.net.forward(&mut pass, db, ha)?;
        let ps = tape.sigmoid(ls);
        let pa = tape.sigmoid(la);
        let bs = tape.bce(ps, &Rc::new(Matrix::filled(n, 1, ts)), Some(&weight))?;
        let ba = tape.bce(pa, &Rc::new(Matrix::filled(n, 1, ta)), Some(&weight))?;
        tape.add(bs, ba)
    }

    /// Trains the discriminator for one step on detached embeddings.
    fn disc_step(&mut self, hs: &Matrix, ha: &Matrix, opt: &mut Adam) -> Result<f64> {
        let wc = log_weights(&self.scores.o_comb);
        let n = hs.rows().max(1) as f64;
        let d = self.disc.as_ref().expect("adversarial model");
        let mut tape = Tape::new();
        let db = d.params.bind(&mut tape);
        let hs = tape.constant(hs.clone());
        let ha = tape.constant(ha.clone());
        let l = self.disc_bce(&mut tape, d, &db, hs, ha, &wc, false)?;
        let l = tape.scale(l, 1.0 / n);
        let value = tape.value(l).item();
        let d = self.disc.as_mut().expect("adversarial model");
        d.params.step(&tape, &db, l, opt)?;
        Ok(value)
    }

    /// Share of nodes whose two embeddings the discriminator labels correctly.
    pub fn discriminator_accuracy(&self) -> Result<f64> {
        let d = self
            .disc
            .as_ref()
            .ok_or_else(|| Error::param("model has no discriminator"))?;
        let mut tape = Tape::new();
        let b = self.params.bind(&mut tape);
        let db = d.params.bind(&mut tape);
        let e = self.embed(&mut Pass::eval(&mut tape), &b)?;
        let mut pass = Pass::eval(&mut tape);
        let ls = d.net.forward(&mut pass, &db, e.hs)?;
        let la = d.net.forward(&mut pass, &db, e.ha)?;
        let n = tape.value(ls).rows();
        let correct = tape.value(ls).as_slice().iter().filter(|&&v| v > 0.0).count()
            + tape.value(la).as_slice().iter().filter(|&&v| v <= 0.0).count();
        Ok(correct as f64 / (2 * n).max(1) as f64)
    }

    /// Component scores of the current parameters, dropout off.
    pub fn component_scores(&self) -> Result<DoneScores> {
        let mut tape = Tape::new();
        let b = self.params.bind(&mut tape);
        let e = self.embed(&mut Pass::eval(&mut tape), &b)?;
        let [s, a, c] = self.component_errors(&tape, &e);
        Ok(DoneScores {
            o_struct: normalize_errors(&s),
            o_attr: normalize_errors(&a),
            o_comb: normalize_errors(&c),
        })
    }

    pub fn current_scores(&self) -> &DoneScores {
        &self.scores
    }

    pub fn train(&mut self, p: &DeepParams, seed: u64) -> Result<FitReport> {
        let mut drop = rng::seeded(rng::derive(seed, "dropout"));
        let mut opt = Adam::new(p.lr, p.weight_decay);
        let mut dopt = Adam::new(p.lr, p.weight_decay);
        let mut losses = Vec::with_capacity(p.epochs);
        let mut aux = Vec::new();
        for epoch in 0..p.epochs {
            let mut tape = Tape::new();
            let b = self.params.bind(&mut tape);
            let e = self.embed(
                &mut Pass {
                    tape: &mut tape,
                    dropout: p.dropout,
                    rng: Some(&mut drop),
                },
                &b,
            )?;
            self.update_scores(&tape, &e);
            if self.disc.is_some() {
                let (hs, ha) = (tape.value(e.hs).clone(), tape.value(e.ha).clone());
                aux.push(check_loss(self.disc_step(&hs, &ha, &mut dopt)?, epoch)?);
            }
            let db = self.disc.as_ref().map(|d| d.params.bind(&mut tape));
            let loss = self.ae_loss(&mut tape, &e, db.as_ref())?;
            losses.push(check_loss(tape.value(loss).item(), epoch)?);
            self.params.step(&tape, &b, loss, &mut opt)?;
        }
        let final_scores = self.component_scores()?;
        self.scores = final_scores;
        Ok(FitReport {
            scores: finish_scores(self.scores.combined(), p.epochs)?,
            losses,
            alpha: None,
            aux,
        })
    }
}

impl Objective for Done {
    fn param_sets(&self) -> Vec<&ParamSet> {
        let mut sets = vec![&self.params];
        if let Some(d) = &self.disc {
            sets.push(&d.params);
        }
        sets
    }

    fn param_sets_mut(&mut self) -> Vec<&mut ParamSet> {
        let mut sets = vec![&mut self.params];
        if let Some(d) = &mut self.disc {
            sets.push(&mut d.params);
        }
        sets
    }

    /// Autoencoder loss, plus the discriminator's own loss for AdONE.
    fn loss(&self, tape: &mut Tape, bound: &[Bound]) -> Result<Var> {
        let e = self.embed(&mut Pass::eval(tape), &bound[0])?;
        let ae = self.ae_loss(tape, &e, bound.get(1))?;
        match (&self.disc, bound.get(1)) {
            (Some(d), Some(db)) => {
                let wc = log_weights(&self.scores.o_comb);
                let n = wc.len().max(1) as f64;
                let dl = self.disc_bce(tape, d, db, e.hs, e.ha, &wc, false)?;
                let dl = tape.scale(dl, 1.0 / n);
                tape.add(ae, dl)
            }
            _ => Ok(ae),
        }
    }
}

pub fn done_fit(graph: &AttributedGraph, p: &DeepParams, seed: u64) -> Result<FitReport> {
    Done::new(graph, p, seed)?.train(p, seed)
}

pub fn adone_fit(
    graph: &AttributedGraph,
    p: &DeepParams,
    adv: &AdoneParams,
    seed: u64,
) -> Result<FitReport> {
    Done::adversarial(graph, p, adv, seed)?.train(p, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_errors_sum_to_one_and_keep_order() {
        let o = normalize_errors(&[0.0, 2.0, 5.0, 1.0]);
        assert!((o.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(o.iter().all(|&v| v > 0.0 && v <= 1.0));
        let argmax = (0..4).max_by(|&a, &b| o[a].total_cmp(&o[b])).unwrap();
        assert_eq!(argmax, 2);
        let flat = normalize_errors(&[0.0; 4]);
        assert!(flat.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }
}
