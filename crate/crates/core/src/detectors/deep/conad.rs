//! CONAD: DOMINANT-style reconstruction plus a contrastive term between the
//! graph and a copy with injected outliers.

use std::rc::Rc;

use super::dominant::{Dominant, Recon};
use super::{check_loss, finish_scores, resolve_alpha, DeepParams, FitReport, Objective, Pass};
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::rng;
use crate::synth::{inject_combined, InjectionParams};
use crate::tensor::nn::{Bound, ParamSet};
use crate::tensor::{Adam, CsrMatrix, Matrix, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConadParams {
    /// Fraction of nodes perturbed in the augmented graph.
    pub aug_rate: f64,
    pub margin: f64,
    /// Size of the injected micro-cliques and of the contextual pools.
    pub clique_size: usize,
}

impl Default for ConadParams {
    fn default() -> Self {
        Self {
            aug_rate: 0.1,
            margin: 0.5,
            clique_size: 5,
        }
    }
}

struct Augmented {
    adj: Rc<CsrMatrix>,
    x: Matrix,
    /// 1 for perturbed nodes.
    perturbed: Matrix,
    unperturbed: Matrix,
    num_perturbed: usize,
}

pub struct Conad {
    base: Dominant,
    aug: Option<Augmented>,
    margin: f64,
}

impl Conad {
    pub fn new(graph: &AttributedGraph, p: &DeepParams, c: &ConadParams, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c.aug_rate) || c.margin < 0.0 || c.clique_size < 2 {
            return Err(Error::param(
                "conad needs aug_rate in [0, 1], margin >= 0 and clique_size >= 2",
            ));
        }
        let base = Dominant::new(graph, p, seed)?;
        let g = graph.symmetrized();
        let n = g.num_nodes();
        let half = ((c.aug_rate * n as f64).round() as usize) / 2;
        let reps = half / c.clique_size;
        let aug = if reps == 0 || c.clique_size >= n {
            None
        } else {
            let s = InjectionParams::new(c.clique_size, reps, rng::derive(seed, "augment-s"));
            let ctx = InjectionParams::new(c.clique_size, reps, rng::derive(seed, "augment-c"));
            let out = inject_combined(&g, &s, &ctx, false)?;
            let mask = out.labels.binary();
            let col = |on: bool| Matrix::column(mask.iter().map(|&m| f64::from(u8::from(m == on))).collect());
            Some(Augmented {
                adj: Rc::new(out.graph.normalized_adjacency()),
                x: out.graph.features().clone(),
                perturbed: col(true),
                unperturbed: col(false),
                num_perturbed: out.labels.num_outliers(),
            })
        };
        Ok(Self {
            base,
            aug,
            margin: c.margin,
        })
    }

    /// Number of perturbed nodes in the augmented view.
    pub fn num_augmented(&self) -> usize {
        self.aug.as_ref().map_or(0, |a| a.num_perturbed)
    }

    /// Contrastive loss and its perturbed-pair part.
    fn contrastive(
        &self,
        pass: &mut Pass<'_, '_>,
        b: &Bound,
        r: &Recon,
    ) -> Result<Option<(Var, Var)>> {
        let Some(aug) = &self.aug else {
            return Ok(None);
        };
        let h_aug = self.base.encode_with(pass, b, &aug.adj, &aug.x)?;
        let tape = &mut *pass.tape;
        let n = aug.perturbed.rows() as f64;
        let d = tape.row_sq_dist(r.h, h_aug)?;
        let keep = tape.constant(aug.unperturbed.clone());
        let pull = tape.mul(d, keep)?;
        let pull = tape.sum(pull);
        let neg = tape.scale(d, -1.0);
        let gap = tape.add_scalar(neg, self.margin);
        let hinge = tape.relu(gap);
        let flag = tape.constant(aug.perturbed.clone());
        let push = tape.mul(hinge, flag)?;
        let push = tape.sum(push);
        // Each side is averaged over its own pairs; summed over all nodes the
        // pull term dominates and collapsing every embedding becomes optimal.
        let k = aug.num_perturbed.max(1) as f64;
        let pull = tape.scale(pull, 1.0 / (n - k).max(1.0));
        let push = tape.scale(push, 1.0 / k);
        let total = tape.add(pull, push)?;
        Ok(Some((total, push)))
    }

    fn assemble(&self, tape: &mut Tape, r: &Recon, contrast: Option<(Var, Var)>) -> Result<Var> {
        let recon = self.base.recon_loss(tape, r)?;
        match contrast {
            Some((c, _)) => tape.add(recon, c),
            None => Ok(recon),
        }
    }

    pub fn train(mut self, p: &DeepParams, seed: u64) -> Result<FitReport> {
        let mut drop = rng::seeded(rng::derive(seed, "dropout"));
        let mut opt = Adam::new(p.lr, p.weight_decay);
        let mut losses = Vec::with_capacity(p.epochs);
        let mut aux = Vec::new();
        let warmup = super::warmup_epochs(p.epochs);
        for epoch in 0..p.epochs {
            let mut tape = Tape::new();
            let b = self.base.params.bind(&mut tape);
            let mut pass = Pass {
                tape: &mut tape,
                dropout: p.dropout,
                rng: Some(&mut drop),
            };
            let r = self.base.forward(&mut pass, &b)?;
            let contrast = self.contrastive(&mut pass, &b, &r)?;
            if epoch == warmup {
                let (ea, es) = self.base.errors(&tape, &r);
                self.base.alpha = resolve_alpha(p.alpha, &ea, &es);
            }
            if let Some((_, push)) = contrast {
                aux.push(tape.value(push).item());
            }
            let loss = self.assemble(&mut tape, &r, contrast)?;
            losses.push(check_loss(tape.value(loss).item(), epoch)?);
            self.base.params.step(&tape, &b, loss, &mut opt)?;
        }
        Ok(FitReport {
            scores: finish_scores(self.base.scores()?, p.epochs)?,
            losses,
            alpha: Some(self.base.alpha),
            aux,
        })
    }
}

impl Objective for Conad {
    fn param_sets(&self) -> Vec<&ParamSet> {
        vec![&self.base.params]
    }

    fn param_sets_mut(&mut self) -> Vec<&mut ParamSet> {
        vec![&mut self.base.params]
    }

    fn loss(&self, tape: &mut Tape, bound: &[Bound]) -> Result<Var> {
        let mut pass = Pass::eval(tape);
        let r = self.base.forward(&mut pass, &bound[0])?;
        let contrast = self.contrastive(&mut pass, &bound[0], &r)?;
        self.assemble(tape, &r, contrast)
    }
}

pub fn conad_fit(
    graph: &AttributedGraph,
    p: &DeepParams,
    c: &ConadParams,
    seed: u64,
) -> Result<FitReport> {
    Conad::new(graph, p, c, seed)?.train(p, seed)
}
