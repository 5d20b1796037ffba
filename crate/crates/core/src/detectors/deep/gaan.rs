//! GAAN: a generator produces fake node features from noise; a shared
//! encoder embeds real and fake features, and edge confidences
//! `sigmoid(z_i . z_j)` are trained to separate real from fake pairs.

use std::rc::Rc;

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{
    blend, check_loss, decoder_dims, encoder_dims, finish_scores, resolve_alpha, row_errors,
    DeepParams, FitReport, Objective, Pass, Stack,
};
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::rng::{self, Rng};
use crate::tensor::nn::{Bound, ParamSet};
use crate::tensor::{Adam, Matrix, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaanParams {
    pub noise_dim: usize,
}

impl Default for GaanParams {
    fn default() -> Self {
        Self { noise_dim: 16 }
    }
}

pub struct Gaan {
    gen_params: ParamSet,
    gen: Stack,
    disc_params: ParamSet,
    enc: Stack,
    dec: Stack,
    x: Rc<Matrix>,
    /// Every stored adjacency entry, both directions.
    entries: Rc<Vec<(usize, usize)>>,
    noise: Matrix,
    noise_dim: usize,
    alpha: f64,
}

struct Pair {
    x_hat: Var,
    real: Var,
    fake: Var,
}

impl Gaan {
    pub fn new(graph: &AttributedGraph, p: &DeepParams, q: &GaanParams, seed: u64) -> Result<Self> {
        p.validate()?;
        if q.noise_dim == 0 {
            return Err(Error::param("noise_dim must be >= 1"));
        }
        let g = graph.symmetrized();
        let (n, d, h) = (g.num_nodes(), g.num_features(), p.hid_dim);
        let mut init = rng::seeded(rng::derive(seed, "init"));
        let mut gen_params = ParamSet::new();
        let gen = Stack::mlp(&mut gen_params, &[q.noise_dim, h, d], false, &mut init);
        let mut disc_params = ParamSet::new();
        let enc = Stack::mlp(&mut disc_params, &encoder_dims(d, h), false, &mut init);
        let dec = Stack::mlp(&mut disc_params, &decoder_dims(h, d), false, &mut init);
        let mut entries = Vec::with_capacity(g.num_entries());
        for u in 0..n {
            entries.extend(g.neighbors(u).iter().map(|&v| (u, v)));
        }
        Ok(Self {
            gen_params,
            gen,
            disc_params,
            enc,
            dec,
            x: Rc::new(g.features().clone()),
            entries: Rc::new(entries),
            noise: Matrix::zeros(n, q.noise_dim),
            noise_dim: q.noise_dim,
            alpha: super::initial_alpha(p.alpha),
        })
    }

    fn resample(&mut self, rng: &mut Rng) {
        let n = self.x.rows();
        self.noise = Matrix::from_fn(n, self.noise_dim, |_, _| rng.sample(StandardNormal));
    }

    fn fake_features(&self, pass: &mut Pass<'_, '_>, gb: &Bound) -> Result<Var> {
        let z = pass.tape.constant(self.noise.clone());
        self.gen.forward(pass, gb, z)
    }

    /// Edge logits of real and fake features plus the reconstruction.
    fn discriminate(&self, pass: &mut Pass<'_, '_>, db: &Bound, fake_x: Var) -> Result<Pair> {
        let x = pass.tape.constant((*self.x).clone());
        let z = self.enc.forward(pass, db, x)?;
        let x_hat = self.dec.forward(pass, db, z)?;
        let zf = self.enc.forward(pass, db, fake_x)?;
        let real = pass.tape.edge_dot(z, &self.entries)?;
        let fake = pass.tape.edge_dot(zf, &self.entries)?;
        Ok(Pair { x_hat, real, fake })
    }

    fn edge_bce(&self, tape: &mut Tape, logits: Var, target: f64) -> Result<Var> {
        let m = self.entries.len();
        let p = tape.sigmoid(logits);
        let t = Rc::new(Matrix::filled(m, 1, target));
        let l = tape.bce(p, &t, None)?;
        Ok(tape.scale(l, 1.0 / m.max(1) as f64))
    }

    /// Per-node reconstruction error and mean edge doubt `1 - p_ij`.
    fn errors(&self, tape: &Tape, pair: &Pair) -> (Vec<f64>, Vec<f64>) {
        let n = self.x.rows();
        let recon = row_errors(tape.value(pair.x_hat), &self.x, None);
        let mut doubt = vec![0.0; n];
        let mut deg = vec![0usize; n];
        for (&(u, _), &l) in self.entries.iter().zip(tape.value(pair.real).as_slice()) {
            doubt[u] += 1.0 - crate::tensor::sigmoid(l);
            deg[u] += 1;
        }
        for (d, &k) in doubt.iter_mut().zip(&deg) {
            if k > 0 {
                *d /= k as f64;
            }
        }
        (recon, doubt)
    }

    /// Encoder/decoder objective: weighted reconstruction and real-vs-fake
    /// edge classification. Returns the total and the real-pair part.
    fn disc_loss(&self, tape: &mut Tape, pair: &Pair) -> Result<(Var, Var)> {
        let n = self.x.rows().max(1) as f64;
        let rec = tape.sq_error(pair.x_hat, &self.x, None)?;
        let rec = tape.scale(rec, self.alpha / n);
        if self.entries.is_empty() {
            let zero = tape.scale(rec, 0.0);
            return Ok((rec, zero));
        }
        let real = self.edge_bce(tape, pair.real, 1.0)?;
        let fake = self.edge_bce(tape, pair.fake, 0.0)?;
        let cls = tape.add(real, fake)?;
        let cls = tape.scale(cls, 1.0 - self.alpha);
        Ok((tape.add(rec, cls)?, real))
    }

    fn gen_loss(&self, tape: &mut Tape, fake_logits: Var) -> Result<Var> {
        self.edge_bce(tape, fake_logits, 1.0)
    }

    pub fn train(mut self, p: &DeepParams, seed: u64) -> Result<FitReport> {
        let mut drop = rng::seeded(rng::derive(seed, "dropout"));
        let mut noise = rng::seeded(rng::derive(seed, "noise"));
        let mut dopt = Adam::new(p.lr, p.weight_decay);
        let mut gopt = Adam::new(p.lr, p.weight_decay);
        let mut losses = Vec::with_capacity(p.epochs);
        let mut aux = Vec::with_capacity(p.epochs);
        let warmup = super::warmup_epochs(p.epochs);
        for epoch in 0..p.epochs {
            self.resample(&mut noise);

            // Encoder and decoder step against detached fake features.
            let mut gtape = Tape::new();
            let gb = self.gen_params.bind(&mut gtape);
            let fake = self.fake_features(&mut Pass::eval(&mut gtape), &gb)?;
            let fake_x = gtape.value(fake).clone();

            let mut tape = Tape::new();
            let db = self.disc_params.bind(&mut tape);
            let mut pass = Pass {
                tape: &mut tape,
                dropout: p.dropout,
                rng: Some(&mut drop),
            };
            let fx = pass.tape.constant(fake_x);
            let pair = self.discriminate(&mut pass, &db, fx)?;
            if epoch == warmup {
                let (ea, es) = self.errors(&tape, &pair);
                self.alpha = resolve_alpha(p.alpha, &ea, &es);
            }
            let (dl, real) = self.disc_loss(&mut tape, &pair)?;
            let d_value = check_loss(tape.value(dl).item(), epoch)?;
            aux.push(tape.value(real).item());
            self.disc_params.step(&tape, &db, dl, &mut dopt)?;

            // Generator step through the updated encoder.
            if !self.entries.is_empty() {
                let mut tape = Tape::new();
                let gb = self.gen_params.bind(&mut tape);
                let db = self.disc_params.bind(&mut tape);
                let mut pass = Pass::eval(&mut tape);
                let fake = self.fake_features(&mut pass, &gb)?;
                let zf = self.enc.forward(&mut pass, &db, fake)?;
                let logits = tape.edge_dot(zf, &self.entries)?;
                let gl = self.gen_loss(&mut tape, logits)?;
                check_loss(tape.value(gl).item(), epoch)?;
                self.gen_params.step(&tape, &gb, gl, &mut gopt)?;
            }
            losses.push(d_value);
        }
        let mut gtape = Tape::new();
        let gb = self.gen_params.bind(&mut gtape);
        let fake = self.fake_features(&mut Pass::eval(&mut gtape), &gb)?;
        let fake_x = gtape.value(fake).clone();
        let mut tape = Tape::new();
        let db = self.disc_params.bind(&mut tape);
        let fx = tape.constant(fake_x);
        let pair = self.discriminate(&mut Pass::eval(&mut tape), &db, fx)?;
        let (ea, es) = self.errors(&tape, &pair);
        Ok(FitReport {
            scores: finish_scores(blend(self.alpha, &ea, &es), p.epochs)?,
            losses,
            alpha: Some(self.alpha),
            aux,
        })
    }
}

impl Objective for Gaan {
    fn param_sets(&self) -> Vec<&ParamSet> {
        vec![&self.gen_params, &self.disc_params]
    }

    fn param_sets_mut(&mut self) -> Vec<&mut ParamSet> {
        vec![&mut self.gen_params, &mut self.disc_params]
    }

    /// Discriminator objective plus the generator objective, with fixed noise.
    fn loss(&self, tape: &mut Tape, bound: &[Bound]) -> Result<Var> {
        let mut pass = Pass::eval(tape);
        let fake = self.fake_features(&mut pass, &bound[0])?;
        let pair = self.discriminate(&mut pass, &bound[1], fake)?;
        let (dl, _) = self.disc_loss(tape, &pair)?;
        if self.entries.is_empty() {
            return Ok(dl);
        }
        let gl = self.gen_loss(tape, pair.fake)?;
        tape.add(dl, gl)
    }
}

impl Gaan {
    /// Draws a fresh noise matrix; gradient checks use it to vary inputs.
    pub fn resample_noise(&mut self, seed: u64) {
        self.resample(&mut rng::seeded(seed));
    }
}

pub fn gaan_fit(
    graph: &AttributedGraph,
    p: &DeepParams,
    q: &GaanParams,
    seed: u64,
) -> Result<FitReport> {
    Gaan::new(graph, p, q, seed)?.train(p, seed)
}
