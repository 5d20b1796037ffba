//! GUIDE: an attribute autoencoder paired with an autoencoder over per-node
//! motif counts (degree, wedges, triangles, 4-cliques).

use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use super::{
    blend, check_loss, decoder_dims, encoder_dims, finish_scores, resolve_alpha, row_errors,
    DeepParams, FitReport, Objective, Pass, Stack,
};
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::rng;
use crate::tensor::nn::{Bound, ParamSet};
use crate::tensor::{Adam, CsrMatrix, Matrix, Tape, Var};

/// Small subgraph patterns counted per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motif {
    Degree,
    /// Paths of length two centred on the node.
    Wedge,
    Triangle,
    FourClique,
}

impl Motif {
    pub const ALL: [Motif; 4] = [Motif::Degree, Motif::Wedge, Motif::Triangle, Motif::FourClique];

    pub fn as_str(self) -> &'static str {
        match self {
            Motif::Degree => "degree",
            Motif::Wedge => "wedge",
            Motif::Triangle => "triangle",
            Motif::FourClique => "four_clique",
        }
    }

    /// Parses a comma-separated list such as `degree,triangle`.
    pub fn parse_list(s: &str) -> Result<Vec<Motif>> {
        let motifs: Vec<Motif> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        if motifs.is_empty() {
            return Err(Error::param("motif list is empty"));
        }
        Ok(motifs)
    }
}

impl FromStr for Motif {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Motif::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::param(format!("unknown motif '{s}'")))
    }
}

impl fmt::Display for Motif {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sorted intersection of two ascending neighbor lists.
fn common(a: &[usize], b: &[usize], out: &mut Vec<usize>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
}

/// Number of each motif containing every node, one column per motif. The
/// graph is treated as undirected.
pub fn motif_degrees(graph: &AttributedGraph, motifs: &[Motif]) -> Matrix {
    let g = graph.symmetrized();
    let n = g.num_nodes();
    let need_tri = motifs.contains(&Motif::Triangle);
    let need_four = motifs.contains(&Motif::FourClique);
    let mut tri = vec![0.0; n];
    let mut four = vec![0.0; n];
    if need_tri || need_four {
        let mut uv = Vec::new();
        let mut uvw = Vec::new();
        for u in 0..n {
            let nu = g.neighbors(u);
            for &v in nu.iter().filter(|&&v| v > u) {
                common(nu, g.neighbors(v), &mut uv);
                for &w in uv.iter().filter(|&&w| w > v) {
                    tri[u] += 1.0;
                    tri[v] += 1.0;
                    tri[w] += 1.0;
                    if need_four {
                        common(&uv, g.neighbors(w), &mut uvw);
                        for &x in uvw.iter().filter(|&&x| x > w) {
                            for node in [u, v, w, x] {
                                four[node] += 1.0;
                            }
                        }
                    }
                }
            }
        }
    }
    Matrix::from_fn(n, motifs.len(), |i, c| {
        let d = g.neighbors(i).len() as f64;
        match motifs[c] {
            Motif::Degree => d,
            Motif::Wedge => d * (d - 1.0) / 2.0,
            Motif::Triangle => tri[i],
            Motif::FourClique => four[i],
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuideParams {
    pub struct_hid: usize,
    pub motifs: Vec<Motif>,
}

impl Default for GuideParams {
    fn default() -> Self {
        Self {
            struct_hid: 4,
            motifs: Motif::ALL.to_vec(),
        }
    }
}

pub struct Guide {
    params: ParamSet,
    attr_enc: Stack,
    attr_dec: Stack,
    motif_enc: Stack,
    motif_dec: Stack,
    x: Rc<Matrix>,
    /// `ln(1 + count)` motif features.
    m: Rc<Matrix>,
    alpha: f64,
}

struct Recon {
    x_hat: Var,
    m_hat: Var,
}

impl Guide {
    pub fn new(graph: &AttributedGraph, p: &DeepParams, q: &GuideParams, seed: u64) -> Result<Self> {
        p.validate()?;
        if q.struct_hid == 0 {
            return Err(Error::param("struct_hid must be >= 1"));
        }
        if q.motifs.is_empty() {
            return Err(Error::param("motif list is empty"));
        }
        let g = graph.symmetrized();
        let adj: Rc<CsrMatrix> = Rc::new(g.normalized_adjacency());
        let m = motif_degrees(&g, &q.motifs).map(f64::ln_1p);
        let (d, h, k, sh) = (g.num_features(), p.hid_dim, q.motifs.len(), q.struct_hid);
        let mut init = rng::seeded(rng::derive(seed, "init"));
        let mut params = ParamSet::new();
        let attr_enc = Stack::gcn(&mut params, &encoder_dims(d, h), &adj, true, &mut init);
        let attr_dec = Stack::gcn(&mut params, &decoder_dims(h, d), &adj, false, &mut init);
        let motif_enc = Stack::gcn(&mut params, &encoder_dims(k, sh), &adj, true, &mut init);
        let motif_dec = Stack::gcn(&mut params, &decoder_dims(sh, k), &adj, false, &mut init);
        Ok(Self {
            params,
            attr_enc,
            attr_dec,
            motif_enc,
            motif_dec,
            x: Rc::new(g.features().clone()),
            m: Rc::new(m),
            alpha: super::initial_alpha(p.alpha),
        })
    }

    fn forward(&self, pass: &mut Pass<'_, '_>, b: &Bound) -> Result<Recon> {
        let x = pass.tape.constant((*self.x).clone());
        let za = self.attr_enc.forward(pass, b, x)?;
        let x_hat = self.attr_dec.forward(pass, b, za)?;
        let m = pass.tape.constant((*self.m).clone());
        let zs = self.motif_enc.forward(pass, b, m)?;
        let m_hat = self.motif_dec.forward(pass, b, zs)?;
        Ok(Recon { x_hat, m_hat })
    }

    fn errors(&self, tape: &Tape, r: &Recon) -> (Vec<f64>, Vec<f64>) {
        (
            row_errors(tape.value(r.x_hat), &self.x, None),
            row_errors(tape.value(r.m_hat), &self.m, None),
        )
    }

    fn recon_loss(&self, tape: &mut Tape, r: &Recon) -> Result<Var> {
        let n = self.x.rows().max(1) as f64;
        let la = tape.sq_error(r.x_hat, &self.x, None)?;
        let ls = tape.sq_error(r.m_hat, &self.m, None)?;
        let la = tape.scale(la, self.alpha / n);
        let ls = tape.scale(ls, (1.0 - self.alpha) / n);
        tape.add(la, ls)
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

impl Objective for Guide {
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

pub fn guide_fit(
    graph: &AttributedGraph,
    p: &DeepParams,
    q: &GuideParams,
    seed: u64,
) -> Result<FitReport> {
    Guide::new(graph, p, q, seed)?.train(p, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_with_tail() {
        // Triangle 0-1-2 plus pendant 3 on node 0.
        let g = AttributedGraph::build(
            &[(0, 1), (1, 2), (0, 2), (0, 3)],
            Matrix::zeros(4, 1),
            false,
        )
        .unwrap();
        let m = motif_degrees(&g, &Motif::ALL);
        assert_eq!(m.row(0), &[3.0, 3.0, 1.0, 0.0]);
        assert_eq!(m.row(1), &[2.0, 1.0, 1.0, 0.0]);
        assert_eq!(m.row(3), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn clique_counts() {
        let edges: Vec<_> = (0..5)
            .flat_map(|i| (i + 1..5).map(move |j| (i, j)))
            .collect();
        let g = AttributedGraph::build(&edges, Matrix::zeros(5, 1), false).unwrap();
        let m = motif_degrees(&g, &[Motif::Triangle, Motif::FourClique]);
        // Each node of K5 lies in C(4,2) triangles and C(4,3) 4-cliques.
        for i in 0..5 {
            assert_eq!(m.row(i), &[6.0, 4.0]);
        }
    }

    #[test]
    fn motif_list_parsing() {
        let l = Motif::parse_list("degree, triangle").unwrap();
        assert_eq!(l, vec![Motif::Degree, Motif::Triangle]);
        assert!(Motif::parse_list("").is_err());
        assert!(Motif::parse_list("pentagon").is_err());
    }
}
