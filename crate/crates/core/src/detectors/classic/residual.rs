//! Residual analysis detectors: Radar and ANOMALOUS.
//!
//! Both minimize `||X - W X - R||_F^2 + alpha_w ||W||_{2,1}
//! + beta_r ||R||_{2,1} + gamma_l tr(R^T L R)` over an `n x n` node mixing
//! matrix `W` and a residual `R`, with `L = D - A`. ANOMALOUS additionally
//! penalizes `alpha_w ||W^T||_{2,1}`. Nodes are scored by `||R_i||_2`.
//!
//! Optimization alternates proximal gradient steps on `W` and `R`. Each step
//! size is `lr` times the inverse Lipschitz constant of its block, so any
//! `lr` in `(0, 1]` decreases the Radar objective monotonically.
//!
//! Starting from `W = 0`, every Radar gradient step adds a multiple of
//! `E X^T` and row shrinkage rescales rows, so `W = B X^T` throughout. Radar
//! keeps the `n x d` factor `B`, which costs `O(n d^2)` per epoch instead of
//! `O(n^2 d)`. The column shrinkage of ANOMALOUS breaks this form, so it
//! keeps `W` dense.

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, ScoreVector};
use crate::tensor::{gemm, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualParams {
    pub alpha_w: f64,
    pub beta_r: f64,
    pub gamma_l: f64,
    /// Fraction of the largest safe step, in `(0, 1]`.
    pub lr: f64,
    pub epochs: usize,
}

impl Default for ResidualParams {
    fn default() -> Self {
        Self {
            alpha_w: 0.01,
            beta_r: 0.01,
            gamma_l: 0.01,
            lr: 1.0,
            epochs: 300,
        }
    }
}

impl ResidualParams {
    fn validate(&self) -> Result<()> {
        let penalties = [self.alpha_w, self.beta_r, self.gamma_l];
        if penalties.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::param("residual penalties must be finite and >= 0"));
        }
        if !(self.lr > 0.0 && self.lr <= 1.0) {
            return Err(Error::param("residual lr must lie in (0, 1]"));
        }
        if self.epochs == 0 {
            return Err(Error::param("epochs must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualVariant {
    Radar,
    Anomalous,
}

/// The node mixing matrix `W`, dense or as `B X^T`.
#[derive(Debug, Clone)]
pub enum Mixing {
    Dense(Matrix),
    Factored { b: Matrix, x: Matrix },
}

impl Mixing {
    pub fn to_dense(&self) -> Result<Matrix> {
        match self {
            Mixing::Dense(w) => Ok(w.clone()),
            Mixing::Factored { b, x } => gemm(b, false, x, true),
        }
    }

    pub fn row_norms(&self) -> Result<Vec<f64>> {
        match self {
            Mixing::Dense(w) => Ok(w.row_norms()),
            Mixing::Factored { b, x } => {
                let k = gemm(x, true, x, false)?;
                factored_row_norms(b, &k)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResidualFit {
    pub scores: ScoreVector,
    /// Objective value after each epoch.
    pub losses: Vec<f64>,
    pub w: Mixing,
    pub r: Matrix,
}

/// `||B_i X^T||` for every row, from `K = X^T X`.
fn factored_row_norms(b: &Matrix, k: &Matrix) -> Result<Vec<f64>> {
    let bk = b.matmul(k)?;
    Ok(b.iter_rows()
        .zip(bk.iter_rows())
        .map(|(u, v)| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>().max(0.0).sqrt())
        .collect())
}

fn scale_rows(m: &mut Matrix, factors: &[f64]) {
    for (r, f) in factors.iter().enumerate() {
        m.row_mut(r).iter_mut().for_each(|v| *v *= f);
    }
}

fn shrink_factor(norm: f64, t: f64) -> f64 {
    if norm > t {
        1.0 - t / norm
    } else {
        0.0
    }
}

/// Group soft-thresholding of each row: `x * max(0, 1 - t / ||x||)`.
fn shrink_rows(m: &mut Matrix, t: f64) {
    if t == 0.0 {
        return;
    }
    for r in 0..m.rows() {
        let row = m.row_mut(r);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let factor = shrink_factor(norm, t);
        row.iter_mut().for_each(|v| *v *= factor);
    }
}

fn shrink_cols(m: &mut Matrix, t: f64) {
    if t == 0.0 {
        return;
    }
    let mut norms = vec![0.0; m.cols()];
    for row in m.iter_rows() {
        for (n, v) in norms.iter_mut().zip(row) {
            *n += v * v;
        }
    }
    let factors: Vec<f64> = norms
        .iter()
        .map(|n| shrink_factor(n.sqrt(), t))
        .collect();
    for r in 0..m.rows() {
        for (v, f) in m.row_mut(r).iter_mut().zip(&factors) {
            *v *= f;
        }
    }
}

fn l21_rows(m: &Matrix) -> f64 {
    m.row_norms().iter().sum()
}

fn l21_cols(m: &Matrix) -> f64 {
    l21_rows(&m.transpose())
}

/// `L R` with `L = D - A` on the symmetrized graph.
fn laplacian_times(g: &AttributedGraph, r: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(r.rows(), r.cols());
    for u in 0..g.num_nodes() {
        let nbrs = g.neighbors(u);
        let deg = nbrs.len() as f64;
        let dst = out.row_mut(u);
        for (o, x) in dst.iter_mut().zip(r.row(u)) {
            *o = deg * x;
        }
        for &v in nbrs {
            for (o, x) in dst.iter_mut().zip(r.row(v)) {
                *o -= x;
            }
        }
    }
    out
}

/// Largest eigenvalue of the symmetric PSD matrix `m` by power iteration.
fn top_eigenvalue(m: &Matrix) -> f64 {
    let n = m.rows();
    if n == 0 {
        return 0.0;
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let mut w = vec![0.0; n];
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = m.row(i).iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w.into_iter().map(|x| x / norm).collect();
        if (next - lambda).abs() <= 1e-12 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda
}

/// Objective value given the mixing penalty `w_penalty` (unweighted).
fn objective(
    p: &ResidualParams,
    g: &AttributedGraph,
    x: &Matrix,
    w_penalty: f64,
    r: &Matrix,
    wx: &Matrix,
) -> f64 {
    let mut fit = 0.0;
    for ((a, b), c) in x.as_slice().iter().zip(wx.as_slice()).zip(r.as_slice()) {
        fit += (a - b - c) * (a - b - c);
    }
    let lr = laplacian_times(g, r);
    let smooth: f64 = r.as_slice().iter().zip(lr.as_slice()).map(|(a, b)| a * b).sum();
    fit + p.alpha_w * w_penalty + p.beta_r * l21_rows(r) + p.gamma_l * smooth
}

pub fn residual_fit(
    graph: &AttributedGraph,
    params: &ResidualParams,
    variant: ResidualVariant,
) -> Result<ResidualFit> {
    let factored = variant == ResidualVariant::Radar;
    solve(graph, params, variant, factored)
}

/// Radar with a dense `W`; reference for the factored solver.
pub fn radar_fit_dense(graph: &AttributedGraph, params: &ResidualParams) -> Result<ResidualFit> {
    solve(graph, params, ResidualVariant::Radar, false)
}

fn solve(
    graph: &AttributedGraph,
    params: &ResidualParams,
    variant: ResidualVariant,
    factored: bool,
) -> Result<ResidualFit> {
    params.validate()?;
    let g = graph.symmetrized();
    let x = g.features();
    let (n, d) = x.shape();

    // Block Lipschitz constants of the smooth part.
    let xtx = gemm(x, true, x, false)?;
    let lip_w = 2.0 * top_eigenvalue(&xtx);
    let max_deg = g.degrees().into_iter().max().unwrap_or(0) as f64;
    let lip_r = 2.0 + 2.0 * params.gamma_l * 2.0 * max_deg;
    let step_w = if lip_w > 0.0 { params.lr / lip_w } else { 0.0 };
    let step_r = params.lr / lip_r;

    let mut w = if factored {
        Mixing::Factored {
            b: Matrix::zeros(n, d),
            x: x.clone(),
        }
    } else {
        Mixing::Dense(Matrix::zeros(n, n))
    };
    let mut r = Matrix::zeros(n, d);
    let mut wx = Matrix::zeros(n, d);
    let mut losses = Vec::with_capacity(params.epochs);
    for epoch in 0..params.epochs {
        // W block: gradient -2 (X - WX - R) X^T.
        let mut e = x.clone();
        e.sub_assign(&wx);
        e.sub_assign(&r);
        let t = step_w * params.alpha_w;
        let w_penalty = match &mut w {
            Mixing::Factored { b, .. } => {
                b.axpy(2.0 * step_w, &e);
                let norms = factored_row_norms(b, &xtx)?;
                let f: Vec<f64> = norms.iter().map(|&nr| shrink_factor(nr, t)).collect();
                scale_rows(b, &f);
                wx = b.matmul(&xtx)?;
                norms.iter().zip(&f).map(|(nr, f)| nr * f).sum()
            }
            Mixing::Dense(w) => {
                let grad_w = gemm(&e, false, x, true)?;
                w.axpy(2.0 * step_w, &grad_w);
                shrink_rows(w, t);
                if variant == ResidualVariant::Anomalous {
                    shrink_cols(w, t);
                }
                wx = gemm(w, false, x, false)?;
                let mut pen = l21_rows(w);
                if variant == ResidualVariant::Anomalous {
                    pen += l21_cols(w);
                }
                pen
            }
        };

        // R block: gradient -2 (X - WX - R) + 2 gamma L R.
        let mut e = x.clone();
        e.sub_assign(&wx);
        e.sub_assign(&r);
        let lr = laplacian_times(&g, &r);
        e.axpy(-params.gamma_l, &lr);
        r.axpy(2.0 * step_r, &e);
        shrink_rows(&mut r, step_r * params.beta_r);

        let loss = objective(params, &g, x, w_penalty, &r, &wx);
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        losses.push(loss);
    }
    Ok(ResidualFit {
        scores: ScoreVector::new(r.row_norms())?,
        losses,
        w,
        r,
    })
}

pub fn radar_fit(graph: &AttributedGraph, params: &ResidualParams) -> Result<ScoreVector> {
    Ok(residual_fit(graph, params, ResidualVariant::Radar)?.scores)
}

pub fn anomalous_fit(graph: &AttributedGraph, params: &ResidualParams) -> Result<ScoreVector> {
    Ok(residual_fit(graph, params, ResidualVariant::Anomalous)?.scores)
}
