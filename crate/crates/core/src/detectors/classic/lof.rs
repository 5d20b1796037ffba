//! Local outlier factor on node features.

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, ScoreVector};
use crate::tensor::{gemm, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LofParams {
    pub k_neighbors: usize,
}

impl Default for LofParams {
    fn default() -> Self {
        Self { k_neighbors: 20 }
    }
}

/// Pairwise squared Euclidean distances between rows.
fn sq_distances(x: &Matrix) -> Result<Matrix> {
    let gram = gemm(x, false, x, true)?;
    let norms: Vec<f64> = (0..x.rows()).map(|i| gram[(i, i)]).collect();
    Ok(Matrix::from_fn(x.rows(), x.rows(), |i, j| {
        if i == j {
            0.0
        } else {
            (norms[i] + norms[j] - 2.0 * gram[(i, j)]).max(0.0)
        }
    }))
}

/// Scores every row of `x`; larger than one means sparser than its neighbors.
pub fn lof_scores(x: &Matrix, params: &LofParams) -> Result<Vec<f64>> {
    let n = x.rows();
    let k = params.k_neighbors;
    if k == 0 || k >= n {
        return Err(Error::param(format!("lof needs 1 <= k < {n}, got {k}")));
    }
    let d2 = sq_distances(x)?;
    // k nearest neighbors, excluding the point itself; ties by index.
    let mut knn = Vec::with_capacity(n);
    let mut kdist = Vec::with_capacity(n);
    for i in 0..n {
        let row = d2.row(i);
        let mut idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        idx.select_nth_unstable_by(k - 1, |&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        idx.truncate(k);
        idx.sort_unstable_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        kdist.push(row[idx[k - 1]].sqrt());
        knn.push(idx);
    }
    let lrd: Vec<f64> = (0..n)
        .map(|i| {
            let reach: f64 = knn[i]
                .iter()
                .map(|&j| kdist[j].max(d2[(i, j)].sqrt()))
                .sum();
            let mean = reach / k as f64;
            if mean == 0.0 {
                f64::INFINITY
            } else {
                1.0 / mean
            }
        })
        .collect();
    Ok((0..n)
        .map(|i| {
            if lrd[i].is_infinite() {
                // Duplicates of its whole neighborhood: as dense as it gets.
                return 1.0;
            }
            let ratio: f64 = knn[i].iter().map(|&j| lrd[j] / lrd[i]).sum();
            let score = ratio / k as f64;
            if score.is_finite() {
                score
            } else {
                f64::MAX.sqrt()
            }
        })
        .collect())
}

pub fn lof_fit(graph: &AttributedGraph, params: &LofParams) -> Result<ScoreVector> {
    ScoreVector::new(lof_scores(graph.features(), params)?)
}
