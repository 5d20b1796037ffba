//! Isolation forest on node features.

use rand::seq::index;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, ScoreVector};
use crate::rng::{self, Rng};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IForestParams {
    pub num_trees: usize,
    /// Rows drawn per tree; capped at the number of nodes.
    pub subsample: usize,
}

impl Default for IForestParams {
    fn default() -> Self {
        Self {
            num_trees: 100,
            subsample: 256,
        }
    }
}

enum Node {
    Leaf {
        size: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// Average unsuccessful-search path length in a binary search tree of `n` keys.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            const EULER: f64 = 0.577_215_664_901_532_9;
            2.0 * ((n - 1.0).ln() + EULER) - 2.0 * (n - 1.0) / n
        }
    }
}

fn grow(x: &Matrix, rows: &mut [usize], depth: usize, limit: usize, rng: &mut Rng) -> Node {
    if depth >= limit || rows.len() <= 1 {
        return Node::Leaf { size: rows.len() };
    }
    // Only features that still vary can split the sample.
    let varying: Vec<(usize, f64, f64)> = (0..x.cols())
        .filter_map(|f| {
            let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                (lo.min(x[(r, f)]), hi.max(x[(r, f)]))
            });
            (hi > lo).then_some((f, lo, hi))
        })
        .collect();
    if varying.is_empty() {
        return Node::Leaf { size: rows.len() };
    }
    let (feature, lo, hi) = varying[rng.random_range(0..varying.len())];
    let threshold = rng.random_range(lo..hi);
    let mut split = 0;
    for i in 0..rows.len() {
        if x[(rows[i], feature)] < threshold {
            rows.swap(i, split);
            split += 1;
        }
    }
    let (l, r) = rows.split_at_mut(split);
    Node::Split {
        feature,
        threshold,
        left: Box::new(grow(x, l, depth + 1, limit, rng)),
        right: Box::new(grow(x, r, depth + 1, limit, rng)),
    }
}

fn path_length(node: &Node, row: &[f64]) -> f64 {
    let mut node = node;
    let mut depth = 0.0;
    loop {
        match node {
            Node::Leaf { size } => return depth + average_path_length(*size),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                node = if row[*feature] < *threshold { left } else { right };
                depth += 1.0;
            }
        }
    }
}

/// Anomaly score `2^(-E[h(x)] / c(psi))` for every row of `x`.
pub fn iforest_scores(x: &Matrix, params: &IForestParams, seed: u64) -> Result<Vec<f64>> {
    let n = x.rows();
    if params.num_trees == 0 || params.subsample == 0 {
        return Err(Error::param("iforest needs num_trees >= 1 and subsample >= 1"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let psi = params.subsample.min(n);
    let limit = (psi as f64).log2().ceil().max(0.0) as usize;
    let mut rng = rng::seeded(seed);
    let mut total = vec![0.0; n];
    for _ in 0..params.num_trees {
        let mut rows = index::sample(&mut rng, n, psi).into_vec();
        let tree = grow(x, &mut rows, 0, limit, &mut rng);
        for (i, t) in total.iter_mut().enumerate() {
            *t += path_length(&tree, x.row(i));
        }
    }
    let c = average_path_length(psi).max(f64::MIN_POSITIVE);
    Ok(total
        .into_iter()
        .map(|h| 2f64.powf(-(h / params.num_trees as f64) / c))
        .collect())
}

pub fn iforest_fit(graph: &AttributedGraph, params: &IForestParams, seed: u64) -> Result<ScoreVector> {
    ScoreVector::new(iforest_scores(graph.features(), params, seed)?)
}
