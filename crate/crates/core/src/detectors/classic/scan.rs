//! Structural clustering (SCAN), scored so clustered nodes rank highest.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, ScoreVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanParams {
    pub eps: f64,
    pub mu: usize,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self { eps: 0.5, mu: 2 }
    }
}

pub const MEMBER_SCORE: f64 = 1.0;
pub const HUB_SCORE: f64 = 0.5;
/// Width of the within-band tie-break from mean structural similarity.
const TIE_BREAK: f64 = 0.1;

pub(crate) fn common_count(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// Cosine similarity of closed neighborhoods, one value per stored
/// adjacency entry (aligned with `col_indices`).
pub fn structural_similarity(graph: &AttributedGraph) -> Vec<f64> {
    let mut out = Vec::with_capacity(graph.num_entries());
    for u in 0..graph.num_nodes() {
        let nu = graph.neighbors(u);
        for &v in nu {
            let nv = graph.neighbors(v);
            // Both endpoints lie in both closed neighborhoods.
            let shared = common_count(nu, nv) + 2;
            out.push(shared as f64 / (((nu.len() + 1) * (nv.len() + 1)) as f64).sqrt());
        }
    }
    out
}

/// Cluster id per node, `None` for nodes outside every cluster.
pub fn scan_clusters(graph: &AttributedGraph, params: &ScanParams) -> Result<Vec<Option<usize>>> {
    if !(params.eps > 0.0 && params.eps <= 1.0) || params.mu < 2 {
        return Err(Error::param("scan needs eps in (0, 1] and mu >= 2"));
    }
    let g = graph.symmetrized();
    let sigma = structural_similarity(&g);
    let offsets = g.row_offsets();
    let n = g.num_nodes();
    let eps_neighbors = |u: usize| {
        g.neighbors(u)
            .iter()
            .zip(&sigma[offsets[u]..offsets[u + 1]])
            .filter(|(_, &s)| s >= params.eps)
            .map(|(&v, _)| v)
    };
    let core: Vec<bool> = (0..n).map(|u| eps_neighbors(u).count() >= params.mu).collect();
    let mut cluster = vec![None; n];
    let mut next = 0;
    for seed in 0..n {
        if !core[seed] || cluster[seed].is_some() {
            continue;
        }
        cluster[seed] = Some(next);
        let mut queue = VecDeque::from([seed]);
        while let Some(u) = queue.pop_front() {
            for v in eps_neighbors(u) {
                if cluster[v].is_none() {
                    cluster[v] = Some(next);
                    if core[v] {
                        queue.push_back(v);
                    }
                }
            }
        }
        next += 1;
    }
    Ok(cluster)
}

pub fn scan_fit(graph: &AttributedGraph, params: &ScanParams) -> Result<ScoreVector> {
    let clusters = scan_clusters(graph, params)?;
    let g = graph.symmetrized();
    let sigma = structural_similarity(&g);
    let offsets = g.row_offsets();
    let scores = (0..g.num_nodes())
        .map(|u| {
            let nbrs = g.neighbors(u);
            let band = if clusters[u].is_some() {
                MEMBER_SCORE
            } else {
                let mut ids: Vec<usize> = nbrs.iter().filter_map(|&v| clusters[v]).collect();
                ids.sort_unstable();
                ids.dedup();
                if ids.len() >= 2 {
                    HUB_SCORE
                } else {
                    0.0
                }
            };
            let s = &sigma[offsets[u]..offsets[u + 1]];
            let mean = if s.is_empty() { 0.0 } else { s.iter().sum::<f64>() / s.len() as f64 };
            band + TIE_BREAK * mean
        })
        .collect();
    ScoreVector::new(scores)
}
