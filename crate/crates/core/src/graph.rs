//! Attributed graphs, outlier labels and score vectors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{CsrMatrix, Matrix};

/// Immutable graph in CSR form with one dense feature row per node.
///
/// Neighbor lists are strictly sorted, without duplicates or self-loops.
/// Undirected graphs store both directions of every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    features: Matrix,
    directed: bool,
}

impl AttributedGraph {
    /// Builds a graph over `features.rows()` nodes.
    ///
    /// Self-loops and duplicate edges are dropped; undirected input is
    /// mirrored.
    pub fn build(edges: &[(usize, usize)], features: Matrix, directed: bool) -> Result<Self> {
        let n = features.rows();
        for (r, row) in features.iter_rows().enumerate() {
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteFeature { row: r, col: c });
            }
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(u, v) in edges {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::NodeOutOfRange {
                        index: x,
                        num_nodes: n,
                    });
                }
            }
            if u == v {
                continue;
            }
            adj[u].push(v);
            if !directed {
                adj[v].push(u);
            }
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        for mut list in adj {
            list.sort_unstable();
            list.dedup();
            col_indices.extend(list);
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            row_offsets,
            col_indices,
            features,
            directed,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Number of stored (directed) adjacency entries.
    pub fn num_entries(&self) -> usize {
        self.col_indices.len()
    }

    /// Number of edges: undirected pairs, or arcs for directed graphs.
    pub fn num_edges(&self) -> usize {
        if self.directed {
            self.col_indices.len()
        } else {
            self.col_indices.len() / 2
        }
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    #[inline]
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[u]..self.row_offsets[u + 1]]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Out-degree of every node.
    pub fn degrees(&self) -> Vec<usize> {
        self.row_offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn mean_degree(&self) -> f64 {
        if self.num_nodes() == 0 {
            return 0.0;
        }
        self.num_entries() as f64 / self.num_nodes() as f64
    }

    /// Edge list; undirected edges appear once as `(u, v)` with `u < v`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for u in 0..self.num_nodes() {
            for &v in self.neighbors(u) {
                if self.directed || u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Same nodes and features with a different edge set.
    pub fn with_edges(&self, edges: &[(usize, usize)]) -> Result<Self> {
        Self::build(edges, self.features.clone(), self.directed)
    }

    pub fn with_features(&self, features: Matrix) -> Result<Self> {
        if features.rows() != self.num_nodes() {
            return Err(Error::ShapeMismatch {
                op: "with_features",
                left: features.shape(),
                right: (self.num_nodes(), self.num_features()),
            });
        }
        if let Some(i) = features.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature {
                row: i / features.cols(),
                col: i % features.cols(),
            });
        }
        Ok(Self {
            features,
            ..self.clone()
        })
    }

    /// Undirected view: `(u, v)` present iff either direction was stored.
    pub fn symmetrized(&self) -> Self {
        if !self.directed {
            return self.clone();
        }
        let edges = self.edges();
        Self::build(&edges, self.features.clone(), false).expect("edges of a valid graph")
    }

    /// Node indices relabeled by `perm`: old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::param("permutation is not a bijection on the node set"));
        }
        let mut inverse = vec![0; n];
        for (old, &new) in perm.iter().enumerate() {
            inverse[new] = old;
        }
        let features = self.features.select_rows(&inverse);
        let edges: Vec<_> = self.edges().into_iter().map(|(u, v)| (perm[u], perm[v])).collect();
        Self::build(&edges, features, self.directed)
    }

    /// `D^{-1/2} (A + I) D^{-1/2}` with `D` the degree of `A + I`.
    pub fn normalized_adjacency(&self) -> CsrMatrix {
        let n = self.num_nodes();
        let inv_sqrt: Vec<f64> = self
            .degrees()
            .iter()
            .map(|&d| 1.0 / ((d + 1) as f64).sqrt())
            .collect();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut cols = Vec::with_capacity(self.num_entries() + n);
        let mut vals = Vec::with_capacity(self.num_entries() + n);
        for u in 0..n {
            let mut placed = false;
            for &v in self.neighbors(u) {
                if !placed && v > u {
                    cols.push(u);
                    vals.push(inv_sqrt[u] * inv_sqrt[u]);
                    placed = true;
                }
                cols.push(v);
                vals.push(inv_sqrt[u] * inv_sqrt[v]);
            }
            if !placed {
                cols.push(u);
                vals.push(inv_sqrt[u] * inv_sqrt[u]);
            }
            offsets.push(cols.len());
        }
        CsrMatrix::new(n, n, offsets, cols, vals).expect("normalized adjacency is well formed")
    }

    /// Adjacency pattern with unit values, optionally with the diagonal added.
    pub fn adjacency(&self, self_loops: bool) -> CsrMatrix {
        let n = self.num_nodes();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut cols = Vec::with_capacity(self.num_entries() + n);
        for u in 0..n {
            let mut placed = !self_loops;
            for &v in self.neighbors(u) {
                if !placed && v > u {
                    cols.push(u);
                    placed = true;
                }
                cols.push(v);
            }
            if !placed {
                cols.push(u);
            }
            offsets.push(cols.len());
        }
        let nnz = cols.len();
        CsrMatrix::new(n, n, offsets, cols, vec![1.0; nnz]).expect("adjacency is well formed")
    }

    /// Dense 0/1 adjacency; refuses graphs above `cap` nodes.
    pub fn dense_adjacency(&self, cap: usize) -> Result<Matrix> {
        let n = self.num_nodes();
        if n > cap {
            return Err(Error::TooLarge { num_nodes: n, cap });
        }
        let mut a = Matrix::zeros(n, n);
        for u in 0..n {
            for &v in self.neighbors(u) {
                a[(u, v)] = 1.0;
            }
        }
        Ok(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutlierKind {
    #[default]
    None,
    Contextual,
    Structural,
    Both,
}

impl OutlierKind {
    pub fn is_outlier(self) -> bool {
        self != OutlierKind::None
    }

    pub fn is_contextual(self) -> bool {
        matches!(self, OutlierKind::Contextual | OutlierKind::Both)
    }

    pub fn is_structural(self) -> bool {
        matches!(self, OutlierKind::Structural | OutlierKind::Both)
    }

    /// Union of two labels.
    pub fn merge(self, other: OutlierKind) -> OutlierKind {
        match (self.is_contextual() || other.is_contextual(), self.is_structural() || other.is_structural()) {
            (true, true) => OutlierKind::Both,
            (true, false) => OutlierKind::Contextual,
            (false, true) => OutlierKind::Structural,
            (false, false) => OutlierKind::None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OutlierKind::None => "none",
            OutlierKind::Contextual => "contextual",
            OutlierKind::Structural => "structural",
            OutlierKind::Both => "both",
        }
    }
}

impl fmt::Display for OutlierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OutlierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(OutlierKind::None),
            "contextual" => Ok(OutlierKind::Contextual),
            "structural" => Ok(OutlierKind::Structural),
            "both" => Ok(OutlierKind::Both),
            other => Err(Error::param(format!("unknown outlier kind '{other}'"))),
        }
    }
}

/// Ground-truth outlier kind of every node.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OutlierLabels {
    kinds: Vec<OutlierKind>,
}

impl OutlierLabels {
    pub fn none(num_nodes: usize) -> Self {
        Self {
            kinds: vec![OutlierKind::None; num_nodes],
        }
    }

    pub fn from_kinds(kinds: Vec<OutlierKind>) -> Self {
        Self { kinds }
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kinds(&self) -> &[OutlierKind] {
        &self.kinds
    }

    pub fn kind(&self, node: usize) -> OutlierKind {
        self.kinds[node]
    }

    /// Adds `kind` to the existing label of `node`.
    pub fn mark(&mut self, node: usize, kind: OutlierKind) {
        self.kinds[node] = self.kinds[node].merge(kind);
    }

    pub fn merged(&self, other: &OutlierLabels) -> OutlierLabels {
        assert_eq!(self.len(), other.len());
        OutlierLabels {
            kinds: self
                .kinds
                .iter()
                .zip(&other.kinds)
                .map(|(a, b)| a.merge(*b))
                .collect(),
        }
    }

    pub fn binary(&self) -> Vec<bool> {
        self.kinds.iter().map(|k| k.is_outlier()).collect()
    }

    pub fn contextual_mask(&self) -> Vec<bool> {
        self.kinds.iter().map(|k| k.is_contextual()).collect()
    }

    pub fn structural_mask(&self) -> Vec<bool> {
        self.kinds.iter().map(|k| k.is_structural()).collect()
    }

    pub fn num_outliers(&self) -> usize {
        self.kinds.iter().filter(|k| k.is_outlier()).count()
    }

    pub fn count(&self, kind: OutlierKind) -> usize {
        self.kinds.iter().filter(|&&k| k == kind).count()
    }

    pub fn permuted(&self, perm: &[usize]) -> OutlierLabels {
        let mut kinds = vec![OutlierKind::None; self.len()];
        for (old, &new) in perm.iter().enumerate() {
            kinds[new] = self.kinds[old];
        }
        OutlierLabels { kinds }
    }
}

/// Outlier score per node; higher means more outlying.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::param(format!("score of node {i} is not finite")));
        }
        Ok(Self(scores))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Node indices ordered by descending score, ties by ascending index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.0.len()).collect();
        idx.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]).then(a.cmp(&b)));
        idx
    }
}

impl std::ops::Index<usize> for ScoreVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}
