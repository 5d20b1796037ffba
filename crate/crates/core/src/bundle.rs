//! On-disk graph bundles: a directory holding `meta.json`, `edges.csv`,
//! `features.csv` and, for labeled graphs, `labels.csv`.
//!
//! - `edges.csv`: one `u,v` pair per line. Undirected graphs store each edge
//!   once with `u < v`; the loader mirrors it.
//! - `features.csv`: one comma-separated row per node, written as shortest
//!   round-trip decimals so loading reproduces every bit.
//! - `labels.csv`: header `node_id,kind`, then one line per outlier with kind
//!   `contextual`, `structural` or `both`. Unlisted nodes are inliers.
//!
//! The loader re-validates everything and reports the offending file and
//! line. Counts in `meta.json` are checked against the files before any
//! allocation sized by them.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, OutlierKind, OutlierLabels};
use crate::synth::Recipe;
use crate::tensor::Matrix;

pub const META_FILE: &str = "meta.json";
pub const EDGES_FILE: &str = "edges.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";
const LABELS_HEADER: &str = "node_id,kind";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub num_nodes: usize,
    pub num_features: usize,
    pub directed: bool,
    /// Lines in `edges.csv`.
    pub num_edges: usize,
    pub labeled: bool,
    /// Recipe that regenerates the bundle, when it was synthesized.
    #[serde(default)]
    pub provenance: Option<Recipe>,
}

#[derive(Debug, Clone)]
pub struct Bundle {
    pub meta: Meta,
    pub graph: AttributedGraph,
    pub labels: Option<OutlierLabels>,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn bad(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Bundle {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Lines paired with their 1-based numbers, without a trailing empty line.
fn numbered(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .enumerate()
        .map(|(i, l)| (i + 1, l))
}

/// Writes a bundle into `dir`, creating it if needed.
pub fn save(
    dir: &Path,
    graph: &AttributedGraph,
    labels: Option<&OutlierLabels>,
    provenance: Option<&Recipe>,
) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != graph.num_nodes() {
            return Err(Error::ShapeMismatch {
                op: "save",
                left: (graph.num_nodes(), 1),
                right: (l.len(), 1),
            });
        }
    }
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let edges = if graph.is_directed() {
        (0..graph.num_nodes())
            .flat_map(|u| graph.neighbors(u).iter().map(move |&v| (u, v)))
            .collect()
    } else {
        graph.edges()
    };
    let mut text = String::new();
    for (u, v) in &edges {
        text.push_str(&format!("{u},{v}\n"));
    }
    write(&dir.join(EDGES_FILE), &text)?;

    let mut text = String::new();
    for row in graph.features().iter_rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    write(&dir.join(FEATURES_FILE), &text)?;

    let labels_path = dir.join(LABELS_FILE);
    match labels {
        Some(l) => {
            let mut text = format!("{LABELS_HEADER}\n");
            for (i, k) in l.kinds().iter().enumerate() {
                if k.is_outlier() {
                    text.push_str(&format!("{i},{k}\n"));
                }
            }
            write(&labels_path, &text)?;
        }
        None => {
            if labels_path.exists() {
                fs::remove_file(&labels_path).map_err(|e| io_err(&labels_path, e))?;
            }
        }
    }

    let meta = Meta {
        num_nodes: graph.num_nodes(),
        num_features: graph.num_features(),
        directed: graph.is_directed(),
        num_edges: edges.len(),
        labeled: labels.is_some(),
        provenance: provenance.cloned(),
    };
    let json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    write(&dir.join(META_FILE), &(json + "\n"))
}

fn parse_index(path: &Path, line: usize, cell: &str, num_nodes: usize) -> Result<usize> {
    let i: usize = cell
        .trim()
        .parse()
        .map_err(|_| bad(path, line, format!("'{cell}' is not a node index")))?;
    if i >= num_nodes {
        return Err(bad(
            path,
            line,
            format!("node {i} out of range for {num_nodes} nodes"),
        ));
    }
    Ok(i)
}

fn load_meta(dir: &Path) -> Result<Meta> {
    let path = dir.join(META_FILE);
    let text = read(&path)?;
    serde_json::from_str(&text).map_err(|e| bad(&path, e.line(), e.to_string()))
}

fn load_features(dir: &Path, meta: &Meta) -> Result<Matrix> {
    let path = dir.join(FEATURES_FILE);
    let text = read(&path)?;
    let mut data = Vec::new();
    let mut rows = 0;
    for (line, raw) in numbered(&text) {
        rows += 1;
        if rows > meta.num_nodes {
            return Err(bad(
                &path,
                line,
                format!("more than {} feature rows", meta.num_nodes),
            ));
        }
        let cells: Vec<&str> = if raw.is_empty() {
            Vec::new()
        } else {
            raw.split(',').collect()
        };
        if cells.len() != meta.num_features {
            return Err(bad(
                &path,
                line,
                format!("expected {} values, found {}", meta.num_features, cells.len()),
            ));
        }
        for (col, cell) in cells.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| bad(&path, line, format!("column {}: '{cell}' is not a number", col + 1)))?;
            if !v.is_finite() {
                return Err(bad(&path, line, format!("column {}: non-finite value", col + 1)));
            }
            data.push(v);
        }
    }
    if rows != meta.num_nodes {
        return Err(bad(
            &path,
            rows + 1,
            format!("expected {} feature rows, found {rows}", meta.num_nodes),
        ));
    }
    Matrix::from_vec(rows, meta.num_features, data)
}

fn load_edges(dir: &Path, meta: &Meta) -> Result<Vec<(usize, usize)>> {
    let path = dir.join(EDGES_FILE);
    let text = read(&path)?;
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    for (line, raw) in numbered(&text) {
        let Some((a, b)) = raw.split_once(',') else {
            return Err(bad(&path, line, "expected 'u,v'"));
        };
        let u = parse_index(&path, line, a, meta.num_nodes)?;
        let v = parse_index(&path, line, b, meta.num_nodes)?;
        if u == v {
            return Err(bad(&path, line, format!("self-loop on node {u}")));
        }
        let key = if meta.directed { (u, v) } else { (u.min(v), u.max(v)) };
        if !seen.insert(key) {
            return Err(bad(&path, line, format!("duplicate edge {u},{v}")));
        }
        edges.push((u, v));
    }
    if edges.len() != meta.num_edges {
        return Err(bad(
            &path,
            edges.len() + 1,
            format!("expected {} edges, found {}", meta.num_edges, edges.len()),
        ));
    }
    Ok(edges)
}

fn load_labels(dir: &Path, meta: &Meta) -> Result<Option<OutlierLabels>> {
    let path = dir.join(LABELS_FILE);
    if !meta.labeled {
        if path.exists() {
            return Err(bad(&path, 0, "labels present but meta says unlabeled"));
        }
        return Ok(None);
    }
    let text = read(&path)?;
    let mut lines = numbered(&text);
    match lines.next() {
        Some((_, h)) if h.trim() == LABELS_HEADER => {}
        _ => return Err(bad(&path, 1, format!("expected header '{LABELS_HEADER}'"))),
    }
    let mut kinds = vec![OutlierKind::None; meta.num_nodes];
    for (line, raw) in lines {
        let Some((a, b)) = raw.split_once(',') else {
            return Err(bad(&path, line, "expected 'node_id,kind'"));
        };
        let i = parse_index(&path, line, a, meta.num_nodes)?;
        let kind: OutlierKind = b
            .trim()
            .parse()
            .map_err(|_| bad(&path, line, format!("unknown kind '{}'", b.trim())))?;
        if !kind.is_outlier() {
            return Err(bad(&path, line, "only outliers are listed"));
        }
        if kinds[i].is_outlier() {
            return Err(bad(&path, line, format!("node {i} listed twice")));
        }
        kinds[i] = kind;
    }
    Ok(Some(OutlierLabels::from_kinds(kinds)))
}

/// Reads and validates a bundle.
pub fn load(dir: &Path) -> Result<Bundle> {
    let meta = load_meta(dir)?;
    let features = load_features(dir, &meta)?;
    let edges = load_edges(dir, &meta)?;
    let labels = load_labels(dir, &meta)?;
    let graph = AttributedGraph::build(&edges, features, meta.directed)?;
    Ok(Bundle {
        meta,
        graph,
        labels,
    })
}

/// Rebuilds a synthesized bundle from its provenance.
pub fn regenerate(meta: &Meta) -> Result<(AttributedGraph, OutlierLabels)> {
    let recipe = meta
        .provenance
        .as_ref()
        .ok_or_else(|| Error::param("bundle has no provenance"))?;
    recipe.build()
}

/// Paths of the files making up a bundle.
pub fn files(dir: &Path) -> [PathBuf; 4] {
    [META_FILE, EDGES_FILE, FEATURES_FILE, LABELS_FILE].map(|f| dir.join(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> AttributedGraph {
        let x = Matrix::from_rows(&[vec![0.1, -2.5], vec![1e-300, 3.0], vec![f64::MIN_POSITIVE, 7.0]]).unwrap();
        AttributedGraph::build(&[(0, 1), (2, 1)], x, false).unwrap()
    }

    #[test]
    fn round_trip_without_labels() {
        let dir = tempfile::tempdir().unwrap();
        let g = tiny();
        save(dir.path(), &g, None, None).unwrap();
        assert!(!dir.path().join(LABELS_FILE).exists());
        let b = load(dir.path()).unwrap();
        assert!(b.labels.is_none());
        assert!(!b.meta.labeled);
        assert_eq!(b.graph.row_offsets(), g.row_offsets());
        assert_eq!(b.graph.col_indices(), g.col_indices());
        assert_eq!(b.graph.features(), g.features());
        let edges = fs::read_to_string(dir.path().join(EDGES_FILE)).unwrap();
        assert_eq!(edges, "0,1\n1,2\n");
    }

    #[test]
    fn mirrored_duplicate_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save(dir.path(), &tiny(), None, None).unwrap();
        fs::write(dir.path().join(EDGES_FILE), "0,1\n1,2\n1,0\n").unwrap();
        let meta = fs::read_to_string(dir.path().join(META_FILE)).unwrap();
        fs::write(
            dir.path().join(META_FILE),
            meta.replace("\"num_edges\": 2", "\"num_edges\": 3"),
        )
        .unwrap();
        match load(dir.path()) {
            Err(Error::Bundle { line, msg, .. }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("duplicate"), "{msg}");
            }
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }
}
