//! Runtime and memory as the graph grows.

use std::io;

use graphod::detectors::{DetectorKind, ParamMap};
use graphod::synth::Recipe;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::trial::{run_trial, Dataset, TrialStatus};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleRow {
    pub num_nodes: usize,
    pub algorithm: String,
    pub runtime_ms: f64,
    pub peak_mem_bytes: u64,
    pub status: String,
}

impl ScaleRow {
    pub fn is_ok(&self) -> bool {
        self.status == TrialStatus::Ok.as_str()
    }
}

/// Runs every detector once per size on the size-sweep graph (one 10-clique
/// and ten contextual outliers), all sharing `seed`. `params` is restricted
/// to the keys each detector accepts. Sizes must be ascending.
pub fn scalability_sweep(
    sizes: &[usize],
    algos: &[DetectorKind],
    params: &ParamMap,
    seed: u64,
) -> Result<Vec<ScaleRow>> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Grid("sizes must be strictly ascending".into()));
    }
    let mut rows = Vec::new();
    for &n in sizes {
        let data = Dataset::from_recipe(format!("gen_{n}"), &Recipe::gen_size(n, seed))?;
        for &kind in algos {
            let p = params.restricted_to(&kind.accepted_keys());
            let r = run_trial(&data, kind, &p, 0, seed);
            rows.push(ScaleRow {
                num_nodes: n,
                algorithm: kind.to_string(),
                runtime_ms: r.runtime_ms,
                peak_mem_bytes: r.peak_mem_bytes,
                status: r.status.to_string(),
            });
        }
    }
    Ok(rows)
}

pub fn write_scale<W: io::Write>(out: W, rows: &[ScaleRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
