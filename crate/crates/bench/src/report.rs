//! Results files and summary tables.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use graphod::detectors::{DetectorKind, ParamMap};
use graphod::metrics::Evaluation;
use serde::{Deserialize, Serialize};

use crate::aggregate::{AggregateRow, Stat};
use crate::error::{Error, Result};
use crate::trial::{TrialResult, TrialStatus};

/// One line of `results.csv`; field order is the column order.
#[derive(Debug, Serialize, Deserialize)]
struct ResultRecord {
    dataset: String,
    algorithm: String,
    trial: usize,
    seed: u64,
    params_json: String,
    auc: Option<f64>,
    ap: Option<f64>,
    recall_at_k: Option<f64>,
    auc_contextual: Option<f64>,
    auc_structural: Option<f64>,
    runtime_ms: f64,
    peak_mem_bytes: u64,
    status: String,
}

pub const RESULT_COLUMNS: [&str; 13] = [
    "dataset",
    "algorithm",
    "trial",
    "seed",
    "params_json",
    "auc",
    "ap",
    "recall_at_k",
    "auc_contextual",
    "auc_structural",
    "runtime_ms",
    "peak_mem_bytes",
    "status",
];

impl From<&TrialResult> for ResultRecord {
    fn from(r: &TrialResult) -> Self {
        let m = r.metrics;
        Self {
            dataset: r.dataset.clone(),
            algorithm: r.algorithm.to_string(),
            trial: r.trial,
            seed: r.seed,
            params_json: r.params.to_json(),
            auc: m.map(|m| m.auc),
            ap: m.map(|m| m.ap),
            recall_at_k: m.map(|m| m.recall_at_k),
            auc_contextual: m.and_then(|m| m.auc_contextual),
            auc_structural: m.and_then(|m| m.auc_structural),
            runtime_ms: r.runtime_ms,
            peak_mem_bytes: r.peak_mem_bytes,
            status: r.status.to_string(),
        }
    }
}

impl ResultRecord {
    fn into_result(self) -> std::result::Result<TrialResult, String> {
        let algorithm: DetectorKind = self.algorithm.parse().map_err(|e: graphod::Error| e.to_string())?;
        let status: TrialStatus = self.status.parse()?;
        let params = ParamMap::from_json(&self.params_json).map_err(|e| e.to_string())?;
        let metrics = match (status, self.auc, self.ap, self.recall_at_k) {
            (TrialStatus::Ok, Some(auc), Some(ap), Some(recall_at_k)) => Some(Evaluation {
                auc,
                ap,
                recall_at_k,
                auc_contextual: self.auc_contextual,
                auc_structural: self.auc_structural,
            }),
            (TrialStatus::Ok, ..) => return Err("successful trial without metrics".into()),
            _ => None,
        };
        let unit = |v: Option<f64>| v.is_none_or(|v| (0.0..=1.0).contains(&v));
        if ![self.auc, self.ap, self.recall_at_k, self.auc_contextual, self.auc_structural]
            .into_iter()
            .all(unit)
        {
            return Err("metric outside [0, 1]".into());
        }
        if !(self.runtime_ms.is_finite() && self.runtime_ms >= 0.0) {
            return Err("runtime must be a non-negative number".into());
        }
        Ok(TrialResult {
            dataset: self.dataset,
            algorithm,
            trial: self.trial,
            seed: self.seed,
            params,
            metrics,
            runtime_ms: self.runtime_ms,
            peak_mem_bytes: self.peak_mem_bytes,
            status,
            message: None,
        })
    }
}

pub fn write_results<W: io::Write>(out: W, results: &[TrialResult]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if results.is_empty() {
        w.write_record(RESULT_COLUMNS)?;
    }
    for r in results {
        w.serialize(ResultRecord::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_results(path: &Path, results: &[TrialResult]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_results(io::BufWriter::new(file), results).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_results(path: &Path) -> Result<Vec<TrialResult>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let headers = rdr.headers().map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    if headers.iter().ne(RESULT_COLUMNS) {
        return Err(Error::Results {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("expected header {}", RESULT_COLUMNS.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.deserialize::<ResultRecord>() {
        let rec = rec.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let line = out.len() as u64 + 2;
        out.push(rec.into_result().map_err(|msg| Error::Results {
            path: path.to_path_buf(),
            line,
            msg,
        })?);
    }
    Ok(out)
}

/// Name as printed in tables.
pub fn display_name(kind: DetectorKind) -> &'static str {
    match kind {
        DetectorKind::Lof => "LOF",
        DetectorKind::IForest => "IF",
        DetectorKind::Scan => "SCAN",
        DetectorKind::Radar => "Radar",
        DetectorKind::Anomalous => "ANOMALOUS",
        DetectorKind::MlpAe => "MLPAE",
        DetectorKind::GcnAe => "GCNAE",
        DetectorKind::Dominant => "DOMINANT",
        DetectorKind::Done => "DONE",
        DetectorKind::AdOne => "AdONE",
        DetectorKind::AnomalyDae => "AnomalyDAE",
        DetectorKind::Gaan => "GAAN",
        DetectorKind::Guide => "GUIDE",
        DetectorKind::Conad => "CONAD",
    }
}

/// `mean±std (max)` with `digits` decimals after multiplying by `scale`.
pub fn format_stat(s: &Stat, scale: f64, digits: usize) -> String {
    format!(
        "{:.d$}±{:.d$} ({:.d$})",
        s.mean * scale,
        s.std * scale,
        s.max * scale,
        d = digits
    )
}

fn datasets(rows: &[AggregateRow]) -> Vec<&str> {
    let mut names: Vec<&str> = rows.iter().map(|r| r.dataset.as_str()).collect();
    names.dedup();
    names
}

fn algorithms(rows: &[AggregateRow]) -> Vec<DetectorKind> {
    let mut kinds: Vec<DetectorKind> = rows.iter().map(|r| r.algorithm).collect();
    kinds.sort();
    kinds.dedup();
    kinds
}

type Pick = fn(&AggregateRow) -> Option<Stat>;

fn table(out: &mut String, rows: &[AggregateRow], columns: &[(&str, Pick)], scale: f64, digits: usize) {
    let names = datasets(rows);
    let mut header = String::from("| Algorithm |");
    let mut rule = String::from("|---|");
    for ds in &names {
        for (suffix, _) in columns {
            let _ = write!(header, " {ds}{suffix} |");
            rule.push_str("---|");
        }
    }
    let _ = writeln!(out, "{header}\n{rule}");
    for kind in algorithms(rows) {
        let _ = write!(out, "| {} |", display_name(kind));
        for ds in &names {
            let row = rows.iter().find(|r| r.algorithm == kind && r.dataset == *ds);
            for (_, pick) in columns {
                let cell = match row {
                    None => "-".to_string(),
                    Some(r) if r.successes == 0 => if r.oom > 0 { "OOM" } else { "FAIL" }.to_string(),
                    Some(r) => pick(r).map_or("-".to_string(), |s| format_stat(&s, scale, digits)),
                };
                let _ = write!(out, " {cell} |");
            }
        }
        out.push('\n');
    }
}

/// Markdown summary: detectors as rows, datasets as columns, every cell
/// `mean±std (max)`. Quality metrics are in percent with two decimals.
pub fn markdown_report(rows: &[AggregateRow], per_type: bool) -> String {
    let mut out = String::new();
    let auc: Vec<(&str, Pick)> = if per_type {
        vec![
            ("", |r| r.auc),
            (" contextual", |r| r.auc_contextual),
            (" structural", |r| r.auc_structural),
        ]
    } else {
        vec![("", |r| r.auc)]
    };
    out.push_str("## ROC-AUC (%)\n\n");
    table(&mut out, rows, &auc, 100.0, 2);
    out.push_str("\n## Average precision (%)\n\n");
    table(&mut out, rows, &[("", |r| r.ap)], 100.0, 2);
    out.push_str("\n## Recall@k (%)\n\n");
    table(&mut out, rows, &[("", |r| r.recall_at_k)], 100.0, 2);
    out.push_str("\n## Runtime (s)\n\n");
    table(&mut out, rows, &[("", |r| r.runtime_ms)], 1e-3, 2);
    out.push_str("\n## Peak heap (MiB)\n\n");
    table(&mut out, rows, &[("", |r| r.peak_mem_bytes)], 1.0 / (1024.0 * 1024.0), 2);
    let failed: Vec<&AggregateRow> = rows.iter().filter(|r| r.failures > 0).collect();
    if !failed.is_empty() {
        out.push_str("\n## Failed trials\n\n");
        for r in failed {
            let _ = writeln!(
                out,
                "- {} on {}: {} of {} ({} out of memory)",
                display_name(r.algorithm),
                r.dataset,
                r.failures,
                r.failures + r.successes,
                r.oom
            );
        }
    }
    out
}

/// One CSV row per group with mean, std and max of every metric.
pub fn aggregate_csv<W: io::Write>(out: W, rows: &[AggregateRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let metrics: [(&str, Pick); 7] = [
        ("auc", |r| r.auc),
        ("ap", |r| r.ap),
        ("recall_at_k", |r| r.recall_at_k),
        ("auc_contextual", |r| r.auc_contextual),
        ("auc_structural", |r| r.auc_structural),
        ("runtime_ms", |r| r.runtime_ms),
        ("peak_mem_bytes", |r| r.peak_mem_bytes),
    ];
    let mut header = vec!["dataset".to_string(), "algorithm".into(), "successes".into(), "failures".into()];
    for (m, _) in &metrics {
        for s in ["mean", "std", "max"] {
            header.push(format!("{m}_{s}"));
        }
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.dataset.clone(),
            r.algorithm.to_string(),
            r.successes.to_string(),
            r.failures.to_string(),
        ];
        for (_, pick) in &metrics {
            match pick(r) {
                Some(s) => rec.extend([s.mean, s.std, s.max].map(|v| v.to_string())),
                None => rec.extend(["", "", ""].map(String::from)),
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
