//! Single trials and whole benchmark runs.

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use graphod::bundle;
use graphod::detectors::{self, DetectorKind, ParamMap};
use graphod::metrics::{self, Evaluation};
use graphod::rng;
use graphod::synth::Recipe;
use graphod::{AttributedGraph, OutlierLabels};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridSpace;
use crate::memory;

/// A labeled graph with a name used in result tables.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub graph: AttributedGraph,
    pub labels: OutlierLabels,
}

impl Dataset {
    pub fn new(name: impl Into<String>, graph: AttributedGraph, labels: OutlierLabels) -> Self {
        Self {
            name: name.into(),
            graph,
            labels,
        }
    }

    /// Loads a labeled bundle; the directory name becomes the dataset name.
    pub fn load(dir: &Path) -> Result<Self> {
        let b = bundle::load(dir)?;
        let labels = b.labels.ok_or_else(|| {
            graphod::Error::InvalidParam(format!("{} has no labels.csv", dir.display()))
        })?;
        let name = dir
            .file_name()
            .map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
        Ok(Self::new(name, b.graph, labels))
    }

    pub fn from_recipe(name: impl Into<String>, recipe: &Recipe) -> Result<Self> {
        let (graph, labels) = recipe.build()?;
        Ok(Self::new(name, graph, labels))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrialStatus {
    Ok,
    /// The graph exceeded the dense-adjacency cap.
    Oom,
    Diverged,
    /// Any other error, including panics inside a detector.
    Failed,
}

impl TrialStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TrialStatus::Ok => "ok",
            TrialStatus::Oom => "oom",
            TrialStatus::Diverged => "diverged",
            TrialStatus::Failed => "failed",
        }
    }

    fn of(e: &graphod::Error) -> Self {
        match e {
            graphod::Error::TooLarge { .. } => TrialStatus::Oom,
            graphod::Error::Divergence { .. } => TrialStatus::Diverged,
            _ => TrialStatus::Failed,
        }
    }
}

impl fmt::Display for TrialStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrialStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [TrialStatus::Ok, TrialStatus::Oom, TrialStatus::Diverged, TrialStatus::Failed]
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown status '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub dataset: String,
    pub algorithm: DetectorKind,
    pub trial: usize,
    pub seed: u64,
    pub params: ParamMap,
    /// `None` unless the trial succeeded.
    pub metrics: Option<Evaluation>,
    pub runtime_ms: f64,
    pub peak_mem_bytes: u64,
    pub status: TrialStatus,
    /// Error text for failed trials; not persisted.
    pub message: Option<String>,
}

impl TrialResult {
    pub fn is_ok(&self) -> bool {
        self.status == TrialStatus::Ok
    }
}

/// Seed of one trial, independent of scheduling order.
pub fn trial_seed(master_seed: u64, dataset: &str, kind: DetectorKind, trial: usize) -> u64 {
    rng::derive(master_seed, &format!("trial/{dataset}/{kind}/{trial}"))
}

fn panic_text(payload: &(dyn std::any::Any + Send)) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "detector panicked".into())
}

/// Fits `kind` on `data` and scores it. Time and peak heap cover fitting and
/// scoring; errors and panics come back as failure records.
pub fn run_trial(
    data: &Dataset,
    kind: DetectorKind,
    params: &ParamMap,
    trial: usize,
    seed: u64,
) -> TrialResult {
    let start = Instant::now();
    let (outcome, peak) = memory::measure(|| {
        catch_unwind(AssertUnwindSafe(|| detectors::run(kind, &data.graph, params, seed)))
    });
    let runtime_ms = (start.elapsed().as_secs_f64() * 1e3).max(f64::MIN_POSITIVE);
    let (metrics, status, message) = match outcome {
        Ok(Ok(scores)) => match metrics::evaluate(&scores, &data.labels) {
            Ok(m) => (Some(m), TrialStatus::Ok, None),
            Err(e) => (None, TrialStatus::Failed, Some(e.to_string())),
        },
        Ok(Err(e)) => (None, TrialStatus::of(&e), Some(e.to_string())),
        Err(p) => (None, TrialStatus::Failed, Some(panic_text(p.as_ref()))),
    };
    TrialResult {
        dataset: data.name.clone(),
        algorithm: kind,
        trial,
        seed,
        params: params.clone(),
        metrics,
        runtime_ms,
        peak_mem_bytes: peak,
        status,
        message,
    }
}

/// One scheduled trial.
#[derive(Debug, Clone)]
pub struct Job<'a> {
    pub data: &'a Dataset,
    pub kind: DetectorKind,
    pub trial: usize,
    pub params: ParamMap,
    pub seed: u64,
}

/// Every (dataset, detector, trial) combination, in that nesting order.
pub fn plan<'a>(datasets: &'a [Dataset], algos: &[DetectorKind], grid: &GridSpace) -> Result<Vec<Job<'a>>> {
    let mut jobs = Vec::new();
    for data in datasets {
        for &kind in algos {
            for (trial, params) in grid.sample(kind)?.into_iter().enumerate() {
                jobs.push(Job {
                    data,
                    kind,
                    trial,
                    params,
                    seed: trial_seed(grid.master_seed, &data.name, kind, trial),
                });
            }
        }
    }
    Ok(jobs)
}

/// Runs jobs on a pool of `workers` threads; results keep the job order.
pub fn execute(jobs: &[Job<'_>], workers: usize) -> Result<Vec<TrialResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Pool(e.to_string()))?;
    Ok(pool.install(|| {
        jobs.par_iter()
            .map(|j| run_trial(j.data, j.kind, &j.params, j.trial, j.seed))
            .collect()
    }))
}

/// Samples the grid and runs every trial.
pub fn run_benchmark(
    datasets: &[Dataset],
    algos: &[DetectorKind],
    grid: &GridSpace,
    workers: usize,
) -> Result<Vec<TrialResult>> {
    execute(&plan(datasets, algos, grid)?, workers)
}

/// One epoch budget of an epoch study.
#[derive(Debug, Clone)]
pub struct EpochPoint {
    pub epochs: usize,
    pub result: TrialResult,
}

#[derive(Debug, Clone)]
pub struct EpochStudy {
    pub points: Vec<EpochPoint>,
    /// First budget after which AUC improves by less than 0.005 (0.5 points).
    pub converged: Option<usize>,
    /// Budget with the highest AUC.
    pub best: Option<usize>,
}

/// Runs `kind` once per epoch budget with otherwise fixed parameters.
pub fn epoch_study(
    data: &Dataset,
    kind: DetectorKind,
    params: &ParamMap,
    budgets: &[usize],
    seed: u64,
) -> EpochStudy {
    let points: Vec<EpochPoint> = budgets
        .iter()
        .map(|&epochs| {
            let p = params.clone().with("epochs", epochs);
            EpochPoint {
                epochs,
                result: run_trial(data, kind, &p, 0, seed),
            }
        })
        .collect();
    let auc: Vec<(usize, Option<f64>)> = points
        .iter()
        .map(|p| (p.epochs, p.result.metrics.map(|m| m.auc)))
        .collect();
    let (converged, best) = (converged_budget(&auc), best_budget(&auc));
    EpochStudy {
        points,
        converged,
        best,
    }
}

/// AUC gain below which more epochs count as converged.
pub const CONVERGENCE_GAIN: f64 = 0.005;

/// First budget whose successor improves AUC by less than
/// [`CONVERGENCE_GAIN`]; the last successful budget if every step helps.
pub fn converged_budget(points: &[(usize, Option<f64>)]) -> Option<usize> {
    points.iter().enumerate().find_map(|(i, &(epochs, auc))| {
        let here = auc?;
        match points.get(i + 1) {
            Some(&(_, Some(next))) if next - here >= CONVERGENCE_GAIN => None,
            _ => Some(epochs),
        }
    })
}

/// Budget with the highest AUC; the smallest one on ties.
pub fn best_budget(points: &[(usize, Option<f64>)]) -> Option<usize> {
    points
        .iter()
        .filter_map(|&(e, a)| a.map(|a| (e, a)))
        .fold(None, |acc: Option<(usize, f64)>, (e, a)| match acc {
            Some((_, b)) if b >= a => acc,
            _ => Some((e, a)),
        })
        .map(|(e, _)| e)
}
