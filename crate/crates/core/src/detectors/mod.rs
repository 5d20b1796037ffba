//! Outlier detectors and a name-based registry over them.
//!
//! Every detector maps an [`AttributedGraph`] to one score per node, higher
//! meaning more outlying. [`run`] dispatches by [`DetectorKind`] and reads
//! hyperparameters from a [`ParamMap`], rejecting keys the detector does not
//! accept.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, ScoreVector};

pub mod classic;
pub mod deep;
pub mod params;

pub use deep::{Alpha, DeepParams, FitReport};
pub use params::{ParamMap, Reader};

use classic::{IForestParams, LofParams, ResidualParams, ScanParams};
use deep::anomalydae::AnomalyDaeParams;
use deep::conad::ConadParams;
use deep::done::AdoneParams;
use deep::gaan::GaanParams;
use deep::guide::{GuideParams, Motif};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorKind {
    Lof,
    IForest,
    Scan,
    Radar,
    Anomalous,
    MlpAe,
    GcnAe,
    Dominant,
    Done,
    AdOne,
    AnomalyDae,
    Gaan,
    Guide,
    Conad,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 14] = [
        DetectorKind::Lof,
        DetectorKind::IForest,
        DetectorKind::Scan,
        DetectorKind::Radar,
        DetectorKind::Anomalous,
        DetectorKind::MlpAe,
        DetectorKind::GcnAe,
        DetectorKind::Dominant,
        DetectorKind::Done,
        DetectorKind::AdOne,
        DetectorKind::AnomalyDae,
        DetectorKind::Gaan,
        DetectorKind::Guide,
        DetectorKind::Conad,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Lof => "lof",
            DetectorKind::IForest => "iforest",
            DetectorKind::Scan => "scan",
            DetectorKind::Radar => "radar",
            DetectorKind::Anomalous => "anomalous",
            DetectorKind::MlpAe => "mlpae",
            DetectorKind::GcnAe => "gcnae",
            DetectorKind::Dominant => "dominant",
            DetectorKind::Done => "done",
            DetectorKind::AdOne => "adone",
            DetectorKind::AnomalyDae => "anomalydae",
            DetectorKind::Gaan => "gaan",
            DetectorKind::Guide => "guide",
            DetectorKind::Conad => "conad",
        }
    }

    /// Trained by gradient descent on the shared deep hyperparameters.
    pub fn is_deep(self) -> bool {
        !matches!(
            self,
            DetectorKind::Lof
                | DetectorKind::IForest
                | DetectorKind::Scan
                | DetectorKind::Radar
                | DetectorKind::Anomalous
        )
    }

    /// Hyperparameter keys [`run`] reads for this detector.
    pub fn accepted_keys(self) -> Vec<&'static str> {
        const DEEP: [&str; 6] = ["hid_dim", "lr", "dropout", "weight_decay", "epochs", "alpha"];
        let extra: &[&str] = match self {
            DetectorKind::Lof => return vec!["k"],
            DetectorKind::IForest => return vec!["num_trees", "subsample"],
            DetectorKind::Scan => return vec!["eps", "mu"],
            DetectorKind::Radar | DetectorKind::Anomalous => {
                return vec!["alpha_w", "beta_r", "gamma_l", "lr", "epochs"]
            }
            DetectorKind::AdOne => &["adv_weight"],
            DetectorKind::AnomalyDae => &["theta", "eta"],
            DetectorKind::Gaan => &["noise_dim"],
            DetectorKind::Guide => &["struct_hid", "motifs"],
            DetectorKind::Conad => &["aug_rate", "margin", "clique_size"],
            _ => &[],
        };
        DEEP.iter().chain(extra).copied().collect()
    }

    /// Uses randomness, so the seed matters.
    pub fn is_stochastic(self) -> bool {
        self.is_deep() || self == DetectorKind::IForest
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.name() == lower)
            .ok_or_else(|| Error::param(format!("unknown detector '{s}'")))
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Runs one detector and returns its scores.
pub fn run(kind: DetectorKind, graph: &AttributedGraph, params: &ParamMap, seed: u64) -> Result<ScoreVector> {
    Ok(run_report(kind, graph, params, seed)?.scores)
}

/// Runs one detector with its training trace. Classic detectors report an
/// empty trace, except the residual models which report their objective.
pub fn run_report(
    kind: DetectorKind,
    graph: &AttributedGraph,
    params: &ParamMap,
    seed: u64,
) -> Result<FitReport> {
    let mut r = params.reader();
    let plain = |scores: ScoreVector| FitReport {
        scores,
        losses: Vec::new(),
        alpha: None,
        aux: Vec::new(),
    };
    match kind {
        DetectorKind::Lof => {
            let d = LofParams::default();
            let p = LofParams {
                k_neighbors: r.get("k", d.k_neighbors)?,
            };
            r.finish()?;
            Ok(plain(classic::lof_fit(graph, &p)?))
        }
        DetectorKind::IForest => {
            let d = IForestParams::default();
            let p = IForestParams {
                num_trees: r.get("num_trees", d.num_trees)?,
                subsample: r.get("subsample", d.subsample)?,
            };
            r.finish()?;
            Ok(plain(classic::iforest_fit(graph, &p, seed)?))
        }
        DetectorKind::Scan => {
            let d = ScanParams::default();
            let p = ScanParams {
                eps: r.get("eps", d.eps)?,
                mu: r.get("mu", d.mu)?,
            };
            r.finish()?;
            Ok(plain(classic::scan_fit(graph, &p)?))
        }
        DetectorKind::Radar | DetectorKind::Anomalous => {
            let d = ResidualParams::default();
            let p = ResidualParams {
                alpha_w: r.get("alpha_w", d.alpha_w)?,
                beta_r: r.get("beta_r", d.beta_r)?,
                gamma_l: r.get("gamma_l", d.gamma_l)?,
                lr: r.get("lr", d.lr)?,
                epochs: r.get("epochs", d.epochs)?,
            };
            r.finish()?;
            let variant = if kind == DetectorKind::Radar {
                classic::ResidualVariant::Radar
            } else {
                classic::ResidualVariant::Anomalous
            };
            let fit = classic::residual_fit(graph, &p, variant)?;
            Ok(FitReport {
                scores: fit.scores,
                losses: fit.losses,
                alpha: None,
                aux: Vec::new(),
            })
        }
        _ => run_deep(kind, graph, r, seed),
    }
}

fn run_deep(kind: DetectorKind, graph: &AttributedGraph, mut r: Reader<'_>, seed: u64) -> Result<FitReport> {
    let p = DeepParams::read(&mut r)?;
    match kind {
        DetectorKind::MlpAe => {
            r.finish()?;
            deep::autoencoder::mlpae_fit(graph, &p, seed)
        }
        DetectorKind::GcnAe => {
            r.finish()?;
            deep::autoencoder::gcnae_fit(graph, &p, seed)
        }
        DetectorKind::Dominant => {
            r.finish()?;
            deep::dominant::dominant_fit(graph, &p, seed)
        }
        DetectorKind::Done => {
            r.finish()?;
            deep::done::done_fit(graph, &p, seed)
        }
        DetectorKind::AdOne => {
            let d = AdoneParams::default();
            let q = AdoneParams {
                adv_weight: r.get("adv_weight", d.adv_weight)?,
            };
            r.finish()?;
            deep::done::adone_fit(graph, &p, &q, seed)
        }
        DetectorKind::AnomalyDae => {
            let d = AnomalyDaeParams::default();
            let q = AnomalyDaeParams {
                theta: r.get("theta", d.theta)?,
                eta: r.get("eta", d.eta)?,
            };
            r.finish()?;
            deep::anomalydae::anomalydae_fit(graph, &p, &q, seed)
        }
        DetectorKind::Gaan => {
            let d = GaanParams::default();
            let q = GaanParams {
                noise_dim: r.get("noise_dim", d.noise_dim)?,
            };
            r.finish()?;
            deep::gaan::gaan_fit(graph, &p, &q, seed)
        }
        DetectorKind::Guide => {
            let d = GuideParams::default();
            let motifs: String = r.get("motifs", String::new())?;
            let q = GuideParams {
                struct_hid: r.get("struct_hid", d.struct_hid)?,
                motifs: if motifs.is_empty() {
                    d.motifs
                } else {
                    Motif::parse_list(&motifs)?
                },
            };
            r.finish()?;
            deep::guide::guide_fit(graph, &p, &q, seed)
        }
        DetectorKind::Conad => {
            let d = ConadParams::default();
            let q = ConadParams {
                aug_rate: r.get("aug_rate", d.aug_rate)?,
                margin: r.get("margin", d.margin)?,
                clique_size: r.get("clique_size", d.clique_size)?,
            };
            r.finish()?;
            deep::conad::conad_fit(graph, &p, &q, seed)
        }
        _ => unreachable!("classic detectors are dispatched in run_report"),
    }
}
