//! Hyperparameter grids and seeded random sampling over them.

use graphod::detectors::{DetectorKind, ParamMap};
use graphod::rng;
use rand::Rng as _;

use crate::error::{Error, Result};

/// Which detectors an axis applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Every gradient-trained deep detector.
    Deep,
    /// Radar and ANOMALOUS.
    Residual,
    Only(DetectorKind),
}

impl Scope {
    pub fn applies(self, kind: DetectorKind) -> bool {
        match self {
            Scope::Deep => kind.is_deep(),
            Scope::Residual => matches!(kind, DetectorKind::Radar | DetectorKind::Anomalous),
            Scope::Only(k) => k == kind,
        }
    }
}

/// One hyperparameter and its candidate values.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub candidates: Vec<String>,
    pub scope: Scope,
}

impl Axis {
    pub fn new(key: &str, candidates: &[&str], scope: Scope) -> Self {
        Self {
            key: key.to_string(),
            candidates: candidates.iter().map(|c| c.to_string()).collect(),
            scope,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpace {
    pub axes: Vec<Axis>,
    pub trials: usize,
    pub master_seed: u64,
}

impl GridSpace {
    /// The standard grid. Deep detectors share dropout, learning rate, weight
    /// decay, epochs and width; alpha stays automatic. Radar and ANOMALOUS take
    /// their learning rate as a fraction of the safe step, so the shared
    /// candidates are scaled by ten.
    pub fn standard(trials: usize, master_seed: u64) -> Self {
        use DetectorKind::*;
        let axes = vec![
            Axis::new("dropout", &["0", "0.1", "0.3"], Scope::Deep),
            Axis::new("lr", &["0.1", "0.05", "0.01"], Scope::Deep),
            Axis::new("weight_decay", &["0.01"], Scope::Deep),
            Axis::new("epochs", &["300"], Scope::Deep),
            Axis::new("hid_dim", &["32", "64", "128", "256"], Scope::Deep),
            Axis::new("lr", &["1", "0.5", "0.1"], Scope::Residual),
            Axis::new("epochs", &["300"], Scope::Residual),
            Axis::new("eps", &["0.3", "0.5", "0.8"], Scope::Only(Scan)),
            Axis::new("mu", &["2", "5", "10"], Scope::Only(Scan)),
            Axis::new("theta", &["10", "40", "90"], Scope::Only(AnomalyDae)),
            Axis::new("eta", &["3", "5", "8"], Scope::Only(AnomalyDae)),
            Axis::new("noise_dim", &["8", "16", "32"], Scope::Only(Gaan)),
            Axis::new("struct_hid", &["4", "5", "6"], Scope::Only(Guide)),
        ];
        Self {
            axes,
            trials,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Grid("trials must be >= 1".into()));
        }
        if let Some(a) = self.axes.iter().find(|a| a.candidates.is_empty()) {
            return Err(Error::Grid(format!("axis '{}' has no candidates", a.key)));
        }
        Ok(())
    }

    /// Replaces the candidates of every axis named `key`.
    pub fn set(&mut self, key: &str, candidates: &[&str]) -> Result<&mut Self> {
        let mut found = false;
        for a in self.axes.iter_mut().filter(|a| a.key == key) {
            a.candidates = candidates.iter().map(|c| c.to_string()).collect();
            found = true;
        }
        if !found {
            return Err(Error::Grid(format!("no axis named '{key}'")));
        }
        Ok(self)
    }

    pub fn axes_for(&self, kind: DetectorKind) -> impl Iterator<Item = &Axis> {
        self.axes.iter().filter(move |a| a.scope.applies(kind))
    }

    /// `trials` assignments for `kind`, each axis drawn independently and
    /// uniformly. The sequence depends only on the master seed and detector.
    pub fn sample(&self, kind: DetectorKind) -> Result<Vec<ParamMap>> {
        self.validate()?;
        let mut r = rng::seeded(rng::derive(self.master_seed, &format!("grid/{kind}")));
        Ok((0..self.trials)
            .map(|_| {
                let mut p = ParamMap::new();
                for a in self.axes_for(kind) {
                    p.set(&a.key, &a.candidates[r.random_range(0..a.candidates.len())]);
                }
                p
            })
            .collect())
    }
}
