//! Simulation configuration: clients, attack, aggregation rule, dataset,
//! model shape, fixed-point parameters, and output switches, with full
//! validation before anything runs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::attacks::AttackSpec;
use crate::error::{Error, Result};
use crate::learning::Hyperparams;
use crate::ring::FixedPointCodec;

/// Aggregation rule a run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Mean,
    DKrum,
    DMedian,
    Bridge,
    Mozi,
    SecureDl,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Mean => "mean",
            Rule::DKrum => "dkrum",
            Rule::DMedian => "dmedian",
            Rule::Bridge => "bridge",
            Rule::Mozi => "mozi",
            Rule::SecureDl => "securedl",
        }
    }

    pub fn parse(s: &str) -> Result<Rule> {
        Ok(match s {
            "mean" => Rule::Mean,
            "dkrum" => Rule::DKrum,
            "dmedian" => Rule::DMedian,
            "bridge" => Rule::Bridge,
            "mozi" => Rule::Mozi,
            "securedl" => Rule::SecureDl,
            other => {
                return Err(Error::Config(format!(
                    "unknown rule {other:?}; use mean, dkrum, dmedian, bridge, mozi, or securedl"
                )))
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetChoice {
    Mnist,
    Synth,
}

impl DatasetChoice {
    pub fn name(self) -> &'static str {
        match self {
            DatasetChoice::Mnist => "mnist",
            DatasetChoice::Synth => "synth",
        }
    }

    pub fn parse(s: &str) -> Result<DatasetChoice> {
        Ok(match s {
            "mnist" => DatasetChoice::Mnist,
            "synth" => DatasetChoice::Synth,
            other => {
                return Err(Error::Config(format!(
                    "unknown dataset {other:?}; use mnist or synth"
                )))
            }
        })
    }
}

/// Everything one simulated run needs. Serializable so config files and
/// result manifests round-trip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub clients: usize,
    pub attack: AttackSpec,
    pub rule: Rule,
    /// Cosine acceptance threshold for the secure rule.
    pub tau: f64,
    /// Norm floor for the secure rule.
    pub norm_floor: f64,
    pub divide_by_accepted: bool,
    /// Assumed faulty count for Krum; defaults to the Byzantine set size.
    pub krum_f: Option<usize>,
    /// Per-end trim count for the trimmed mean; defaults to the Byzantine
    /// set size (clamped to keep at least one survivor).
    pub trim: Option<usize>,
    /// Shortlist fraction for the loss-filtered rule.
    pub mozi_rho: f64,
    /// Neighbor lists per client for plaintext rules; empty means the
    /// complete graph. The secure rule always runs all-to-all.
    pub neighbors: Vec<Vec<usize>>,
    pub dataset: DatasetChoice,
    pub train_samples: usize,
    pub test_samples: usize,
    /// Feature dimension and class count for the synthetic dataset.
    pub synth_dim: usize,
    pub synth_classes: usize,
    /// Hidden width of the MLP.
    pub hidden: usize,
    pub hyper: Hyperparams,
    pub rounds: usize,
    pub seed: u64,
    pub frac_bits: u32,
    pub value_bits: u32,
    /// Per-round evaluation sample cap (the final round always evaluates
    /// the full test set). Zero means no cap.
    pub eval_subset: usize,
    /// Measure wall-clock phase timings. Off keeps CSV output bit-stable.
    pub timing: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            clients: 4,
            attack: AttackSpec::default(),
            rule: Rule::Mean,
            tau: 0.0,
            norm_floor: 0.125,
            divide_by_accepted: false,
            krum_f: None,
            trim: None,
            mozi_rho: 0.5,
            neighbors: Vec::new(),
            dataset: DatasetChoice::Synth,
            train_samples: 2000,
            test_samples: 500,
            synth_dim: 16,
            synth_classes: 4,
            hidden: 16,
            hyper: Hyperparams::default(),
            rounds: 30,
            seed: 1,
            frac_bits: 16,
            value_bits: 32,
            eval_subset: 512,
            timing: false,
        }
    }
}

impl SimConfig {
    pub fn codec(&self) -> FixedPointCodec {
        FixedPointCodec {
            frac_bits: self.frac_bits,
            value_bits: self.value_bits,
        }
    }

    /// Byzantine ids are the attack spec's set; `with_byzantine_count`
    /// fills it with the first `b` client ids.
    pub fn with_byzantine_count(mut self, b: usize) -> SimConfig {
        self.attack.byzantine = (0..b).collect::<BTreeSet<usize>>();
        self
    }

    pub fn honest_clients(&self) -> Vec<usize> {
        (0..self.clients)
            .filter(|c| !self.attack.is_byzantine(*c))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.clients < 2 {
            return Err(Error::Config(format!(
                "need at least 2 clients, got {}",
                self.clients
            )));
        }
        self.attack.validate(self.clients)?;
        if self.honest_clients().is_empty() {
            return Err(Error::Config(
                "metrics cover honest clients, so at least one must stay honest".into(),
            ));
        }
        if !(-1.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!(
                "cosine threshold must be in [-1, 1], got {}",
                self.tau
            )));
        }
        if !(self.norm_floor > 0.0 && self.norm_floor.is_finite()) {
            return Err(Error::Config(format!(
                "norm floor must be positive, got {}",
                self.norm_floor
            )));
        }
        if !(0.0 < self.mozi_rho && self.mozi_rho <= 1.0) {
            return Err(Error::Config(format!(
                "shortlist fraction must be in (0, 1], got {}",
                self.mozi_rho
            )));
        }
        if !self.neighbors.is_empty() {
            if self.neighbors.len() != self.clients {
                return Err(Error::Config(format!(
                    "neighbor lists cover {} clients, expected {}",
                    self.neighbors.len(),
                    self.clients
                )));
            }
            for (i, ns) in self.neighbors.iter().enumerate() {
                if ns.iter().any(|&j| j >= self.clients || j == i) {
                    return Err(Error::Config(format!(
                        "client {i} has an out-of-range or self neighbor"
                    )));
                }
            }
        }
        if self.rounds == 0 {
            return Err(Error::Config("need at least one round".into()));
        }
        if self.train_samples < self.clients {
            return Err(Error::Config(format!(
                "{} training samples cannot cover {} clients",
                self.train_samples, self.clients
            )));
        }
        if self.test_samples == 0 {
            return Err(Error::Config("need test samples".into()));
        }
        if self.dataset == DatasetChoice::Synth {
            if self.synth_dim == 0 {
                return Err(Error::Config("synthetic dataset needs dim > 0".into()));
            }
            if !(2..=256).contains(&self.synth_classes) {
                return Err(Error::Config(format!(
                    "synthetic dataset needs 2..=256 classes, got {}",
                    self.synth_classes
                )));
            }
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden width must be at least 1".into()));
        }
        self.hyper.validate()?;
        if !(8..=24).contains(&self.frac_bits) {
            return Err(Error::Config(format!(
                "fraction bits must be in 8..=24, got {}",
                self.frac_bits
            )));
        }
        if self.value_bits <= self.frac_bits + 4 || self.value_bits > 40 {
            return Err(Error::Config(format!(
                "value bits must be in {}..=40, got {}",
                self.frac_bits + 5,
                self.value_bits
            )));
        }
        FixedPointCodec::new(self.frac_bits, self.value_bits)?;
        if let Some(t) = self.trim {
            if 2 * t >= self.clients {
                return Err(Error::Config(format!(
                    "trimming {t} from each end of {} updates leaves nothing",
                    self.clients
                )));
            }
        }
        Ok(())
    }

    pub fn effective_krum_f(&self) -> usize {
        self.krum_f.unwrap_or(self.attack.byzantine.len())
    }

    /// Trim count: override, else Byzantine count, clamped so at least one
    /// value survives per coordinate.
    pub fn effective_trim(&self) -> usize {
        let t = self.trim.unwrap_or(self.attack.byzantine.len());
        t.min((self.clients - 1) / 2)
    }

    /// The clients receiver `i` hears from.
    pub fn neighbor_set(&self, i: usize) -> Vec<usize> {
        if self.neighbors.is_empty() {
            (0..self.clients).filter(|&j| j != i).collect()
        } else {
            self.neighbors[i].clone()
        }
    }
}
