//! Byzantine client behaviors: transformations a faulty client applies to
//! its local training data or its trained update before sharing it.
//!
//! Every attack is a pure function of its inputs plus an explicit RNG, and
//! the RNG for round `r` of client `c` is derived from `(seed, r, c)`, so
//! runs are reproducible and honest clients are untouched.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    None,
    SignFlip,
    Gaussian,
    Scaling,
    LabelFlip,
    Combination,
}

/// Which attack runs, with its parameters and the set of clients that
/// mount it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Mean of the Gaussian replacement/noise.
    pub gaussian_mean: f64,
    /// Variance of the Gaussian replacement/noise.
    pub gaussian_variance: f64,
    pub scaling_factor: f64,
    /// Sub-attacks a combination applies, in this order, to the update
    /// after local training. Label flipping acts earlier, on the data.
    pub combination: Vec<AttackKind>,
    /// Clients mounting the attack.
    pub byzantine: BTreeSet<usize>,
}

impl Default for AttackSpec {
    fn default() -> Self {
        AttackSpec {
            kind: AttackKind::None,
            gaussian_mean: 0.1,
            gaussian_variance: 0.1,
            scaling_factor: 100.0,
            combination: vec![
                AttackKind::LabelFlip,
                AttackKind::SignFlip,
                AttackKind::Scaling,
                AttackKind::Gaussian,
            ],
            byzantine: BTreeSet::new(),
        }
    }
}

impl AttackSpec {
    /// An attack of `kind` with default parameters mounted by `byzantine`.
    pub fn new(kind: AttackKind, byzantine: impl IntoIterator<Item = usize>) -> Self {
        AttackSpec {
            kind,
            byzantine: byzantine.into_iter().collect(),
            ..AttackSpec::default()
        }
    }

    pub fn validate(&self, clients: usize) -> Result<()> {
        if !self.gaussian_variance.is_finite() || self.gaussian_variance < 0.0 {
            return Err(Error::Config(format!(
                "gaussian variance must be finite and non-negative, got {}",
                self.gaussian_variance
            )));
        }
        if !self.gaussian_mean.is_finite() || !self.scaling_factor.is_finite() {
            return Err(Error::Config("attack factors must be finite".into()));
        }
        if let Some(&id) = self.byzantine.iter().find(|&&id| id >= clients) {
            return Err(Error::Config(format!(
                "byzantine client id {id} out of range for {clients} clients"
            )));
        }
        Ok(())
    }

    pub fn is_byzantine(&self, client: usize) -> bool {
        self.kind != AttackKind::None && self.byzantine.contains(&client)
    }

    /// Whether `client` trains on flipped labels this run.
    pub fn flips_labels(&self, client: usize) -> bool {
        self.is_byzantine(client)
            && (self.kind == AttackKind::LabelFlip
                || (self.kind == AttackKind::Combination
                    && self.combination.contains(&AttackKind::LabelFlip)))
    }
}

/// Deterministic RNG for one client's attack in one round.
pub fn attack_rng(seed: u64, round: u64, client: u64) -> ChaCha20Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&round.to_le_bytes());
    bytes[16..24].copy_from_slice(&client.to_le_bytes());
    bytes[24..].copy_from_slice(b"atkstrm!");
    ChaCha20Rng::from_seed(bytes)
}

/// Flip the update's direction.
pub fn sign_flip(u: &[f64]) -> Vec<f64> {
    u.iter().map(|&x| -x).collect()
}

/// Replace the update with i.i.d. normal draws.
pub fn gaussian_attack(d: usize, mean: f64, variance: f64, rng: &mut impl Rng) -> Vec<f64> {
    let dist = Normal::new(mean, variance.sqrt()).expect("finite std dev");
    (0..d).map(|_| dist.sample(rng)).collect()
}

/// Magnify the update.
pub fn scaling_attack(u: &[f64], factor: f64) -> Vec<f64> {
    u.iter().map(|&x| factor * x).collect()
}

/// Flip a class label to its mirror class.
pub fn label_flip(label: usize, classes: usize) -> usize {
    debug_assert!(label < classes);
    classes - label - 1
}

/// The post-training stages of an attack, applied to the trained update.
/// For a combination, Gaussian noise is added rather than replacing the
/// update; label flipping contributes nothing here (it acted on the data).
pub fn poison_update(u: &[f64], spec: &AttackSpec, rng: &mut impl Rng) -> Vec<f64> {
    match spec.kind {
        AttackKind::None | AttackKind::LabelFlip => u.to_vec(),
        AttackKind::SignFlip => sign_flip(u),
        AttackKind::Gaussian => {
            gaussian_attack(u.len(), spec.gaussian_mean, spec.gaussian_variance, rng)
        }
        AttackKind::Scaling => scaling_attack(u, spec.scaling_factor),
        AttackKind::Combination => {
            let mut out = u.to_vec();
            for sub in &spec.combination {
                match sub {
                    AttackKind::SignFlip => out = sign_flip(&out),
                    AttackKind::Scaling => out = scaling_attack(&out, spec.scaling_factor),
                    AttackKind::Gaussian => {
                        let noise = gaussian_attack(
                            out.len(),
                            spec.gaussian_mean,
                            spec.gaussian_variance,
                            rng,
                        );
                        for (o, n) in out.iter_mut().zip(noise) {
                            *o += n;
                        }
                    }
                    AttackKind::None | AttackKind::LabelFlip | AttackKind::Combination => {}
                }
            }
            out
        }
    }
}
