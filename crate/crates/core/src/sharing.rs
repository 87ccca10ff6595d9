//! Additive n-out-of-n secret sharing over `Z_2^64`.
//!
//! A secret vector is split into `n` share vectors that sum to it; any
//! `n - 1` of them are independent uniform randomness. Party 0 is the
//! designated representative for public-constant offsets: adding a public
//! value to a sharing means party 0 adds it and everyone else does nothing,
//! while multiplying by a public value is done by every party.
//!
//! [`ShareVector`] is what a single party holds. [`SharedVector`] bundles the
//! complete set of per-party shares for one logical secret; the in-process
//! protocol engine operates on these, standing in for the network.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::ring::RingElement;

/// One party's additive share of a secret vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareVector {
    party_id: usize,
    elems: Vec<RingElement>,
}

impl ShareVector {
    pub fn new(party_id: usize, elems: Vec<RingElement>) -> Self {
        ShareVector { party_id, elems }
    }

    pub fn party_id(&self) -> usize {
        self.party_id
    }

    pub fn dim(&self) -> usize {
        self.elems.len()
    }

    pub fn elems(&self) -> &[RingElement] {
        &self.elems
    }

    fn check_compatible(&self, other: &ShareVector) -> Result<()> {
        if self.party_id != other.party_id {
            return Err(Error::ShareMismatch(format!(
                "party {} vs {}",
                self.party_id, other.party_id
            )));
        }
        if self.elems.len() != other.elems.len() {
            return Err(Error::ShareMismatch(format!(
                "dim {} vs {}",
                self.elems.len(),
                other.elems.len()
            )));
        }
        Ok(())
    }

    /// Share of the sum: add share vectors of the same party coordinatewise.
    pub fn add(&self, other: &ShareVector) -> Result<ShareVector> {
        self.check_compatible(other)?;
        Ok(ShareVector {
            party_id: self.party_id,
            elems: self
                .elems
                .iter()
                .zip(&other.elems)
                .map(|(&a, &b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &ShareVector) -> Result<ShareVector> {
        self.check_compatible(other)?;
        Ok(ShareVector {
            party_id: self.party_id,
            elems: self
                .elems
                .iter()
                .zip(&other.elems)
                .map(|(&a, &b)| a - b)
                .collect(),
        })
    }

    /// Share of `secret + c`: party 0 absorbs the public offset.
    pub fn add_public(&self, c: &[RingElement]) -> Result<ShareVector> {
        if c.len() != self.elems.len() {
            return Err(Error::ShareMismatch(format!(
                "public offset dim {} vs share dim {}",
                c.len(),
                self.elems.len()
            )));
        }
        let elems = if self.party_id == 0 {
            self.elems.iter().zip(c).map(|(&a, &b)| a + b).collect()
        } else {
            self.elems.clone()
        };
        Ok(ShareVector {
            party_id: self.party_id,
            elems,
        })
    }

    /// Share of `secret * c` for a public ring constant: every party scales.
    pub fn mul_public(&self, c: RingElement) -> ShareVector {
        ShareVector {
            party_id: self.party_id,
            elems: self.elems.iter().map(|&a| a * c).collect(),
        }
    }

    pub fn neg(&self) -> ShareVector {
        ShareVector {
            party_id: self.party_id,
            elems: self.elems.iter().map(|&a| -a).collect(),
        }
    }
}

/// The complete set of all `n` parties' shares of one secret vector.
///
/// Invariant: share `i` belongs to party `i` and all shares have equal
/// dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SharedVector {
    shares: Vec<ShareVector>,
}

/// Split `secret` into `n` additive shares: `n - 1` uniform vectors and one
/// difference share.
pub fn share(secret: &[RingElement], n: usize, rng: &mut impl RngCore) -> Result<SharedVector> {
    if n < 2 {
        return Err(Error::Protocol(format!("need at least 2 parties, got {n}")));
    }
    let mut shares = Vec::with_capacity(n);
    let mut acc: Vec<RingElement> = secret.to_vec();
    for party_id in 0..n - 1 {
        let elems: Vec<RingElement> = (0..secret.len())
            .map(|_| RingElement::new(rng.next_u64()))
            .collect();
        for (a, &e) in acc.iter_mut().zip(&elems) {
            *a -= e;
        }
        shares.push(ShareVector { party_id, elems });
    }
    shares.push(ShareVector {
        party_id: n - 1,
        elems: acc,
    });
    Ok(SharedVector { shares })
}

/// Sum all shares back into the secret.
pub fn reconstruct(sv: &SharedVector) -> Vec<RingElement> {
    let mut out = vec![RingElement::ZERO; sv.dim()];
    for sh in &sv.shares {
        for (o, &e) in out.iter_mut().zip(&sh.elems) {
            *o += e;
        }
    }
    out
}

impl SharedVector {
    /// Assemble a complete sharing from per-party shares, validating the
    /// party order and dimensions.
    pub fn from_shares(shares: Vec<ShareVector>) -> Result<Self> {
        if shares.len() < 2 {
            return Err(Error::Protocol(format!(
                "complete sharing needs at least 2 shares, got {}",
                shares.len()
            )));
        }
        let dim = shares[0].dim();
        for (i, sh) in shares.iter().enumerate() {
            if sh.party_id != i {
                return Err(Error::ShareMismatch(format!(
                    "share at index {i} belongs to party {}",
                    sh.party_id
                )));
            }
            if sh.dim() != dim {
                return Err(Error::ShareMismatch(format!(
                    "share dim {} vs {}",
                    sh.dim(),
                    dim
                )));
            }
        }
        Ok(SharedVector { shares })
    }

    /// The all-zero sharing (every party holds zeros).
    pub fn zeros(n: usize, dim: usize) -> Self {
        SharedVector {
            shares: (0..n)
                .map(|party_id| ShareVector {
                    party_id,
                    elems: vec![RingElement::ZERO; dim],
                })
                .collect(),
        }
    }

    /// Trivial sharing of a public vector: party 0 holds it, the rest zeros.
    pub fn from_public(c: &[RingElement], n: usize) -> Self {
        let mut sv = SharedVector::zeros(n, c.len());
        sv.shares[0].elems.copy_from_slice(c);
        sv
    }

    pub fn n(&self) -> usize {
        self.shares.len()
    }

    pub fn dim(&self) -> usize {
        self.shares[0].dim()
    }

    pub fn party(&self, id: usize) -> &ShareVector {
        &self.shares[id]
    }

    pub fn shares(&self) -> &[ShareVector] {
        &self.shares
    }

    fn zip_parties(
        &self,
        other: &SharedVector,
        f: impl Fn(&ShareVector, &ShareVector) -> Result<ShareVector>,
    ) -> Result<SharedVector> {
        if self.n() != other.n() {
            return Err(Error::ShareMismatch(format!(
                "party count {} vs {}",
                self.n(),
                other.n()
            )));
        }
        let shares = self
            .shares
            .iter()
            .zip(&other.shares)
            .map(|(a, b)| f(a, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(SharedVector { shares })
    }

    pub fn add(&self, other: &SharedVector) -> Result<SharedVector> {
        self.zip_parties(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &SharedVector) -> Result<SharedVector> {
        self.zip_parties(other, |a, b| a.sub(b))
    }

    pub fn add_public(&self, c: &[RingElement]) -> Result<SharedVector> {
        let shares = self
            .shares
            .iter()
            .map(|sh| sh.add_public(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(SharedVector { shares })
    }

    pub fn add_public_scalar(&self, c: RingElement) -> Result<SharedVector> {
        self.add_public(&vec![c; self.dim()])
    }

    pub fn mul_public(&self, c: RingElement) -> SharedVector {
        SharedVector {
            shares: self.shares.iter().map(|sh| sh.mul_public(c)).collect(),
        }
    }

    pub fn neg(&self) -> SharedVector {
        SharedVector {
            shares: self.shares.iter().map(|sh| sh.neg()).collect(),
        }
    }

    /// Sharing of a single coordinate.
    pub fn extract(&self, idx: usize) -> SharedVector {
        SharedVector {
            shares: self
                .shares
                .iter()
                .map(|sh| ShareVector {
                    party_id: sh.party_id,
                    elems: vec![sh.elems[idx]],
                })
                .collect(),
        }
    }

    /// Replicate a shared scalar into a `dim`-coordinate sharing of the
    /// constant vector with that value everywhere. Each party copies its one
    /// share word, which preserves the share sum coordinatewise.
    pub fn broadcast(&self, dim: usize) -> Result<SharedVector> {
        if self.dim() != 1 {
            return Err(Error::ShareMismatch(format!(
                "broadcast needs a scalar sharing, got dim {}",
                self.dim()
            )));
        }
        Ok(SharedVector {
            shares: self
                .shares
                .iter()
                .map(|sh| ShareVector {
                    party_id: sh.party_id,
                    elems: vec![sh.elems[0]; dim],
                })
                .collect(),
        })
    }

    /// Local reduction: each party sums its coordinates, yielding a sharing
    /// of the coordinate sum.
    pub fn sum_coords(&self) -> SharedVector {
        SharedVector {
            shares: self
                .shares
                .iter()
                .map(|sh| {
                    let mut acc = RingElement::ZERO;
                    for &e in &sh.elems {
                        acc += e;
                    }
                    ShareVector {
                        party_id: sh.party_id,
                        elems: vec![acc],
                    }
                })
                .collect(),
        }
    }
}
