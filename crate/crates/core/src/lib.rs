//! Decentralized learning with privacy-preserving, Byzantine-robust aggregation.
//!
//! Clients train locally and aggregate model updates without revealing them:
//! updates are additively secret-shared over `Z_2^64`, and per-pair cosine
//! filtering plus L2 normalization run entirely on shares, assisted by a
//! trusted dealer that hands out Beaver triples, truncation pairs and
//! bit-decomposed comparison masks. Plaintext robust baselines (Krum,
//! coordinate median, trimmed mean, Mozi) and a small attack suite round out
//! the toolbox, and [`sim`] drives whole training runs deterministically from
//! a single seed.

pub mod aggregation;
pub mod attacks;
pub mod dealer;
pub mod error;
pub mod learning;
pub mod linalg;
pub mod mpc;
pub mod ring;
pub mod sharing;
pub mod sim;

pub use error::{Error, Result};
