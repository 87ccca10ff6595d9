//! Secure computation over shared vectors: the engine, its opening
//! transcript, and the protocol operations built from dealer material.

mod engine;
mod ops;

pub use engine::{read_transcript_dump, Engine, OpeningKind, Transcript};
pub use ops::{
    cost_compare, cost_inverse, cost_mul, cost_mul_trunc, cost_sqrt, cost_trunc, INVERSE_ITERS,
    SQRT_ITERS,
};
