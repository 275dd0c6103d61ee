//! Decision in the limit for statistical hypotheses.
//!
//! A [`decider::Decider`] watches an i.i.d. stream, shrinks a
//! law-of-the-iterated-logarithm confidence radius around the running mean,
//! and once the radius isolates a natural number asks a limit-computable
//! ([`delta2`]) set whether that number belongs to it. The [`harness`] runs
//! this over many seeded trials. The [`adversary`] searches finite trees of
//! bit strings for evidence that a candidate bit-source decider cannot
//! converge on off-target inputs.

pub mod adversary;
pub mod cli;
pub mod decider;
pub mod delta2;
pub mod error;
pub mod harness;
pub mod stats;
pub mod streams;

pub use error::{Error, Result};
