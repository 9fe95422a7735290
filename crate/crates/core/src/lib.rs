//! Generalization bounds for learning from several source domains, or from
//! a source mixed with a small target sample, with the estimators and Monte
//! Carlo checks needed to evaluate them.
//!
//! All randomness is seeded: every entry point that draws takes a `u64` seed
//! and derives independent ChaCha streams from it (see [`seed`]), so results
//! do not depend on the number of threads.

pub mod bounds;
pub mod complexity;
pub mod concentration;
pub mod config;
pub mod divergences;
pub mod domains;
pub mod error;
pub mod experiments;
pub mod fixtures;
pub mod hypotheses;
pub mod seed;

pub use error::{Error, ErrorKind, Result};
