//! Text de-identification by probabilistic token replacement.
//!
//! Sensitive units (entity tokens or whole entity spans) are replaced with
//! probability `p` by surrogates drawn from a policy that does not depend on
//! the original. That makes the transformation (ε, 0)-differentially private
//! with a closed-form ε, computed in [`privacy`] and checked there against an
//! exact enumeration.
//!
//! - [`corpus`]: sentences, spans and the CoNLL / JSON-lines formats.
//! - [`policy`]: replacement distributions.
//! - [`mechanism`]: the replacement algorithm and its audit log.
//! - [`strategy`]: the named strategies and their registry.
//! - [`privacy`]: ε accounting and the enumeration verifier.
//! - [`utility`]: synthetic data, count-based models, metrics and the p-sweep.

pub mod corpus;
pub mod error;
pub mod mechanism;
pub mod policy;
pub mod privacy;
pub mod rng;
pub mod strategy;
pub mod utility;

pub use error::{Error, Result};
