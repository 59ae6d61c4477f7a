//! Parallel Bayesian optimization with informed design-space partitioning.
//!
//! The crate bundles a Matérn-5/2 Gaussian-process surrogate, the LCB
//! acquisition family (plain, reference-augmented, hyperparameter-sampled,
//! fantasy-mean, and batch q-LCB), three partition constructions (level-set
//! bands of a reference surrogate, overlapping hyperboxes, and variable
//! subsets ranked by ARD importance), eight optimization drivers built on
//! those pieces, a two-reactor benchmark process, and a seeded multi-run
//! benchmark harness with CSV/JSON export.

pub mod acquisition;
pub mod afopt;
pub mod algorithms;
pub mod bench;
pub mod config;
pub mod domain;
pub mod error;
pub mod gp;
pub mod partition;
pub mod reactor;
pub mod rng;

pub use domain::BoxDomain;
pub use error::{ParboError, Result};
