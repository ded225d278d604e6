//! Two-phase multi-objective evolutionary pruning for dense feedforward
//! networks.
//!
//! Phase 1 searches a global pruning interval `(th1, th2)` with NSGA-II.
//! Phase 2 picks a heavy and a light anchor from that front, seeds binary
//! masks over the heavy anchor's surviving weights with importance-guided
//! sampling, and refines them with NSGA-II or MOEA/D. Both phases minimize
//! `(nonzero weights, classification error)`.

pub mod config;
pub mod data;
pub mod error;
pub mod export;
pub mod front;
pub mod mask;
pub mod metrics;
pub mod moea;
pub mod nn;
pub mod phase1;
pub mod phase2;
pub mod pipeline;
pub mod plot;
pub mod rng;

pub use error::{Error, ErrorClass, Result};
