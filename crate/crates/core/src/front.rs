//! Pareto-front records with provenance.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::mask::BitMask;
use crate::metrics::NormalizationSpec;
use crate::moea::ObjectiveVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Phase1,
    Phase2,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Phase1 => "phase1",
            Phase::Phase2 => "phase2",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    /// Pruning interval, already repaired so `th1 <= th2`.
    Thresholds { th1: f64, th2: f64 },
    /// Mask over the heavy anchor's nonzero prunable weights.
    Mask(BitMask),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub phase: Phase,
    pub decision: Decision,
    /// Nonzero prunable weights after pruning.
    pub f1: f64,
    /// Error on the optimization subset (the search objective).
    pub f2_opt: f64,
    /// Error on the validation subset (the reporting objective).
    pub f2_val: f64,
    pub generation: usize,
}

impl Solution {
    /// Reporting objectives `(f1, f2_val)`.
    pub fn objectives(&self) -> ObjectiveVector {
        ObjectiveVector::new(self.f1, self.f2_val)
    }

    pub fn search_objectives(&self) -> ObjectiveVector {
        ObjectiveVector::new(self.f1, self.f2_opt)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoFront {
    pub seed: u64,
    pub norm: NormalizationSpec,
    pub solutions: Vec<Solution>,
}

impl ParetoFront {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn objectives(&self) -> Vec<ObjectiveVector> {
        self.solutions.iter().map(Solution::objectives).collect()
    }
}
