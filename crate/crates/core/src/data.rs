//! Trial layouts: non-overlapping (one sample per experiment) and overlapping
//! (shared rows carrying a treatment vector).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observations of a single experiment. Covariates are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSample {
    pub outcomes: Vec<f64>,
    pub treated: Vec<bool>,
    /// `n * dx` values, empty when `dx == 0`.
    pub covariates: Vec<f64>,
    pub dx: usize,
}

impl ExperimentSample {
    pub fn new(outcomes: Vec<f64>, treated: Vec<bool>) -> Result<Self> {
        Self::with_covariates(outcomes, treated, Vec::new(), 0)
    }

    pub fn with_covariates(
        outcomes: Vec<f64>,
        treated: Vec<bool>,
        covariates: Vec<f64>,
        dx: usize,
    ) -> Result<Self> {
        if outcomes.len() != treated.len() {
            return Err(Error::LengthMismatch {
                expected: outcomes.len(),
                got: treated.len(),
            });
        }
        if covariates.len() != outcomes.len() * dx {
            return Err(Error::LengthMismatch {
                expected: outcomes.len() * dx,
                got: covariates.len(),
            });
        }
        Ok(Self {
            outcomes,
            treated,
            covariates,
            dx,
        })
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn covariate_row(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.dx..(i + 1) * self.dx]
    }

    /// `(treated count, control count)`.
    pub fn arm_sizes(&self) -> (usize, usize) {
        let t = self.treated.iter().filter(|&&d| d).count();
        (t, self.treated.len() - t)
    }
}

/// `K` experiments run on disjoint subject pools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonOverlappingTrial {
    pub experiments: Vec<ExperimentSample>,
}

impl NonOverlappingTrial {
    pub fn k(&self) -> usize {
        self.experiments.len()
    }
}

/// Shared rows, each exposed to a vector of `K` concurrent treatments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlappingTrial {
    pub k: usize,
    pub dx: usize,
    pub outcomes: Vec<f64>,
    /// `n * k` flags, row-major.
    pub treatments: Vec<bool>,
    /// `n * dx` values, row-major.
    pub covariates: Vec<f64>,
}

impl OverlappingTrial {
    pub fn new(
        k: usize,
        dx: usize,
        outcomes: Vec<f64>,
        treatments: Vec<bool>,
        covariates: Vec<f64>,
    ) -> Result<Self> {
        let n = outcomes.len();
        if treatments.len() != n * k {
            return Err(Error::LengthMismatch {
                expected: n * k,
                got: treatments.len(),
            });
        }
        if covariates.len() != n * dx {
            return Err(Error::LengthMismatch {
                expected: n * dx,
                got: covariates.len(),
            });
        }
        Ok(Self {
            k,
            dx,
            outcomes,
            treatments,
            covariates,
        })
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn treatment_row(&self, i: usize) -> &[bool] {
        &self.treatments[i * self.k..(i + 1) * self.k]
    }

    pub fn covariate_row(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.dx..(i + 1) * self.dx]
    }
}

/// Either trial layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrialData {
    NonOverlapping(NonOverlappingTrial),
    Overlapping(OverlappingTrial),
}
