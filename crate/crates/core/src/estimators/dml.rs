//! Cross-fitted double machine learning for the partial-linear model
//! `y = g(x)ᵀt + ε`, where `t = [1, D_1, .., D_K]`.
//!
//! For each fold the nuisance pair `(ĝ, Λ̂)` is fitted on the complement and
//! the bias-corrected score
//!
//! ```text
//! ψ = ĝ(x)ᵀt* + 2 (y - ĝ(x)ᵀt) · [Λ̂⁻¹ t]_{t*}
//! ```
//!
//! is evaluated on the held-out rows (`t*` selects the target coordinate).
//! The second term is `-H_f Λ⁻¹ ℓ_f` for the squared loss.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::nuisance::{train_nuisance, NetworkConfig, NuisanceFit, TrainingConfig};
use super::AteEstimate;
use crate::data::{ExperimentSample, OverlappingTrial};
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::VARIANCE_FLOOR;

/// Flattened rows `(y, t, x)` with `t` carrying a leading intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DmlRows {
    pub y: Vec<f64>,
    /// `n * p`, row-major, `t[i * p] == 1`.
    pub t: Vec<f64>,
    /// `n * dx`, row-major.
    pub x: Vec<f64>,
    pub p: usize,
    pub dx: usize,
}

impl DmlRows {
    pub fn from_experiment(sample: &ExperimentSample) -> Self {
        let t = sample
            .treated
            .iter()
            .flat_map(|&d| [1.0, f64::from(u8::from(d))])
            .collect();
        Self {
            y: sample.outcomes.clone(),
            t,
            x: sample.covariates.clone(),
            p: 2,
            dx: sample.dx,
        }
    }

    pub fn from_overlapping(trial: &OverlappingTrial) -> Self {
        let p = trial.k + 1;
        let mut t = Vec::with_capacity(trial.len() * p);
        for i in 0..trial.len() {
            t.push(1.0);
            t.extend(trial.treatment_row(i).iter().map(|&d| f64::from(u8::from(d))));
        }
        Self {
            y: trial.outcomes.clone(),
            t,
            x: trial.covariates.clone(),
            p,
            dx: trial.dx,
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn t_row(&self, i: usize) -> &[f64] {
        &self.t[i * self.p..(i + 1) * self.p]
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dx..(i + 1) * self.dx]
    }

    /// Total order on rows by content, used to make fold processing
    /// independent of the input row order.
    fn cmp_rows(&self, a: usize, b: usize) -> std::cmp::Ordering {
        self.y[a]
            .total_cmp(&self.y[b])
            .then_with(|| cmp_slices(self.t_row(a), self.t_row(b)))
            .then_with(|| cmp_slices(self.x_row(a), self.x_row(b)))
    }
}

fn cmp_slices(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Fold membership of every row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub folds: usize,
}

impl FoldAssignment {
    /// Seeded random partition into `folds` near-equal folds; when `n` is not
    /// divisible, the earlier folds receive one extra row each.
    pub fn seeded(n: usize, folds: usize, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(seed, &[rng::tag::FOLDS]));
        let (base, extra) = (n / folds, n % folds);
        let mut fold_of = vec![0; n];
        let mut pos = 0;
        for s in 0..folds {
            let size = base + usize::from(s < extra);
            for &i in &order[pos..pos + size] {
                fold_of[i] = s;
            }
            pos += size;
        }
        Self { fold_of, folds }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmlConfig {
    pub folds: usize,
    pub network: NetworkConfig,
    pub training: TrainingConfig,
}

impl Default for DmlConfig {
    fn default() -> Self {
        Self {
            folds: 2,
            network: NetworkConfig::default(),
            training: TrainingConfig::default(),
        }
    }
}

/// Bias-corrected score for one row given a nuisance prediction `g`.
pub fn psi_score(g: &[f64], lambda_inv: &DMatrix<f64>, t: &[f64], y: f64, target: usize) -> f64 {
    let fitted: f64 = g.iter().zip(t).map(|(a, b)| a * b).sum();
    let resid = y - fitted;
    let row_target: f64 = (0..t.len()).map(|j| lambda_inv[(target, j)] * t[j]).sum();
    g[target] + 2.0 * resid * row_target
}

/// DML estimates for the treatment coordinates `targets` (each in `1..p`).
pub fn dml_estimate(
    rows: &DmlRows,
    targets: &[usize],
    cfg: &DmlConfig,
    alpha: f64,
    seed: u64,
) -> Result<Vec<AteEstimate>> {
    if cfg.folds < 2 {
        return Err(Error::Config(format!("cross-fitting needs at least 2 folds, got {}", cfg.folds)));
    }
    let folds = FoldAssignment::seeded(rows.len(), cfg.folds, seed);
    dml_estimate_with_folds(rows, targets, &folds, cfg, alpha, seed)
}

/// As [`dml_estimate`] with an explicit fold assignment.
pub fn dml_estimate_with_folds(
    rows: &DmlRows,
    targets: &[usize],
    folds: &FoldAssignment,
    cfg: &DmlConfig,
    alpha: f64,
    seed: u64,
) -> Result<Vec<AteEstimate>> {
    let n = rows.len();
    if folds.fold_of.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: folds.fold_of.len(),
        });
    }
    if folds.folds < 2 {
        return Err(Error::Config("cross-fitting needs at least 2 folds".into()));
    }
    if let Some(&bad) = targets.iter().find(|&&j| j == 0 || j >= rows.p) {
        return Err(Error::Config(format!("target coordinate {bad} outside 1..{}", rows.p)));
    }
    let sizes = folds.sizes();
    if sizes.iter().any(|&s| s == 0) {
        return Err(Error::InsufficientData(format!(
            "{n} rows cannot fill {} folds",
            folds.folds
        )));
    }

    // ψ values per fold, rows in canonical order.
    let mut psi_by_fold: Vec<Vec<Vec<f64>>> = Vec::with_capacity(folds.folds);
    for s in 0..folds.folds {
        let mut held: Vec<usize> = (0..n).filter(|&i| folds.fold_of[i] == s).collect();
        let mut train: Vec<usize> = (0..n).filter(|&i| folds.fold_of[i] != s).collect();
        held.sort_by(|&a, &b| rows.cmp_rows(a, b));
        train.sort_by(|&a, &b| rows.cmp_rows(a, b));
        let fit: NuisanceFit = train_nuisance(rows, &train, &cfg.network, &cfg.training, seed, s)?;
        let psi = targets
            .iter()
            .map(|&j| {
                held.iter()
                    .map(|&i| {
                        let g = fit.predict(rows.x_row(i));
                        psi_score(&g, &fit.lambda_inv, rows.t_row(i), rows.y[i], j)
                    })
                    .collect()
            })
            .collect();
        psi_by_fold.push(psi);
    }

    let total = n as f64;
    let mut out = Vec::with_capacity(targets.len());
    for (ti, _) in targets.iter().enumerate() {
        let tau: f64 = psi_by_fold
            .iter()
            .zip(&sizes)
            .map(|(f, &sz)| f[ti].iter().sum::<f64>() / sz as f64 * (sz as f64 / total))
            .sum();
        let var: f64 = psi_by_fold
            .iter()
            .zip(&sizes)
            .map(|(f, &sz)| {
                f[ti].iter().map(|p| (p - tau) * (p - tau)).sum::<f64>() / sz as f64
                    * (sz as f64 / total)
            })
            .sum();
        if !tau.is_finite() || !var.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch: cfg.training.epochs,
                loss: var,
            });
        }
        out.push(AteEstimate::from_variance(
            tau,
            var.max(VARIANCE_FLOOR),
            None,
            n,
            alpha,
        ));
    }
    Ok(out)
}
