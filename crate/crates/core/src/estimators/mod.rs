//! Per-experiment ATE estimators: difference in means, OLS with covariates,
//! overlapping OLS, and cross-fitted double machine learning.
//!
//! Every estimator returns an [`AteEstimate`] whose `v` is an estimate of
//! `N * Var(tau_hat)`, so the standard error is always `sqrt(v / n)` and the
//! pooling formulas can treat the estimators interchangeably.

mod dml;
mod nuisance;

pub use dml::{dml_estimate, dml_estimate_with_folds, psi_score, DmlConfig, DmlRows, FoldAssignment};
pub use nuisance::{train_nuisance, Mlp, NetworkConfig, NuisanceFit, TrainingConfig};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{ExperimentSample, OverlappingTrial};
use crate::error::{Error, Result};
use crate::linalg::{normal_equations, GramSolver};
use crate::stats::{z_two_sided, VARIANCE_FLOOR};

/// Largest accepted `b^2` before the treatment coefficient is considered
/// unidentified (its column is collinear with the rest of the design).
const MAX_DESIGN_FACTOR_SQ: f64 = 1e8;

/// Point estimate, variance scale and two-sided confidence bounds for one
/// experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AteEstimate {
    pub tau_hat: f64,
    /// Estimate of `n * Var(tau_hat)`.
    pub v: f64,
    /// Design factor `sqrt(n * Iᵀ(tᵀt)⁻¹I)`, when a linear design is available.
    pub b: Option<f64>,
    pub n: usize,
    pub lb: f64,
    pub ub: f64,
}

impl AteEstimate {
    /// Builds bounds `tau_hat ∓ z_{1-alpha/2} sqrt(v / n)`.
    pub fn from_variance(tau_hat: f64, v: f64, b: Option<f64>, n: usize, alpha: f64) -> Self {
        let half = z_two_sided(alpha) * (v / n as f64).sqrt();
        Self {
            tau_hat,
            v,
            b,
            n,
            lb: tau_hat - half,
            ub: tau_hat + half,
        }
    }

    /// Standard error `sqrt(v / n)`.
    pub fn se(&self) -> f64 {
        (self.v / self.n as f64).sqrt()
    }

    /// `s^2 = v / b^2`, the noise variance implied by a linear design.
    pub fn s2(&self) -> Option<f64> {
        self.b.map(|b| self.v / (b * b))
    }

    pub fn with_b(mut self, b: f64) -> Self {
        self.b = Some(b);
        self
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Difference in means with the pooled within-arm variance (divisor `N - 2`).
pub fn dm_estimate(sample: &ExperimentSample, alpha: f64) -> Result<AteEstimate> {
    check_alpha(alpha)?;
    let (n1, n0) = sample.arm_sizes();
    if n1 == 0 || n0 == 0 {
        return Err(Error::EmptyArm {
            treated: n1,
            control: n0,
        });
    }
    let n = sample.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("DM needs N >= 3, got {n}")));
    }
    let (mut sum1, mut sum0) = (0.0, 0.0);
    for (&y, &d) in sample.outcomes.iter().zip(&sample.treated) {
        if d {
            sum1 += y;
        } else {
            sum0 += y;
        }
    }
    let (m1, m0) = (sum1 / n1 as f64, sum0 / n0 as f64);
    let ss: f64 = sample
        .outcomes
        .iter()
        .zip(&sample.treated)
        .map(|(&y, &d)| {
            let r = y - if d { m1 } else { m0 };
            r * r
        })
        .sum();
    let s2 = (ss / (n - 2) as f64).max(VARIANCE_FLOOR);
    Ok(AteEstimate::from_variance(m1 - m0, 4.0 * s2, None, n, alpha))
}

/// Design rows `[1, d_i, x_i]` of one experiment.
fn experiment_design(sample: &ExperimentSample) -> DMatrix<f64> {
    let p = 2 + sample.dx;
    DMatrix::from_fn(sample.len(), p, |i, j| match j {
        0 => 1.0,
        1 => f64::from(u8::from(sample.treated[i])),
        _ => sample.covariate_row(i)[j - 2],
    })
}

/// Design factor `b = sqrt(N * [(tᵀt)⁻¹]_{11})` for the design `[1, d, x]`.
pub fn design_factor(sample: &ExperimentSample) -> Result<f64> {
    let t = experiment_design(sample);
    let solver = GramSolver::new(t.tr_mul(&t))?;
    let b2 = sample.len() as f64 * solver.inverse_diagonal_entry(1)?;
    check_identified(b2, "treatment")?;
    Ok(b2.sqrt())
}

fn check_identified(b2: f64, what: &str) -> Result<()> {
    if b2.is_finite() && b2 > 0.0 && b2 <= MAX_DESIGN_FACTOR_SQ {
        Ok(())
    } else {
        Err(Error::RankDeficient(format!(
            "{what} coefficient is not identified (b^2 = {b2:e})"
        )))
    }
}

fn rss(design: &DMatrix<f64>, y: &DVector<f64>, coef: &DVector<f64>) -> f64 {
    let r = y - design * coef;
    r.dot(&r)
}

/// OLS of `y` on `[1, d, x]`; the estimate is the treatment coefficient.
pub fn ols_estimate(sample: &ExperimentSample, alpha: f64) -> Result<AteEstimate> {
    check_alpha(alpha)?;
    let (n1, n0) = sample.arm_sizes();
    if n1 == 0 || n0 == 0 {
        return Err(Error::EmptyArm {
            treated: n1,
            control: n0,
        });
    }
    let n = sample.len();
    let p = 2 + sample.dx;
    if n <= p {
        return Err(Error::InsufficientData(format!(
            "OLS needs N > 2 + d_x = {p}, got {n}"
        )));
    }
    let t = experiment_design(sample);
    let y = DVector::from_column_slice(&sample.outcomes);
    let (gram, rhs) = normal_equations(&t, &y);
    let solver = GramSolver::new(gram)?;
    let coef = solver.solve(&rhs)?;
    let b2 = n as f64 * solver.inverse_diagonal_entry(1)?;
    check_identified(b2, "treatment")?;
    let s2 = (rss(&t, &y, &coef) / (n - p) as f64).max(VARIANCE_FLOOR);
    Ok(AteEstimate::from_variance(
        coef[1],
        b2 * s2,
        Some(b2.sqrt()),
        n,
        alpha,
    ))
}

/// Design rows `[1, D_1..D_K, x]` of an overlapping trial.
pub(crate) fn overlapping_design(trial: &OverlappingTrial, with_covariates: bool) -> DMatrix<f64> {
    let k = trial.k;
    let p = 1 + k + if with_covariates { trial.dx } else { 0 };
    DMatrix::from_fn(trial.len(), p, |i, j| {
        if j == 0 {
            1.0
        } else if j <= k {
            f64::from(u8::from(trial.treatment_row(i)[j - 1]))
        } else {
            trial.covariate_row(i)[j - 1 - k]
        }
    })
}

/// Per-experiment design factors `b_k = sqrt(N [(𝒯ᵀ𝒯)⁻¹]_{kk})` of an overlapping design.
pub fn overlapping_design_factors(trial: &OverlappingTrial, with_covariates: bool) -> Result<Vec<f64>> {
    let t = overlapping_design(trial, with_covariates);
    let solver = GramSolver::new(t.tr_mul(&t))?;
    let n = trial.len() as f64;
    (1..=trial.k)
        .map(|j| {
            let b2 = n * solver.inverse_diagonal_entry(j)?;
            check_identified(b2, "treatment")?;
            Ok(b2.sqrt())
        })
        .collect()
}

/// Joint OLS of `y` on `[1, D_1..D_K (, x)]`; one estimate per experiment.
///
/// The residual variance uses divisor `N - p` with `p` the number of
/// regressors (`N - K - 1` without covariates). `v_k = N * SE_k^2`.
pub fn ols_overlapping_estimate(
    trial: &OverlappingTrial,
    with_covariates: bool,
    alpha: f64,
) -> Result<Vec<AteEstimate>> {
    check_alpha(alpha)?;
    let n = trial.len();
    let p = 1 + trial.k + if with_covariates { trial.dx } else { 0 };
    if n <= p {
        return Err(Error::InsufficientData(format!(
            "overlapping OLS needs N > {p}, got {n}"
        )));
    }
    let t = overlapping_design(trial, with_covariates);
    let y = DVector::from_column_slice(&trial.outcomes);
    let (gram, rhs) = normal_equations(&t, &y);
    let solver = GramSolver::new(gram)?;
    let coef = solver.solve(&rhs)?;
    let inv = solver.inverse()?;
    let sigma2 = (rss(&t, &y, &coef) / (n - p) as f64).max(VARIANCE_FLOOR);
    (1..=trial.k)
        .map(|j| {
            let b2 = n as f64 * inv[(j, j)];
            check_identified(b2, "treatment")?;
            Ok(AteEstimate::from_variance(
                coef[j],
                b2 * sigma2,
                Some(b2.sqrt()),
                n,
                alpha,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn sample(treated: &[f64], control: &[f64]) -> ExperimentSample {
        let mut y = treated.to_vec();
        y.extend_from_slice(control);
        let d = (0..y.len()).map(|i| i < treated.len()).collect();
        ExperimentSample::new(y, d).unwrap()
    }

    #[test]
    fn dm_hand_example() {
        let e = dm_estimate(&sample(&[3.0, 1.0], &[2.0, 0.0]), 0.05).unwrap();
        assert_eq!(e.tau_hat, 1.0);
        assert!((e.v - 8.0).abs() < 1e-15);
        let half = 1.959_963_984_540_054 * (8.0f64 / 4.0).sqrt();
        assert!((e.lb - (1.0 - half)).abs() < 1e-9);
        assert!((e.ub - (1.0 + half)).abs() < 1e-9);
    }

    #[test]
    fn dm_constant_outcomes_floored() {
        let e = dm_estimate(&sample(&[4.2, 4.2], &[4.2, 4.2]), 0.05).unwrap();
        assert_eq!(e.tau_hat, 0.0);
        assert_eq!(e.v, 4.0 * VARIANCE_FLOOR);
        assert!(e.lb < 0.0 && e.ub > 0.0);
    }

    #[test]
    fn dm_noiseless() {
        let e = dm_estimate(&sample(&[2.0; 5], &[0.0; 5]), 0.05).unwrap();
        assert_eq!(e.tau_hat, 2.0);
    }

    #[test]
    fn dm_empty_arm() {
        let s = sample(&[1.0, 2.0, 3.0], &[]);
        assert!(matches!(dm_estimate(&s, 0.05), Err(Error::EmptyArm { .. })));
    }

    #[test]
    fn dm_too_small() {
        let s = sample(&[1.0], &[2.0]);
        assert!(matches!(dm_estimate(&s, 0.05), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn ols_without_covariates_matches_dm() {
        let s = sample(&[3.0, 1.0, 0.5, 2.5], &[2.0, 0.0, -1.0, 0.7]);
        let dm = dm_estimate(&s, 0.05).unwrap();
        let ols = ols_estimate(&s, 0.05).unwrap();
        assert!((dm.tau_hat - ols.tau_hat).abs() < 1e-12);
        assert!((dm.v - ols.v).abs() < 1e-12);
        assert!((ols.b.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ols_zero_covariates_reduce_to_dm_point_estimate() {
        let base = sample(&[3.0, 1.0, 0.5, 2.5], &[2.0, 0.0, -1.0, 0.7]);
        let s = ExperimentSample::with_covariates(
            base.outcomes.clone(),
            base.treated.clone(),
            vec![0.0; 8],
            1,
        )
        .unwrap();
        let ols = ols_estimate(&s, 0.05).unwrap();
        let dm = dm_estimate(&base, 0.05).unwrap();
        assert!((ols.tau_hat - dm.tau_hat).abs() < 1e-8);
    }

    #[test]
    fn ols_noiseless_exact() {
        let mut rng = crate::rng::stream(3, &[0]);
        let n = 12;
        let dx = 3;
        let x: Vec<f64> = (0..n * dx).map(|_| rng.random::<f64>()).collect();
        let d: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let theta = [0.3, -0.2, 0.7];
        let y = (0..n)
            .map(|i| {
                1.0 + 2.0 * f64::from(u8::from(d[i]))
                    + (0..dx).map(|j| theta[j] * x[i * dx + j]).sum::<f64>()
            })
            .collect();
        let s = ExperimentSample::with_covariates(y, d, x, dx).unwrap();
        let e = ols_estimate(&s, 0.05).unwrap();
        assert!((e.tau_hat - 2.0).abs() < 1e-10);
        assert!(e.s2().unwrap() < 1e-10);
    }

    #[test]
    fn ols_insufficient() {
        let s = ExperimentSample::with_covariates(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![true, false, true, false],
            vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
            2,
        )
        .unwrap();
        assert!(matches!(ols_estimate(&s, 0.05), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn ols_collinear_treatment_is_rank_deficient() {
        let d = vec![true, false, true, false, true, false];
        let x: Vec<f64> = d.iter().map(|&t| f64::from(u8::from(t))).collect();
        let s = ExperimentSample::with_covariates(vec![1.0, 0.0, 1.2, 0.1, 0.9, -0.2], d, x, 1)
            .unwrap();
        assert!(matches!(ols_estimate(&s, 0.05), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn overlapping_single_experiment_matches_dm_when_balanced() {
        let s = sample(&[3.0, 1.0, 0.5], &[2.0, 0.0, -1.0]);
        let trial = OverlappingTrial::new(1, 0, s.outcomes.clone(), s.treated.clone(), vec![])
            .unwrap();
        let ov = ols_overlapping_estimate(&trial, false, 0.05).unwrap();
        let dm = dm_estimate(&s, 0.05).unwrap();
        assert!((ov[0].tau_hat - dm.tau_hat).abs() < 1e-12);
        // Same divisor N - 2 and b^2 = 4 for a balanced design.
        assert!((ov[0].v - dm.v).abs() < 1e-12);
    }

    #[test]
    fn overlapping_noiseless_exact() {
        let mut rng = crate::rng::stream(11, &[0]);
        let (n, k) = (40, 3);
        let tau = [0.5, -1.0, 2.0];
        let d: Vec<bool> = (0..n * k).map(|_| rng.random::<bool>()).collect();
        let y = (0..n)
            .map(|i| 0.3 + (0..k).map(|j| tau[j] * f64::from(u8::from(d[i * k + j]))).sum::<f64>())
            .collect();
        let trial = OverlappingTrial::new(k, 0, y, d, vec![]).unwrap();
        let est = ols_overlapping_estimate(&trial, false, 0.05).unwrap();
        for (e, t) in est.iter().zip(tau) {
            assert!((e.tau_hat - t).abs() < 1e-10);
        }
    }
}
