//! Anchors, scale parameters, shrinkage and the roll-out decision rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::AteEstimate;
use crate::stats::{normal_cdf, z_two_sided};

/// `BETA_MAX = BETA_MAX_PER_UNIT * n`; full pooling for practical purposes.
pub const BETA_MAX_PER_UNIT: f64 = 1e6;

/// Floor on the between-experiment variance in the Bayesian scale.
pub const BAYES_VARIANCE_FLOOR: f64 = 1e-12;

pub fn beta_max(n: f64) -> f64 {
    BETA_MAX_PER_UNIT * n
}

/// Roll-out rule that produced a [`DecisionSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "IHT")]
    Iht,
    #[serde(rename = "DPTR")]
    Dptr,
    #[serde(rename = "DPTR-P")]
    DptrP,
    #[serde(rename = "BAYES")]
    Bayes,
    #[serde(rename = "ORACLE_BETA", alias = "ORACLE")]
    OracleBeta,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Iht,
        Method::Dptr,
        Method::DptrP,
        Method::Bayes,
        Method::OracleBeta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Iht => "IHT",
            Method::Dptr => "DPTR",
            Method::DptrP => "DPTR-P",
            Method::Bayes => "BAYES",
            Method::OracleBeta => "ORACLE_BETA",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "IHT" => Some(Method::Iht),
            "DPTR" => Some(Method::Dptr),
            "DPTR-P" | "DPTR_P" => Some(Method::DptrP),
            "BAYES" => Some(Method::Bayes),
            "ORACLE_BETA" | "ORACLE" => Some(Method::OracleBeta),
            _ => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Experiments selected for roll-out, as sorted 0-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionSet {
    pub method: Method,
    pub selected: Vec<usize>,
    pub k: usize,
}

impl DecisionSet {
    pub fn from_mask(method: Method, mask: &[bool]) -> Self {
        Self {
            method,
            selected: mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect(),
            k: mask.len(),
        }
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.k];
        for &i in &self.selected {
            m[i] = true;
        }
        m
    }

    pub fn contains(&self, k: usize) -> bool {
        self.selected.binary_search(&k).is_ok()
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }
}

/// A scale parameter together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaValue {
    pub value: f64,
    /// The between-experiment variance estimate was non-positive.
    pub degenerate: bool,
    /// The anchor was non-positive so the significance term was dropped.
    pub anchor_term_dropped: bool,
}

impl BetaValue {
    fn clamped(raw: f64, n: f64, degenerate: bool, anchor_term_dropped: bool) -> Self {
        let cap = beta_max(n);
        let value = if degenerate || raw.is_nan() { cap } else { raw.clamp(0.0, cap) };
        Self {
            value,
            degenerate,
            anchor_term_dropped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Beta {
    Shared(f64),
    PerExperiment(Vec<f64>),
}

impl Beta {
    pub fn get(&self, k: usize) -> f64 {
        match self {
            Beta::Shared(b) => *b,
            Beta::PerExperiment(bs) => bs[k],
        }
    }

    /// (min, median, max) over experiments.
    pub fn summary(&self) -> (f64, f64, f64) {
        match self {
            Beta::Shared(b) => (*b, *b, *b),
            Beta::PerExperiment(bs) => {
                let mut s = bs.clone();
                s.sort_by(f64::total_cmp);
                if s.is_empty() {
                    return (f64::NAN, f64::NAN, f64::NAN);
                }
                (s[0], crate::stats::median(&s), s[s.len() - 1])
            }
        }
    }
}

/// Anchor, scale assignment and significance level for one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolingPlan {
    pub tau0_hat: f64,
    pub beta: Beta,
    pub alpha: f64,
    /// Sample size used when estimating `beta`.
    pub n: f64,
    /// Number of scale values that hit the degenerate-denominator branch.
    pub degenerate: usize,
}

impl PoolingPlan {
    /// Data-driven shared scale.
    pub fn shared(estimates: &[AteEstimate], alpha: f64, n: f64) -> Result<Self> {
        let b = shared_beta(estimates, alpha, n)?;
        Ok(Self {
            tau0_hat: anchor(estimates)?,
            beta: Beta::Shared(b.value),
            alpha,
            n,
            degenerate: usize::from(b.degenerate),
        })
    }

    /// Data-driven per-experiment scales from the design factors.
    pub fn personalized(estimates: &[AteEstimate], alpha: f64, n: f64) -> Result<Self> {
        let bs = personalized_betas(estimates, alpha, n)?;
        Ok(Self {
            tau0_hat: anchor(estimates)?,
            degenerate: bs.iter().filter(|b| b.degenerate).count(),
            beta: Beta::PerExperiment(bs.iter().map(|b| b.value).collect()),
            alpha,
            n,
        })
    }

    /// A fixed scale with an explicit anchor.
    pub fn fixed(tau0: f64, beta: Beta, alpha: f64, n: f64) -> Self {
        Self {
            tau0_hat: tau0,
            beta,
            alpha,
            n,
            degenerate: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrunkEstimate {
    pub tau_bar: f64,
    pub lb_bar: f64,
    pub ub_bar: f64,
}

/// Known hyper-parameters of the normal-normal model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    pub tau0: f64,
    pub sigma0_sq: f64,
    pub sigma_sq: f64,
    pub n: f64,
    pub alpha: f64,
}

fn avg(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len() as f64;
    xs.sum::<f64>() / n
}

/// Mean of the point estimates.
pub fn anchor(estimates: &[AteEstimate]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::EmptyInput("estimates"));
    }
    Ok(avg(estimates.iter().map(|e| e.tau_hat)))
}

/// `(tau0_hat, M, V̄)` where `M` is the mean squared deviation from the anchor.
fn spread(estimates: &[AteEstimate]) -> Result<(f64, f64, f64)> {
    let tau0 = anchor(estimates)?;
    let m = avg(estimates.iter().map(|e| (e.tau_hat - tau0).powi(2)));
    let v_bar = avg(estimates.iter().map(|e| e.v));
    Ok((tau0, m, v_bar))
}

/// `β̂ = V̄ / (M - V̄/n) + z sqrt(n V̄) / τ̂0`, clamped to `[0, BETA_MAX]`.
pub fn shared_beta(estimates: &[AteEstimate], alpha: f64, n: f64) -> Result<BetaValue> {
    let (tau0, m, v_bar) = spread(estimates)?;
    let denom = m - v_bar / n;
    let degenerate = denom <= 0.0;
    let drop = tau0 <= 0.0;
    let mut raw = v_bar / denom;
    if !drop {
        raw += z_two_sided(alpha) * (n * v_bar).sqrt() / tau0;
    }
    Ok(BetaValue::clamped(raw, n, degenerate, drop))
}

fn design_factors(estimates: &[AteEstimate]) -> Result<Vec<f64>> {
    estimates
        .iter()
        .enumerate()
        .map(|(k, e)| e.b.filter(|&b| b > 0.0).ok_or(Error::MissingDesignFactor(k)))
        .collect()
}

/// Personalized scale for experiment `k`:
/// `b_k² S̄ / (M - B̄ S̄ / n) + z b_k sqrt(n S̄) / τ̂0`.
pub fn personalized_beta(estimates: &[AteEstimate], alpha: f64, n: f64, k: usize) -> Result<BetaValue> {
    if k >= estimates.len() {
        return Err(Error::LengthMismatch {
            expected: estimates.len(),
            got: k + 1,
        });
    }
    Ok(personalized_betas(estimates, alpha, n)?[k])
}

/// [`personalized_beta`] for every experiment.
pub fn personalized_betas(estimates: &[AteEstimate], alpha: f64, n: f64) -> Result<Vec<BetaValue>> {
    let bs = design_factors(estimates)?;
    let (tau0, m, _) = spread(estimates)?;
    let s_bar = avg(estimates.iter().zip(&bs).map(|(e, b)| e.v / (b * b)));
    let b_sq_bar = avg(bs.iter().map(|b| b * b));
    let denom = m - b_sq_bar * s_bar / n;
    let degenerate = denom <= 0.0;
    let drop = tau0 <= 0.0;
    let z = z_two_sided(alpha);
    Ok(bs
        .iter()
        .map(|&b| {
            let mut raw = b * b * s_bar / denom;
            if !drop {
                raw += z * b * (n * s_bar).sqrt() / tau0;
            }
            BetaValue::clamped(raw, n, degenerate, drop)
        })
        .collect())
}

/// Empirical-Bayes scale `v_k / max(M - V̄/n, ε)`.
pub fn bayes_beta(estimate: &AteEstimate, estimates: &[AteEstimate], n: f64) -> Result<BetaValue> {
    let (_, m, v_bar) = spread(estimates)?;
    Ok(bayes_scale(estimate.v, m - v_bar / n, n))
}

fn bayes_scale(v: f64, sigma0_sq: f64, n: f64) -> BetaValue {
    let mut out = BetaValue::clamped(v / sigma0_sq.max(BAYES_VARIANCE_FLOOR), n, false, false);
    out.degenerate = sigma0_sq <= 0.0;
    out
}

fn check_oracle(p: &OracleParams) -> Result<()> {
    if !(p.tau0 > 0.0) {
        return Err(Error::NonPositiveTau0(p.tau0));
    }
    if !(p.sigma0_sq > 0.0 && p.sigma_sq > 0.0 && p.n > 0.0) {
        return Err(Error::Config(
            "oracle parameters need positive variances and sample size".into(),
        ));
    }
    if !(p.alpha > 0.0 && p.alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", p.alpha)));
    }
    Ok(())
}

/// Optimal shared scale under the normal-normal model:
/// `β* = 4σ²/σ0² + 2 sqrt(N) z σ / τ0`.
pub fn oracle_beta(p: &OracleParams) -> Result<f64> {
    oracle_beta_personalized(p, 2.0)
}

/// Optimal scale for design factor `b`:
/// `β*(b) = σ² b² / σ0² + sqrt(N) z σ b / τ0`.
pub fn oracle_beta_personalized(p: &OracleParams, b: f64) -> Result<f64> {
    check_oracle(p)?;
    let z = z_two_sided(p.alpha);
    Ok(p.sigma_sq * b * b / p.sigma0_sq + p.n.sqrt() * z * p.sigma_sq.sqrt() * b / p.tau0)
}

/// Affine shrink of the estimate and its bounds toward `tau0` with weight `n / (n + beta)`.
pub fn shrink(estimate: &AteEstimate, beta: f64, tau0: f64, n: f64) -> ShrunkEstimate {
    let w = n / (n + beta);
    let pull = (1.0 - w) * tau0;
    ShrunkEstimate {
        tau_bar: w * estimate.tau_hat + pull,
        lb_bar: w * estimate.lb + pull,
        ub_bar: w * estimate.ub + pull,
    }
}

/// Selects `k` iff its lower bound is strictly positive.
pub fn decide_iht(estimates: &[AteEstimate]) -> DecisionSet {
    let mask: Vec<bool> = estimates.iter().map(|e| e.lb > 0.0).collect();
    DecisionSet::from_mask(Method::Iht, &mask)
}

/// Selects `k` iff its shrunk lower bound is strictly positive. Each estimate
/// is shrunk with its own sample size.
pub fn decide_dptr(estimates: &[AteEstimate], plan: &PoolingPlan) -> DecisionSet {
    let mask: Vec<bool> = estimates
        .iter()
        .enumerate()
        .map(|(k, e)| shrink(e, plan.beta.get(k), plan.tau0_hat, e.n as f64).lb_bar > 0.0)
        .collect();
    let method = match plan.beta {
        Beta::Shared(_) => Method::Dptr,
        Beta::PerExperiment(_) => Method::DptrP,
    };
    DecisionSet::from_mask(method, &mask)
}

/// Posterior `N(w τ̂ + (1-w) τ̂0, w v / n)` per experiment, with the scale
/// from [`bayes_beta`]; selects `k` iff `P(τ_k > 0) >= 1 - alpha/2`.
/// Returns the decision and the scales applied.
pub fn decide_bayes_with_betas(estimates: &[AteEstimate], alpha: f64, n: f64) -> Result<(DecisionSet, Vec<f64>)> {
    let (tau0, m, v_bar) = spread(estimates)?;
    let level = 1.0 - alpha / 2.0;
    let mut betas = Vec::with_capacity(estimates.len());
    let mut mask = Vec::with_capacity(estimates.len());
    for e in estimates {
        let beta = bayes_scale(e.v, m - v_bar / n, n).value;
        let nk = e.n as f64;
        let w = nk / (nk + beta);
        let post_mean = w * e.tau_hat + (1.0 - w) * tau0;
        let post_sd = (w * e.v / nk).sqrt();
        let p_pos = if post_sd > 0.0 {
            normal_cdf(post_mean / post_sd)
        } else if post_mean > 0.0 {
            1.0
        } else if post_mean == 0.0 {
            0.5
        } else {
            0.0
        };
        betas.push(beta);
        mask.push(p_pos >= level);
    }
    Ok((DecisionSet::from_mask(Method::Bayes, &mask), betas))
}

pub fn decide_bayes(estimates: &[AteEstimate], alpha: f64, n: f64) -> Result<DecisionSet> {
    decide_bayes_with_betas(estimates, alpha, n).map(|(d, _)| d)
}
