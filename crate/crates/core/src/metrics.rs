//! Scoring a roll-out decision against ground truth.

use serde::{Deserialize, Serialize};

use crate::dgp::GroundTruth;
use crate::error::{Error, Result};
use crate::pooling::{DecisionSet, Method};

/// Per-experiment weights and the frictional roll-out cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub weights: Vec<f64>,
    pub tau_min: f64,
}

impl WeightSpec {
    pub fn uniform(k: usize) -> Self {
        Self {
            weights: vec![1.0 / k as f64; k],
            tau_min: 0.0,
        }
    }

    /// Weights proportional to `sizes`.
    pub fn from_sizes(sizes: &[f64]) -> Result<Self> {
        let total: f64 = sizes.iter().sum();
        if sizes.is_empty() || !(total > 0.0) || sizes.iter().any(|&s| s < 0.0) {
            return Err(Error::Config("group sizes must be non-negative with a positive total".into()));
        }
        Ok(Self {
            weights: sizes.iter().map(|s| s / total).collect(),
            tau_min: 0.0,
        })
    }

    pub fn with_tau_min(mut self, tau_min: f64) -> Self {
        self.tau_min = tau_min;
        self
    }
}

fn check_lengths(decision: &DecisionSet, truth: &GroundTruth, weights: &WeightSpec) -> Result<()> {
    let k = truth.tau.len();
    for got in [decision.k, weights.weights.len()] {
        if got != k {
            return Err(Error::LengthMismatch { expected: k, got });
        }
    }
    Ok(())
}

/// `Σ_{k ∈ selected} w_k (τ_k - τ_min)`.
pub fn reward(decision: &DecisionSet, truth: &GroundTruth, weights: &WeightSpec) -> Result<f64> {
    check_lengths(decision, truth, weights)?;
    Ok(decision
        .selected
        .iter()
        .map(|&k| weights.weights[k] * (truth.tau[k] - weights.tau_min))
        .sum())
}

/// Set of experiments whose true effect exceeds the roll-out cost.
pub fn oracle_set(truth: &GroundTruth, tau_min: f64) -> DecisionSet {
    let mask: Vec<bool> = truth.tau.iter().map(|&t| t > tau_min).collect();
    DecisionSet::from_mask(Method::OracleBeta, &mask)
}

pub fn oracle_reward(truth: &GroundTruth, weights: &WeightSpec) -> Result<f64> {
    reward(&oracle_set(truth, weights.tau_min), truth, weights)
}

/// `reward / r*`, absent when `r* <= 0`.
pub fn optimality_ratio(decision: &DecisionSet, truth: &GroundTruth, weights: &WeightSpec) -> Result<Option<f64>> {
    let r_star = oracle_reward(truth, weights)?;
    let r = reward(decision, truth, weights)?;
    Ok((r_star > 0.0).then(|| r / r_star))
}

/// `reward_z / reward_iht - 1`, absent when the IHT reward is zero.
pub fn vdp(reward_z: f64, reward_iht: f64) -> Option<f64> {
    (reward_iht != 0.0).then(|| reward_z / reward_iht - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }
}

/// Counts with positives `{τ_k > 0}`.
pub fn confusion(decision: &DecisionSet, truth: &GroundTruth) -> Result<Confusion> {
    confusion_with_threshold(decision, truth, 0.0)
}

/// Counts with positives `{τ_k > threshold}`.
pub fn confusion_with_threshold(decision: &DecisionSet, truth: &GroundTruth, threshold: f64) -> Result<Confusion> {
    if decision.k != truth.tau.len() {
        return Err(Error::LengthMismatch {
            expected: truth.tau.len(),
            got: decision.k,
        });
    }
    let mut c = Confusion::default();
    for (mask, &tau) in decision.mask().into_iter().zip(&truth.tau) {
        match (mask, tau > threshold) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// `E[Y | t(Â)] - E[Y | t0]` from the oracle enumeration table.
pub fn sigmoid_reward(decision: &DecisionSet, truth: &GroundTruth) -> Result<f64> {
    let ctx = truth.sigmoid.as_ref().ok_or(Error::MissingContext("sigmoid oracle table"))?;
    if decision.k != ctx.k {
        return Err(Error::LengthMismatch {
            expected: ctx.k,
            got: decision.k,
        });
    }
    let mask = decision.selected.iter().fold(0usize, |m, &k| m | 1 << k);
    Ok(ctx.lift(mask))
}

/// Scores of one method in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: Method,
    pub reward: f64,
    pub or: Option<f64>,
    pub vdp: Option<f64>,
    pub accuracy: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub confusion: Confusion,
    pub r_star: f64,
}

impl MetricsReport {
    /// Scores `decision`; the sigmoid table is used when the truth carries one.
    /// `reward_iht` is the IHT reward of the same replication, if any.
    pub fn evaluate(
        decision: &DecisionSet,
        truth: &GroundTruth,
        weights: &WeightSpec,
        reward_iht: Option<f64>,
    ) -> Result<Self> {
        let (reward_value, r_star) = match &truth.sigmoid {
            Some(_) => (sigmoid_reward(decision, truth)?, truth.r_star),
            None => (reward(decision, truth, weights)?, oracle_reward(truth, weights)?),
        };
        let confusion = confusion_with_threshold(decision, truth, weights.tau_min)?;
        Ok(Self {
            method: decision.method,
            reward: reward_value,
            or: (r_star > 0.0).then(|| reward_value / r_star),
            vdp: reward_iht.and_then(|r| vdp(reward_value, r)),
            accuracy: confusion.accuracy(),
            recall: confusion.recall(),
            specificity: confusion.specificity(),
            precision: confusion.precision(),
            confusion,
            r_star,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{gen_sigmoid, Scenario, ScenarioConfig};

    fn truth() -> GroundTruth {
        GroundTruth::linear(vec![1.0, -1.0, 2.0])
    }

    fn pick(idx: &[usize], k: usize) -> DecisionSet {
        let mut mask = vec![false; k];
        for &i in idx {
            mask[i] = true;
        }
        DecisionSet::from_mask(Method::Dptr, &mask)
    }

    #[test]
    fn reward_examples() {
        let w = WeightSpec::uniform(3);
        assert!((reward(&pick(&[0, 2], 3), &truth(), &w).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(reward(&pick(&[], 3), &truth(), &w).unwrap(), 0.0);
        assert!((reward(&pick(&[1], 3), &truth(), &w).unwrap() + 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            reward(&pick(&[0], 2), &truth(), &w),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn oracle_reward_examples() {
        assert!((oracle_reward(&truth(), &WeightSpec::uniform(3)).unwrap() - 1.0).abs() < 1e-15);
        let neg = GroundTruth::linear(vec![-1.0, 0.0]);
        assert_eq!(oracle_reward(&neg, &WeightSpec::uniform(2)).unwrap(), 0.0);
        let costly = GroundTruth::linear(vec![0.05, 0.2]);
        let w = WeightSpec::uniform(2).with_tau_min(0.1);
        assert!((oracle_reward(&costly, &w).unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn optimality_ratio_examples() {
        let w = WeightSpec::uniform(3);
        let t = truth();
        assert_eq!(optimality_ratio(&oracle_set(&t, 0.0), &t, &w).unwrap(), Some(1.0));
        assert_eq!(optimality_ratio(&pick(&[], 3), &t, &w).unwrap(), Some(0.0));
        let all = optimality_ratio(&pick(&[0, 1, 2], 3), &t, &w).unwrap().unwrap();
        assert!((all - 2.0 / 3.0).abs() < 1e-15);
        let neg = GroundTruth::linear(vec![-1.0, -2.0]);
        assert_eq!(optimality_ratio(&pick(&[0], 2), &neg, &WeightSpec::uniform(2)).unwrap(), None);
    }

    #[test]
    fn vdp_examples() {
        assert_eq!(vdp(2.0, 1.0), Some(1.0));
        assert_eq!(vdp(1.0, 1.0), Some(0.0));
        assert_eq!(vdp(0.7, 0.0), None);
    }

    #[test]
    fn confusion_examples() {
        let c = confusion(&pick(&[0], 3), &truth()).unwrap();
        assert_eq!((c.tp, c.fn_, c.tn, c.fp), (1, 1, 1, 0));
        assert_eq!(c.recall(), Some(0.5));
        assert_eq!(c.specificity(), Some(1.0));
        assert_eq!(c.precision(), Some(1.0));
        assert!((c.accuracy().unwrap() - 2.0 / 3.0).abs() < 1e-15);

        let all = confusion(&pick(&[0, 1, 2], 3), &truth()).unwrap();
        assert_eq!((all.recall(), all.specificity()), (Some(1.0), Some(0.0)));
        let none = confusion(&pick(&[], 3), &truth()).unwrap();
        assert_eq!(none.precision(), None);
        assert_eq!(none.total(), 3);
    }

    #[test]
    fn uniform_weights_match_plain_average() {
        let tau = vec![0.3, -0.2, 1.5, 0.0, 2.0];
        let t = GroundTruth::linear(tau.clone());
        let d = pick(&[0, 1, 4], 5);
        let r = reward(&d, &t, &WeightSpec::uniform(5)).unwrap();
        assert!((r - (0.3 - 0.2 + 2.0) / 5.0).abs() < 1e-15);
        let w = WeightSpec::from_sizes(&[1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(reward(&d, &t, &w).unwrap(), r);
    }

    #[test]
    fn brute_force_oracle_is_optimal() {
        use rand::Rng;
        let mut rng = crate::rng::stream(5, &[]);
        for k in 1..=10 {
            let tau: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let t = GroundTruth::linear(tau);
            let w = WeightSpec::uniform(k);
            let best = oracle_reward(&t, &w).unwrap();
            assert!((best - t.r_star).abs() < 1e-15);
            for m in 0..1usize << k {
                let mask: Vec<bool> = (0..k).map(|j| m >> j & 1 == 1).collect();
                let r = reward(&DecisionSet::from_mask(Method::Iht, &mask), &t, &w).unwrap();
                assert!(r <= best);
            }
        }
    }

    #[test]
    fn sigmoid_rewards() {
        let cfg = ScenarioConfig {
            scenario: Scenario::Sigmoid,
            k: 4,
            oracle_draws: 20_000,
            seed: 3,
            ..ScenarioConfig::default()
        };
        let (_, t) = gen_sigmoid(&cfg).unwrap();
        assert_eq!(sigmoid_reward(&pick(&[], 4), &t).unwrap(), 0.0);
        let opt = DecisionSet::from_mask(Method::Iht, &t.sigmoid.as_ref().unwrap().t_opt_vector());
        assert_eq!(sigmoid_reward(&opt, &t).unwrap(), t.r_star);
        for m in 0..16usize {
            let mask: Vec<bool> = (0..4).map(|j| m >> j & 1 == 1).collect();
            let r = sigmoid_reward(&DecisionSet::from_mask(Method::Iht, &mask), &t).unwrap();
            assert!(r <= t.r_star);
        }
        assert!(matches!(
            sigmoid_reward(&pick(&[0], 3), &truth()),
            Err(Error::MissingContext(_))
        ));
    }

    #[test]
    fn report_marks_absent_metrics() {
        let t = GroundTruth::linear(vec![-1.0, -2.0]);
        let r = MetricsReport::evaluate(&pick(&[], 2), &t, &WeightSpec::uniform(2), Some(0.0)).unwrap();
        assert_eq!((r.or, r.vdp, r.precision, r.recall), (None, None, None, None));
        assert_eq!(r.specificity, Some(1.0));
    }
}
