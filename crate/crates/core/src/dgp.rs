//! Seeded synthetic trials with known ground truth.
//!
//! Streams: the ATE draws, the per-experiment coefficients and the
//! per-experiment rows each come from their own stream, so e.g. changing `N`
//! does not change the sampled effects.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{ExperimentSample, NonOverlappingTrial, OverlappingTrial, TrialData};
use crate::error::{Error, Result};
use crate::rng::{self, tag, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Non-overlapping, no covariates, difference in means.
    #[serde(rename = "S1_DM")]
    S1Dm,
    /// Non-overlapping, linear covariates, OLS.
    #[serde(rename = "S1_OLS")]
    S1Ols,
    /// Non-overlapping, partial-linear, DML.
    #[serde(rename = "S2_DML")]
    S2Dml,
    /// Overlapping, linear, OLS without covariates.
    #[serde(rename = "S3_OLS")]
    S3Ols,
    /// Overlapping, linear with covariates, OLS.
    #[serde(rename = "S3_OLS_COV")]
    S3OlsCov,
    /// Overlapping, partial-linear, DML.
    #[serde(rename = "S4_DML")]
    S4Dml,
    /// Overlapping, sigmoid outcome, estimated as in `S4_DML`.
    #[serde(rename = "SIGMOID")]
    Sigmoid,
}

impl Scenario {
    pub fn is_overlapping(self) -> bool {
        matches!(self, Scenario::S3Ols | Scenario::S3OlsCov | Scenario::S4Dml | Scenario::Sigmoid)
    }

    pub fn uses_dml(self) -> bool {
        matches!(self, Scenario::S2Dml | Scenario::S4Dml | Scenario::Sigmoid)
    }

    pub fn default_dx(self) -> usize {
        match self {
            Scenario::S1Dm | Scenario::S3Ols => 0,
            _ => 4,
        }
    }

    pub fn default_n(self, k: usize) -> usize {
        match self {
            Scenario::S1Dm | Scenario::S1Ols => 10,
            Scenario::S2Dml => 100,
            Scenario::S3Ols | Scenario::S3OlsCov => 10 + k,
            Scenario::S4Dml | Scenario::Sigmoid => 100 + k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dist {
    Normal,
    /// Uniform on `mean ± sd·√3`.
    Uniform,
}

impl Dist {
    pub fn sample(self, rng: &mut StreamRng, mean: f64, sd: f64) -> f64 {
        match self {
            Dist::Normal => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            Dist::Uniform => mean + sd * 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub k: usize,
    /// Per-experiment (non-overlapping) or total (overlapping) sample size;
    /// scenario default when absent.
    pub n: Option<usize>,
    pub tau0: f64,
    pub sigma0: f64,
    pub sigma: f64,
    pub ate_dist: Dist,
    pub noise_dist: Dist,
    /// Covariate dimension; scenario default when absent.
    pub dx: Option<usize>,
    pub coeff_low: f64,
    pub coeff_high: f64,
    pub upsilon_low: f64,
    pub upsilon_high: f64,
    /// Randomize treated positions in non-overlapping covariate scenarios
    /// (otherwise the first `N/2` rows are treated).
    pub shuffle: bool,
    /// Covariate draws per treatment vector in the sigmoid oracle.
    pub oracle_draws: usize,
    /// Maximum number of enumerated treatment vectors.
    pub enumeration_cap: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::S1Dm,
            k: 100,
            n: None,
            tau0: 1.0,
            sigma0: 3.0,
            sigma: 3.0,
            ate_dist: Dist::Normal,
            noise_dist: Dist::Normal,
            dx: None,
            coeff_low: -0.3,
            coeff_high: 0.5,
            upsilon_low: 10.0,
            upsilon_high: 20.0,
            shuffle: false,
            oracle_draws: 100_000,
            enumeration_cap: 1 << 20,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn n(&self) -> usize {
        self.n.unwrap_or_else(|| self.scenario.default_n(self.k))
    }

    pub fn dx(&self) -> usize {
        self.dx.unwrap_or_else(|| self.scenario.default_dx())
    }

    /// Copy with every scenario-dependent default filled in.
    pub fn resolved(&self) -> Self {
        Self {
            n: Some(self.n()),
            dx: Some(self.dx()),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        if !(self.sigma >= 0.0 && self.sigma0 >= 0.0) {
            return fail("sigma and sigma0 must be non-negative".into());
        }
        if !(self.coeff_low <= self.coeff_high && self.upsilon_low <= self.upsilon_high) {
            return fail("distribution bounds must satisfy low <= high".into());
        }
        let n = self.n();
        let dx = self.dx();
        match self.scenario {
            Scenario::S1Dm | Scenario::S3Ols if dx != 0 => {
                return fail(format!("{:?} takes no covariates, got dx = {dx}", self.scenario));
            }
            Scenario::S1Ols | Scenario::S2Dml | Scenario::S3OlsCov | Scenario::S4Dml | Scenario::Sigmoid
                if dx == 0 =>
            {
                return fail(format!("{:?} needs dx >= 1", self.scenario));
            }
            _ => {}
        }
        if !self.scenario.is_overlapping() && n % 2 == 1 {
            return Err(Error::OddN(n));
        }
        if n < 2 {
            return fail(format!("n must be at least 2, got {n}"));
        }
        if self.scenario == Scenario::Sigmoid {
            if self.oracle_draws == 0 {
                return fail("oracle_draws must be positive".into());
            }
            let too_large = self.k >= usize::BITS as usize || (1usize << self.k) > self.enumeration_cap;
            if too_large {
                return Err(Error::KTooLarge {
                    k: self.k,
                    cap: self.enumeration_cap,
                });
            }
        }
        Ok(())
    }
}

/// Enumeration table of the sigmoid model, indexed by treatment bit mask
/// (bit `k` set iff experiment `k` is rolled out).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmoidContext {
    pub k: usize,
    pub upsilon: f64,
    /// `gamma[j * dx..(j + 1) * dx]` for `j = 0..=K` (`j = 0` is the baseline).
    pub gamma: Vec<f64>,
    pub dx: usize,
    /// Oracle `E[Y | t]` for every mask.
    pub mean_outcome: Vec<f64>,
    pub t_opt: usize,
    pub draws: usize,
}

impl SigmoidContext {
    pub fn baseline(&self) -> f64 {
        self.mean_outcome[0]
    }

    /// `E[Y | t(mask)] - E[Y | t0]`.
    pub fn lift(&self, mask: usize) -> f64 {
        self.mean_outcome[mask] - self.mean_outcome[0]
    }

    pub fn t_opt_vector(&self) -> Vec<bool> {
        (0..self.k).map(|j| self.t_opt >> j & 1 == 1).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub tau: Vec<f64>,
    pub r_star: f64,
    pub sigmoid: Option<SigmoidContext>,
}

impl GroundTruth {
    pub fn linear(tau: Vec<f64>) -> Self {
        let k = tau.len() as f64;
        let r_star = tau.iter().filter(|&&t| t > 0.0).sum::<f64>() / k;
        Self {
            tau,
            r_star,
            sigmoid: None,
        }
    }
}

fn uniform(rng: &mut StreamRng, low: f64, high: f64) -> f64 {
    low + (high - low) * rng.random::<f64>()
}

fn draw_taus(cfg: &ScenarioConfig) -> Vec<f64> {
    let mut r = rng::stream(cfg.seed, &[tag::ATE]);
    (0..cfg.k)
        .map(|_| cfg.ate_dist.sample(&mut r, cfg.tau0, cfg.sigma0))
        .collect()
}

fn draw_coeffs(cfg: &ScenarioConfig, path: u64, len: usize) -> Vec<f64> {
    let mut r = rng::stream(cfg.seed, &[tag::COEFF, path]);
    (0..len).map(|_| uniform(&mut r, cfg.coeff_low, cfg.coeff_high)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Balanced treatment flags: the first half treated, optionally shuffled.
fn balanced_flags(n: usize, shuffle: bool, r: &mut StreamRng) -> Vec<bool> {
    let mut flags: Vec<bool> = (0..n).map(|i| i < n / 2).collect();
    if shuffle {
        use rand::seq::SliceRandom;
        flags.shuffle(r);
    }
    flags
}

/// Scenario 1: `Y = a_k + τ_k D + θ_kᵀX + ε` (no `θ` term when `dx = 0`).
pub fn gen_scenario1(cfg: &ScenarioConfig) -> Result<(NonOverlappingTrial, GroundTruth)> {
    cfg.validate()?;
    let (n, dx) = (cfg.n(), cfg.dx());
    let taus = draw_taus(cfg);
    let mut experiments = Vec::with_capacity(cfg.k);
    for (k, &tau) in taus.iter().enumerate() {
        let coeff = draw_coeffs(cfg, k as u64, 1 + dx);
        let (a, theta) = (coeff[0], &coeff[1..]);
        let mut r = rng::stream(cfg.seed, &[tag::EXPERIMENT, k as u64]);
        let treated = balanced_flags(n, cfg.shuffle && dx > 0, &mut r);
        let mut x = Vec::with_capacity(n * dx);
        let mut y = Vec::with_capacity(n);
        for &d in &treated {
            let row: Vec<f64> = (0..dx).map(|_| r.random::<f64>()).collect();
            let eps = cfg.noise_dist.sample(&mut r, 0.0, cfg.sigma);
            y.push(a + if d { tau } else { 0.0 } + dot(theta, &row) + eps);
            x.extend(row);
        }
        experiments.push(ExperimentSample::with_covariates(y, treated, x, dx)?);
    }
    Ok((NonOverlappingTrial { experiments }, GroundTruth::linear(taus)))
}

/// Scenario 2: `Y = γ_{k,0}ᵀX + γ_{k,1}ᵀX · D + ε`, `τ_k = γ_{k,1}ᵀE[X]`.
pub fn gen_scenario2(cfg: &ScenarioConfig) -> Result<(NonOverlappingTrial, GroundTruth)> {
    cfg.validate()?;
    let (n, dx) = (cfg.n(), cfg.dx());
    let mut experiments = Vec::with_capacity(cfg.k);
    let mut taus = Vec::with_capacity(cfg.k);
    for k in 0..cfg.k {
        let gamma = draw_coeffs(cfg, k as u64, 2 * dx);
        let (g0, g1) = gamma.split_at(dx);
        taus.push(g1.iter().sum::<f64>() * 0.5);
        let mut r = rng::stream(cfg.seed, &[tag::EXPERIMENT, k as u64]);
        let treated = balanced_flags(n, cfg.shuffle, &mut r);
        let mut x = Vec::with_capacity(n * dx);
        let mut y = Vec::with_capacity(n);
        for &d in &treated {
            let row: Vec<f64> = (0..dx).map(|_| r.random::<f64>()).collect();
            let eps = cfg.noise_dist.sample(&mut r, 0.0, cfg.sigma);
            y.push(dot(g0, &row) + if d { dot(g1, &row) } else { 0.0 } + eps);
            x.extend(row);
        }
        experiments.push(ExperimentSample::with_covariates(y, treated, x, dx)?);
    }
    Ok((NonOverlappingTrial { experiments }, GroundTruth::linear(taus)))
}

fn bernoulli_rows(r: &mut StreamRng, n: usize, k: usize, dx: usize) -> (Vec<bool>, Vec<f64>) {
    let mut d = Vec::with_capacity(n * k);
    let mut x = Vec::with_capacity(n * dx);
    for _ in 0..n {
        d.extend((0..k).map(|_| r.random::<bool>()));
        x.extend((0..dx).map(|_| r.random::<f64>()));
    }
    (d, x)
}

/// Scenario 3: `Y = a + Σ τ_k D_k (+ θᵀX) + ε` with i.i.d. Bernoulli(½) assignments.
pub fn gen_scenario3(cfg: &ScenarioConfig) -> Result<(OverlappingTrial, GroundTruth)> {
    cfg.validate()?;
    let (n, dx, k) = (cfg.n(), cfg.dx(), cfg.k);
    let taus = draw_taus(cfg);
    let coeff = draw_coeffs(cfg, 0, 1 + dx);
    let (a, theta) = (coeff[0], &coeff[1..]);
    let mut r = rng::stream(cfg.seed, &[tag::ROWS]);
    let (d, x) = bernoulli_rows(&mut r, n, k, dx);
    let y = (0..n)
        .map(|i| {
            let lift: f64 = (0..k).filter(|&j| d[i * k + j]).map(|j| taus[j]).sum();
            a + lift + dot(theta, &x[i * dx..(i + 1) * dx]) + cfg.noise_dist.sample(&mut r, 0.0, cfg.sigma)
        })
        .collect();
    Ok((OverlappingTrial::new(k, dx, y, d, x)?, GroundTruth::linear(taus)))
}

/// Scenario 4: `Y = γ_0ᵀX + Σ_k γ_kᵀX · D_k + ε`, `τ_k = γ_kᵀE[X]`.
pub fn gen_scenario4(cfg: &ScenarioConfig) -> Result<(OverlappingTrial, GroundTruth)> {
    cfg.validate()?;
    let (n, dx, k) = (cfg.n(), cfg.dx(), cfg.k);
    let gamma = draw_coeffs(cfg, 0, (k + 1) * dx);
    let taus = (1..=k).map(|j| gamma[j * dx..(j + 1) * dx].iter().sum::<f64>() * 0.5).collect();
    let mut r = rng::stream(cfg.seed, &[tag::ROWS]);
    let (d, x) = bernoulli_rows(&mut r, n, k, dx);
    let y = (0..n)
        .map(|i| {
            let h = linear_index(&gamma, &x[i * dx..(i + 1) * dx], &d[i * k..(i + 1) * k]);
            h + cfg.noise_dist.sample(&mut r, 0.0, cfg.sigma)
        })
        .collect();
    Ok((OverlappingTrial::new(k, dx, y, d, x)?, GroundTruth::linear(taus)))
}

/// `g(x)ᵀt` with `t = [1, d]`.
fn linear_index(gamma: &[f64], x: &[f64], d: &[bool]) -> f64 {
    let dx = x.len();
    let mut h = dot(&gamma[..dx], x);
    for (j, &on) in d.iter().enumerate() {
        if on {
            h += dot(&gamma[(j + 1) * dx..(j + 2) * dx], x);
        }
    }
    h
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Monte Carlo `E[Y | t]` for every treatment mask, with the same covariate
/// draws shared across masks.
pub fn sigmoid_oracle_table(gamma: &[f64], dx: usize, k: usize, upsilon: f64, draws: usize, seed: u64) -> Vec<f64> {
    let masks = 1usize << k;
    let mut r = rng::stream(seed, &[tag::ORACLE]);
    let mut acc = vec![0.0; masks];
    let mut index = vec![0.0; masks];
    let mut h = vec![0.0; k + 1];
    let mut x = vec![0.0; dx];
    for _ in 0..draws {
        for v in x.iter_mut() {
            *v = r.random::<f64>();
        }
        for (j, hj) in h.iter_mut().enumerate() {
            *hj = dot(&gamma[j * dx..(j + 1) * dx], &x);
        }
        index[0] = h[0];
        acc[0] += logistic(h[0]);
        for m in 1..masks {
            let low = m.trailing_zeros() as usize;
            index[m] = index[m & (m - 1)] + h[low + 1];
            acc[m] += logistic(index[m]);
        }
    }
    acc.iter().map(|s| upsilon * s / draws as f64).collect()
}

/// Sigmoid model `Y = υ / (1 + exp(-g(X)ᵀt)) + ε`.
///
/// The per-experiment `tau` in the returned truth is the marginal effect of
/// switching coordinate `k` on while the other coordinates stay Bernoulli(½),
/// i.e. the mean of the table over masks with bit `k` set minus the mean over
/// masks without it. Rewards use the table directly.
pub fn gen_sigmoid(cfg: &ScenarioConfig) -> Result<(OverlappingTrial, GroundTruth)> {
    cfg.validate()?;
    let (n, dx, k) = (cfg.n(), cfg.dx(), cfg.k);
    let gamma = draw_coeffs(cfg, 0, (k + 1) * dx);
    let upsilon = {
        let mut r = rng::stream(cfg.seed, &[tag::COEFF, u64::MAX]);
        uniform(&mut r, cfg.upsilon_low, cfg.upsilon_high)
    };
    let mut r = rng::stream(cfg.seed, &[tag::ROWS]);
    let (d, x) = bernoulli_rows(&mut r, n, k, dx);
    let y = (0..n)
        .map(|i| {
            let h = linear_index(&gamma, &x[i * dx..(i + 1) * dx], &d[i * k..(i + 1) * k]);
            upsilon * logistic(h) + cfg.noise_dist.sample(&mut r, 0.0, cfg.sigma)
        })
        .collect();

    let table = sigmoid_oracle_table(&gamma, dx, k, upsilon, cfg.oracle_draws, cfg.seed);
    let t_opt = (0..table.len())
        .max_by(|&a, &b| table[a].total_cmp(&table[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    let half = (table.len() / 2) as f64;
    let taus = (0..k)
        .map(|j| {
            let (on, off): (Vec<_>, Vec<_>) = (0..table.len()).partition(|m| m >> j & 1 == 1);
            on.iter().map(|&m| table[m]).sum::<f64>() / half - off.iter().map(|&m| table[m]).sum::<f64>() / half
        })
        .collect();
    let r_star = table[t_opt] - table[0];
    let ctx = SigmoidContext {
        k,
        upsilon,
        gamma,
        dx,
        mean_outcome: table,
        t_opt,
        draws: cfg.oracle_draws,
    };
    let truth = GroundTruth {
        tau: taus,
        r_star,
        sigmoid: Some(ctx),
    };
    Ok((OverlappingTrial::new(k, dx, y, d, x)?, truth))
}

/// Dispatches on `cfg.scenario`.
pub fn generate(cfg: &ScenarioConfig) -> Result<(TrialData, GroundTruth)> {
    match cfg.scenario {
        Scenario::S1Dm | Scenario::S1Ols => gen_scenario1(cfg).map(|(t, g)| (TrialData::NonOverlapping(t), g)),
        Scenario::S2Dml => gen_scenario2(cfg).map(|(t, g)| (TrialData::NonOverlapping(t), g)),
        Scenario::S3Ols | Scenario::S3OlsCov => gen_scenario3(cfg).map(|(t, g)| (TrialData::Overlapping(t), g)),
        Scenario::S4Dml => gen_scenario4(cfg).map(|(t, g)| (TrialData::Overlapping(t), g)),
        Scenario::Sigmoid => gen_sigmoid(cfg).map(|(t, g)| (TrialData::Overlapping(t), g)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{dm_estimate, ols_overlapping_estimate};

    fn s1() -> ScenarioConfig {
        ScenarioConfig {
            seed: 11,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn zero_noise_dm_recovers_tau() {
        let cfg = ScenarioConfig { sigma: 0.0, ..s1() };
        let (trial, truth) = gen_scenario1(&cfg).unwrap();
        for (e, &tau) in trial.experiments.iter().zip(&truth.tau) {
            let est = dm_estimate(e, 0.05).unwrap();
            assert!((est.tau_hat - tau).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_prior_collapses_to_tau0() {
        let cfg = ScenarioConfig { sigma0: 1e-9, ..s1() };
        let (_, truth) = gen_scenario1(&cfg).unwrap();
        assert!(truth.tau.iter().all(|t| (t - 1.0).abs() < 1e-7));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = generate(&s1()).unwrap();
        let b = generate(&s1()).unwrap();
        assert_eq!(a, b);
        let c = generate(&ScenarioConfig { seed: 12, ..s1() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn scenario1_is_balanced_and_odd_n_rejected() {
        let (trial, _) = gen_scenario1(&s1()).unwrap();
        assert!(trial.experiments.iter().all(|e| e.arm_sizes() == (5, 5)));
        let odd = ScenarioConfig { n: Some(11), ..s1() };
        assert!(matches!(gen_scenario1(&odd), Err(Error::OddN(11))));
    }

    #[test]
    fn ate_moments_match_prior() {
        for dist in [Dist::Normal, Dist::Uniform] {
            let cfg = ScenarioConfig {
                k: 100_000,
                ate_dist: dist,
                ..s1()
            };
            let taus = draw_taus(&cfg);
            let m = crate::stats::mean(&taus);
            let sd = crate::stats::sample_sd(&taus);
            assert!((m - 1.0).abs() < 0.01 * 3.0, "{dist:?} mean {m}");
            assert!((sd * sd / 9.0 - 1.0).abs() < 0.01, "{dist:?} var {}", sd * sd);
            if dist == Dist::Uniform {
                let bound = 3.0 * 3f64.sqrt();
                assert!(taus.iter().all(|t| (t - 1.0).abs() <= bound));
            }
        }
    }

    #[test]
    fn scenario2_truth_is_analytic() {
        let cfg = ScenarioConfig {
            scenario: Scenario::S2Dml,
            k: 3,
            coeff_low: 1.0,
            coeff_high: 1.0,
            ..s1()
        };
        let (trial, truth) = gen_scenario2(&cfg).unwrap();
        assert!(truth.tau.iter().all(|&t| t == 2.0));
        assert_eq!(trial.experiments[0].dx, 4);
        let null = ScenarioConfig {
            coeff_low: 0.0,
            coeff_high: 0.0,
            ..cfg
        };
        assert!(gen_scenario2(&null).unwrap().1.tau.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn scenario3_zero_noise_is_exact_and_balanced() {
        let cfg = ScenarioConfig {
            scenario: Scenario::S3Ols,
            k: 3,
            sigma: 0.0,
            ..s1()
        };
        let (trial, truth) = gen_scenario3(&cfg).unwrap();
        let est = ols_overlapping_estimate(&trial, false, 0.05).unwrap();
        for (e, t) in est.iter().zip(&truth.tau) {
            assert!((e.tau_hat - t).abs() < 1e-10);
        }
        let big = ScenarioConfig {
            n: Some(10_000),
            sigma: 3.0,
            ..cfg
        };
        let (trial, _) = gen_scenario3(&big).unwrap();
        for j in 0..3 {
            let freq = (0..trial.len()).filter(|&i| trial.treatment_row(i)[j]).count() as f64 / 1e4;
            assert!((freq - 0.5).abs() < 5.0 * 0.005);
        }
    }

    #[test]
    fn scenario4_truth_is_analytic() {
        let cfg = ScenarioConfig {
            scenario: Scenario::S4Dml,
            k: 5,
            ..s1()
        };
        let (trial, truth) = gen_scenario4(&cfg).unwrap();
        assert_eq!(trial.len(), 105);
        let gamma = draw_coeffs(&cfg, 0, 6 * 4);
        for j in 0..5 {
            let expected: f64 = gamma[(j + 1) * 4..(j + 2) * 4].iter().sum::<f64>() / 2.0;
            assert_eq!(truth.tau[j], expected);
        }
    }

    fn sigmoid(k: usize) -> ScenarioConfig {
        ScenarioConfig {
            scenario: Scenario::Sigmoid,
            k,
            oracle_draws: 10_000,
            ..s1()
        }
    }

    #[test]
    fn flat_sigmoid_has_zero_oracle_reward() {
        let cfg = ScenarioConfig {
            coeff_low: 0.0,
            coeff_high: 0.0,
            ..sigmoid(3)
        };
        let (_, truth) = gen_sigmoid(&cfg).unwrap();
        let ctx = truth.sigmoid.unwrap();
        assert!(ctx.mean_outcome.iter().all(|&m| (m - ctx.upsilon / 2.0).abs() < 1e-9));
        assert_eq!(truth.r_star, 0.0);
    }

    #[test]
    fn monotone_single_coordinate_sigmoid() {
        let cfg = ScenarioConfig {
            coeff_low: 1.0,
            coeff_high: 2.0,
            ..sigmoid(1)
        };
        let (_, truth) = gen_sigmoid(&cfg).unwrap();
        let ctx = truth.sigmoid.as_ref().unwrap();
        assert_eq!(ctx.t_opt_vector(), vec![true]);
        assert!(truth.r_star > 0.0);
        assert!(truth.tau[0] > 0.0);
    }

    #[test]
    fn sigmoid_table_is_monte_carlo_stable() {
        let cfg = sigmoid(3);
        let gamma = draw_coeffs(&cfg, 0, 16);
        let coarse = sigmoid_oracle_table(&gamma, 4, 3, 15.0, 100_000, 1);
        let fine = sigmoid_oracle_table(&gamma, 4, 3, 15.0, 1_000_000, 2);
        for (a, b) in coarse.iter().zip(&fine) {
            assert!((a - b).abs() < 0.01 * 15.0);
        }
    }

    #[test]
    fn sigmoid_enumeration_cap() {
        let cfg = ScenarioConfig {
            enumeration_cap: 8,
            ..sigmoid(4)
        };
        assert!(matches!(gen_sigmoid(&cfg), Err(Error::KTooLarge { k: 4, cap: 8 })));
    }

    #[test]
    fn config_rejects_covariates_for_dm() {
        let cfg = ScenarioConfig { dx: Some(2), ..s1() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
