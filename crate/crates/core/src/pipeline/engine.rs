//! Replication engine for synthetic runs.

use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use crate::data::TrialData;
use crate::dgp::{generate, GroundTruth, Scenario, ScenarioConfig};
use crate::error::{Error, Result};
use crate::estimators::{
    design_factor, dm_estimate, dml_estimate, ols_estimate, ols_overlapping_estimate, overlapping_design_factors,
    AteEstimate, DmlConfig, DmlRows,
};
use crate::metrics::{MetricsReport, WeightSpec};
use crate::pooling::{
    anchor, decide_bayes_with_betas, decide_dptr, decide_iht, oracle_beta, oracle_beta_personalized, Beta,
    DecisionSet, Method, OracleParams, PoolingPlan,
};
use crate::rng::{derive_seed, tag};

/// One method's scores in one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodOutcome {
    pub report: MetricsReport,
    /// (min, median, max) of the applied scale parameters; absent for IHT.
    pub beta_summary: Option<(f64, f64, f64)>,
    pub tau0_hat: f64,
}

/// Scores of all requested methods plus the IHT baseline they are compared to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scores {
    pub iht: MetricsReport,
    pub methods: Vec<MethodOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationError {
    pub tag: &'static str,
    pub message: String,
}

impl From<&Error> for ReplicationError {
    fn from(e: &Error) -> Self {
        Self {
            tag: e.tag(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub cell_id: usize,
    pub replication: usize,
    pub outcome: std::result::Result<Scores, ReplicationError>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub id: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResults {
    pub run_id: String,
    pub methods: Vec<Method>,
    pub cells: Vec<Cell>,
    /// Ordered by (cell, replication).
    pub records: Vec<ReplicationRecord>,
}

/// Seed of replication `rep`. Cells share replication seeds, so sweeps
/// compare configurations on common random numbers.
pub fn replication_seed(master_seed: u64, rep: usize) -> u64 {
    derive_seed(master_seed, &[tag::REPLICATION, rep as u64])
}

/// Per-experiment estimates for the scenario's estimator.
pub fn estimate_trial(
    scenario: &ScenarioConfig,
    trial: &TrialData,
    alpha: f64,
    dml: &DmlConfig,
    seed: u64,
) -> Result<Vec<AteEstimate>> {
    match (scenario.scenario, trial) {
        (Scenario::S1Dm, TrialData::NonOverlapping(t)) => t
            .experiments
            .iter()
            .map(|e| Ok(dm_estimate(e, alpha)?.with_b(design_factor(e)?)))
            .collect(),
        (Scenario::S1Ols, TrialData::NonOverlapping(t)) => {
            t.experiments.iter().map(|e| ols_estimate(e, alpha)).collect()
        }
        (Scenario::S2Dml, TrialData::NonOverlapping(t)) => t
            .experiments
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let rows = DmlRows::from_experiment(e);
                let est = dml_estimate(&rows, &[1], dml, alpha, derive_seed(seed, &[tag::NUISANCE, k as u64]))?;
                Ok(est[0].with_b(design_factor(e)?))
            })
            .collect(),
        (Scenario::S3Ols, TrialData::Overlapping(t)) => ols_overlapping_estimate(t, false, alpha),
        (Scenario::S3OlsCov, TrialData::Overlapping(t)) => ols_overlapping_estimate(t, true, alpha),
        (Scenario::S4Dml | Scenario::Sigmoid, TrialData::Overlapping(t)) => {
            let rows = DmlRows::from_overlapping(t);
            let targets: Vec<usize> = (1..=t.k).collect();
            let est = dml_estimate(&rows, &targets, dml, alpha, derive_seed(seed, &[tag::NUISANCE]))?;
            let bs = overlapping_design_factors(t, true)?;
            Ok(est.into_iter().zip(bs).map(|(e, b)| e.with_b(b)).collect())
        }
        (s, _) => Err(Error::Config(format!("trial layout does not match scenario {s:?}"))),
    }
}

/// Known-parameter context for `ORACLE_BETA`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleContext {
    pub params: OracleParams,
    /// Use per-experiment `β*(b_k)` instead of the shared `β*`.
    pub personalized: bool,
}

impl OracleContext {
    pub fn for_scenario(s: &ScenarioConfig, alpha: f64) -> Self {
        Self {
            params: OracleParams {
                tau0: s.tau0,
                sigma0_sq: s.sigma0 * s.sigma0,
                sigma_sq: s.sigma * s.sigma,
                n: s.n() as f64,
                alpha,
            },
            personalized: s.scenario == Scenario::S1Ols,
        }
    }
}

/// Decision of `method` with the scales it applied.
pub fn decide(
    method: Method,
    estimates: &[AteEstimate],
    alpha: f64,
    n: f64,
    oracle: Option<&OracleContext>,
) -> Result<(DecisionSet, Option<Beta>)> {
    Ok(match method {
        Method::Iht => (decide_iht(estimates), None),
        Method::Dptr => {
            let plan = PoolingPlan::shared(estimates, alpha, n)?;
            (decide_dptr(estimates, &plan), Some(plan.beta))
        }
        Method::DptrP => {
            let plan = PoolingPlan::personalized(estimates, alpha, n)?;
            (decide_dptr(estimates, &plan), Some(plan.beta))
        }
        Method::Bayes => {
            let (d, betas) = decide_bayes_with_betas(estimates, alpha, n)?;
            (d, Some(Beta::PerExperiment(betas)))
        }
        Method::OracleBeta => {
            let ctx = oracle.ok_or(Error::MissingContext("oracle parameters"))?;
            let beta = if ctx.personalized {
                let bs = estimates
                    .iter()
                    .enumerate()
                    .map(|(k, e)| {
                        let b = e.b.ok_or(Error::MissingDesignFactor(k))?;
                        oracle_beta_personalized(&ctx.params, b)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Beta::PerExperiment(bs)
            } else {
                Beta::Shared(oracle_beta(&ctx.params)?)
            };
            let plan = PoolingPlan::fixed(ctx.params.tau0, beta, alpha, n);
            (decide_dptr(estimates, &plan).with_method(Method::OracleBeta), Some(plan.beta))
        }
    })
}

/// Decides with every method and scores against `truth`. The IHT reward
/// used for VDP is computed even when IHT itself is not requested.
pub fn score_methods(
    methods: &[Method],
    estimates: &[AteEstimate],
    truth: &GroundTruth,
    weights: &WeightSpec,
    alpha: f64,
    n: f64,
    oracle: Option<&OracleContext>,
) -> Result<Scores> {
    let tau0_hat = anchor(estimates)?;
    let iht = MetricsReport::evaluate(&decide_iht(estimates), truth, weights, None)?;
    let methods = methods
        .iter()
        .map(|&m| {
            let (decision, beta) = decide(m, estimates, alpha, n, oracle)?;
            let baseline = (m != Method::Iht).then_some(iht.reward);
            Ok(MethodOutcome {
                report: MetricsReport::evaluate(&decision, truth, weights, baseline)?,
                beta_summary: beta.map(|b| b.summary()),
                tau0_hat,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Scores { iht, methods })
}

/// Generates, estimates, decides and scores replication `rep` of `cfg`.
pub fn run_replication(cfg: &RunConfig, rep: usize) -> Result<Scores> {
    let seed = replication_seed(cfg.master_seed, rep);
    let scenario = ScenarioConfig {
        seed,
        ..cfg.scenario.clone()
    };
    let (trial, truth) = generate(&scenario)?;
    let estimates = estimate_trial(&scenario, &trial, cfg.alpha, &cfg.dml.to_config(&scenario), seed)?;
    let n = estimates.iter().map(|e| e.n as f64).sum::<f64>() / estimates.len() as f64;
    let oracle = OracleContext::for_scenario(&scenario, cfg.alpha);
    let weights = WeightSpec::uniform(estimates.len());
    score_methods(&cfg.methods, &estimates, &truth, &weights, cfg.alpha, n, Some(&oracle))
}

/// Runs every (cell, replication) pair on `parallelism` threads. Results are
/// collected in index order, so output does not depend on scheduling.
pub fn run_synthetic(cfg: &RunConfig) -> Result<RunResults> {
    run_synthetic_cells(cfg).map(|(results, _)| results)
}

/// [`run_synthetic`] that also returns the resolved config of every cell.
pub fn run_synthetic_cells(cfg: &RunConfig) -> Result<(RunResults, Vec<RunConfig>)> {
    cfg.validate()?;
    let (labels, configs): (Vec<String>, Vec<RunConfig>) = cfg.cells()?.into_iter().unzip();
    let cells: Vec<Cell> = labels
        .into_iter()
        .enumerate()
        .map(|(id, label)| Cell { id, label })
        .collect();
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.replications).map(move |r| (c, r)))
        .collect();
    let records = run_tasks(cfg.parallelism, &tasks, |c, r| run_replication(&configs[c], r))?;
    let results = RunResults {
        run_id: cfg.output.run_id.clone(),
        methods: cfg.methods.clone(),
        cells,
        records,
    };
    Ok((results, configs))
}

/// Runs `(cell, replication)` tasks on a dedicated pool and returns the
/// records in task order.
pub(crate) fn run_tasks<F>(parallelism: usize, tasks: &[(usize, usize)], f: F) -> Result<Vec<ReplicationRecord>>
where
    F: Fn(usize, usize) -> Result<Scores> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, r)| ReplicationRecord {
                cell_id: c,
                replication: r,
                outcome: f(c, r).map_err(|e| ReplicationError::from(&e)),
            })
            .collect()
    }))
}
