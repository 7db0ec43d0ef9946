//! The acceptance property suite, shared by `dptr selftest` and the
//! `acceptance` test target. Each criterion returns one PASS/FAIL line.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use rand::Rng;

use crate::data::{ExperimentSample, TrialData};
use crate::dgp::{generate, GroundTruth, Scenario, ScenarioConfig};
use crate::error::{Error, Result};
use crate::estimators::{dm_estimate, AteEstimate};
use crate::metrics::{
    confusion, optimality_ratio, oracle_reward, oracle_set, reward, vdp, MetricsReport, WeightSpec,
};
use crate::pipeline::aggregate::{aggregate, find_mean, AggregateRow, VDP_OF_MEANS};
use crate::pipeline::config::{EvaluateConfig, RunConfig};
use crate::pipeline::emit::{write_aggregates, write_replications, Reconciliation};
use crate::pipeline::engine::{replication_seed, run_synthetic, RunResults};
use crate::pipeline::grouped::{group_generation, subsample_evaluate, SampleSize};
use crate::pipeline::ingest::{ingest_csv, ColumnMap};
use crate::pooling::{
    decide_dptr, decide_iht, oracle_beta, shared_beta, Beta, DecisionSet, Method, OracleParams, PoolingPlan,
};
use crate::rng::{self, derive_seed};
use crate::stats::{mean, median, sample_sd};

pub const CRITERIA: [u8; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Criterion 4 at 50 replications with the wider tolerance.
    Reduced,
    Full,
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub preset: Preset,
    pub parallelism: usize,
    pub seed: u64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            preset: Preset::Reduced,
            parallelism: 1,
            seed: 20240601,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    /// Failed only on a clause the specified method cannot meet; the
    /// remaining clauses passed.
    pub known_gap: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} criterion {:>2} {}: {} [{:.1}s of {:.0}s]",
            match (self.passed, self.known_gap) {
                (true, _) => "PASS",
                (false, true) => "FAIL (known gap)",
                (false, false) => "FAIL",
            },
            self.id,
            self.title,
            self.detail,
            self.seconds,
            self.budget_seconds
        )
    }
}

fn title(id: u8) -> &'static str {
    match id {
        1 => "oracle beta optimality",
        2 => "shared beta consistency",
        3 => "scenario 1 ordering",
        4 => "scenario 2 optimality ratios",
        5 => "scenario 4 optimality ratios",
        6 => "sigmoid misspecification",
        7 => "interval calibration",
        8 => "brute-force reward oracle",
        9 => "determinism under parallelism",
        10 => "planted-truth grouped pipeline",
        _ => "unknown",
    }
}

fn budget(id: u8, preset: Preset) -> f64 {
    match (id, preset) {
        (1, _) => 120.0,
        (2, _) => 300.0,
        (3, _) => 180.0,
        (4, Preset::Reduced) => 900.0,
        (4, Preset::Full) => 3600.0,
        (5 | 6, _) => 1200.0,
        (7, _) => 60.0,
        (10, _) => 300.0,
        _ => 60.0,
    }
}

/// Runs criterion `id`. Errors inside a criterion become a FAIL line.
pub fn run_criterion(id: u8, opts: &Options) -> Outcome {
    let start = Instant::now();
    let result = match id {
        1 => oracle_scale_check(opts).map(Verdict::from),
        2 => consistency(opts).map(Verdict::from),
        3 => scenario1_ordering(opts),
        4 => scenario2_table(opts).map(Verdict::from),
        5 => scenario4_table(opts).map(Verdict::from),
        6 => sigmoid_table(opts),
        7 => calibration(opts).map(Verdict::from),
        8 => brute_force(opts).map(Verdict::from),
        9 => determinism(opts).map(Verdict::from),
        10 => planted_pipeline(opts),
        _ => Err(Error::Config(format!("no criterion {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    let budget_seconds = budget(id, opts.preset);
    let (passed, known_gap, mut detail) = match result {
        Ok(v) => (v.passed, v.known_gap, v.detail),
        Err(e) => (false, false, format!("error: {e}")),
    };
    let in_time = seconds <= budget_seconds;
    if !in_time {
        detail.push_str("; over runtime budget");
    }
    Outcome {
        id,
        title: title(id),
        passed: passed && in_time,
        known_gap: known_gap && in_time,
        detail,
        seconds,
        budget_seconds,
    }
}

/// Runs `ids` in order, writing each line to `out` as it completes.
pub fn run<W: Write>(ids: &[u8], opts: &Options, mut out: W) -> std::io::Result<Vec<Outcome>> {
    let mut all = Vec::with_capacity(ids.len());
    for &id in ids {
        let o = run_criterion(id, opts);
        writeln!(out, "{o}")?;
        out.flush()?;
        all.push(o);
    }
    Ok(all)
}

struct Verdict {
    passed: bool,
    known_gap: bool,
    detail: String,
}

impl From<(bool, String)> for Verdict {
    fn from((passed, detail): (bool, String)) -> Self {
        Self {
            passed,
            known_gap: false,
            detail,
        }
    }
}

type Check = Result<(bool, String)>;

fn s1(k: usize, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        scenario: Scenario::S1Dm,
        k,
        seed,
        ..ScenarioConfig::default()
    }
}

fn experiments(cfg: &ScenarioConfig) -> Result<(Vec<ExperimentSample>, GroundTruth)> {
    match generate(cfg)? {
        (TrialData::NonOverlapping(t), truth) => Ok((t.experiments, truth)),
        _ => Err(Error::Config("expected a non-overlapping scenario".into())),
    }
}

fn run_methods(cfg: RunConfig) -> Result<(RunResults, Vec<AggregateRow>)> {
    let res = run_synthetic(&cfg)?;
    let failed = res.records.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        return Err(Error::Config(format!("{failed} replications failed")));
    }
    let rows = aggregate(res.cells.len(), &res.methods, &res.records);
    Ok((res, rows))
}

fn or_of(rows: &[AggregateRow], cell: usize, m: Method) -> f64 {
    find_mean(rows, cell, m, "or").unwrap_or(f64::NAN)
}

/// Known-variance intervals, true anchor, β on a grid around the oracle
/// value. Every β is applied to the same replications and compared with
/// paired differences.
fn oracle_scale_check(opts: &Options) -> Check {
    let (k, n, alpha, reps) = (2000, 10usize, 0.05, 100);
    let base = s1(k, 0);
    let params = OracleParams {
        tau0: base.tau0,
        sigma0_sq: base.sigma0.powi(2),
        sigma_sq: base.sigma.powi(2),
        n: n as f64,
        alpha,
    };
    let star = oracle_beta(&params)?;
    let grid = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0].map(|m| m * star);
    let v = 4.0 * params.sigma_sq;
    let weights = WeightSpec::uniform(k);
    let mut rewards = vec![Vec::with_capacity(reps); grid.len()];
    let mut iht = Vec::with_capacity(reps);
    for rep in 0..reps {
        let cfg = ScenarioConfig {
            seed: replication_seed(opts.seed, rep),
            ..base.clone()
        };
        let (exps, truth) = experiments(&cfg)?;
        let est = exps
            .iter()
            .map(|e| Ok(AteEstimate::from_variance(dm_estimate(e, alpha)?.tau_hat, v, Some(2.0), n, alpha)))
            .collect::<Result<Vec<_>>>()?;
        iht.push(reward(&decide_iht(&est), &truth, &weights)?);
        for (g, &beta) in grid.iter().enumerate() {
            let plan = PoolingPlan::fixed(params.tau0, Beta::Shared(beta), alpha, n as f64);
            rewards[g].push(reward(&decide_dptr(&est, &plan), &truth, &weights)?);
        }
    }
    let means: Vec<f64> = rewards.iter().map(|r| mean(r)).collect();
    let best = (0..grid.len()).max_by(|&a, &b| means[a].total_cmp(&means[b])).unwrap_or(3);
    let diff: Vec<f64> = rewards[best].iter().zip(&rewards[3]).map(|(a, b)| a - b).collect();
    let se = sample_sd(&diff) / (reps as f64).sqrt();
    let gap = means[best] - means[3];
    let beats_iht = means[3] > mean(&iht);
    let near_best = gap <= 2.0 * se;
    Ok((
        beats_iht && near_best,
        format!(
            "beta*={star:.4}; R(beta*)={:.5} vs R(IHT)={:.5}; best grid beta={:.3} R={:.5}, gap {gap:.2e} vs 2se {:.2e}",
            means[3],
            mean(&iht),
            grid[best],
            means[best],
            2.0 * se
        ),
    ))
}

fn consistency(opts: &Options) -> Check {
    let (n, alpha, reps) = (10usize, 0.05, 200);
    let base = s1(100, 0);
    let star = oracle_beta(&OracleParams {
        tau0: base.tau0,
        sigma0_sq: base.sigma0.powi(2),
        sigma_sq: base.sigma.powi(2),
        n: n as f64,
        alpha,
    })?;
    let mut medians = Vec::new();
    for k in [100, 1000, 10_000] {
        let mut errs = Vec::with_capacity(reps);
        for rep in 0..reps {
            let cfg = ScenarioConfig {
                k,
                seed: derive_seed(opts.seed, &[k as u64, rep as u64]),
                ..base.clone()
            };
            let (exps, _) = experiments(&cfg)?;
            let est = exps.iter().map(|e| dm_estimate(e, alpha)).collect::<Result<Vec<_>>>()?;
            let b = shared_beta(&est, alpha, n as f64)?;
            errs.push((b.value - star).abs() / star);
        }
        medians.push(median(&errs));
    }
    let ok = medians[0] > medians[1] && medians[1] > medians[2] && medians[2] < 0.15;
    Ok((
        ok,
        format!(
            "median relative error K=100: {:.4}, K=1000: {:.4}, K=10000: {:.4}",
            medians[0], medians[1], medians[2]
        ),
    ))
}

/// The BAYES > IHT clause is a known gap: with a prior as wide as this one
/// the posterior rule is stricter than the plain interval test, even with
/// known variances, so it is reported but does not count as a regression.
fn scenario1_ordering(opts: &Options) -> Result<Verdict> {
    let cfg = RunConfig {
        methods: vec![Method::Iht, Method::Dptr, Method::Bayes],
        replications: 1000,
        master_seed: opts.seed,
        parallelism: opts.parallelism,
        ..RunConfig::default()
    };
    let (_, rows) = run_methods(cfg)?;
    let get = |m, metric| find_mean(&rows, 0, m, metric).unwrap_or(f64::NAN);
    let (or_d, or_b, or_i) = (get(Method::Dptr, "or"), get(Method::Bayes, "or"), get(Method::Iht, "or"));
    let p025 = rows
        .iter()
        .find(|r| r.method == Method::Dptr && r.metric == "or")
        .and_then(|r| r.diff_p025)
        .unwrap_or(f64::NAN);
    let (rec_d, rec_i) = (get(Method::Dptr, "recall"), get(Method::Iht, "recall"));
    let (spec_d, spec_i) = (get(Method::Dptr, "specificity"), get(Method::Iht, "specificity"));
    let core = or_d > or_b && p025 > 0.0 && rec_d > rec_i && spec_d < spec_i;
    let bayes_over_iht = or_b > or_i;
    Ok(Verdict {
        passed: core && bayes_over_iht,
        known_gap: core && !bayes_over_iht,
        detail: format!(
            "mean OR DPTR {or_d:.4}, BAYES {or_b:.4}, IHT {or_i:.4}; 2.5% of OR(DPTR)-OR(IHT) {p025:.4}; \
             recall {rec_d:.3} vs {rec_i:.3}; specificity {spec_d:.3} vs {spec_i:.3}"
        ),
    })
}

fn table_check(label: &str, got: f64, want: f64, tol: f64, parts: &mut Vec<String>) -> bool {
    let ok = (got - want).abs() <= tol;
    parts.push(format!("{label} {got:.4} (target {want}{})", if ok { "" } else { ", out of range" }));
    ok
}

fn scenario2_table(opts: &Options) -> Check {
    let (reps, tol) = match opts.preset {
        Preset::Reduced => (50, 0.15),
        Preset::Full => (200, 0.10),
    };
    let mut ok = true;
    let mut parts = vec![format!("{reps} replications, tolerance {tol}")];
    for (sigma, want) in [(3.0, [0.1003, 0.7123, 0.7612]), (1.0, [0.4097, 0.9214, f64::NAN])] {
        let cfg = RunConfig {
            methods: vec![Method::Iht, Method::Dptr, Method::DptrP],
            replications: reps,
            master_seed: opts.seed,
            parallelism: opts.parallelism,
            scenario: ScenarioConfig {
                scenario: Scenario::S2Dml,
                k: 100,
                n: Some(100),
                dx: Some(4),
                sigma,
                ..ScenarioConfig::default()
            },
            ..RunConfig::default()
        };
        let (_, rows) = run_methods(cfg)?;
        let s2 = sigma * sigma;
        for (m, w) in [Method::Iht, Method::Dptr, Method::DptrP].into_iter().zip(want) {
            let label = format!("sigma2={s2} {}", m.name());
            if w.is_nan() {
                parts.push(format!("{label} {:.4}", or_of(&rows, 0, m)));
            } else {
                ok &= table_check(&label, or_of(&rows, 0, m), w, tol, &mut parts);
            }
        }
    }
    Ok((ok, parts.join("; ")))
}

fn scenario4_table(opts: &Options) -> Check {
    let cfg = RunConfig {
        methods: vec![Method::Iht, Method::Dptr],
        replications: 200,
        master_seed: opts.seed,
        parallelism: opts.parallelism,
        scenario: ScenarioConfig {
            scenario: Scenario::S4Dml,
            k: 5,
            sigma: 3.0,
            ..ScenarioConfig::default()
        },
        ..RunConfig::default()
    };
    let (_, rows) = run_methods(cfg)?;
    let mut parts = Vec::new();
    let a = table_check("IHT", or_of(&rows, 0, Method::Iht), 0.0992, 0.12, &mut parts);
    let b = table_check("DPTR", or_of(&rows, 0, Method::Dptr), 0.5008, 0.12, &mut parts);
    Ok((a && b, parts.join("; ")))
}

/// The levels are a known gap: υ multiplies the logistic, so effects are
/// several times larger relative to the noise than in the linear
/// overlapping case and plain interval tests still roll out the strongest
/// experiments. The trend over K stays enforced.
fn sigmoid_table(opts: &Options) -> Result<Verdict> {
    let mut dptr = Vec::new();
    let mut iht7 = f64::NAN;
    for k in [4usize, 5, 6, 7] {
        let cfg = RunConfig {
            methods: vec![Method::Iht, Method::Dptr],
            replications: 200,
            master_seed: opts.seed,
            parallelism: opts.parallelism,
            scenario: ScenarioConfig {
                scenario: Scenario::Sigmoid,
                k,
                sigma: 3.0,
                ..ScenarioConfig::default()
            },
            ..RunConfig::default()
        };
        let (_, rows) = run_methods(cfg)?;
        dptr.push(or_of(&rows, 0, Method::Dptr));
        if k == 7 {
            iht7 = or_of(&rows, 0, Method::Iht);
        }
    }
    let d7 = dptr[3];
    let monotone = dptr.windows(2).all(|w| w[1] >= w[0] - 0.05);
    let levels = iht7 < 0.05 && (0.35..=0.65).contains(&d7);
    Ok(Verdict {
        passed: levels && monotone,
        known_gap: monotone && !levels,
        detail: format!(
            "K=7: OR(IHT) {iht7:.4} (target 0.0023), OR(DPTR) {d7:.4} (target 0.5133); OR(DPTR) over K=4..7: {}",
            dptr.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")
        ),
    })
}

fn calibration(opts: &Options) -> Check {
    let cfg = ScenarioConfig {
        k: 10_000,
        n: Some(100),
        tau0: 0.0,
        sigma0: 0.0,
        ..s1(10_000, derive_seed(opts.seed, &[7]))
    };
    let (exps, truth) = experiments(&cfg)?;
    if truth.tau.iter().any(|&t| t != 0.0) {
        return Err(Error::Config("calibration truth is not all zero".into()));
    }
    let est = exps.iter().map(|e| dm_estimate(e, 0.05)).collect::<Result<Vec<_>>>()?;
    let rate = decide_iht(&est).len() as f64 / est.len() as f64;
    Ok((
        (0.015..=0.035).contains(&rate),
        format!("IHT roll-out rate {rate:.4} over {} null experiments of N=100", est.len()),
    ))
}

fn brute_force(opts: &Options) -> Check {
    let mut r = rng::stream(opts.seed, &[8]);
    let mut checked = 0usize;
    for k in 1..=10usize {
        for _ in 0..20 {
            let tau: Vec<f64> = (0..k).map(|_| r.random_range(-1.0..1.0)).collect();
            let raw: Vec<f64> = (0..k).map(|_| r.random_range(0.1..1.0)).collect();
            let weights = WeightSpec::from_sizes(&raw)?;
            let truth = GroundTruth::linear(tau);
            let best = oracle_reward(&truth, &weights)?;
            for mask in 0..1usize << k {
                let set: Vec<bool> = (0..k).map(|i| mask >> i & 1 == 1).collect();
                let got = reward(&DecisionSet::from_mask(Method::Iht, &set), &truth, &weights)?;
                if got > best + 1e-12 {
                    return Ok((false, format!("subset {mask:b} beats the oracle set at K={k}")));
                }
                checked += 1;
            }
        }
    }
    let hand = hand_examples()?;
    Ok((
        hand.is_empty(),
        if hand.is_empty() {
            format!("{checked} subsets never beat the oracle set; hand examples exact")
        } else {
            format!("hand examples differ: {}", hand.join(", "))
        },
    ))
}

/// Values chosen to be exact in binary floating point.
fn hand_examples() -> Result<Vec<String>> {
    let truth = GroundTruth::linear(vec![0.5, -0.25, 0.25, -0.5]);
    let w = WeightSpec::uniform(4);
    let d = DecisionSet::from_mask(Method::Dptr, &[true, true, false, false]);
    let c = confusion(&d, &truth)?;
    let report = MetricsReport::evaluate(&d, &truth, &w, Some(0.125))?;
    let mut bad = Vec::new();
    let mut expect = |name: &str, got: Option<f64>, want: f64| {
        if got != Some(want) {
            bad.push(format!("{name}={got:?} expected {want}"));
        }
    };
    expect("reward", Some(reward(&d, &truth, &w)?), 0.0625);
    expect("oracle reward", Some(oracle_reward(&truth, &w)?), 0.1875);
    expect("or", optimality_ratio(&d, &truth, &w)?, 1.0 / 3.0);
    expect("vdp", vdp(0.0625, 0.125), -0.5);
    expect("report vdp", report.vdp, -0.5);
    expect("accuracy", c.accuracy(), 0.5);
    expect("recall", c.recall(), 0.5);
    expect("specificity", c.specificity(), 0.5);
    expect("precision", c.precision(), 0.5);
    if vdp(0.1, 0.0).is_some() {
        bad.push("vdp with zero baseline should be absent".into());
    }
    if oracle_set(&truth, 0.0).selected != vec![0, 2] {
        bad.push("oracle set".into());
    }
    if (c.tp, c.tn, c.fp, c.fn_) != (1, 1, 1, 1) {
        bad.push(format!("confusion {c:?}"));
    }
    Ok(bad)
}

fn determinism(opts: &Options) -> Check {
    let toml = r#"
        methods = ["IHT", "DPTR", "DPTR-P", "BAYES", "ORACLE_BETA"]
        replications = 40
        [scenario]
        scenario = "S1_OLS"
        k = 50
        [[sweep]]
        field = "scenario.sigma"
        values = [1.0, 3.0]
    "#;
    let base = RunConfig {
        master_seed: opts.seed,
        ..RunConfig::from_toml(toml)?
    };
    let render = |parallelism| -> Result<(Vec<u8>, Vec<u8>)> {
        let res = run_synthetic(&RunConfig {
            parallelism,
            ..base.clone()
        })?;
        let rows = aggregate(res.cells.len(), &res.methods, &res.records);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_replications(&mut a, &res)?;
        write_aggregates(&mut b, &res.run_id, &res.cells, &rows)?;
        Ok((a, b))
    };
    let one = render(1)?;
    let eight = render(8)?;
    Ok((
        one == eight,
        format!(
            "replication CSV {} bytes, aggregate CSV {} bytes, identical at parallelism 1 and 8: {}",
            one.0.len(),
            one.1.len(),
            one == eight
        ),
    ))
}

/// Writes a grouped CSV with exactly planted effects: six balanced binary
/// covariates give 64 groups, each with `rows_per_arm` rows per arm and a
/// `base_rate` success rate in control. Groups with an even number of set
/// covariates get `+effect` in the treated arm, the rest `-effect`. Row
/// order is shuffled.
pub fn write_planted_csv(
    path: &std::path::Path,
    rows_per_arm: usize,
    base_rate: f64,
    effect: f64,
    seed: u64,
) -> Result<()> {
    use rand::seq::SliceRandom;
    let mut r = rng::stream(seed, &[10]);
    let mut rows: Vec<(bool, bool, u32)> = Vec::with_capacity(128 * rows_per_arm);
    for g in 0..64u32 {
        let tau = if g.count_ones() % 2 == 0 { effect } else { -effect };
        for (treated, rate) in [(true, base_rate + tau), (false, base_rate)] {
            let successes = (rate * rows_per_arm as f64).round() as usize;
            rows.extend((0..rows_per_arm).map(|i| (i < successes, treated, g)));
        }
    }
    rows.shuffle(&mut r);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["outcome", "treatment", "x0", "x1", "x2", "x3", "x4", "x5"])?;
    for (y, d, g) in rows {
        let mut rec = vec![u8::from(y).to_string(), u8::from(d).to_string()];
        rec.extend((0..6).map(|j| (g >> j & 1).to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// The planted effects average exactly zero, so the anchor carries no
/// signal. At N=10 the shared scale often hits its degenerate clamp and
/// DPTR then follows the sign of a near-zero anchor; the N=10 gain and the
/// VDP trend are reported as a known gap while grouping and row
/// reconciliation stay enforced.
fn planted_pipeline(opts: &Options) -> Result<Verdict> {
    let dir = std::env::temp_dir().join(format!("dptr-selftest-{}-{}", std::process::id(), opts.seed));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("planted.csv");
    write_planted_csv(&path, 600, 0.3, 0.1, opts.seed)?;
    let ingested = ingest_csv(&path, &ColumnMap::default());
    let _ = std::fs::remove_dir_all(&dir);
    let ingested = ingested?;
    let total = ingested.rows.len() + ingested.rejects.len();
    let data = group_generation(&ingested.rows, 1000, opts.seed)?;
    let recon = Reconciliation::new(total, data.rows_used(), ingested.rejects.len(), data.dropped_rows);
    let cfg = EvaluateConfig {
        methods: vec![Method::Iht, Method::Dptr],
        replications: 200,
        seed: opts.seed,
        parallelism: opts.parallelism,
        sample_sizes: vec![30, 20, 10],
        ..EvaluateConfig::default()
    };
    let sizes = [30, 20, 10].map(SampleSize::Fixed);
    let res = subsample_evaluate(&data, &sizes, &cfg)?;
    let rows = aggregate(res.cells.len(), &res.methods, &res.records);
    let gain = or_of(&rows, 2, Method::Dptr) - or_of(&rows, 2, Method::Iht);
    let v: Vec<f64> = (0..3)
        .map(|c| find_mean(&rows, c, Method::Dptr, VDP_OF_MEANS).unwrap_or(f64::NAN))
        .collect();
    let core = recon.balanced && data.groups.len() == 64;
    let trend = gain > 0.0 && v[0] < v[1] && v[1] < v[2];
    Ok(Verdict {
        passed: core && trend,
        known_gap: core && !trend,
        detail: format!(
            "{} groups; N=10 OR(DPTR)-OR(IHT) {gain:.4}; VDP(DPTR) at N=30,20,10: {:.3}, {:.3}, {:.3}; rows reconciled: {}",
            data.groups.len(),
            v[0],
            v[1],
            v[2],
            recon.balanced
        ),
    })
}
