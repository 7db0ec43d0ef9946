//! Real-data evaluation: covariate groups with full-data "true" effects,
//! scored on repeated small subsamples.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use serde::Serialize;

use super::config::EvaluateConfig;
use super::engine::{run_tasks, score_methods, Cell, RunResults, Scores};
use super::ingest::Row;
use crate::data::{ExperimentSample, OverlappingTrial};
use crate::dgp::GroundTruth;
use crate::error::{Error, Result};
use crate::estimators::{design_factor, dm_estimate, ols_overlapping_estimate, AteEstimate};
use crate::metrics::WeightSpec;
use crate::rng::{self, derive_seed, tag};
use crate::stats::median;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Group {
    pub key: String,
    pub y: Vec<f64>,
    pub d: Vec<bool>,
    /// Row-major covariates.
    pub x: Vec<f64>,
    pub n1: usize,
    pub n0: usize,
    /// Difference of arm means over the whole group.
    pub tau: f64,
}

impl Group {
    pub fn size(&self) -> usize {
        self.n1 + self.n0
    }

    fn arm(&self, treated: bool) -> Vec<usize> {
        (0..self.d.len()).filter(|&i| self.d[i] == treated).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupedDataset {
    pub groups: Vec<Group>,
    pub dx: usize,
    pub dropped_groups: usize,
    pub dropped_rows: usize,
}

impl GroupedDataset {
    pub fn rows_used(&self) -> usize {
        self.groups.iter().map(Group::size).sum()
    }

    /// Size-proportional weights.
    pub fn weights(&self) -> Result<WeightSpec> {
        let sizes: Vec<f64> = self.groups.iter().map(|g| g.size() as f64).collect();
        WeightSpec::from_sizes(&sizes)
    }
}

/// `mean(y | d = 1) - mean(y | d = 0)`.
pub fn true_hte(y: &[f64], d: &[bool]) -> Result<f64> {
    let (mut s1, mut s0, mut n1, mut n0) = (0.0, 0.0, 0usize, 0usize);
    for (&yi, &di) in y.iter().zip(d) {
        if di {
            s1 += yi;
            n1 += 1;
        } else {
            s0 += yi;
            n0 += 1;
        }
    }
    if n1 == 0 || n0 == 0 {
        return Err(Error::EmptyArm {
            treated: n1,
            control: n0,
        });
    }
    Ok(s1 / n1 as f64 - s0 / n0 as f64)
}

/// Low/high side of a median split of one covariate. Rows tied with the
/// median are assigned at random so the two sides are as equal as possible.
fn median_split(values: &[f64], seed: u64, column: usize) -> Vec<bool> {
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = median(&sorted);
    let mut high: Vec<bool> = values.iter().map(|&v| v > m).collect();
    let below = values.iter().filter(|&&v| v < m).count();
    let mut ties: Vec<usize> = (0..n).filter(|&i| values[i] == m).collect();
    let to_low = (n / 2).saturating_sub(below).min(ties.len());
    ties.shuffle(&mut rng::stream(seed, &[tag::GROUPING, column as u64]));
    for &i in &ties[to_low..] {
        high[i] = true;
    }
    high
}

fn build_groups(rows: &[Row], keys: Vec<String>, min_size: usize) -> Result<GroupedDataset> {
    let dx = rows.first().map_or(0, |r| r.x.len());
    let mut by_key: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.into_iter().enumerate() {
        by_key.entry(k).or_default().push(i);
    }
    let (mut groups, mut dropped_groups, mut dropped_rows) = (Vec::new(), 0, 0);
    for (key, idx) in by_key {
        let d: Vec<bool> = idx.iter().map(|&i| rows[i].d).collect();
        let n1 = d.iter().filter(|&&t| t).count();
        let n0 = d.len() - n1;
        if idx.len() < min_size || n1 == 0 || n0 == 0 {
            dropped_groups += 1;
            dropped_rows += idx.len();
            continue;
        }
        let y: Vec<f64> = idx.iter().map(|&i| rows[i].y).collect();
        let tau = true_hte(&y, &d)?;
        groups.push(Group {
            key,
            x: idx.iter().flat_map(|&i| rows[i].x.iter().copied()).collect(),
            y,
            d,
            n1,
            n0,
            tau,
        });
    }
    if groups.is_empty() {
        return Err(Error::NoGroupsRetained { min_size });
    }
    Ok(GroupedDataset {
        groups,
        dx,
        dropped_groups,
        dropped_rows,
    })
}

/// Groups rows by the signature of median splits over every covariate and
/// drops groups below `min_size` rows or with an empty arm.
pub fn group_generation(rows: &[Row], min_size: usize, seed: u64) -> Result<GroupedDataset> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("rows"));
    }
    let dx = rows[0].x.len();
    if rows.iter().any(|r| r.x.len() != dx) {
        return Err(Error::Config("rows have differing covariate counts".into()));
    }
    let sides: Vec<Vec<bool>> = (0..dx)
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r.x[j]).collect();
            median_split(&col, seed, j)
        })
        .collect();
    let keys = (0..rows.len())
        .map(|i| sides.iter().map(|s| if s[i] { '1' } else { '0' }).collect())
        .collect();
    build_groups(rows, keys, min_size)
}

/// Groups rows by their explicit `group` value.
pub fn group_by_column(rows: &[Row], min_size: usize) -> Result<GroupedDataset> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("rows"));
    }
    let keys = rows
        .iter()
        .map(|r| r.group.clone().ok_or(Error::MissingColumn("group".into())))
        .collect::<Result<Vec<_>>>()?;
    build_groups(rows, keys, min_size)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SampleSize {
    /// `N` rows per group, `N/2` from each arm.
    Fixed(usize),
    /// `floor(ρ (N_0 + N_1) / 2)` rows from each arm of each group.
    Proportion(f64),
}

impl SampleSize {
    fn per_arm(self, g: &Group) -> usize {
        match self {
            SampleSize::Fixed(n) => n / 2,
            SampleSize::Proportion(rho) => (rho * g.size() as f64 / 2.0).floor() as usize,
        }
    }

    pub fn label(self) -> String {
        match self {
            SampleSize::Fixed(n) => format!("N={n}"),
            SampleSize::Proportion(r) => format!("rho={r}"),
        }
    }
}

pub fn sample_sizes(cfg: &EvaluateConfig) -> Vec<SampleSize> {
    cfg.sample_sizes
        .iter()
        .map(|&n| SampleSize::Fixed(n))
        .chain(cfg.proportions.iter().map(|&p| SampleSize::Proportion(p)))
        .collect()
}

fn check_draws(data: &GroupedDataset, size: SampleSize) -> Result<()> {
    for g in &data.groups {
        let m = size.per_arm(g);
        let available = g.n1.min(g.n0);
        if m < 2 || m > available {
            return Err(Error::GroupTooSmall {
                key: g.key.clone(),
                requested: m,
                available,
            });
        }
    }
    Ok(())
}

/// One replication: balanced draws without replacement from every group,
/// DM estimates, decisions and size-weighted scores against the full-data
/// effects.
fn grouped_replication(
    data: &GroupedDataset,
    size: SampleSize,
    weights: &WeightSpec,
    cfg: &EvaluateConfig,
    rep: usize,
) -> Result<Scores> {
    let seed = derive_seed(cfg.seed, &[tag::SUBSAMPLE, rep as u64]);
    let mut estimates: Vec<AteEstimate> = Vec::with_capacity(data.groups.len());
    for (gi, g) in data.groups.iter().enumerate() {
        let m = size.per_arm(g);
        let mut y = Vec::with_capacity(2 * m);
        let mut d = Vec::with_capacity(2 * m);
        for treated in [true, false] {
            let arm = g.arm(treated);
            let mut r = rng::stream(seed, &[gi as u64, u64::from(treated)]);
            let mut picks = index::sample(&mut r, arm.len(), m).into_vec();
            picks.sort_unstable();
            y.extend(picks.iter().map(|&p| g.y[arm[p]]));
            d.extend(std::iter::repeat_n(treated, m));
        }
        let sample = ExperimentSample::new(y, d)?;
        estimates.push(dm_estimate(&sample, cfg.alpha)?.with_b(design_factor(&sample)?));
    }
    let n = estimates.iter().map(|e| e.n as f64).sum::<f64>() / estimates.len() as f64;
    let truth = GroundTruth::linear(data.groups.iter().map(|g| g.tau).collect());
    score_methods(&cfg.methods, &estimates, &truth, weights, cfg.alpha, n, None)
}

/// Repeated subsample evaluation, one cell per sample size. Replication
/// seeds are shared across cells.
pub fn subsample_evaluate(data: &GroupedDataset, sizes: &[SampleSize], cfg: &EvaluateConfig) -> Result<RunResults> {
    cfg.validate()?;
    for &s in sizes {
        check_draws(data, s)?;
    }
    let weights = data.weights()?.with_tau_min(cfg.tau_min);
    let tasks: Vec<(usize, usize)> = (0..sizes.len())
        .flat_map(|c| (0..cfg.replications).map(move |r| (c, r)))
        .collect();
    let records = run_tasks(cfg.parallelism, &tasks, |c, r| {
        grouped_replication(data, sizes[c], &weights, cfg, r)
    })?;
    Ok(RunResults {
        run_id: cfg.output.run_id.clone(),
        methods: cfg.methods.clone(),
        cells: sizes
            .iter()
            .enumerate()
            .map(|(id, s)| Cell { id, label: s.label() })
            .collect(),
        records,
    })
}

/// Overlapping evaluation: full-data OLS effects as truth, stratified draws
/// of `n` rows from every observed treatment combination per replication.
pub fn evaluate_overlapping(trial: &OverlappingTrial, cfg: &EvaluateConfig) -> Result<RunResults> {
    cfg.validate()?;
    let full = ols_overlapping_estimate(trial, cfg.with_covariates, cfg.alpha)?;
    let truth = GroundTruth::linear(full.iter().map(|e| e.tau_hat).collect());
    let mut strata: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
    for i in 0..trial.len() {
        strata.entry(trial.treatment_row(i).to_vec()).or_default().push(i);
    }
    let strata: Vec<(String, Vec<usize>)> = strata
        .into_iter()
        .map(|(k, v)| (k.iter().map(|&b| if b { '1' } else { '0' }).collect(), v))
        .collect();
    for &n in &cfg.sample_sizes {
        if let Some((key, rows)) = strata.iter().find(|(_, rows)| rows.len() < n) {
            return Err(Error::GroupTooSmall {
                key: key.clone(),
                requested: n,
                available: rows.len(),
            });
        }
    }
    let weights = WeightSpec::uniform(trial.k).with_tau_min(cfg.tau_min);
    let tasks: Vec<(usize, usize)> = (0..cfg.sample_sizes.len())
        .flat_map(|c| (0..cfg.replications).map(move |r| (c, r)))
        .collect();
    let records = run_tasks(cfg.parallelism, &tasks, |c, rep| {
        let n = cfg.sample_sizes[c];
        let seed = derive_seed(cfg.seed, &[tag::SUBSAMPLE, rep as u64]);
        let mut picked = Vec::with_capacity(n * strata.len());
        for (si, (_, rows)) in strata.iter().enumerate() {
            let mut r = rng::stream(seed, &[si as u64]);
            let mut p = index::sample(&mut r, rows.len(), n).into_vec();
            p.sort_unstable();
            picked.extend(p.into_iter().map(|j| rows[j]));
        }
        let sub = OverlappingTrial::new(
            trial.k,
            trial.dx,
            picked.iter().map(|&i| trial.outcomes[i]).collect(),
            picked.iter().flat_map(|&i| trial.treatment_row(i).to_vec()).collect(),
            picked.iter().flat_map(|&i| trial.covariate_row(i).to_vec()).collect(),
        )?;
        let est = ols_overlapping_estimate(&sub, cfg.with_covariates, cfg.alpha)?;
        score_methods(&cfg.methods, &est, &truth, &weights, cfg.alpha, sub.len() as f64, None)
    })?;
    Ok(RunResults {
        run_id: cfg.output.run_id.clone(),
        methods: cfg.methods.clone(),
        cells: cfg
            .sample_sizes
            .iter()
            .enumerate()
            .map(|(id, n)| Cell {
                id,
                label: format!("per_combination={n}"),
            })
            .collect(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pooling::Method;
    use rand::Rng;

    fn row(y: f64, d: bool, x: Vec<f64>) -> Row {
        Row { y, d, x, group: None }
    }

    #[test]
    fn true_hte_examples() {
        let y = [0.08, 0.04, 0.05, 0.03];
        let d = [true, true, false, false];
        assert!((true_hte(&y, &d).unwrap() - 0.02).abs() < 1e-15);
        assert_eq!(true_hte(&[1.0, 1.0], &[true, false]).unwrap(), 0.0);
        assert!(matches!(true_hte(&[1.0], &[true]), Err(Error::EmptyArm { .. })));
    }

    #[test]
    fn balanced_binary_covariate_splits_cleanly() {
        let rows: Vec<Row> = (0..8).map(|i| row(0.0, i % 2 == 0, vec![(i / 4) as f64])).collect();
        let g = group_generation(&rows, 1, 0).unwrap();
        assert_eq!(g.groups.len(), 2);
        assert_eq!(g.groups[0].key, "0");
        assert_eq!(g.groups[0].size(), 4);
    }

    #[test]
    fn all_ties_split_evenly() {
        let rows: Vec<Row> = (0..11).map(|i| row(0.0, i % 2 == 0, vec![7.0])).collect();
        let sides = median_split(&rows.iter().map(|r| r.x[0]).collect::<Vec<_>>(), 3, 0);
        assert_eq!(sides.iter().filter(|&&h| !h).count(), 5);
        let g = group_generation(&rows, 1, 3).unwrap();
        assert_eq!(g.rows_used() + g.dropped_rows, 11);
    }

    #[test]
    fn grouping_matches_brute_force_recount() {
        let mut r = rng::stream(9, &[]);
        let rows: Vec<Row> = (0..20_000)
            .map(|_| {
                let x = (0..12).map(|j| if j < 4 { f64::from(r.random_range(0..3u8)) } else { r.random() }).collect();
                row(f64::from(r.random::<bool>()), r.random::<bool>(), x)
            })
            .collect();
        let min_size = 10;
        let g = group_generation(&rows, min_size, 4).unwrap();

        // Independent recount from the same median sides.
        let sides: Vec<Vec<bool>> = (0..12)
            .map(|j| median_split(&rows.iter().map(|r| r.x[j]).collect::<Vec<_>>(), 4, j))
            .collect();
        let mut counts: std::collections::HashMap<Vec<bool>, (usize, usize)> = Default::default();
        for (i, rw) in rows.iter().enumerate() {
            let e = counts.entry(sides.iter().map(|s| s[i]).collect()).or_default();
            if rw.d {
                e.0 += 1
            } else {
                e.1 += 1
            }
        }
        let expected = counts.values().filter(|(a, b)| a + b >= min_size && *a > 0 && *b > 0).count();
        assert_eq!(g.groups.len(), expected);
        assert_eq!(g.rows_used() + g.dropped_rows, rows.len());
        let w: f64 = g.weights().unwrap().weights.iter().sum();
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_groups_retained() {
        let rows = vec![row(1.0, true, vec![0.0]), row(0.0, false, vec![1.0])];
        assert!(matches!(
            group_generation(&rows, 5, 0),
            Err(Error::NoGroupsRetained { min_size: 5 })
        ));
    }

    fn planted(groups: usize, per_arm: usize) -> GroupedDataset {
        let rows: Vec<Row> = (0..groups)
            .flat_map(|g| {
                (0..2 * per_arm).map(move |i| Row {
                    y: if i < per_arm { 1.0 + g as f64 * 0.1 } else { (i % 3) as f64 * 0.01 },
                    d: i < per_arm,
                    x: vec![],
                    group: Some(format!("g{g:02}")),
                })
            })
            .collect();
        group_by_column(&rows, 1).unwrap()
    }

    fn eval_cfg(reps: usize) -> EvaluateConfig {
        EvaluateConfig {
            replications: reps,
            methods: vec![Method::Iht, Method::Dptr],
            ..EvaluateConfig::default()
        }
    }

    #[test]
    fn seeds_change_samples_not_weights() {
        let mut rows = Vec::new();
        let mut r = rng::stream(1, &[]);
        for g in 0..4 {
            for _ in 0..60 {
                let d = r.random::<bool>();
                rows.push(Row {
                    y: r.random::<f64>() + if d { 0.2 } else { 0.0 },
                    d,
                    x: vec![],
                    group: Some(format!("{g}")),
                });
            }
        }
        let data = group_by_column(&rows, 1).unwrap();
        let a = subsample_evaluate(&data, &[SampleSize::Fixed(10)], &eval_cfg(3)).unwrap();
        let b = subsample_evaluate(&data, &[SampleSize::Fixed(10)], &EvaluateConfig { seed: 1, ..eval_cfg(3) }).unwrap();
        assert_ne!(a.records, b.records);
        let ra = a.records[0].outcome.as_ref().unwrap();
        let rb = b.records[0].outcome.as_ref().unwrap();
        assert_eq!(ra.iht.r_star, rb.iht.r_star);
    }

    #[test]
    fn full_sample_recovers_truth() {
        let data = planted(3, 6);
        let res = subsample_evaluate(&data, &[SampleSize::Proportion(1.0)], &eval_cfg(1)).unwrap();
        let s = res.records[0].outcome.as_ref().unwrap();
        // Every group has a large positive effect and little noise.
        assert_eq!(s.iht.or, Some(1.0));
    }

    #[test]
    fn oversized_draw_names_the_group() {
        let data = planted(2, 3);
        let err = subsample_evaluate(&data, &[SampleSize::Fixed(10)], &eval_cfg(1)).unwrap_err();
        assert!(matches!(err, Error::GroupTooSmall { ref key, requested: 5, available: 3 } if key == "g00"));
    }
}
