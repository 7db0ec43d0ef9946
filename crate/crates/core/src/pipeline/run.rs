//! Whole runs from a config to files on disk.

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use super::aggregate::{aggregate, AggregateRow};
use super::config::{EvaluateConfig, Layout, RunConfig};
use super::emit::{emit_results, version, EmittedPaths, Exclusions, Manifest, Reconciliation};
use super::engine::{run_synthetic_cells, RunResults};
use super::grouped::{evaluate_overlapping, group_by_column, group_generation, sample_sizes, subsample_evaluate};
use super::ingest::{ingest_csv, ingest_overlapping_csv};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub results: RunResults,
    pub aggregates: Vec<AggregateRow>,
    pub paths: EmittedPaths,
    pub manifest: Manifest,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

pub fn simulate(cfg: &RunConfig, command: &str) -> Result<RunOutput> {
    let started = unix_now();
    let clock = Instant::now();
    let (results, cell_configs) = run_synthetic_cells(cfg)?;
    let aggregates = aggregate(results.cells.len(), &results.methods, &results.records);
    let manifest = Manifest {
        version: version(),
        run_id: results.run_id.clone(),
        command: command.to_string(),
        master_seed: cfg.master_seed,
        seed_scheme: "replication r of every cell uses derive_seed(master_seed, [REPLICATION, r])".into(),
        config: serde_json::json!({
            "run": to_json(&cfg.resolved())?,
            "cells": to_json(&cell_configs)?,
        }),
        cells: results.cells.clone(),
        replications: cfg.replications,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        started_unix_seconds: started,
        exclusions: Exclusions::from_results(&results),
        reconciliation: None,
    };
    let paths = emit_results(Path::new(&cfg.output.dir), &results, &aggregates, &manifest)?;
    Ok(RunOutput {
        results,
        aggregates,
        paths,
        manifest,
    })
}

pub fn evaluate(cfg: &EvaluateConfig, command: &str) -> Result<RunOutput> {
    cfg.validate()?;
    if cfg.input.is_empty() {
        return Err(Error::Config("evaluate needs an input file".into()));
    }
    let started = unix_now();
    let clock = Instant::now();
    let input = Path::new(&cfg.input);
    if !input.is_file() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("input file `{}` not found", input.display()),
        )));
    }
    let (results, exclusions, reconciliation) = match cfg.layout {
        Layout::Grouped => {
            let ingested = ingest_csv(input, &cfg.columns)?;
            let data = if cfg.columns.group.is_some() {
                group_by_column(&ingested.rows, cfg.min_group_size)?
            } else {
                group_generation(&ingested.rows, cfg.min_group_size, cfg.seed)?
            };
            let results = subsample_evaluate(&data, &sample_sizes(cfg), cfg)?;
            let ex = Exclusions {
                dropped_groups: data.dropped_groups,
                rejected_rows: ingested.rejects.len(),
                ..Exclusions::from_results(&results)
            };
            let total = ingested.rows.len() + ingested.rejects.len();
            let rec = Reconciliation::new(total, data.rows_used(), ingested.rejects.len(), data.dropped_rows);
            (results, ex, rec)
        }
        Layout::Overlapping => {
            let (trial, rejects) = ingest_overlapping_csv(input, &cfg.columns)?;
            let results = evaluate_overlapping(&trial, cfg)?;
            let ex = Exclusions {
                rejected_rows: rejects.len(),
                ..Exclusions::from_results(&results)
            };
            let rec = Reconciliation::new(trial.len() + rejects.len(), trial.len(), rejects.len(), 0);
            (results, ex, rec)
        }
    };
    let aggregates = aggregate(results.cells.len(), &results.methods, &results.records);
    let manifest = Manifest {
        version: version(),
        run_id: results.run_id.clone(),
        command: command.to_string(),
        master_seed: cfg.seed,
        seed_scheme: "replication r of every cell uses derive_seed(seed, [SUBSAMPLE, r])".into(),
        config: to_json(cfg)?,
        cells: results.cells.clone(),
        replications: cfg.replications,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        started_unix_seconds: started,
        exclusions,
        reconciliation: Some(reconciliation),
    };
    let paths = emit_results(Path::new(&cfg.output.dir), &results, &aggregates, &manifest)?;
    Ok(RunOutput {
        results,
        aggregates,
        paths,
        manifest,
    })
}
