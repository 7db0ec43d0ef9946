//! Output files: per-replication CSV, aggregate CSV and a JSON manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::aggregate::AggregateRow;
use super::engine::{Cell, RunResults};
use crate::error::Result;
use crate::pooling::Method;

const REPLICATION_COLUMNS: [&str; 18] = [
    "run_id",
    "cell_id",
    "replication",
    "method",
    "reward",
    "or",
    "vdp",
    "accuracy",
    "recall",
    "specificity",
    "precision",
    "tp",
    "tn",
    "fp",
    "fn",
    "beta_summary",
    "tau0_hat",
    "error_tag",
];

const AGGREGATE_COLUMNS: [&str; 12] = [
    "run_id",
    "cell_id",
    "cell",
    "method",
    "metric",
    "mean",
    "sd",
    "count",
    "excluded",
    "diff_p025",
    "diff_p50",
    "diff_p975",
];

/// 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// The VDP column is left out when IHT is the only method.
fn has_vdp(methods: &[Method]) -> bool {
    methods.iter().any(|&m| m != Method::Iht)
}

pub fn write_replications<W: Write>(out: W, results: &RunResults) -> Result<()> {
    let vdp = has_vdp(&results.methods);
    let keep = |c: &&&str| vdp || **c != "vdp";
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPLICATION_COLUMNS.iter().filter(keep))?;
    for rec in &results.records {
        let head = [
            results.run_id.clone(),
            rec.cell_id.to_string(),
            rec.replication.to_string(),
        ];
        match &rec.outcome {
            Ok(scores) => {
                for m in &scores.methods {
                    let r = &m.report;
                    let c = &r.confusion;
                    let mut row: Vec<String> = head.to_vec();
                    row.push(r.method.name().to_string());
                    row.push(fmt_float(r.reward));
                    row.push(opt(r.or));
                    if vdp {
                        row.push(opt(r.vdp));
                    }
                    row.extend([r.accuracy, r.recall, r.specificity, r.precision].map(opt));
                    row.extend([c.tp, c.tn, c.fp, c.fn_].map(|v| v.to_string()));
                    row.push(
                        m.beta_summary
                            .map(|(a, b, c)| format!("{}/{}/{}", fmt_float(a), fmt_float(b), fmt_float(c)))
                            .unwrap_or_default(),
                    );
                    row.push(if r.method == Method::Iht { String::new() } else { fmt_float(m.tau0_hat) });
                    row.push(String::new());
                    w.write_record(&row)?;
                }
            }
            Err(e) => {
                let width = REPLICATION_COLUMNS.len() - usize::from(!vdp);
                for &method in &results.methods {
                    let mut row: Vec<String> = head.to_vec();
                    row.push(method.name().to_string());
                    row.resize(width - 1, String::new());
                    row.push(e.tag.to_string());
                    w.write_record(&row)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregates<W: Write>(out: W, run_id: &str, cells: &[Cell], rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_COLUMNS)?;
    for r in rows {
        let label = cells.iter().find(|c| c.id == r.cell_id).map_or("", |c| c.label.as_str());
        w.write_record([
            run_id.to_string(),
            r.cell_id.to_string(),
            label.to_string(),
            r.method.name().to_string(),
            r.metric.to_string(),
            opt(r.mean),
            opt(r.sd),
            r.count.to_string(),
            r.excluded.to_string(),
            opt(r.diff_p025),
            opt(r.diff_p50),
            opt(r.diff_p975),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reconciliation {
    pub rows_ingested: usize,
    pub rows_used: usize,
    pub rows_rejected: usize,
    pub rows_in_dropped_groups: usize,
    pub balanced: bool,
}

impl Reconciliation {
    pub fn new(rows_ingested: usize, rows_used: usize, rows_rejected: usize, rows_in_dropped_groups: usize) -> Self {
        Self {
            rows_ingested,
            rows_used,
            rows_rejected,
            rows_in_dropped_groups,
            balanced: rows_ingested == rows_used + rows_rejected + rows_in_dropped_groups,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Exclusions {
    /// Replications that failed, by error tag.
    pub failed_replications: BTreeMap<String, usize>,
    pub dropped_groups: usize,
    pub rejected_rows: usize,
}

impl Exclusions {
    pub fn from_results(results: &RunResults) -> Self {
        let mut failed = BTreeMap::new();
        for r in &results.records {
            if let Err(e) = &r.outcome {
                *failed.entry(e.tag.to_string()).or_insert(0) += 1;
            }
        }
        Self {
            failed_replications: failed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub version: String,
    pub run_id: String,
    pub command: String,
    pub master_seed: u64,
    /// How per-replication seeds are derived from the master seed.
    pub seed_scheme: String,
    pub config: serde_json::Value,
    pub cells: Vec<Cell>,
    pub replications: usize,
    pub wall_clock_seconds: f64,
    pub started_unix_seconds: u64,
    pub exclusions: Exclusions,
    pub reconciliation: Option<Reconciliation>,
}

pub fn version() -> String {
    option_env!("DPTR_GIT_DESCRIBE")
        .map(str::to_string)
        .unwrap_or_else(|| format!("v{}", env!("CARGO_PKG_VERSION")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmittedPaths {
    pub replications: PathBuf,
    pub aggregate: PathBuf,
    pub manifest: PathBuf,
}

/// Writes `<run_id>.replications.csv`, `<run_id>.aggregate.csv` and
/// `<run_id>.manifest.json` under `dir`.
pub fn emit_results(dir: &Path, results: &RunResults, rows: &[AggregateRow], manifest: &Manifest) -> Result<EmittedPaths> {
    std::fs::create_dir_all(dir)?;
    let paths = EmittedPaths {
        replications: dir.join(format!("{}.replications.csv", results.run_id)),
        aggregate: dir.join(format!("{}.aggregate.csv", results.run_id)),
        manifest: dir.join(format!("{}.manifest.json", results.run_id)),
    };
    write_replications(std::io::BufWriter::new(std::fs::File::create(&paths.replications)?), results)?;
    write_aggregates(
        std::io::BufWriter::new(std::fs::File::create(&paths.aggregate)?),
        &results.run_id,
        &results.cells,
        rows,
    )?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(&paths.manifest)?);
    serde_json::to_writer_pretty(&mut f, manifest)?;
    writeln!(f)?;
    f.flush()?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::aggregate::aggregate;
    use crate::pipeline::config::RunConfig;
    use crate::pipeline::engine::run_synthetic;

    fn run(methods: Vec<Method>) -> RunResults {
        run_synthetic(&RunConfig {
            methods,
            replications: 2,
            ..RunConfig::default()
        })
        .unwrap()
    }

    fn replications_csv(r: &RunResults) -> String {
        let mut buf = Vec::new();
        write_replications(&mut buf, r).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_method_set_is_header_only() {
        let text = replications_csv(&run(vec![]));
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("run_id,cell_id,replication,method,reward,or,"));
    }

    #[test]
    fn iht_only_drops_vdp_column() {
        let text = replications_csv(&run(vec![Method::Iht]));
        assert!(!text.lines().next().unwrap().contains("vdp"));
        assert_eq!(text.lines().count(), 3);
        let text = replications_csv(&run(vec![Method::Iht, Method::Dptr]));
        assert!(text.lines().next().unwrap().contains(",vdp,"));
    }

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let a = run(vec![Method::Iht, Method::Dptr, Method::Bayes]);
        let b = run(vec![Method::Iht, Method::Dptr, Method::Bayes]);
        let agg = |r: &RunResults| {
            let mut buf = Vec::new();
            write_aggregates(&mut buf, &r.run_id, &r.cells, &aggregate(r.cells.len(), &r.methods, &r.records)).unwrap();
            buf
        };
        assert_eq!(agg(&a), agg(&b));
        assert_eq!(replications_csv(&a), replications_csv(&b));
    }

    #[test]
    fn reconciliation_balances() {
        assert!(Reconciliation::new(10, 6, 1, 3).balanced);
        assert!(!Reconciliation::new(10, 6, 1, 2).balanced);
    }
}
