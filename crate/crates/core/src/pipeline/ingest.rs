//! CSV ingestion and trial serialization.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{ExperimentSample, NonOverlappingTrial, OverlappingTrial, TrialData};
use crate::error::{Error, Result};

/// Column names in the input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub outcome: String,
    pub treatment: String,
    /// Covariate columns; all `x<i>` columns in index order when absent.
    pub covariates: Option<Vec<String>>,
    /// Optional explicit group (or experiment) key column.
    pub group: Option<String>,
    /// Treatment columns of an overlapping file; all `d<i>` columns when
    /// absent.
    pub treatments: Option<Vec<String>>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            outcome: "outcome".into(),
            treatment: "treatment".into(),
            covariates: None,
            group: None,
            treatments: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub y: f64,
    pub d: bool,
    pub x: Vec<f64>,
    pub group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based line number in the file (the header is line 1).
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ingested {
    pub rows: Vec<Row>,
    pub rejects: Vec<Reject>,
    pub covariate_names: Vec<String>,
}

/// Columns named `<prefix><index>`, sorted by index.
fn indexed_columns(headers: &csv::StringRecord, prefix: &str) -> Vec<String> {
    let mut found: Vec<(usize, String)> = headers
        .iter()
        .filter_map(|h| {
            h.strip_prefix(prefix)
                .and_then(|rest| rest.parse::<usize>().ok())
                .map(|i| (i, h.to_string()))
        })
        .collect();
    found.sort();
    found.into_iter().map(|(_, h)| h).collect()
}

fn position(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_real(field: &str, name: &str) -> std::result::Result<f64, String> {
    match field.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("column `{name}`: `{field}` is not a finite number")),
    }
}

fn parse_flag(field: &str, name: &str) -> std::result::Result<bool, String> {
    match parse_real(field, name)? {
        v if v == 0.0 => Ok(false),
        v if v == 1.0 => Ok(true),
        _ => Err(format!("column `{name}`: `{field}` is not 0 or 1")),
    }
}

fn open(path: &Path) -> Result<(csv::Reader<std::fs::File>, csv::StringRecord)> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyFile);
    }
    Ok((reader, headers))
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Reads a two-arm file. Malformed rows are collected as rejects.
pub fn ingest_csv(path: &Path, map: &ColumnMap) -> Result<Ingested> {
    let (mut reader, headers) = open(path)?;
    let y_col = position(&headers, &map.outcome)?;
    let d_col = position(&headers, &map.treatment)?;
    let covariate_names = map
        .covariates
        .clone()
        .unwrap_or_else(|| indexed_columns(&headers, "x"));
    let x_cols = covariate_names
        .iter()
        .map(|c| position(&headers, c))
        .collect::<Result<Vec<_>>>()?;
    let g_col = map.group.as_deref().map(|g| position(&headers, g)).transpose()?;

    let mut rows = Vec::new();
    let mut rejects = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = line_of(&record);
        let field = |i: usize| record.get(i).ok_or_else(|| format!("row has {} fields", record.len()));
        let parsed = (|| {
            let y = parse_real(field(y_col)?, &map.outcome)?;
            let d = parse_flag(field(d_col)?, &map.treatment)?;
            let x = x_cols
                .iter()
                .zip(&covariate_names)
                .map(|(&c, name)| parse_real(field(c)?, name))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let group = g_col.map(|g| field(g).map(str::to_string)).transpose()?;
            Ok::<_, String>(Row { y, d, x, group })
        })();
        match parsed {
            Ok(row) => rows.push(row),
            Err(reason) => rejects.push(Reject { line, reason }),
        }
    }
    if rows.is_empty() && rejects.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok(Ingested {
        rows,
        rejects,
        covariate_names,
    })
}

/// Reads an overlapping file (`outcome`, `d0..`, `x0..`).
pub fn ingest_overlapping_csv(path: &Path, map: &ColumnMap) -> Result<(OverlappingTrial, Vec<Reject>)> {
    let (mut reader, headers) = open(path)?;
    let y_col = position(&headers, &map.outcome)?;
    let d_names = map.treatments.clone().unwrap_or_else(|| indexed_columns(&headers, "d"));
    if d_names.is_empty() {
        return Err(Error::MissingColumn("d0".into()));
    }
    let x_names = map.covariates.clone().unwrap_or_else(|| indexed_columns(&headers, "x"));
    let d_cols = d_names.iter().map(|c| position(&headers, c)).collect::<Result<Vec<_>>>()?;
    let x_cols = x_names.iter().map(|c| position(&headers, c)).collect::<Result<Vec<_>>>()?;

    let (mut y, mut d, mut x, mut rejects) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record?;
        let line = line_of(&record);
        let field = |i: usize| record.get(i).ok_or_else(|| format!("row has {} fields", record.len()));
        let parsed = (|| {
            let yi = parse_real(field(y_col)?, &map.outcome)?;
            let di = d_cols
                .iter()
                .zip(&d_names)
                .map(|(&c, n)| parse_flag(field(c)?, n))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let xi = x_cols
                .iter()
                .zip(&x_names)
                .map(|(&c, n)| parse_real(field(c)?, n))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok::<_, String>((yi, di, xi))
        })();
        match parsed {
            Ok((yi, di, xi)) => {
                y.push(yi);
                d.extend(di);
                x.extend(xi);
            }
            Err(reason) => rejects.push(Reject { line, reason }),
        }
    }
    if y.is_empty() && rejects.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok((OverlappingTrial::new(d_names.len(), x_names.len(), y, d, x)?, rejects))
}

/// Writes a trial in the ingest schema. Non-overlapping trials carry an
/// `experiment` column usable as the group key. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_trial_csv(trial: &TrialData, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    match trial {
        TrialData::NonOverlapping(t) => {
            let dx = t.experiments.first().map_or(0, |e| e.dx);
            let mut header = vec!["experiment".to_string(), "outcome".into(), "treatment".into()];
            header.extend((0..dx).map(|j| format!("x{j}")));
            writeln!(w, "{}", header.join(","))?;
            for (k, e) in t.experiments.iter().enumerate() {
                for i in 0..e.len() {
                    write!(w, "{k},{},{}", e.outcomes[i], u8::from(e.treated[i]))?;
                    for v in e.covariate_row(i) {
                        write!(w, ",{v}")?;
                    }
                    writeln!(w)?;
                }
            }
        }
        TrialData::Overlapping(t) => {
            let mut header = vec!["outcome".to_string()];
            header.extend((0..t.k).map(|j| format!("d{j}")));
            header.extend((0..t.dx).map(|j| format!("x{j}")));
            writeln!(w, "{}", header.join(","))?;
            for i in 0..t.len() {
                write!(w, "{}", t.outcomes[i])?;
                for &d in t.treatment_row(i) {
                    write!(w, ",{}", u8::from(d))?;
                }
                for v in t.covariate_row(i) {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Rebuilds a non-overlapping trial from rows keyed by experiment index.
pub fn rows_to_experiments(rows: &[Row]) -> Result<NonOverlappingTrial> {
    let mut by_key: std::collections::BTreeMap<usize, Vec<&Row>> = Default::default();
    for r in rows {
        let key = r
            .group
            .as_deref()
            .and_then(|g| g.parse::<usize>().ok())
            .ok_or(Error::MissingColumn("experiment".into()))?;
        by_key.entry(key).or_default().push(r);
    }
    let experiments = by_key
        .into_values()
        .map(|rs| {
            let dx = rs[0].x.len();
            ExperimentSample::with_covariates(
                rs.iter().map(|r| r.y).collect(),
                rs.iter().map(|r| r.d).collect(),
                rs.iter().flat_map(|r| r.x.iter().copied()).collect(),
                dx,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NonOverlappingTrial { experiments })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn well_formed_file() {
        let f = write("outcome,treatment,x0,x1\n1.5,1,0.1,0.2\n0.5,0,0.3,0.4\n2,1,0.5,0.6\n");
        let got = ingest_csv(f.path(), &ColumnMap::default()).unwrap();
        assert_eq!((got.rows.len(), got.rejects.len()), (3, 0));
        assert_eq!(got.rows[1].x, vec![0.3, 0.4]);
        assert!(!got.rows[1].d);
    }

    #[test]
    fn bad_row_is_isolated_with_line_number() {
        let f = write("outcome,treatment,x0\n1,1,0.1\n2,0,abc\n3,1,0.2\n");
        let got = ingest_csv(f.path(), &ColumnMap::default()).unwrap();
        assert_eq!(got.rows.len(), 2);
        assert_eq!(got.rejects.len(), 1);
        assert_eq!(got.rejects[0].line, 3);
        assert!(got.rejects[0].reason.contains("x0"));
    }

    #[test]
    fn remapped_columns_and_errors() {
        let f = write("visit,exposed,f0\n1,1,2\n");
        let map = ColumnMap {
            outcome: "visit".into(),
            treatment: "exposed".into(),
            covariates: Some(vec!["f0".into()]),
            ..ColumnMap::default()
        };
        assert_eq!(ingest_csv(f.path(), &map).unwrap().rows[0].x, vec![2.0]);
        assert!(matches!(
            ingest_csv(f.path(), &ColumnMap::default()),
            Err(Error::MissingColumn(c)) if c == "outcome"
        ));
        let empty = write("");
        assert!(matches!(ingest_csv(empty.path(), &ColumnMap::default()), Err(Error::EmptyFile)));
        let bad_flag = write("outcome,treatment\n1,2\n");
        assert_eq!(ingest_csv(bad_flag.path(), &ColumnMap::default()).unwrap().rejects.len(), 1);
    }
}
