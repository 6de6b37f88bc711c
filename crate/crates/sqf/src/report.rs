//! CSV output.
//!
//! Aggregated series (`series.csv`), one row per policy, metric and epoch:
//!
//! `policy,metric,epoch,mean,stderr,repeats`
//!
//! Raw per-repeat values (`raw.csv`), one row per policy, repeat and epoch:
//!
//! `policy,repeat,seed,epoch,queries,avg_response,pct_found,intercache_cost,relocations,transfers,duplication_gb,cache_faults`
//!
//! Cross-run comparison, sorted by metric, epoch, policy, then run:
//!
//! `metric,epoch,policy,run,mean,stderr,repeats`
//!
//! Floats are written with six decimals so that reruns diff cleanly.

use std::io::{Read, Write};

use sqf_core::simulator::{PolicyRun, SeriesPoint};

use crate::RecordError;

pub const PRECISION: usize = 6;
pub const SERIES_COLUMNS: [&str; 6] = ["policy", "metric", "epoch", "mean", "stderr", "repeats"];
pub const RAW_COLUMNS: [&str; 12] = [
    "policy",
    "repeat",
    "seed",
    "epoch",
    "queries",
    "avg_response",
    "pct_found",
    "intercache_cost",
    "relocations",
    "transfers",
    "duplication_gb",
    "cache_faults",
];
pub const COMPARE_COLUMNS: [&str; 7] = [
    "metric", "epoch", "policy", "run", "mean", "stderr", "repeats",
];

fn fixed(x: f64) -> String {
    // avoid "-0.000000" for values that round to zero
    let s = format!("{x:.PRECISION$}");
    if s.trim_start_matches('-')
        .bytes()
        .all(|b| b == b'0' || b == b'.')
    {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

/// One row of an aggregated series.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub policy: String,
    pub metric: String,
    pub epoch: usize,
    pub mean: f64,
    pub stderr: f64,
    pub repeats: usize,
}

impl From<&SeriesPoint> for ReportRow {
    fn from(p: &SeriesPoint) -> Self {
        Self {
            policy: p.policy.as_str().into(),
            metric: p.metric.as_str().into(),
            epoch: p.epoch,
            mean: p.mean,
            stderr: p.stderr,
            repeats: p.repeats,
        }
    }
}

pub fn write_series<W: Write>(out: W, series: &[SeriesPoint]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SERIES_COLUMNS)?;
    for p in series {
        w.write_record([
            p.policy.as_str().to_string(),
            p.metric.as_str().to_string(),
            p.epoch.to_string(),
            fixed(p.mean),
            fixed(p.stderr),
            p.repeats.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_raw<W: Write>(out: W, runs: &[PolicyRun]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RAW_COLUMNS)?;
    for r in runs {
        for e in &r.epochs {
            w.write_record([
                r.policy.as_str().to_string(),
                r.repeat.to_string(),
                r.seed.to_string(),
                e.epoch.to_string(),
                e.queries.to_string(),
                fixed(e.avg_response_ticks),
                fixed(e.pct_data_found),
                fixed(e.inter_cache_cost),
                e.relocations.to_string(),
                e.transfers.to_string(),
                fixed(e.duplication_gb),
                e.cache_faults.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_series<R: Read>(input: R) -> Result<Vec<ReportRow>, RecordError> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| RecordError::new(0, e.to_string()))?;
    if header.iter().ne(SERIES_COLUMNS) {
        return Err(RecordError::new(
            0,
            format!("expected columns {}", SERIES_COLUMNS.join(",")),
        ));
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let err = |m: String| RecordError::new(i + 1, m);
        let row = row.map_err(|e| err(e.to_string()))?;
        let num = |k: usize| -> Result<f64, RecordError> {
            row[k]
                .parse()
                .map_err(|_| err(format!("{}: bad number `{}`", SERIES_COLUMNS[k], &row[k])))
        };
        let int = |k: usize| -> Result<usize, RecordError> {
            row[k]
                .parse()
                .map_err(|_| err(format!("{}: bad integer `{}`", SERIES_COLUMNS[k], &row[k])))
        };
        out.push(ReportRow {
            policy: row[0].to_string(),
            metric: row[1].to_string(),
            epoch: int(2)?,
            mean: num(3)?,
            stderr: num(4)?,
            repeats: int(5)?,
        });
    }
    Ok(out)
}

/// A series row tagged with the run it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub run: String,
    pub row: ReportRow,
}

/// Merges labelled runs into one table sorted by metric, epoch, policy and
/// run order. `None` when there is nothing to compare.
pub fn compare(runs: &[(String, Vec<ReportRow>)]) -> Option<Vec<CompareRow>> {
    let mut rows: Vec<(usize, CompareRow)> = runs
        .iter()
        .enumerate()
        .flat_map(|(i, (label, rows))| {
            rows.iter().map(move |r| {
                (
                    i,
                    CompareRow {
                        run: label.clone(),
                        row: r.clone(),
                    },
                )
            })
        })
        .collect();
    if rows.is_empty() {
        return None;
    }
    rows.sort_by(|(i, a), (j, b)| {
        (&a.row.metric, a.row.epoch, &a.row.policy, i).cmp(&(
            &b.row.metric,
            b.row.epoch,
            &b.row.policy,
            j,
        ))
    });
    Some(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn write_compare<W: Write>(out: W, rows: &[CompareRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COMPARE_COLUMNS)?;
    for CompareRow { run, row } in rows {
        w.write_record([
            row.metric.clone(),
            row.epoch.to_string(),
            row.policy.clone(),
            run.clone(),
            fixed(row.mean),
            fixed(row.stderr),
            row.repeats.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
