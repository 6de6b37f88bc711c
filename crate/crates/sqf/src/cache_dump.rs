//! Tab-separated dump of cached objects, one record per object, and the
//! human-readable listing shown by `inspect-cache`.
//!
//! Columns: `id`, `expr` (infix plan), `location`, `volume_gb`,
//! `complexity`, `last_used`, `freq`, `co_queried`. The three map columns
//! hold `key=value` pairs joined by `;`, keys in ascending order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sqf_core::cache::CachedQuery;
use sqf_core::placement::CacheNetwork;

use crate::{Error, RecordError};

pub const COLUMNS: [&str; 8] = [
    "id",
    "expr",
    "location",
    "volume_gb",
    "complexity",
    "last_used",
    "freq",
    "co_queried",
];

/// The usage profile of one cached object.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheRecord {
    pub id: String,
    pub expr: String,
    pub location: String,
    pub volume_gb: f64,
    pub complexity: usize,
    pub last_used: BTreeMap<String, f64>,
    pub freq: BTreeMap<String, u64>,
    pub co_queried: BTreeMap<String, u64>,
}

impl From<&CachedQuery> for CacheRecord {
    fn from(c: &CachedQuery) -> Self {
        Self {
            id: c.id().to_string(),
            expr: c.expr().to_infix(),
            location: c.location().to_string(),
            volume_gb: c.volume_gb(),
            complexity: c.complexity(),
            last_used: c.last_used.clone(),
            freq: c.freq.clone(),
            co_queried: c.co_queried.clone(),
        }
    }
}

/// Every object of the network, unit by unit.
pub fn records(net: &CacheNetwork) -> Vec<CacheRecord> {
    net.units
        .iter()
        .flat_map(|u| u.entries().map(CacheRecord::from))
        .collect()
}

fn join_map<V: ToString>(m: &BTreeMap<String, V>) -> String {
    m.iter()
        .map(|(k, v)| format!("{k}={}", v.to_string()))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn write(records: &[CacheRecord]) -> String {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_writer(Vec::new());
    w.write_record(COLUMNS).expect("in-memory write");
    for r in records {
        w.write_record([
            r.id.clone(),
            r.expr.clone(),
            r.location.clone(),
            r.volume_gb.to_string(),
            r.complexity.to_string(),
            join_map(&r.last_used),
            join_map(&r.freq),
            join_map(&r.co_queried),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn parse_map<V: std::str::FromStr>(
    text: &str,
    column: &str,
) -> Result<BTreeMap<String, V>, String> {
    let mut out = BTreeMap::new();
    for pair in text.split(';').filter(|p| !p.is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| format!("{column}: `{pair}` is not key=value"))?;
        let v = v
            .parse()
            .map_err(|_| format!("{column}: bad value `{v}` for {k}"))?;
        if out.insert(k.to_string(), v).is_some() {
            return Err(format!("{column}: duplicate key {k}"));
        }
    }
    Ok(out)
}

pub fn parse(text: &str) -> Result<Vec<CacheRecord>, RecordError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| RecordError::new(0, e.to_string()))?;
    if header.iter().ne(COLUMNS) {
        return Err(RecordError::new(
            0,
            format!("expected columns {}", COLUMNS.join(",")),
        ));
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let index = i + 1;
        let err = |m: String| RecordError::new(index, m);
        let row = row.map_err(|e| err(e.to_string()))?;
        if row.len() != COLUMNS.len() {
            return Err(err(format!(
                "expected {} fields, found {}",
                COLUMNS.len(),
                row.len()
            )));
        }
        let volume_gb: f64 = row[3]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v >= 0.0)
            .ok_or_else(|| err(format!("volume_gb: bad value `{}`", &row[3])))?;
        let complexity: usize = row[4]
            .parse()
            .ok()
            .filter(|c| *c > 0)
            .ok_or_else(|| err(format!("complexity: bad value `{}`", &row[4])))?;
        out.push(CacheRecord {
            id: row[0].to_string(),
            expr: row[1].to_string(),
            location: row[2].to_string(),
            volume_gb,
            complexity,
            last_used: parse_map(&row[5], "last_used").map_err(err)?,
            freq: parse_map(&row[6], "freq").map_err(err)?,
            co_queried: parse_map(&row[7], "co_queried").map_err(err)?,
        });
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<Vec<CacheRecord>, Error> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    parse(&text).map_err(Error::format(path))
}

/// One block per object listing the cached-query tuple: expression,
/// location, volume, complexity, last use and frequency per user location,
/// and the objects it was queried together with. Empty for no records.
pub fn render(records: &[CacheRecord]) -> String {
    let per_loc = |m: Vec<(String, String)>| {
        m.into_iter()
            .map(|(k, v)| format!("{{({k}),{v}}}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let mut out = String::new();
    for (i, r) in records.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let t = r.last_used.iter().map(|(k, v)| (k.clone(), v.to_string()));
        let f = r.freq.iter().map(|(k, v)| (k.clone(), v.to_string()));
        let d: Vec<&str> = r.co_queried.keys().map(String::as_str).collect();
        let _ = writeln!(out, "◇S      {}  [{}]", r.expr, r.id);
        let _ = writeln!(out, "CLoc    ({})", r.location);
        let _ = writeln!(out, "V       {}", r.volume_gb);
        let _ = writeln!(out, "C       {}", r.complexity);
        let _ = writeln!(out, "T_uLoc  {}", per_loc(t.collect()));
        let _ = writeln!(out, "F_uLoc  {}", per_loc(f.collect()));
        let _ = writeln!(out, "D       {{{}}}", d.join(", "));
    }
    out
}
