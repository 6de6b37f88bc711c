//! Workload files: a versioned header echoing the generator configuration,
//! then one record per query event.
//!
//! ```text
//! sqf-workload 1
//! seed 42
//! config {"window_duration":…}
//! events 2
//! event 0.73 uloc-1
//! query Q0
//! sub s3 ; R … ; A … ; P … ; V 1.5
//! expr ((s3) ∥ (s7))
//! end
//! event 1.9 uloc-2
//! …
//! ```
//!
//! Timestamps are written in shortest round-trip form, so reading a file
//! back yields exactly the generated events. Event records are numbered
//! from 1 in error messages.

use std::fmt::Write as _;
use std::path::Path;

use sqf_core::plan::{parse_block, significant_lines, write_block};
use sqf_core::workload::{QueryEvent, WorkloadConfig};

use crate::{Error, RecordError};

pub const HEADER: &str = "sqf-workload";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadFile {
    pub config: WorkloadConfig,
    pub events: Vec<QueryEvent>,
}

pub fn write(config: &WorkloadConfig, events: &[QueryEvent]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER} {VERSION}");
    let _ = writeln!(out, "seed {}", config.seed);
    let json = serde_json::to_string(config).expect("config serializes");
    let _ = writeln!(out, "config {json}");
    let _ = writeln!(out, "events {}", events.len());
    for e in events {
        let _ = writeln!(out, "event {} {}", e.ts, e.user_loc);
        write_block(&e.tree, &mut out);
    }
    out
}

pub fn parse(text: &str) -> Result<WorkloadFile, RecordError> {
    let header_err = |m: String| RecordError::new(0, m);
    let mut lines = significant_lines(text);
    let mut field = |key: &str| -> Result<String, RecordError> {
        let (n, line) = lines
            .next()
            .ok_or_else(|| header_err(format!("missing `{key}` line")))?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.trim().to_string()),
            _ => Err(header_err(format!("line {n}: expected `{key} …`"))),
        }
    };
    let version = field(HEADER)?;
    if version != VERSION.to_string() {
        return Err(header_err(format!("unsupported version {version}")));
    }
    let seed: u64 = field("seed")?
        .parse()
        .map_err(|e| header_err(format!("seed: {e}")))?;
    let config: WorkloadConfig =
        serde_json::from_str(&field("config")?).map_err(|e| header_err(format!("config: {e}")))?;
    if config.seed != seed {
        return Err(header_err(format!(
            "seed {seed} disagrees with the config echo ({})",
            config.seed
        )));
    }
    let count: usize = field("events")?
        .parse()
        .map_err(|e| header_err(format!("events: {e}")))?;

    let mut events = Vec::with_capacity(count);
    for index in 1..=count {
        let err = |m: String| RecordError::new(index, m);
        let (n, line) = lines
            .next()
            .ok_or_else(|| err(format!("missing; header announces {count} events")))?;
        let mut parts = line.split_whitespace();
        let (Some("event"), Some(ts), Some(user), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(err(format!(
                "line {n}: expected `event <timestamp> <user>`"
            )));
        };
        let ts: f64 = ts
            .parse()
            .ok()
            .filter(|t: &f64| t.is_finite())
            .ok_or_else(|| err(format!("line {n}: bad timestamp `{ts}`")))?;
        let tree = parse_block(&mut lines)
            .map_err(|e| err(e.to_string()))?
            .ok_or_else(|| err(format!("line {n}: missing plan block")))?;
        events.push(QueryEvent {
            tree,
            user_loc: user.to_string(),
            ts,
        });
    }
    if let Some((n, _)) = lines.next() {
        return Err(RecordError::new(
            count + 1,
            format!("line {n}: unexpected content after {count} events"),
        ));
    }
    Ok(WorkloadFile { config, events })
}

pub fn load(path: &Path) -> Result<WorkloadFile, Error> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    parse(&text).map_err(Error::format(path))
}
