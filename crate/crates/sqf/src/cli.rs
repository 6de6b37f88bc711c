//! The `sqf` command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use sqf_core::simulator::{PolicyKind, Scenario};
use sqf_core::workload::{generate, WorkloadConfig};

use crate::config::{self, Overrides};
use crate::{cache_dump, report, runner, workload_file, Error};

#[derive(Debug, Parser)]
#[command(
    name = "sqf",
    version,
    about = "Sub-query fragmentation cache simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic workload file.
    Generate {
        /// Workload config (TOML); built-in defaults when omitted.
        config: Option<PathBuf>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Epochs of `queries_per_window` events each [default: 14].
        #[arg(long)]
        epochs: Option<usize>,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario and write series.csv, raw.csv and final cache dumps.
    Run {
        /// Scenario file (TOML).
        scenario: PathBuf,
        /// Base seed of the repeats.
        #[arg(long)]
        seed: Option<u64>,
        /// Epochs per repeat.
        #[arg(long)]
        epochs: Option<usize>,
        /// Independent repeats per policy.
        #[arg(long)]
        repeats: Option<usize>,
        /// Comma-separated: sqf, semantic, full_query.
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<String>>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge the series of several runs into one table.
    Compare {
        /// Run directories or series CSV files.
        inputs: Vec<PathBuf>,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a cache dump as a listing of cached-query tuples.
    InspectCache {
        /// Cache dump (TSV), as written under `<run>/cache/`.
        dump: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, bytes: &[u8], stdout: &mut dyn Write) -> Result<(), Error> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(Error::io(dir))?;
            }
            fs::write(path, bytes).map_err(Error::io(path))
        }
        None => stdout.write_all(bytes).map_err(Error::io("<stdout>")),
    }
}

fn policies(list: Option<Vec<String>>) -> Result<Option<Vec<PolicyKind>>, Error> {
    list.map(|l| config::parse_policies(&l).map_err(Error::Usage))
        .transpose()
}

pub fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<(), Error> {
    match cli.command {
        Command::Generate {
            config,
            seed,
            epochs,
            out,
        } => {
            let mut cfg = match &config {
                Some(p) => config::load_workload_config(p)?,
                None => WorkloadConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let epochs = epochs.unwrap_or(Scenario::default().epochs);
            let events = generate(&cfg, epochs)?;
            emit(
                out.as_deref(),
                workload_file::write(&cfg, &events).as_bytes(),
                stdout,
            )
        }
        Command::Run {
            scenario,
            seed,
            epochs,
            repeats,
            policies: list,
            out,
        } => {
            let overrides = Overrides {
                seed,
                epochs,
                repeats,
                policies: policies(list)?,
            };
            let exp = config::load_scenario(&scenario, &overrides)?;
            let outcome = runner::execute(&exp)?;
            write_run(&out, &outcome)?;
            let _ = writeln!(stdout, "{}", out.join("series.csv").display());
            Ok(())
        }
        Command::Compare { inputs, out } => {
            if inputs.is_empty() {
                return Err(Error::Usage("compare needs at least one run".into()));
            }
            let mut runs = Vec::new();
            for input in &inputs {
                let path = if input.is_dir() {
                    input.join("series.csv")
                } else {
                    input.clone()
                };
                let file = fs::File::open(&path).map_err(Error::io(&path))?;
                let rows = report::read_series(file).map_err(Error::format(&path))?;
                runs.push((input.display().to_string(), rows));
            }
            let rows = report::compare(&runs)
                .ok_or_else(|| Error::Usage("nothing to compare: all inputs are empty".into()))?;
            let mut buf = Vec::new();
            report::write_compare(&mut buf, &rows)?;
            emit(out.as_deref(), &buf, stdout)
        }
        Command::InspectCache { dump, out } => {
            let records = cache_dump::load(&dump)?;
            emit(
                out.as_deref(),
                cache_dump::render(&records).as_bytes(),
                stdout,
            )
        }
    }
}

/// Writes `series.csv`, `raw.csv` and `cache/<policy>-r<repeat>.tsv`.
pub fn write_run(dir: &Path, outcome: &runner::Outcome) -> Result<(), Error> {
    let cache_dir = dir.join("cache");
    fs::create_dir_all(&cache_dir).map_err(Error::io(&cache_dir))?;
    let mut series = Vec::new();
    report::write_series(&mut series, &outcome.series)?;
    let path = dir.join("series.csv");
    fs::write(&path, series).map_err(Error::io(&path))?;
    let mut raw = Vec::new();
    report::write_raw(&mut raw, &outcome.runs)?;
    let path = dir.join("raw.csv");
    fs::write(&path, raw).map_err(Error::io(&path))?;
    for s in &outcome.states {
        let path = cache_dir.join(format!("{}-r{}.tsv", s.policy.as_str(), s.repeat));
        let text = cache_dump::write(&cache_dump::records(&s.network));
        fs::write(&path, text).map_err(Error::io(&path))?;
    }
    Ok(())
}
