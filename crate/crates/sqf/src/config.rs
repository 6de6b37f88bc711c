//! TOML configuration: workload, network and scenario files.
//!
//! Values are resolved with the precedence command-line flag > file >
//! built-in default. A scenario names its workload and network either as a
//! path (relative to the scenario file) or inline as a table:
//!
//! ```toml
//! network = "network.toml"
//! epochs = 14
//! repeats = 8
//! base_seed = 1
//! policies = ["sqf", "semantic", "full_query"]
//!
//! [workload]
//! queries_per_window = 715
//! overlap = { kind = "poisson", lambda = 1.0 }
//!
//! [cost]
//! server_process_per_gb = 2.0
//! ```
//!
//! Instead of `workload`, a scenario may set `events` to a workload file;
//! every repeat then replays those events.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use sqf_core::placement::NetworkSpec;
use sqf_core::simulator::{CostModel, PolicyKind, Scenario, SqfParams};
use sqf_core::workload::{QueryEvent, WorkloadConfig};

use crate::{workload_file, Error};

/// A table given inline or by path.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Path(PathBuf),
    Inline(T),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub workload: Option<Source<WorkloadConfig>>,
    pub events: Option<PathBuf>,
    pub network: Option<Source<NetworkSpec>>,
    pub cost: Option<CostModel>,
    pub sqf: Option<SqfParams>,
    pub decay: Option<f64>,
    pub policies: Option<Vec<String>>,
    pub epochs: Option<usize>,
    pub repeats: Option<usize>,
    pub base_seed: Option<u64>,
    pub seed_stride: Option<u64>,
}

/// Command-line overrides; `None` defers to the file, then the default.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub repeats: Option<usize>,
    pub policies: Option<Vec<PolicyKind>>,
}

/// A resolved scenario, with the replayed events when it names a workload
/// file.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub scenario: Scenario,
    pub events: Option<Vec<QueryEvent>>,
}

pub fn parse_policies(list: &[impl AsRef<str>]) -> Result<Vec<PolicyKind>, String> {
    let out: Vec<PolicyKind> = list
        .iter()
        .map(|p| {
            let p = p.as_ref().trim();
            PolicyKind::parse(p).ok_or_else(|| format!("unknown policy `{p}`"))
        })
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err("no policies selected".into());
    }
    Ok(out)
}

fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    toml::from_str(&text).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn resolve<T: DeserializeOwned>(source: Source<T>, base: &Path) -> Result<T, Error> {
    match source {
        Source::Inline(t) => Ok(t),
        Source::Path(p) => read_toml(&base.join(p)),
    }
}

pub fn load_workload_config(path: &Path) -> Result<WorkloadConfig, Error> {
    let cfg: WorkloadConfig = read_toml(path)?;
    cfg.validate().map_err(|e| Error::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(cfg)
}

pub fn load_network(path: &Path) -> Result<NetworkSpec, Error> {
    read_toml(path)
}

pub fn load_scenario(path: &Path, overrides: &Overrides) -> Result<Experiment, Error> {
    let file: ScenarioFile = read_toml(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let config_err = |message: String| Error::Config {
        path: path.to_path_buf(),
        message,
    };
    let d = Scenario::default();

    let (workload, events) = match (file.workload, file.events) {
        (Some(_), Some(_)) => {
            return Err(config_err("`workload` and `events` are exclusive".into()));
        }
        (_, Some(events)) => {
            let wf = workload_file::load(&base.join(events))?;
            (wf.config, Some(wf.events))
        }
        (Some(w), None) => (resolve(w, base)?, None),
        (None, None) => (d.workload.clone(), None),
    };
    let policies = match (&overrides.policies, file.policies) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => parse_policies(&p).map_err(config_err)?,
        (None, None) => d.policies.clone(),
    };
    let per = workload.queries_per_window.max(1);
    let epochs = overrides.epochs.or(file.epochs).unwrap_or(match &events {
        Some(ev) => ev.len().div_ceil(per),
        None => d.epochs,
    });
    let scenario = Scenario {
        workload,
        network: file
            .network
            .map(|n| resolve(n, base))
            .transpose()?
            .unwrap_or(d.network),
        cost: file.cost.unwrap_or(d.cost),
        sqf: file.sqf.unwrap_or(d.sqf),
        decay: file.decay.unwrap_or(d.decay),
        policies,
        epochs,
        repeats: overrides.repeats.or(file.repeats).unwrap_or(d.repeats),
        base_seed: overrides.seed.or(file.base_seed).unwrap_or(d.base_seed),
        seed_stride: file.seed_stride.unwrap_or(d.seed_stride),
    };
    scenario.validate().map_err(|e| config_err(e.to_string()))?;
    let events = events.map(|mut ev| {
        ev.truncate(epochs * per);
        ev
    });
    Ok(Experiment { scenario, events })
}
