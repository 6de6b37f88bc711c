//! Runs experiments with repeats in parallel. Each repeat is independent
//! and results are merged in repeat order, so output does not depend on
//! scheduling.

use rayon::prelude::*;
use sqf_core::placement::CacheNetwork;
use sqf_core::simulator::{run_policy, summarize, PolicyKind, PolicyRun, SeriesPoint, SimError};
use sqf_core::workload::{generate, WorkloadConfig};

use crate::config::Experiment;

/// Final cache state of one policy in one repeat.
#[derive(Debug, Clone)]
pub struct FinalState {
    pub policy: PolicyKind,
    pub repeat: usize,
    pub network: CacheNetwork,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub runs: Vec<PolicyRun>,
    pub series: Vec<SeriesPoint>,
    pub states: Vec<FinalState>,
}

fn run_repeat(exp: &Experiment, repeat: usize) -> Result<Vec<(PolicyRun, FinalState)>, SimError> {
    let s = &exp.scenario;
    let seed = s.repeat_seed(repeat);
    let generated;
    let events = match &exp.events {
        Some(ev) => ev.as_slice(),
        None => {
            let cfg = WorkloadConfig {
                seed,
                ..s.workload.clone()
            };
            generated = generate(&cfg, s.epochs)?;
            generated.as_slice()
        }
    };
    s.policies
        .iter()
        .map(|&policy| {
            let (run, network) = run_policy(s, policy, events, repeat, seed)?;
            Ok((
                run,
                FinalState {
                    policy,
                    repeat,
                    network,
                },
            ))
        })
        .collect()
}

pub fn execute(exp: &Experiment) -> Result<Outcome, SimError> {
    exp.scenario.validate()?;
    let per_repeat: Vec<_> = (0..exp.scenario.repeats)
        .into_par_iter()
        .map(|r| run_repeat(exp, r))
        .collect::<Result<_, _>>()?;
    let (runs, states): (Vec<_>, Vec<_>) = per_repeat.into_iter().flatten().unzip();
    let series = summarize(&runs);
    Ok(Outcome {
        runs,
        series,
        states,
    })
}
