use proptest::prelude::*;
use sqf_core::placement::NetworkSpec;
use sqf_core::simulator::{
    mean_stderr, run_experiment, run_policies, run_policy, summarize, Metric, PolicyKind,
    PolicyRun, Scenario,
};
use sqf_core::workload::{Dist, QueryEvent, WorkloadConfig};
use sqf_core::{parse_plan, QueryEvaluationTree};

const X: &str = "sub {id} ; R emp@DB1 ; A emp.name ; P emp.age < 30 ; V 2";
const Y: &str = "sub {id} ; R dept@DB2 ; A dept.name ; V 3";
const Z: &str = "sub {id} ; R proj@DB3 ; A proj.cost ; V 4";

/// `PAR` of the given leaf templates, ids `{query}_{n}`.
fn query(id: &str, leaves: &[&str]) -> QueryEvaluationTree {
    let mut doc = format!("sqf-plan 1\nquery {id}\n");
    let ids: Vec<String> = (0..leaves.len()).map(|i| format!("{id}_{i}")).collect();
    for (l, leaf_id) in leaves.iter().zip(&ids) {
        doc += &l.replace("{id}", leaf_id);
        doc.push('\n');
    }
    let expr = ids
        .iter()
        .map(|i| format!("({i})"))
        .collect::<Vec<_>>()
        .join(" ∥ ");
    doc += &format!("expr ({expr})\nend\n");
    parse_plan(&doc).unwrap()
}

fn event(tree: QueryEvaluationTree, user: &str, ts: f64) -> QueryEvent {
    QueryEvent {
        tree,
        user_loc: user.into(),
        ts,
    }
}

fn scenario(units: usize, users: &[&str], per_epoch: usize) -> Scenario {
    Scenario {
        workload: WorkloadConfig {
            user_locations: users.iter().map(|u| u.to_string()).collect(),
            queries_per_window: per_epoch,
            ..WorkloadConfig::default()
        },
        network: NetworkSpec::Complete {
            units,
            capacity_gb: 100.0,
        },
        repeats: 1,
        ..Scenario::default()
    }
}

fn run_of(runs: &[PolicyRun], p: PolicyKind) -> &PolicyRun {
    runs.iter().find(|r| r.policy == p).unwrap()
}

/// x∥y, then x∥y again, then x∥z, all from the unit's own user. Default
/// costs: lookup 1, retrieval 1/GB, server 2/GB + network 1/GB per miss,
/// processing 1.
#[test]
fn scripted_three_queries() {
    let events = vec![
        event(query("Q1", &[X, Y]), "u", 0.0),
        event(query("Q2", &[X, Y]), "u", 1.0),
        event(query("Q3", &[X, Z]), "u", 2.0),
    ];
    let runs = run_policies(&scenario(1, &["u"], 3), &events, 0, 0).unwrap();

    // SQF and SC: 17 (5 GB missed), 7 (5 GB found), 16 (2 found, 4 missed)
    for p in [PolicyKind::Sqf, PolicyKind::SemanticCache] {
        let e = &run_of(&runs, p).epochs[0];
        assert!((e.avg_response_ticks - 40.0 / 3.0).abs() < 1e-12, "{p:?}");
        assert!((e.pct_data_found - 100.0 * 7.0 / 16.0).abs() < 1e-12);
        assert_eq!(
            (e.cache_faults, e.transfers, e.inter_cache_cost),
            (3, 0, 0.0)
        );
    }
    // FQ: 17, 7, then all 6 GB of x∥z missed: 20
    let e = &run_of(&runs, PolicyKind::FullQuery).epochs[0];
    assert!((e.avg_response_ticks - 44.0 / 3.0).abs() < 1e-12);
    assert!((e.pct_data_found - 100.0 * 5.0 / 16.0).abs() < 1e-12);
    assert_eq!(e.cache_faults, 4);
}

/// A hit served by the neighbouring unit pays one hop and is an
/// inter-cache transfer of the served volume.
#[test]
fn remote_hits_pay_hops_and_transfer() {
    let events = vec![
        event(query("Q1", &[X, Y]), "u1", 0.0),
        event(query("Q2", &[X, Y]), "u2", 1.0),
    ];
    let runs = run_policies(&scenario(2, &["u1", "u2"], 2), &events, 0, 0).unwrap();
    for p in PolicyKind::ALL {
        let e = &run_of(&runs, p).epochs[0];
        assert_eq!(e.avg_response_ticks, (17.0 + 8.0) / 2.0, "{p:?}");
        assert_eq!(e.transfers, 1);
        assert_eq!(e.inter_cache_cost, 5.0);
    }
}

/// a∥b and a∥c alternate. A hit on one side of a cached pair reads only
/// that side, so SQF splits the pair and then rebuilds both pairs around a
/// shared copy of a; the semantic cache never duplicates.
#[test]
fn partial_hits_split_and_rebuild_overlapping_pairs() {
    const A: &str = "sub {id} ; R ra@DB1 ; A ra.x ; V 2";
    const B: &str = "sub {id} ; R rb@DB2 ; A rb.x ; V 2";
    const C: &str = "sub {id} ; R rc@DB3 ; A rc.x ; V 2";
    let events: Vec<_> = (0..60)
        .map(|i| {
            let partner = if i % 2 == 0 { B } else { C };
            event(query(&format!("Q{i}"), &[A, partner]), "u", f64::from(i))
        })
        .collect();
    let s = scenario(1, &["u"], 20);
    let (run, net) = run_policy(&s, PolicyKind::Sqf, &events, 0, 0).unwrap();
    let dup: Vec<f64> = run.epochs.iter().map(|e| e.duplication_gb).collect();
    assert_eq!(dup, [0.0, 2.0, 2.0]);
    let pairs: Vec<Vec<&str>> = net.units[0]
        .entries()
        .map(|c| c.footprint().iter().map(|r| r.name.as_str()).collect())
        .filter(|f: &Vec<&str>| f.len() == 2)
        .collect();
    assert!(pairs.iter().all(|f| f.contains(&"ra")), "{pairs:?}");

    let (run, _) = run_policy(&s, PolicyKind::SemanticCache, &events, 0, 0).unwrap();
    assert!(run.epochs.iter().all(|e| e.duplication_gb == 0.0));
}

#[test]
fn cold_start_finds_nothing() {
    let events = vec![
        event(query("Q1", &[X]), "u", 0.0),
        event(query("Q2", &[Y]), "u", 1.0),
        event(query("Q3", &[Z]), "u", 2.0),
    ];
    let runs = run_policies(&scenario(1, &["u"], 3), &events, 0, 0).unwrap();
    for r in &runs {
        assert_eq!(r.epochs[0].pct_data_found, 0.0);
        assert_eq!(r.epochs[0].cache_faults, 3);
    }
}

#[test]
fn perfect_reuse_after_first_query() {
    let events: Vec<_> = (0..10)
        .map(|i| event(query(&format!("Q{i}"), &[X, Y, Z]), "u", f64::from(i)))
        .collect();
    let runs = run_policies(&scenario(1, &["u"], 5), &events, 0, 0).unwrap();
    for r in &runs {
        assert!((r.epochs[0].pct_data_found - 80.0).abs() < 1e-12);
        assert_eq!(r.epochs[1].pct_data_found, 100.0);
        assert_eq!(r.epochs[1].avg_response_ticks, 1.0 + 9.0 + 1.0);
    }
}

#[test]
fn unsorted_and_unknown_users_are_errors() {
    let s = scenario(1, &["u"], 5);
    let late = vec![
        event(query("Q1", &[X]), "u", 2.0),
        event(query("Q2", &[X]), "u", 1.0),
    ];
    assert!(run_policies(&s, &late, 0, 0).is_err());
    let stranger = vec![event(query("Q1", &[X]), "nobody", 0.0)];
    assert!(run_policies(&s, &stranger, 0, 0).is_err());
}

fn small_experiment(base_seed: u64, stride: u64) -> Scenario {
    Scenario {
        workload: WorkloadConfig {
            queries_per_window: 40,
            universe_size: 40,
            ..WorkloadConfig::default()
        },
        network: NetworkSpec::Random {
            units: 5,
            capacity_gb: 30.0,
            edge_probability: 0.3,
            seed: 3,
        },
        epochs: 4,
        repeats: 3,
        base_seed,
        seed_stride: stride,
        ..Scenario::default()
    }
}

#[test]
fn identical_seeds_have_zero_stderr() {
    let out = run_experiment(&small_experiment(5, 0)).unwrap();
    assert_eq!(out.runs.len(), 9);
    let worst = out.series.iter().map(|p| p.stderr).fold(0.0, f64::max);
    assert!(
        out.series.iter().all(|p| p.stderr == 0.0 && p.repeats == 3),
        "{worst}"
    );
}

#[test]
fn series_recompute_from_raw_runs() {
    let out = run_experiment(&small_experiment(5, 1)).unwrap();
    assert_eq!(out.series.len(), 3 * Metric::ALL.len() * 4);
    for p in &out.series {
        let values: Vec<f64> = out
            .runs
            .iter()
            .filter(|r| r.policy == p.policy)
            .map(|r| p.metric.of(&r.epochs[p.epoch - 1]))
            .collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((p.mean - mean).abs() < 1e-9);
        assert!((p.stderr - sd / n.sqrt()).abs() < 1e-9);
    }
    assert_eq!(summarize(&out.runs), out.series);
    // reruns are identical
    assert_eq!(run_experiment(&small_experiment(5, 1)).unwrap(), out);
}

#[test]
fn mean_stderr_edge_cases() {
    assert_eq!(mean_stderr(&[]), (0.0, 0.0));
    assert_eq!(mean_stderr(&[4.0]), (4.0, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    /// Every sub-query is either found or a cache fault, and the percentage
    /// stays a percentage.
    #[test]
    fn found_plus_missed_is_everything(seed in any::<u64>(), kind in 0usize..3, units in 1usize..4) {
        let overlap = [
            Dist::Poisson { lambda: 2.0 },
            Dist::Exponential { lambda: 0.5 },
            Dist::Uniform { a: 1.0, b: 12.0 },
        ][kind];
        let s = Scenario {
            workload: WorkloadConfig {
                seed,
                overlap,
                queries_per_window: 6,
                universe_size: 16,
                volume_range: [0.5, 3.0],
                ..WorkloadConfig::default()
            },
            network: NetworkSpec::Complete { units, capacity_gb: 8.0 },
            epochs: 2,
            repeats: 1,
            ..Scenario::default()
        };
        let events = sqf_core::workload::generate(&s.workload, 2).unwrap();
        let runs = run_policies(&s, &events, 0, seed).unwrap();
        for r in &runs {
            for (e, chunk) in r.epochs.iter().zip(events.chunks(6)) {
                let leaves: usize = chunk.iter().map(|q| q.tree.complexity()).sum();
                prop_assert!(e.cache_faults <= leaves);
                prop_assert!((0.0..=100.0).contains(&e.pct_data_found));
                prop_assert!(e.avg_response_ticks >= 2.0);
                prop_assert!(e.relocations <= e.transfers);
                if e.cache_faults == leaves {
                    prop_assert_eq!(e.pct_data_found, 0.0);
                }
                if e.cache_faults == 0 {
                    prop_assert_eq!(e.pct_data_found, 100.0);
                }
            }
        }
    }
}
