//! Seeded containment instances and a brute-force search oracle.

use super::{pool, pooled_shape, Shape};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use sqf_core::cache::CachedQuery;
use sqf_core::matching::{answerable, search_cache, SearchOutcome, SearchStatus};
use sqf_core::placement::{CacheNetwork, Topology};
use sqf_core::{QetNode, QueryEvaluationTree};

/// A cache of up to ten trees and a probe, all built from one leaf pool.
pub fn instance() -> impl Strategy<Value = (Vec<Shape>, Shape, Vec<usize>)> {
    pool(10).prop_flat_map(|p| {
        let n = 0..=10usize;
        (
            prop::collection::vec(pooled_shape(p.clone(), 3), n.clone()),
            pooled_shape(p, 3),
            prop::collection::vec(0usize..3, 10),
        )
    })
}

/// Three units in a line, `u` sits at the first one.
pub fn line_network(cached: &[Shape], placement: &[usize]) -> CacheNetwork {
    let topo = Topology::from_unit_edges(
        &["c1", "c2", "c3"],
        &[(0, 1), (1, 2)],
        &[("u", 0)],
        &[("DB1", 2)],
    )
    .unwrap();
    let mut net = CacheNetwork::new(topo, 1e6);
    for (i, s) in cached.iter().enumerate() {
        let unit = ["c1", "c2", "c3"][placement[i]];
        let entry = CachedQuery::new(s.tree(&format!("T{i:02}"), &format!("t{i}_")), unit);
        net.unit_mut(unit).unwrap().admit(entry, 0.0).unwrap();
    }
    net
}

fn bfs(root: &QetNode) -> Vec<&QetNode> {
    let mut out = vec![root];
    let mut i = 0;
    while i < out.len() {
        out.extend(out[i].children());
        i += 1;
    }
    out
}

/// Every probe leaf against every node of every cached tree, entries taken
/// nearest unit first and then by id.
fn oracle(probe: &QueryEvaluationTree, net: &CacheNetwork) -> (Vec<(String, String)>, Vec<String>) {
    let mut entries: Vec<(u32, &CachedQuery)> = net
        .entries()
        .map(|e| (net.topology.hops("u", e.location()).unwrap(), e))
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.id().cmp(b.1.id())));
    let mut contained = Vec::new();
    let mut remainder = Vec::new();
    for leaf in probe.leaves() {
        let hit = entries.iter().find(|(_, e)| {
            bfs(e.expr().root())
                .iter()
                .any(|n| answerable(leaf.semantics(), n.semantics()).unwrap())
        });
        match hit {
            Some((_, e)) => contained.push((leaf.id().to_string(), e.id().to_string())),
            None => remainder.push(leaf.id().to_string()),
        }
    }
    (contained, remainder)
}

pub fn agrees(out: &SearchOutcome, probe: &QueryEvaluationTree, net: &CacheNetwork) -> bool {
    let (want_c, want_r) = oracle(probe, net);
    let mut got_c: Vec<(String, String)> = out
        .contained
        .iter()
        .map(|c| (c.sub_query.clone(), c.cached_query.clone()))
        .collect();
    got_c.sort();
    let mut want_sorted = want_c.clone();
    want_sorted.sort();
    let status = match (want_c.is_empty(), want_r.is_empty()) {
        (_, true) => SearchStatus::FullyFound,
        (true, false) => SearchStatus::NotFound,
        _ => SearchStatus::PartiallyFound,
    };
    got_c == want_sorted && out.remainder == want_r && out.status == status
}

/// Draws `n` seeded instances and counts how many agree with the oracle,
/// along with how many were fully and partially found.
pub fn oracle_agreement(n: u32, seed: u8) -> (u32, u32, u32) {
    let mut runner = TestRunner::new_with_rng(
        Config::default(),
        TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]),
    );
    let strategy = instance();
    let (mut agreed, mut fully, mut partial) = (0, 0, 0);
    for _ in 0..n {
        let (cached, probe, placement) = strategy.new_tree(&mut runner).unwrap().current();
        let net = line_network(&cached, &placement);
        let probe = probe.tree("S", "p");
        let out = search_cache(&probe, &net, Some("u"));
        agreed += u32::from(agrees(&out, &probe, &net));
        match out.status {
            SearchStatus::FullyFound => fully += 1,
            SearchStatus::PartiallyFound => partial += 1,
            SearchStatus::NotFound => {}
        }
    }
    (agreed, fully, partial)
}
