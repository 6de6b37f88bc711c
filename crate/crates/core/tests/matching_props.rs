mod common;

use common::search::{instance, line_network, oracle_agreement};
use common::{descriptor, pool, pooled_shape};
use proptest::prelude::*;
use proptest::test_runner::Config;
use sqf_core::cache::CachedQuery;
use sqf_core::matching::{answerable, equivalent_query, search_cache, SearchStatus};
use sqf_core::{
    AttrRef, Comparator, Constant, Predicate, QueryEvaluationTree, Relation, SemanticDescriptor,
};
use std::collections::BTreeSet;
use std::time::Instant;

const CASES: u32 = 1000;

fn config() -> Config {
    Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    }
}

#[test]
fn search_matches_brute_force_oracle() {
    let started = Instant::now();
    let (agreed, fully, partial) = oracle_agreement(CASES, 7);
    assert_eq!(agreed, CASES);
    // the generator exercises all three outcomes
    assert!(fully > 50 && partial > 50, "{fully} {partial}");
    assert!(started.elapsed().as_secs() < 30);
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn outcome_partitions_the_probe((cached, probe, placement) in instance()) {
        let net = line_network(&cached, &placement);
        let probe = probe.tree("S", "p");
        let out = search_cache(&probe, &net, Some("u"));
        let contained: BTreeSet<&str> = out.contained.iter().map(|c| c.sub_query.as_str()).collect();
        let remainder: BTreeSet<&str> = out.remainder.iter().map(String::as_str).collect();
        let leaves: BTreeSet<&str> = probe.leaf_ids().into_iter().collect();
        prop_assert_eq!(contained.len(), out.contained.len());
        prop_assert!(contained.is_disjoint(&remainder));
        prop_assert_eq!(&contained | &remainder, leaves);
        prop_assert_eq!(out.status == SearchStatus::FullyFound, remainder.is_empty());
        prop_assert_eq!(out.status == SearchStatus::NotFound, contained.is_empty());
    }

    #[test]
    fn adding_a_cached_query_never_loses_a_hit(
        (mut cached, probe, placement) in instance(),
        extra_at in 0usize..3,
    ) {
        prop_assume!(!cached.is_empty());
        let extra = cached.pop().unwrap();
        let before = line_network(&cached, &placement);
        let mut after = before.clone();
        let unit = ["c1", "c2", "c3"][extra_at];
        after
            .unit_mut(unit)
            .unwrap()
            .admit(CachedQuery::new(extra.tree("X", "x"), unit), 0.0)
            .unwrap();
        let probe = probe.tree("S", "p");
        let a = search_cache(&probe, &before, Some("u"));
        let b = search_cache(&probe, &after, Some("u"));
        for c in &a.contained {
            prop_assert!(b.answer_for(&c.sub_query).is_some());
        }
    }

    #[test]
    fn answerable_is_reflexive(d in descriptor()) {
        prop_assert_eq!(answerable(&d, &d), Ok(true));
    }

    #[test]
    fn answerable_is_transitive(p in pool(8)) {
        for s in &p {
            for t in &p {
                if !answerable(s, t).unwrap() {
                    continue;
                }
                for u in &p {
                    if answerable(t, u).unwrap() {
                        prop_assert!(answerable(s, u).unwrap(), "{s:?}\n{t:?}\n{u:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn equivalence_is_an_equivalence_relation(
        shapes in pool(4).prop_flat_map(|p| prop::collection::vec(pooled_shape(p, 2), 6)),
    ) {
        let trees: Vec<QueryEvaluationTree> = shapes
            .iter()
            .enumerate()
            .map(|(i, s)| s.tree(&format!("E{i}"), "e"))
            .collect();
        for a in &trees {
            prop_assert!(equivalent_query(a, a));
            for b in &trees {
                prop_assert_eq!(equivalent_query(a, b), equivalent_query(b, a));
                for c in &trees {
                    if equivalent_query(a, b) && equivalent_query(b, c) {
                        prop_assert!(equivalent_query(a, c));
                    }
                }
            }
        }
    }
}

fn holds(op: Comparator, x: f64, k: f64) -> bool {
    match op {
        Comparator::Eq => x == k,
        Comparator::Ne => x != k,
        Comparator::Lt => x < k,
        Comparator::Le => x <= k,
        Comparator::Gt => x > k,
        Comparator::Ge => x >= k,
    }
}

fn on_cost(preds: &[(Comparator, i64)]) -> SemanticDescriptor {
    SemanticDescriptor::new(
        vec![Relation::new("est")],
        vec![AttrRef::new("est", "cost"), AttrRef::new("est", "id")],
        preds
            .iter()
            .map(|&(op, k)| Predicate::selection(AttrRef::new("est", "cost"), op, Constant::Int(k)))
            .collect(),
        1.0,
    )
    .normalize()
}

/// Implication over a dense order, decided by evaluating both sides on
/// every half-integer sample point around the constants.
#[test]
fn interval_implication_matches_enumeration() {
    let samples: Vec<f64> = (-12..=12).map(|i| f64::from(i) / 2.0).collect();
    let mut checked = 0;
    let mut positive = 0;
    for &op1 in &Comparator::ALL {
        for k1 in -3..=3 {
            for &op2 in &Comparator::ALL {
                for k2 in -3..=3 {
                    for &op_t in &Comparator::ALL {
                        for kt in -3..=3 {
                            let s = on_cost(&[(op1, k1), (op2, k2)]);
                            let t = on_cost(&[(op_t, kt)]);
                            let s_holds =
                                |x: f64| holds(op1, x, k1 as f64) && holds(op2, x, k2 as f64);
                            let want = samples
                                .iter()
                                .all(|&x| !s_holds(x) || holds(op_t, x, kt as f64));
                            assert_eq!(
                                answerable(&s, &t).unwrap(),
                                want,
                                "cost {op1:?} {k1} & {op2:?} {k2} vs {op_t:?} {kt}"
                            );
                            checked += 1;
                            positive += usize::from(want);
                        }
                    }
                }
            }
        }
    }
    assert_eq!(checked, 6 * 7 * 6 * 7 * 6 * 7);
    assert!(positive > 1000);
}

#[test]
fn narrower_cost_bound_is_answerable() {
    let s = on_cost(&[(Comparator::Lt, 40000)]);
    let t = on_cost(&[(Comparator::Lt, 50000)]);
    assert_eq!(answerable(&s, &t), Ok(true));
    assert_eq!(answerable(&t, &s), Ok(false));
}
