//! Answerability, equivalence and containment between sub-queries, and the
//! cache-wide search that splits a probe into contained and remainder parts.
//!
//! Predicate reasoning covers conjunctions of selections (`attr op const`)
//! and attribute-to-attribute predicates. Selections on one attribute are
//! decided exactly over a dense total order; attribute-to-attribute
//! predicates are only implied by an identical predicate.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::cache::CachedQuery;
use crate::placement::CacheNetwork;
use crate::query::{
    Comparator, Constant, Operand, Predicate, QetNode, QueryEvaluationTree, SemanticDescriptor,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MatchError {
    #[error("descriptor is not normalized")]
    Unnormalized,
}

/// Whether sub-query `s` can be answered from the result of `t`.
///
/// `t` must read every relation of `s` and project every attribute of `s`;
/// every predicate of `t` must be implied by the predicates of `s`; and any
/// predicate of `s` that `t` does not already enforce must be re-checkable
/// on `t`'s result, i.e. its attributes must be projected by `t`.
pub fn answerable(s: &SemanticDescriptor, t: &SemanticDescriptor) -> Result<bool, MatchError> {
    if !s.is_normalized() || !t.is_normalized() {
        return Err(MatchError::Unnormalized);
    }
    Ok(answerable_normalized(s, t))
}

pub(crate) fn answerable_normalized(s: &SemanticDescriptor, t: &SemanticDescriptor) -> bool {
    if !is_sorted_subset(&s.relations, &t.relations)
        || !is_sorted_subset(&s.attributes, &t.attributes)
    {
        return false;
    }
    if !t.predicates.iter().all(|p| implies(&s.predicates, p)) {
        return false;
    }
    s.predicates
        .iter()
        .filter(|p| !implies(&t.predicates, p))
        .all(|p| {
            p.attributes()
                .all(|a| t.attributes.binary_search(a).is_ok())
        })
}

fn is_sorted_subset<T: Ord>(small: &[T], big: &[T]) -> bool {
    if small.len() > big.len() {
        return false;
    }
    let mut j = 0;
    for item in small {
        loop {
            match big.get(j).map(|b| b.cmp(item)) {
                Some(Ordering::Less) => j += 1,
                Some(Ordering::Equal) => {
                    j += 1;
                    break;
                }
                _ => return false,
            }
        }
    }
    true
}

/// Whether the conjunction `premises` implies `p`.
pub fn implies(premises: &[Predicate], p: &Predicate) -> bool {
    if premises.contains(p) {
        return true;
    }
    let Operand::Const(value) = &p.right else {
        return false;
    };
    // constraints on the same attribute whose constants share p's domain
    let mut bounds: Vec<(Comparator, &Constant)> = premises
        .iter()
        .filter(|q| q.left == p.left)
        .filter_map(|q| match &q.right {
            Operand::Const(c) if c.compare(value).is_some() => Some((q.op, c)),
            _ => None,
        })
        .collect();
    // premises ⇒ p  ⇔  premises ∧ ¬p is unsatisfiable
    let negations: &[Comparator] = match p.op {
        Comparator::Eq => &[Comparator::Lt, Comparator::Gt],
        Comparator::Ne => &[Comparator::Eq],
        Comparator::Lt => &[Comparator::Ge],
        Comparator::Le => &[Comparator::Gt],
        Comparator::Gt => &[Comparator::Le],
        Comparator::Ge => &[Comparator::Lt],
    };
    negations.iter().all(|&neg| {
        bounds.push((neg, value));
        let sat = satisfiable(&bounds);
        bounds.pop();
        !sat
    })
}

/// Satisfiability of `x op c` constraints over a dense total order. All
/// constants must be mutually comparable.
fn satisfiable(constraints: &[(Comparator, &Constant)]) -> bool {
    let cmp = |a: &Constant, b: &Constant| a.compare(b).unwrap_or(Ordering::Equal);
    let point = constraints
        .iter()
        .find(|(op, _)| *op == Comparator::Eq)
        .map(|(_, c)| *c);
    if let Some(v) = point {
        return constraints.iter().all(|(op, c)| op.holds(cmp(v, c)));
    }
    let mut lower: Option<(&Constant, bool)> = None; // (value, strict)
    let mut upper: Option<(&Constant, bool)> = None;
    for &(op, c) in constraints {
        match op {
            Comparator::Gt | Comparator::Ge => {
                let strict = op == Comparator::Gt;
                lower = match lower {
                    Some((v, s)) => match cmp(c, v) {
                        Ordering::Greater => Some((c, strict)),
                        Ordering::Equal => Some((v, s || strict)),
                        Ordering::Less => Some((v, s)),
                    },
                    None => Some((c, strict)),
                };
            }
            Comparator::Lt | Comparator::Le => {
                let strict = op == Comparator::Lt;
                upper = match upper {
                    Some((v, s)) => match cmp(c, v) {
                        Ordering::Less => Some((c, strict)),
                        Ordering::Equal => Some((v, s || strict)),
                        Ordering::Greater => Some((v, s)),
                    },
                    None => Some((c, strict)),
                };
            }
            _ => {}
        }
    }
    match (lower, upper) {
        (Some((lo, ls)), Some((hi, hs))) => match cmp(lo, hi) {
            Ordering::Greater => false,
            Ordering::Less => true,
            // a single point remains; it must not be excluded
            Ordering::Equal => {
                !ls && !hs
                    && !constraints
                        .iter()
                        .any(|(op, c)| *op == Comparator::Ne && cmp(c, lo) == Ordering::Equal)
            }
        },
        _ => true,
    }
}

/// Two trees are equivalent when their roots describe the same result,
/// regardless of how the result is decomposed into sub-queries.
pub fn equivalent_query(s: &QueryEvaluationTree, t: &QueryEvaluationTree) -> bool {
    s.root().semantics().same_content(t.root().semantics())
}

/// The node of `t` that answers the whole of `s`: the root when the trees
/// are equivalent, otherwise the first answering node in breadth-first
/// order.
pub fn is_contained<'t>(
    s: &QueryEvaluationTree,
    t: &'t QueryEvaluationTree,
) -> Option<&'t QetNode> {
    if equivalent_query(s, t) {
        return Some(t.root());
    }
    containing_node(s.root().semantics(), t)
}

/// First node of `t` (breadth-first) whose result answers `probe`.
pub fn containing_node<'t>(
    probe: &SemanticDescriptor,
    t: &'t QueryEvaluationTree,
) -> Option<&'t QetNode> {
    t.bfs()
        .find(|n| answerable_normalized(probe, n.semantics()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SearchStatus {
    FullyFound,
    PartiallyFound,
    NotFound,
}

impl SearchStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SearchStatus::FullyFound => "fully_found",
            SearchStatus::PartiallyFound => "partially_found",
            SearchStatus::NotFound => "not_found",
        }
    }
}

/// A probe leaf answered from cache.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Containment {
    pub sub_query: String,
    pub cached_query: String,
    pub node: String,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchOutcome {
    /// Answered leaves, in the order they were found.
    pub contained: Vec<Containment>,
    /// Leaves left for the data servers, in probe order.
    pub remainder: Vec<String>,
    pub status: SearchStatus,
}

impl SearchOutcome {
    pub fn answer_for(&self, sub_query: &str) -> Option<&Containment> {
        self.contained.iter().find(|c| c.sub_query == sub_query)
    }
}

/// Searches `entries` in the given order. Each remaining probe leaf is
/// answered by the first entry containing it; the search stops as soon as
/// nothing remains.
pub fn search_entries<'a, I>(s: &QueryEvaluationTree, entries: I) -> SearchOutcome
where
    I: IntoIterator<Item = &'a CachedQuery>,
{
    let leaves = s.leaves();
    let mut remainder: Vec<&QetNode> = leaves.clone();
    let mut contained = Vec::new();
    for entry in entries {
        remainder.retain(|leaf| {
            // every node's relations lie within the footprint
            let footprint = entry.footprint();
            if !leaf
                .semantics()
                .relations
                .iter()
                .all(|r| footprint.binary_search(r).is_ok())
            {
                return true;
            }
            match containing_node(leaf.semantics(), entry.expr()) {
                Some(node) => {
                    contained.push(Containment {
                        sub_query: leaf.id().into(),
                        cached_query: entry.id().into(),
                        node: node.id().into(),
                        unit: entry.location().into(),
                    });
                    false
                }
                None => true,
            }
        });
        if remainder.is_empty() {
            return SearchOutcome {
                contained,
                remainder: Vec::new(),
                status: SearchStatus::FullyFound,
            };
        }
    }
    let status = if contained.is_empty() {
        SearchStatus::NotFound
    } else {
        SearchStatus::PartiallyFound
    };
    SearchOutcome {
        contained,
        remainder: remainder.iter().map(|l| l.id().into()).collect(),
        status,
    }
}

/// Searches the whole network for the leaves of `s`.
///
/// Entries are visited by ascending hop distance of their unit from `from`,
/// then descending total access count, most recent use and id. Without a
/// location every unit counts as equally near.
pub fn search_cache(
    s: &QueryEvaluationTree,
    net: &CacheNetwork,
    from: Option<&str>,
) -> SearchOutcome {
    search_entries(s, net.search_order(from))
}
