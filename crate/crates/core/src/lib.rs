//! Sub-query fragmentation (SQF) for distributed query-result caches.
//!
//! Queries are modelled as evaluation trees of sub-queries. A network of
//! cache units stores sub-query results as portable objects; probes are
//! split into a contained part answered from cache and a remainder fetched
//! from the data servers. Between epochs a maintenance pass fragments,
//! aggregates, evicts and relocates cached objects based on observed demand.
//!
//! The crate is `no_std` (with `alloc`) and contains no IO; file formats and
//! the command line live in the `sqf` crate.

#![no_std]

extern crate alloc;

pub mod cache;
pub mod matching;
pub mod placement;
pub mod plan;
pub mod query;
pub mod simulator;
pub mod workload;

pub use plan::{parse_plan, parse_plans, write_plan, PlanError};
pub use query::{
    AttrRef, Comparator, Constant, Decimal, NodeKind, Operand, Operator, Predicate, QetNode,
    QueryError, QueryEvaluationTree, Relation, ResultRef, SemanticDescriptor,
};
