//! Generators shared by the property suites and the acceptance target.
#![allow(dead_code)]

pub mod examples;
pub mod search;

use proptest::prelude::*;
use proptest::sample::subsequence;
use sqf_core::{
    AttrRef, Comparator, Constant, Operator, Predicate, QetNode, QueryEvaluationTree, Relation,
    SemanticDescriptor,
};

pub const RELATIONS: [&str; 3] = ["r0", "r1", "r2"];
const COLUMNS: [&str; 3] = ["a", "b", "c"];
const COMPARATORS: [Comparator; 6] = [
    Comparator::Lt,
    Comparator::Le,
    Comparator::Gt,
    Comparator::Ge,
    Comparator::Eq,
    Comparator::Ne,
];

/// Small descriptor space so that answerability is common.
pub fn descriptor() -> impl Strategy<Value = SemanticDescriptor> {
    subsequence(RELATIONS.to_vec(), 1..=2)
        .prop_flat_map(|rels| {
            let attrs: Vec<(String, String)> = rels
                .iter()
                .flat_map(|r| COLUMNS.iter().map(move |c| (r.to_string(), c.to_string())))
                .collect();
            let n = attrs.len();
            let sel = (
                prop::sample::select(rels.clone()),
                prop::sample::select(&COLUMNS[..2]),
                prop::sample::select(&COMPARATORS[..]),
                0i64..6,
            );
            (
                Just(rels.clone()),
                subsequence(attrs, 1..=n),
                prop::collection::vec(sel, 0..=2),
                any::<bool>(),
                1u32..5,
            )
        })
        .prop_map(|(rels, attrs, sels, join, vol)| {
            let mut preds: Vec<Predicate> = sels
                .into_iter()
                .map(|(r, c, op, k)| Predicate::selection(AttrRef::new(r, c), op, Constant::Int(k)))
                .collect();
            if join && rels.len() == 2 {
                preds.push(Predicate::join(
                    AttrRef::new(rels[0], "a"),
                    Comparator::Eq,
                    AttrRef::new(rels[1], "a"),
                ));
            }
            SemanticDescriptor::new(
                rels.iter().map(|r| Relation::at(*r, "DB1")).collect(),
                attrs.into_iter().map(|(r, c)| AttrRef::new(r, c)).collect(),
                preds,
                f64::from(vol),
            )
            .normalize()
        })
}

/// Tree shape before leaf ids are assigned.
#[derive(Debug, Clone)]
pub enum Shape {
    Leaf(SemanticDescriptor),
    Op(Operator, Vec<Shape>),
}

impl Shape {
    pub fn leaves(&self) -> usize {
        match self {
            Shape::Leaf(_) => 1,
            Shape::Op(_, c) => c.iter().map(Shape::leaves).sum(),
        }
    }

    /// Builds a node, naming leaves `<prefix><n>` left to right.
    pub fn build(&self, prefix: &str, next: &mut usize) -> QetNode {
        match self {
            Shape::Leaf(d) => {
                *next += 1;
                QetNode::leaf(format!("{prefix}{next}"), d.clone())
            }
            Shape::Op(op, children) => {
                let kids = children.iter().map(|c| c.build(prefix, next)).collect();
                QetNode::op(*op, kids).expect("at least two children")
            }
        }
    }

    pub fn tree(&self, query_id: &str, prefix: &str) -> QueryEvaluationTree {
        QueryEvaluationTree::new(query_id, self.build(prefix, &mut 0)).expect("well formed")
    }
}

/// Trees up to the given depth, with at most 8 leaves.
pub fn shape_with(
    leaf: impl Strategy<Value = SemanticDescriptor> + 'static,
    depth: u32,
) -> impl Strategy<Value = Shape> {
    leaf.prop_map(Shape::Leaf)
        .prop_recursive(depth, 8, 3, |inner| {
            (
                prop_oneof![Just(Operator::Par), Just(Operator::Seq)],
                prop::collection::vec(inner, 2..=3),
            )
                .prop_map(|(op, c)| Shape::Op(op, c))
                .prop_filter("at most 8 leaves", |s| s.leaves() <= 8)
        })
}

pub fn shape(depth: u32) -> impl Strategy<Value = Shape> {
    shape_with(descriptor(), depth)
}

pub fn tree(depth: u32) -> impl Strategy<Value = QueryEvaluationTree> {
    shape(depth).prop_map(|s| s.tree("G", "g"))
}

/// Leaves drawn from a fixed pool so that separately generated trees
/// share sub-queries.
pub fn pooled_shape(pool: Vec<SemanticDescriptor>, depth: u32) -> impl Strategy<Value = Shape> {
    shape_with(prop::sample::select(pool), depth)
}

/// `n` independently drawn descriptors.
pub fn pool(n: usize) -> impl Strategy<Value = Vec<SemanticDescriptor>> {
    prop::collection::vec(descriptor(), n)
}
