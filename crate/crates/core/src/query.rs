//! Queries, sub-queries and query evaluation trees.
//!
//! A sub-query is described by a [`SemanticDescriptor`]: the relations it
//! reads, the attributes it projects, the conjunctive predicates it applies
//! and a handle/volume for its result. A [`QueryEvaluationTree`] arranges
//! sub-queries at its leaves under parallel (`∥`) and sequential (`_`)
//! operator nodes; children run left to right.

use alloc::borrow::ToOwned;
use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Errors raised while building or restructuring evaluation trees.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error("operator node must have at least two children, found {0}")]
    TooFewChildren(usize),
    #[error("leaf node `{0}` has children")]
    LeafWithChildren(String),
    #[error("sub-query `{0}` appears more than once in the tree")]
    DuplicateLeaf(String),
    #[error("leaf `{0}` not found")]
    LeafNotFound(String),
    #[error("replacement semantics do not match leaf `{0}`")]
    SemanticsMismatch(String),
    #[error(
        "attribute `{attr}` references relation `{relation}` which is not part of the sub-query"
    )]
    UnknownRelation { attr: String, relation: String },
    #[error("invalid {what}: `{text}`")]
    Syntax { what: &'static str, text: String },
}

/// `relation.attribute`
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttrRef {
    pub relation: String,
    pub attribute: String,
}

impl AttrRef {
    pub fn new(relation: impl Into<String>, attribute: impl Into<String>) -> Self {
        Self {
            relation: relation.into(),
            attribute: attribute.into(),
        }
    }

    /// Parses `relation.attribute`; the split happens at the last dot.
    pub fn parse(text: &str) -> Result<Self, QueryError> {
        let text = text.trim();
        match text.rsplit_once('.') {
            Some((rel, attr))
                if !rel.is_empty() && !attr.is_empty() && is_name(rel) && is_name(attr) =>
            {
                Ok(Self::new(rel, attr))
            }
            _ => Err(QueryError::Syntax {
                what: "attribute reference",
                text: text.to_owned(),
            }),
        }
    }
}

impl fmt::Display for AttrRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.relation, self.attribute)
    }
}

fn is_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | '$'))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Comparator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    pub const ALL: [Comparator; 6] = [
        Comparator::Eq,
        Comparator::Ne,
        Comparator::Lt,
        Comparator::Le,
        Comparator::Gt,
        Comparator::Ge,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        Some(match text {
            "=" | "==" => Comparator::Eq,
            "!=" | "<>" | "≠" => Comparator::Ne,
            "<" => Comparator::Lt,
            "<=" | "≤" => Comparator::Le,
            ">" => Comparator::Gt,
            ">=" | "≥" => Comparator::Ge,
            _ => return None,
        })
    }

    /// The comparator obtained by swapping the operands: `a < b` ⇔ `b > a`.
    pub fn flipped(self) -> Self {
        match self {
            Comparator::Lt => Comparator::Gt,
            Comparator::Le => Comparator::Ge,
            Comparator::Gt => Comparator::Lt,
            Comparator::Ge => Comparator::Le,
            other => other,
        }
    }

    /// Whether `ord` (left compared to right) satisfies this comparator.
    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            Comparator::Eq => ord == Ordering::Equal,
            Comparator::Ne => ord != Ordering::Equal,
            Comparator::Lt => ord == Ordering::Less,
            Comparator::Le => ord != Ordering::Greater,
            Comparator::Gt => ord == Ordering::Greater,
            Comparator::Ge => ord != Ordering::Less,
        }
    }
}

/// A decimal constant. Ordered with `f64::total_cmp` so it can live in sets.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Decimal(pub f64);

impl PartialEq for Decimal {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for Decimal {}
impl PartialOrd for Decimal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Decimal {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Constant {
    Int(i64),
    Decimal(Decimal),
    Str(String),
}

impl core::hash::Hash for Decimal {
    fn hash<H: core::hash::Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state)
    }
}

impl Constant {
    /// Value comparison across numeric kinds; strings compare with strings.
    /// `None` when the two constants live in different domains.
    pub fn compare(&self, other: &Constant) -> Option<Ordering> {
        match (self, other) {
            (Constant::Str(a), Constant::Str(b)) => Some(a.cmp(b)),
            (Constant::Str(_), _) | (_, Constant::Str(_)) => None,
            (Constant::Int(a), Constant::Int(b)) => Some(a.cmp(b)),
            (a, b) => a.as_f64()?.partial_cmp(&b.as_f64()?),
        }
    }

    fn as_f64(&self) -> Option<f64> {
        match self {
            Constant::Int(v) => Some(*v as f64),
            Constant::Decimal(d) => Some(d.0),
            Constant::Str(_) => None,
        }
    }

    /// Parses `42`, `-3.5` or a single-quoted string (`''` escapes a quote).
    pub fn parse(text: &str) -> Result<Self, QueryError> {
        let text = text.trim();
        if let Some(inner) = text.strip_prefix('\'').and_then(|t| t.strip_suffix('\'')) {
            if text.len() >= 2 {
                return Ok(Constant::Str(inner.replace("''", "'")));
            }
        }
        if let Ok(v) = text.parse::<i64>() {
            return Ok(Constant::Int(v));
        }
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Constant::Decimal(Decimal(v))),
            _ => Err(QueryError::Syntax {
                what: "constant",
                text: text.to_owned(),
            }),
        }
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Int(v) => write!(f, "{v}"),
            Constant::Decimal(d) => {
                // keep a decimal point so the value re-parses as a decimal
                if libm::trunc(d.0) == d.0 && libm::fabs(d.0) < 1e15 {
                    write!(f, "{:.1}", d.0)
                } else {
                    write!(f, "{}", d.0)
                }
            }
            Constant::Str(s) => write!(f, "'{}'", s.replace('\'', "''")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Operand {
    Attr(AttrRef),
    Const(Constant),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Attr(a) => a.fmt(f),
            Operand::Const(c) => c.fmt(f),
        }
    }
}

/// `left comparator right`, where `right` is a constant (selection) or an
/// attribute (join).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Predicate {
    pub left: AttrRef,
    pub op: Comparator,
    pub right: Operand,
}

impl Predicate {
    pub fn selection(left: AttrRef, op: Comparator, value: Constant) -> Self {
        Self {
            left,
            op,
            right: Operand::Const(value),
        }
    }

    pub fn join(left: AttrRef, op: Comparator, right: AttrRef) -> Self {
        Self {
            left,
            op,
            right: Operand::Attr(right),
        }
    }

    pub fn is_join(&self) -> bool {
        matches!(self.right, Operand::Attr(_))
    }

    /// Attribute-to-attribute predicates put the smaller reference on the left.
    pub fn canonical(mut self) -> Self {
        if let Operand::Attr(right) = &mut self.right {
            if *right < self.left {
                core::mem::swap(right, &mut self.left);
                self.op = self.op.flipped();
            }
        }
        self
    }

    pub fn attributes(&self) -> impl Iterator<Item = &AttrRef> {
        let right = match &self.right {
            Operand::Attr(a) => Some(a),
            Operand::Const(_) => None,
        };
        core::iter::once(&self.left).chain(right)
    }

    /// Parses `rel.attr <op> (rel.attr | constant)`.
    pub fn parse(text: &str) -> Result<Self, QueryError> {
        let text = text.trim();
        let err = || QueryError::Syntax {
            what: "predicate",
            text: text.to_owned(),
        };
        // find the comparator outside quotes
        let bytes: Vec<(usize, char)> = text.char_indices().collect();
        let mut in_quote = false;
        let mut found = None;
        for (i, &(pos, ch)) in bytes.iter().enumerate() {
            if ch == '\'' {
                in_quote = !in_quote;
                continue;
            }
            if in_quote {
                continue;
            }
            if matches!(ch, '=' | '<' | '>' | '!' | '≠' | '≤' | '≥') {
                let mut end = pos + ch.len_utf8();
                if let Some(&(next_pos, next)) = bytes.get(i + 1) {
                    if matches!(next, '=' | '>') && matches!(ch, '<' | '>' | '!' | '=') {
                        end = next_pos + next.len_utf8();
                    }
                }
                found = Some((pos, end));
                break;
            }
        }
        let (start, end) = found.ok_or_else(err)?;
        let op = Comparator::parse(&text[start..end]).ok_or_else(err)?;
        let left = AttrRef::parse(&text[..start])?;
        let rhs = text[end..].trim();
        let right = match Constant::parse(rhs) {
            Ok(c) => Operand::Const(c),
            Err(_) => Operand::Attr(AttrRef::parse(rhs)?),
        };
        Ok(Self { left, op, right })
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.left, self.op.symbol(), self.right)
    }
}

/// A relation with an optional home-location tag, written `name@location`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub name: String,
    pub location: Option<String>,
}

impl Relation {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            location: None,
        }
    }

    pub fn at(name: impl Into<String>, location: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            location: Some(location.into()),
        }
    }

    pub fn parse(text: &str) -> Result<Self, QueryError> {
        let text = text.trim();
        let err = || QueryError::Syntax {
            what: "relation",
            text: text.to_owned(),
        };
        match text.split_once('@') {
            Some((name, loc)) if is_name(name.trim()) && is_name(loc.trim()) => {
                Ok(Self::at(name.trim(), loc.trim()))
            }
            Some(_) => Err(err()),
            None if is_name(text) => Ok(Self::new(text)),
            None => Err(err()),
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.location {
            Some(loc) => write!(f, "{}@{}", self.name, loc),
            None => f.write_str(&self.name),
        }
    }
}

/// Reference to the result tuples of a sub-query plus their size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRef {
    pub handle: Option<String>,
    pub volume_gb: f64,
}

/// The ⟨relations, attributes, predicates, content⟩ description of a
/// sub-query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticDescriptor {
    pub relations: Vec<Relation>,
    pub attributes: Vec<AttrRef>,
    pub predicates: Vec<Predicate>,
    pub result: ResultRef,
}

impl SemanticDescriptor {
    pub fn new(
        relations: Vec<Relation>,
        attributes: Vec<AttrRef>,
        predicates: Vec<Predicate>,
        volume_gb: f64,
    ) -> Self {
        Self {
            relations,
            attributes,
            predicates,
            result: ResultRef {
                handle: None,
                volume_gb,
            },
        }
    }

    pub fn with_handle(mut self, handle: impl Into<String>) -> Self {
        self.result.handle = Some(handle.into());
        self
    }

    pub fn volume_gb(&self) -> f64 {
        self.result.volume_gb
    }

    /// Sorted, deduplicated sets with canonical predicates.
    pub fn normalize(&self) -> Self {
        let mut out = self.clone();
        out.normalize_in_place();
        out
    }

    pub fn normalize_in_place(&mut self) {
        self.relations.sort();
        self.relations.dedup();
        self.attributes.sort();
        self.attributes.dedup();
        for p in &mut self.predicates {
            *p = p.clone().canonical();
        }
        self.predicates.sort();
        self.predicates.dedup();
    }

    pub fn is_normalized(&self) -> bool {
        strictly_sorted(&self.relations)
            && strictly_sorted(&self.attributes)
            && strictly_sorted(&self.predicates)
            && self
                .predicates
                .iter()
                .all(|p| !matches!(&p.right, Operand::Attr(r) if *r < p.left))
    }

    /// Equality of what the descriptor selects, ignoring the result handle
    /// and volume. Both sides are expected to be normalized.
    pub fn same_content(&self, other: &Self) -> bool {
        self.relations == other.relations
            && self.attributes == other.attributes
            && self.predicates == other.predicates
    }

    /// Union of several descriptors; the result volume is the sum.
    pub fn merge<'a>(parts: impl IntoIterator<Item = &'a SemanticDescriptor>) -> Self {
        let mut out = SemanticDescriptor::new(Vec::new(), Vec::new(), Vec::new(), 0.0);
        for p in parts {
            out.relations.extend(p.relations.iter().cloned());
            out.attributes.extend(p.attributes.iter().cloned());
            out.predicates.extend(p.predicates.iter().cloned());
            out.result.volume_gb += p.result.volume_gb;
        }
        out.normalize_in_place();
        out
    }

    /// Every referenced attribute must name one of the descriptor's relations.
    pub fn validate(&self) -> Result<(), QueryError> {
        let attrs = self
            .attributes
            .iter()
            .chain(self.predicates.iter().flat_map(|p| p.attributes()));
        for a in attrs {
            if !self.relations.iter().any(|r| r.name == a.relation) {
                return Err(QueryError::UnknownRelation {
                    attr: a.to_string(),
                    relation: a.relation.clone(),
                });
            }
        }
        Ok(())
    }
}

fn strictly_sorted<T: Ord>(items: &[T]) -> bool {
    items.windows(2).all(|w| w[0] < w[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operator {
    /// `∥` – children may run concurrently.
    Par,
    /// `_` – children run in sequence.
    Seq,
}

impl Operator {
    pub fn symbol(self) -> &'static str {
        match self {
            Operator::Par => "∥",
            Operator::Seq => "_",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Leaf,
    Op(Operator),
}

/// A node of a query evaluation tree. Leaves carry sub-queries; operator
/// nodes combine their children.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QetNode {
    id: String,
    kind: NodeKind,
    semantics: SemanticDescriptor,
    address: Option<String>,
    children: Vec<QetNode>,
}

impl QetNode {
    pub fn leaf(id: impl Into<String>, semantics: SemanticDescriptor) -> Self {
        Self {
            id: id.into(),
            kind: NodeKind::Leaf,
            semantics: semantics.normalize(),
            address: None,
            children: Vec::new(),
        }
    }

    /// Operator node whose semantics are the union of its children's.
    pub fn op(op: Operator, children: Vec<QetNode>) -> Result<Self, QueryError> {
        if children.len() < 2 {
            return Err(QueryError::TooFewChildren(children.len()));
        }
        let semantics = SemanticDescriptor::merge(children.iter().map(|c| &c.semantics));
        Ok(Self {
            id: String::new(),
            kind: NodeKind::Op(op),
            semantics,
            address: None,
            children,
        })
    }

    pub fn with_semantics(mut self, semantics: SemanticDescriptor) -> Self {
        self.semantics = semantics.normalize();
        self
    }

    pub fn with_address(mut self, address: impl Into<String>) -> Self {
        self.address = Some(address.into());
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> NodeKind {
        self.kind
    }

    pub fn is_leaf(&self) -> bool {
        self.kind == NodeKind::Leaf
    }

    pub fn semantics(&self) -> &SemanticDescriptor {
        &self.semantics
    }

    pub fn address(&self) -> Option<&str> {
        self.address.as_deref()
    }

    pub fn children(&self) -> &[QetNode] {
        &self.children
    }

    /// Semantics an operator node would get from its children alone.
    pub fn derived_semantics(&self) -> Option<SemanticDescriptor> {
        match self.kind {
            NodeKind::Leaf => None,
            NodeKind::Op(_) => Some(SemanticDescriptor::merge(
                self.children.iter().map(|c| &c.semantics),
            )),
        }
    }

    /// Fully parenthesised infix form, children left to right.
    pub fn to_infix(&self) -> String {
        let mut out = String::new();
        self.write_infix(&mut out);
        out
    }

    fn write_infix(&self, out: &mut String) {
        match self.kind {
            NodeKind::Leaf => {
                out.push('(');
                out.push_str(&self.id);
                out.push(')');
            }
            NodeKind::Op(op) => {
                out.push('(');
                for (i, child) in self.children.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                        out.push_str(op.symbol());
                        out.push(' ');
                    }
                    child.write_infix(out);
                }
                out.push(')');
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self.kind {
            NodeKind::Leaf => 1,
            NodeKind::Op(_) => self.children.iter().map(QetNode::leaf_count).sum(),
        }
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<&QetNode> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a QetNode>) {
        if self.is_leaf() {
            out.push(self);
        } else {
            for c in &self.children {
                c.collect_leaves(out);
            }
        }
    }

    /// Structural equality: same shape, ids of leaves, operators and
    /// semantics. Internal ids are ignored.
    pub fn isomorphic(&self, other: &QetNode) -> bool {
        let own_id = !self.is_leaf() || self.id == other.id;
        own_id
            && self.kind == other.kind
            && self.semantics == other.semantics
            && self.address == other.address
            && self.children.len() == other.children.len()
            && self
                .children
                .iter()
                .zip(&other.children)
                .all(|(a, b)| a.isomorphic(b))
    }

    fn check(&self, seen: &mut Vec<String>) -> Result<(), QueryError> {
        match self.kind {
            NodeKind::Leaf => {
                if !self.children.is_empty() {
                    return Err(QueryError::LeafWithChildren(self.id.clone()));
                }
                if seen.contains(&self.id) {
                    return Err(QueryError::DuplicateLeaf(self.id.clone()));
                }
                seen.push(self.id.clone());
            }
            NodeKind::Op(_) => {
                if self.children.len() < 2 {
                    return Err(QueryError::TooFewChildren(self.children.len()));
                }
                for c in &self.children {
                    c.check(seen)?;
                }
            }
        }
        Ok(())
    }

    fn relabel(&mut self, query_id: &str, path: &mut String) {
        if !self.is_leaf() {
            self.id = format!("{query_id}#{path}");
            for (i, child) in self.children.iter_mut().enumerate() {
                let len = path.len();
                path.push('.');
                path.push_str(&i.to_string());
                child.relabel(query_id, path);
                path.truncate(len);
            }
        }
    }

    fn replace_leaf(&mut self, leaf_id: &str, replacement: &mut Option<QetNode>) -> bool {
        if self.is_leaf() {
            if self.id == leaf_id {
                if let Some(r) = replacement.take() {
                    *self = r;
                }
                return true;
            }
            return false;
        }
        self.children
            .iter_mut()
            .any(|c| c.replace_leaf(leaf_id, replacement))
    }

    /// Keeps only the leaves accepted by `keep`; operator nodes left with a
    /// single child collapse into it.
    fn pruned(&self, keep: &dyn Fn(&str) -> bool) -> Option<QetNode> {
        match self.kind {
            NodeKind::Leaf => keep(&self.id).then(|| self.clone()),
            NodeKind::Op(op) => {
                let mut kids: Vec<QetNode> = self
                    .children
                    .iter()
                    .filter_map(|c| c.pruned(keep))
                    .collect();
                let untouched = kids.len() == self.children.len()
                    && kids.iter().zip(&self.children).all(|(a, b)| a == b);
                match kids.len() {
                    0 => None,
                    1 => kids.pop(),
                    _ if untouched => Some(self.clone()),
                    _ => QetNode::op(op, kids).ok(),
                }
            }
        }
    }
}

/// A query evaluation tree: sub-queries at the leaves, operators above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEvaluationTree {
    query_id: String,
    root: QetNode,
}

impl QueryEvaluationTree {
    /// Validates the structure and assigns path-based ids
    /// (`<query>#r.0.1`) to operator nodes.
    pub fn new(query_id: impl Into<String>, mut root: QetNode) -> Result<Self, QueryError> {
        let query_id = query_id.into();
        root.check(&mut Vec::new())?;
        root.relabel(&query_id, &mut String::from("r"));
        Ok(Self { query_id, root })
    }

    pub fn single(query_id: impl Into<String>, leaf: QetNode) -> Result<Self, QueryError> {
        Self::new(query_id, leaf)
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    pub fn root(&self) -> &QetNode {
        &self.root
    }

    pub fn into_root(self) -> QetNode {
        self.root
    }

    /// Same tree under a different query id.
    pub fn renamed(&self, query_id: impl Into<String>) -> Self {
        let mut out = self.clone();
        out.query_id = query_id.into();
        let id = out.query_id.clone();
        out.root.relabel(&id, &mut String::from("r"));
        out
    }

    /// Number of sub-queries, i.e. leaves.
    pub fn complexity(&self) -> usize {
        self.root.leaf_count()
    }

    pub fn leaves(&self) -> Vec<&QetNode> {
        self.root.leaves()
    }

    pub fn leaf_ids(&self) -> Vec<&str> {
        self.leaves().into_iter().map(QetNode::id).collect()
    }

    pub fn to_infix(&self) -> String {
        self.root.to_infix()
    }

    /// Total result volume of the leaves.
    pub fn leaf_volume_gb(&self) -> f64 {
        self.leaves().iter().map(|l| l.semantics.volume_gb()).sum()
    }

    /// Nodes in breadth-first order starting at the root.
    pub fn bfs(&self) -> Bfs<'_> {
        let mut queue = VecDeque::new();
        queue.push_back(&self.root);
        Bfs { queue }
    }

    pub fn node(&self, id: &str) -> Option<&QetNode> {
        self.bfs().find(|n| n.id == id)
    }

    pub fn leaf(&self, id: &str) -> Option<&QetNode> {
        self.leaves().into_iter().find(|n| n.id == id)
    }

    /// Replaces a leaf with a subtree describing the same result.
    pub fn fragment_leaf(&self, leaf_id: &str, replacement: QetNode) -> Result<Self, QueryError> {
        let leaf = self
            .leaf(leaf_id)
            .ok_or_else(|| QueryError::LeafNotFound(leaf_id.to_owned()))?;
        if !leaf.semantics.same_content(&replacement.semantics) {
            return Err(QueryError::SemanticsMismatch(leaf_id.to_owned()));
        }
        let mut root = self.root.clone();
        root.replace_leaf(leaf_id, &mut Some(replacement));
        Self::new(self.query_id.clone(), root)
    }

    /// Sub-tree over the kept leaves, or `None` when nothing is kept.
    pub fn prune(&self, query_id: impl Into<String>, keep: &dyn Fn(&str) -> bool) -> Option<Self> {
        let root = self.root.pruned(keep)?;
        Self::new(query_id, root).ok()
    }

    pub fn isomorphic(&self, other: &Self) -> bool {
        self.root.isomorphic(&other.root)
    }
}

impl fmt::Display for QueryEvaluationTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_infix())
    }
}

pub struct Bfs<'a> {
    queue: VecDeque<&'a QetNode>,
}

impl<'a> Iterator for Bfs<'a> {
    type Item = &'a QetNode;

    fn next(&mut self) -> Option<Self::Item> {
        let node = self.queue.pop_front()?;
        self.queue.extend(node.children.iter());
        Some(node)
    }
}

/// Number of leaves, i.e. sub-queries to execute.
pub fn complexity(tree: &QueryEvaluationTree) -> usize {
    tree.complexity()
}

pub fn normalize(d: &SemanticDescriptor) -> SemanticDescriptor {
    d.normalize()
}

pub fn to_infix(tree: &QueryEvaluationTree) -> String {
    tree.to_infix()
}

pub fn fragment_leaf(
    tree: &QueryEvaluationTree,
    leaf_id: &str,
    replacement: QetNode,
) -> Result<QueryEvaluationTree, QueryError> {
    tree.fragment_leaf(leaf_id, replacement)
}
