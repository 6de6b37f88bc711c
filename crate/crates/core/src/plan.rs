//! The plan document: a line-oriented description of one or more query
//! evaluation trees.
//!
//! ```text
//! sqf-plan 1
//! query Q1
//! sub q11 ; R employee@DB1, project@DB1 ; A employee.empId, project.projId ; P employee.empId = project.empId ; V 4
//! sub q12 ; R estimation@DB2 ; A estimation.projId ; P estimation.cost < 50000 ; V 2
//! node r ; R ... ; A ... ; P ... ; V 6 ; H QR1
//! expr ((q11) ∥ (q12))
//! end
//! ```
//!
//! * `sub <id>` declares a sub-query (a leaf). Fields are separated by `;`:
//!   `R` relations (`name@location`), `A` projected attributes, `P`
//!   predicates joined by `&`, `V` result volume in GB, `H` result handle,
//!   `L` cache address. Lists are comma separated.
//! * `node <path>` overrides the semantics of an operator node; paths are
//!   `r` for the root and `r.<i>.<j>…` for children. Operator nodes without
//!   a `node` line take the union of their children.
//! * `expr` combines sub-query ids with `∥` (ASCII `|` or `||`) and `_`.
//!   Mixing both operators inside one pair of parentheses is rejected.
//! * `#` starts a comment line.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::query::{
    AttrRef, NodeKind, Operator, Predicate, QetNode, QueryError, QueryEvaluationTree, Relation,
    SemanticDescriptor,
};

pub const PLAN_HEADER: &str = "sqf-plan";
pub const PLAN_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Structure {
        line: usize,
        #[source]
        source: QueryError,
    },
    #[error("empty plan document")]
    Empty,
    #[error("unsupported plan version {0}")]
    Version(String),
}

impl PlanError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        PlanError::Syntax {
            line,
            message: message.into(),
        }
    }
}

/// Parses a document holding exactly one plan.
pub fn parse_plan(text: &str) -> Result<QueryEvaluationTree, PlanError> {
    let mut plans = parse_plans(text)?;
    match plans.len() {
        0 => Err(PlanError::Empty),
        1 => Ok(plans.remove(0)),
        n => Err(PlanError::at(0, format!("expected one plan, found {n}"))),
    }
}

/// Parses a document holding any number of plans.
pub fn parse_plans(text: &str) -> Result<Vec<QueryEvaluationTree>, PlanError> {
    let mut lines = significant_lines(text);
    let (line_no, header) = lines.next().ok_or(PlanError::Empty)?;
    check_header(line_no, header)?;
    let mut out = Vec::new();
    while let Some(tree) = parse_block(&mut lines)? {
        out.push(tree);
    }
    Ok(out)
}

fn check_header(line_no: usize, header: &str) -> Result<(), PlanError> {
    let mut parts = header.split_whitespace();
    if parts.next() != Some(PLAN_HEADER) {
        return Err(PlanError::at(
            line_no,
            format!("expected `{PLAN_HEADER} {PLAN_VERSION}` header"),
        ));
    }
    match parts.next() {
        Some(v) if v == PLAN_VERSION.to_string() => Ok(()),
        Some(v) => Err(PlanError::Version(v.to_owned())),
        None => Err(PlanError::at(line_no, "missing plan version")),
    }
}

/// Non-blank, non-comment lines with 1-based line numbers.
pub fn significant_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parses one `query … end` block. Returns `Ok(None)` when the iterator is
/// exhausted before a block starts.
pub fn parse_block<'a, I>(lines: &mut I) -> Result<Option<QueryEvaluationTree>, PlanError>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    let Some((start, first)) = lines.next() else {
        return Ok(None);
    };
    let query_id = match first.split_once(char::is_whitespace) {
        Some(("query", id)) if !id.trim().is_empty() => id.trim().to_owned(),
        _ => return Err(PlanError::at(start, "expected `query <id>`")),
    };

    let mut subs: BTreeMap<String, (usize, QetNode)> = BTreeMap::new();
    let mut nodes: BTreeMap<String, (usize, SemanticDescriptor, Option<String>)> = BTreeMap::new();
    let mut expr: Option<(usize, String)> = None;

    loop {
        let Some((no, line)) = lines.next() else {
            return Err(PlanError::at(
                start,
                format!("plan `{query_id}` is missing `end`"),
            ));
        };
        let (keyword, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        match keyword {
            "end" => break,
            "sub" => {
                let mut fields = split_outside_quotes(rest, ';').into_iter();
                let id = fields.next().unwrap_or_default().trim().to_owned();
                if id.is_empty() || id.contains(['(', ')', '|', '∥', ' ']) || id == "_" {
                    return Err(PlanError::at(no, format!("invalid sub-query id `{id}`")));
                }
                let (sem, addr) = parse_fields(no, fields)?;
                sem.validate()
                    .map_err(|source| PlanError::Structure { line: no, source })?;
                let mut node = QetNode::leaf(id.clone(), sem);
                if let Some(a) = addr {
                    node = node.with_address(a);
                }
                if subs.insert(id.clone(), (no, node)).is_some() {
                    return Err(PlanError::at(
                        no,
                        format!("sub-query `{id}` declared twice"),
                    ));
                }
            }
            "node" => {
                let mut fields = split_outside_quotes(rest, ';').into_iter();
                let path = fields.next().unwrap_or_default().trim().to_owned();
                if path != "r" && !path.starts_with("r.") {
                    return Err(PlanError::at(no, format!("invalid node path `{path}`")));
                }
                let (sem, addr) = parse_fields(no, fields)?;
                if nodes.insert(path.clone(), (no, sem, addr)).is_some() {
                    return Err(PlanError::at(no, format!("node `{path}` declared twice")));
                }
            }
            "expr" => {
                if expr.is_some() {
                    return Err(PlanError::at(no, "more than one `expr` line"));
                }
                expr = Some((no, rest.trim().to_owned()));
            }
            other => return Err(PlanError::at(no, format!("unknown keyword `{other}`"))),
        }
    }

    let (expr_line, expr_text) =
        expr.ok_or_else(|| PlanError::at(start, format!("plan `{query_id}` has no `expr` line")))?;
    let ast = ExprParser::new(&expr_text, expr_line).parse()?;

    let mut used = Vec::new();
    let root = build(&ast, "r", &mut subs, &mut nodes, &mut used, expr_line)?;
    if let Some((id, (no, _))) = subs.into_iter().next() {
        return Err(PlanError::at(
            no,
            format!("sub-query `{id}` is not used by the expression"),
        ));
    }
    if let Some((path, (no, _, _))) = nodes.into_iter().next() {
        return Err(PlanError::at(
            no,
            format!("no operator node at path `{path}`"),
        ));
    }
    QueryEvaluationTree::new(query_id, root)
        .map(Some)
        .map_err(|source| PlanError::Structure {
            line: expr_line,
            source,
        })
}

fn build(
    ast: &Expr,
    path: &str,
    subs: &mut BTreeMap<String, (usize, QetNode)>,
    nodes: &mut BTreeMap<String, (usize, SemanticDescriptor, Option<String>)>,
    used: &mut Vec<String>,
    line: usize,
) -> Result<QetNode, PlanError> {
    match ast {
        Expr::Ref(id) => match subs.remove(id) {
            Some((_, node)) => {
                used.push(id.clone());
                Ok(node)
            }
            None if used.contains(id) => Err(PlanError::Structure {
                line,
                source: QueryError::DuplicateLeaf(id.clone()),
            }),
            None => Err(PlanError::at(line, format!("unknown sub-query `{id}`"))),
        },
        Expr::Op(op, items) => {
            let mut children = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                children.push(build(
                    item,
                    &format!("{path}.{i}"),
                    subs,
                    nodes,
                    used,
                    line,
                )?);
            }
            let mut node = QetNode::op(*op, children)
                .map_err(|source| PlanError::Structure { line, source })?;
            if let Some((_, sem, addr)) = nodes.remove(path) {
                node = node.with_semantics(sem);
                if let Some(a) = addr {
                    node = node.with_address(a);
                }
            }
            Ok(node)
        }
    }
}

fn parse_fields<'a>(
    line: usize,
    fields: impl Iterator<Item = &'a str>,
) -> Result<(SemanticDescriptor, Option<String>), PlanError> {
    let mut rels = Vec::new();
    let mut attrs = Vec::new();
    let mut preds = Vec::new();
    let mut volume = None;
    let mut handle = None;
    let mut address = None;
    let q = |source| PlanError::Structure { line, source };
    for field in fields {
        let field = field.trim();
        if field.is_empty() {
            continue;
        }
        let (key, value) = field.split_once(char::is_whitespace).unwrap_or((field, ""));
        let value = value.trim();
        match key {
            "R" => {
                for r in split_list(value, ',') {
                    rels.push(Relation::parse(r).map_err(q)?);
                }
            }
            "A" => {
                for a in split_list(value, ',') {
                    attrs.push(AttrRef::parse(a).map_err(q)?);
                }
            }
            "P" => {
                for p in split_list(value, '&') {
                    preds.push(Predicate::parse(p).map_err(q)?);
                }
            }
            "V" => {
                let v: f64 = value
                    .parse()
                    .map_err(|_| PlanError::at(line, format!("invalid volume `{value}`")))?;
                if !(v.is_finite() && v >= 0.0) {
                    return Err(PlanError::at(
                        line,
                        format!("volume must be a finite value >= 0, got `{value}`"),
                    ));
                }
                volume = Some(v);
            }
            "H" if !value.is_empty() => handle = Some(value.to_owned()),
            "L" if !value.is_empty() => address = Some(value.to_owned()),
            _ => return Err(PlanError::at(line, format!("unknown field `{field}`"))),
        }
    }
    let volume = volume.ok_or_else(|| PlanError::at(line, "missing `V` (result volume) field"))?;
    let mut sem = SemanticDescriptor::new(rels, attrs, preds, volume);
    sem.result.handle = handle;
    Ok((sem, address))
}

fn split_list(value: &str, sep: char) -> impl Iterator<Item = &str> {
    split_outside_quotes(value, sep)
        .into_iter()
        .map(str::trim)
        .filter(|s| !s.is_empty())
}

/// Splits on `sep` except inside single-quoted strings.
pub fn split_outside_quotes(text: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut in_quote = false;
    let mut start = 0;
    for (i, ch) in text.char_indices() {
        if ch == '\'' {
            in_quote = !in_quote;
        } else if ch == sep && !in_quote {
            out.push(&text[start..i]);
            start = i + ch.len_utf8();
        }
    }
    out.push(&text[start..]);
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Ref(String),
    Op(Operator, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Par,
    Seq,
    Ident(String),
}

struct ExprParser {
    tokens: Vec<Token>,
    pos: usize,
    line: usize,
    text: String,
}

impl ExprParser {
    fn new(text: &str, line: usize) -> Self {
        let mut tokens = Vec::new();
        let mut chars = text.chars().peekable();
        while let Some(&c) = chars.peek() {
            match c {
                c if c.is_whitespace() => {
                    chars.next();
                }
                '(' => {
                    chars.next();
                    tokens.push(Token::Open);
                }
                ')' => {
                    chars.next();
                    tokens.push(Token::Close);
                }
                '∥' => {
                    chars.next();
                    tokens.push(Token::Par);
                }
                '|' => {
                    chars.next();
                    if chars.peek() == Some(&'|') {
                        chars.next();
                    }
                    tokens.push(Token::Par);
                }
                _ => {
                    let mut word = String::new();
                    while let Some(&c) = chars.peek() {
                        if c.is_whitespace() || matches!(c, '(' | ')' | '|' | '∥') {
                            break;
                        }
                        word.push(c);
                        chars.next();
                    }
                    tokens.push(if word == "_" {
                        Token::Seq
                    } else {
                        Token::Ident(word)
                    });
                }
            }
        }
        Self {
            tokens,
            pos: 0,
            line,
            text: text.to_owned(),
        }
    }

    fn err(&self, msg: &str) -> PlanError {
        PlanError::at(self.line, format!("{msg} in expression `{}`", self.text))
    }

    fn parse(mut self) -> Result<Expr, PlanError> {
        if self.tokens.is_empty() {
            return Err(self.err("empty expression"));
        }
        let e = self.sequence()?;
        if self.pos != self.tokens.len() {
            return Err(self.err("unexpected trailing input"));
        }
        Ok(e)
    }

    fn sequence(&mut self) -> Result<Expr, PlanError> {
        let first = self.term()?;
        let mut items = alloc::vec![first];
        let mut op: Option<Operator> = None;
        while let Some(tok) = self.tokens.get(self.pos) {
            let this = match tok {
                Token::Par => Operator::Par,
                Token::Seq => Operator::Seq,
                _ => break,
            };
            if op.is_some_and(|o| o != this) {
                return Err(self.err("mixed `∥` and `_` need parentheses"));
            }
            op = Some(this);
            self.pos += 1;
            items.push(self.term()?);
        }
        Ok(match op {
            None => items.pop().unwrap_or(Expr::Ref(String::new())),
            Some(op) => Expr::Op(op, items),
        })
    }

    fn term(&mut self) -> Result<Expr, PlanError> {
        match self.tokens.get(self.pos).cloned() {
            Some(Token::Ident(id)) => {
                self.pos += 1;
                Ok(Expr::Ref(id))
            }
            Some(Token::Open) => {
                self.pos += 1;
                let e = self.sequence()?;
                if self.tokens.get(self.pos) != Some(&Token::Close) {
                    return Err(self.err("missing `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            _ => Err(self.err("expected a sub-query id or `(`")),
        }
    }
}

/// Writes a complete single-plan document.
pub fn write_plan(tree: &QueryEvaluationTree) -> String {
    let mut out = format!("{PLAN_HEADER} {PLAN_VERSION}\n");
    write_block(tree, &mut out);
    out
}

/// Writes the `query … end` block of a tree.
pub fn write_block(tree: &QueryEvaluationTree, out: &mut String) {
    let _ = writeln!(out, "query {}", tree.query_id());
    for leaf in tree.leaves() {
        let _ = write!(out, "sub {}", leaf.id());
        write_fields(leaf.semantics(), leaf.address(), out);
        out.push('\n');
    }
    for node in tree.bfs() {
        if let NodeKind::Op(_) = node.kind() {
            let derived = node.derived_semantics();
            if derived.as_ref() != Some(node.semantics()) || node.address().is_some() {
                let path = node.id().rsplit_once('#').map_or("r", |(_, p)| p);
                let _ = write!(out, "node {path}");
                write_fields(node.semantics(), node.address(), out);
                out.push('\n');
            }
        }
    }
    let _ = writeln!(out, "expr {}", tree.to_infix());
    out.push_str("end\n");
}

fn write_fields(sem: &SemanticDescriptor, address: Option<&str>, out: &mut String) {
    let join =
        |items: &mut dyn Iterator<Item = String>, sep: &str| items.collect::<Vec<_>>().join(sep);
    let _ = write!(
        out,
        " ; R {} ; A {} ; P {} ; V {}",
        join(&mut sem.relations.iter().map(ToString::to_string), ", "),
        join(&mut sem.attributes.iter().map(ToString::to_string), ", "),
        join(&mut sem.predicates.iter().map(ToString::to_string), " & "),
        sem.result.volume_gb,
    );
    if let Some(h) = &sem.result.handle {
        let _ = write!(out, " ; H {h}");
    }
    if let Some(a) = address {
        let _ = write!(out, " ; L {a}");
    }
}
