//! Cached sub-query objects, cache units and the maintenance pass.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::placement::Topology;
use crate::query::{Operator, QetNode, QueryEvaluationTree, Relation};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CacheError {
    #[error("access at {ts} precedes last use at {last}")]
    Clock { ts: f64, last: f64 },
    #[error("entry of {volume} GB exceeds unit capacity {capacity} GB")]
    Oversize { volume: f64, capacity: f64 },
    #[error("cannot free {needed} GB in unit {unit}")]
    InsufficientSpace { unit: String, needed: f64 },
    #[error("duplicate cached query id {0}")]
    DuplicateId(String),
    #[error("no cached query {0}")]
    UnknownEntry(String),
}

/// One access recorded in the current window: who asked and which of the
/// entry's leaves were used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hit {
    pub user_loc: String,
    pub leaves: BTreeSet<String>,
}

/// Usage collected since the last maintenance pass.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub hits: Vec<Hit>,
    pub co_queried: BTreeMap<String, u64>,
}

impl WindowStats {
    pub fn accesses(&self) -> usize {
        self.hits.len()
    }

    /// Window access counts per user location.
    pub fn demand(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for h in &self.hits {
            *out.entry(h.user_loc.clone()).or_insert(0) += 1;
        }
        out
    }
}

/// A cached query result with its usage metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedQuery {
    expr: QueryEvaluationTree,
    location: String,
    volume_gb: f64,
    pub last_used: BTreeMap<String, f64>,
    pub freq: BTreeMap<String, u64>,
    pub co_queried: BTreeMap<String, u64>,
    pub window: WindowStats,
    /// Consecutive maintenance windows without an access.
    pub idle_windows: u32,
    footprint: Vec<Relation>,
}

impl CachedQuery {
    /// A fresh object for `expr`; its id is the tree's query id and its
    /// volume the total volume of the leaves.
    pub fn new(expr: QueryEvaluationTree, location: impl Into<String>) -> Self {
        let volume_gb = expr.leaf_volume_gb();
        let mut footprint: Vec<Relation> = expr
            .bfs()
            .flat_map(|n| n.semantics().relations.iter().cloned())
            .collect();
        footprint.sort();
        footprint.dedup();
        Self {
            expr,
            location: location.into(),
            volume_gb,
            last_used: BTreeMap::new(),
            freq: BTreeMap::new(),
            co_queried: BTreeMap::new(),
            window: WindowStats::default(),
            idle_windows: 0,
            footprint,
        }
    }

    pub fn with_volume(mut self, volume_gb: f64) -> Self {
        self.volume_gb = volume_gb;
        self
    }

    pub fn id(&self) -> &str {
        self.expr.query_id()
    }

    pub fn expr(&self) -> &QueryEvaluationTree {
        &self.expr
    }

    /// Id of the cache unit holding the object.
    pub fn location(&self) -> &str {
        &self.location
    }

    pub(crate) fn set_location(&mut self, unit: &str) {
        self.location = unit.into();
    }

    pub fn volume_gb(&self) -> f64 {
        self.volume_gb
    }

    pub fn complexity(&self) -> usize {
        self.expr.complexity()
    }

    /// Every relation read anywhere in the tree.
    pub fn footprint(&self) -> &[Relation] {
        &self.footprint
    }

    pub fn total_freq(&self) -> u64 {
        self.freq.values().sum()
    }

    pub fn most_recent_use(&self) -> Option<f64> {
        self.last_used.values().copied().reduce(f64::max)
    }

    /// An access that used the whole object.
    pub fn record_access(
        &mut self,
        user_loc: &str,
        ts: f64,
        companions: &[&str],
    ) -> Result<(), CacheError> {
        let leaves = self.expr.leaf_ids().into_iter().map(String::from).collect();
        self.record_hit(user_loc, ts, companions, leaves)
    }

    /// An access that used only `leaves` of the object.
    pub fn record_hit(
        &mut self,
        user_loc: &str,
        ts: f64,
        companions: &[&str],
        leaves: BTreeSet<String>,
    ) -> Result<(), CacheError> {
        if let Some(last) = self.most_recent_use() {
            if ts < last {
                return Err(CacheError::Clock { ts, last });
            }
        }
        self.last_used.insert(user_loc.into(), ts);
        *self.freq.entry(user_loc.into()).or_insert(0) += 1;
        let own = String::from(self.id());
        for c in companions.iter().filter(|c| **c != own) {
            *self.co_queried.entry((*c).into()).or_insert(0) += 1;
            *self.window.co_queried.entry((*c).into()).or_insert(0) += 1;
        }
        self.window.hits.push(Hit {
            user_loc: user_loc.into(),
            leaves,
        });
        Ok(())
    }

    /// LFU with aging: Σ freq × decay^((now − lastUsed) / period).
    pub fn score(&self, now: f64, aging: Aging) -> f64 {
        self.freq
            .iter()
            .map(|(loc, &f)| {
                let age = self.last_used.get(loc).map_or(0.0, |t| (now - t).max(0.0));
                f as f64 * libm::pow(aging.decay, age / aging.period)
            })
            .sum()
    }

    /// Starts a new window.
    pub fn close_window(&mut self) {
        if self.window.hits.is_empty() {
            self.idle_windows += 1;
        } else {
            self.idle_windows = 0;
        }
        self.window = WindowStats::default();
    }

    /// A copy of the metadata for a new object made of `expr`; the window
    /// log keeps only the accesses that touched `expr`'s leaves.
    fn derive(&self, expr: QueryEvaluationTree) -> Self {
        let leaves: BTreeSet<String> = expr.leaf_ids().into_iter().map(String::from).collect();
        let mut out = CachedQuery::new(expr, self.location.clone());
        out.last_used = self.last_used.clone();
        out.freq = self.freq.clone();
        out.co_queried = self.co_queried.clone();
        out.idle_windows = self.idle_windows;
        out.window.co_queried = self.window.co_queried.clone();
        out.window.hits = self
            .window
            .hits
            .iter()
            .filter_map(|h| {
                let kept: BTreeSet<String> = h
                    .leaves
                    .iter()
                    .filter(|l| leaves.contains(*l))
                    .cloned()
                    .collect();
                (!kept.is_empty()).then(|| Hit {
                    user_loc: h.user_loc.clone(),
                    leaves: kept,
                })
            })
            .collect();
        out
    }
}

/// Exponential aging of access counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aging {
    /// Weight kept per elapsed period.
    pub decay: f64,
    /// Length of one period in clock ticks.
    pub period: f64,
}

impl Default for Aging {
    fn default() -> Self {
        Self {
            decay: 0.9,
            period: 1.0,
        }
    }
}

/// Issues fresh object ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdSource {
    prefix: String,
    next: u64,
}

impl IdSource {
    pub fn new(prefix: impl Into<String>) -> Self {
        Self {
            prefix: prefix.into(),
            next: 1,
        }
    }

    pub fn fresh(&mut self) -> String {
        let id = format!("{}{}", self.prefix, self.next);
        self.next += 1;
        id
    }
}

impl Default for IdSource {
    fn default() -> Self {
        Self::new("cq")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Admission {
    /// Objects displaced to make room, lowest score first.
    pub evicted: Vec<CachedQuery>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheUnit {
    id: String,
    capacity_gb: f64,
    entries: BTreeMap<String, CachedQuery>,
    pub aging: Aging,
}

impl CacheUnit {
    pub fn new(id: impl Into<String>, capacity_gb: f64) -> Self {
        Self {
            id: id.into(),
            capacity_gb,
            entries: BTreeMap::new(),
            aging: Aging::default(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn capacity_gb(&self) -> f64 {
        self.capacity_gb
    }

    pub fn used_gb(&self) -> f64 {
        self.entries.values().map(|e| e.volume_gb).sum()
    }

    pub fn free_gb(&self) -> f64 {
        self.capacity_gb - self.used_gb()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in id order.
    pub fn entries(&self) -> impl Iterator<Item = &CachedQuery> {
        self.entries.values()
    }

    pub fn get(&self, id: &str) -> Option<&CachedQuery> {
        self.entries.get(id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut CachedQuery> {
        self.entries.get_mut(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn remove(&mut self, id: &str) -> Option<CachedQuery> {
        self.entries.remove(id)
    }

    /// Stores `c`, evicting the lowest-scoring entries first if space is
    /// short.
    pub fn admit(&mut self, c: CachedQuery, now: f64) -> Result<Admission, CacheError> {
        self.admit_with(c, now, &|_| true)
    }

    /// Like [`admit`](Self::admit) but only entries accepted by `evictable`
    /// may be displaced. Nothing changes when admission fails.
    pub fn admit_with(
        &mut self,
        mut c: CachedQuery,
        now: f64,
        evictable: &dyn Fn(&CachedQuery) -> bool,
    ) -> Result<Admission, CacheError> {
        if c.volume_gb > self.capacity_gb {
            return Err(CacheError::Oversize {
                volume: c.volume_gb,
                capacity: self.capacity_gb,
            });
        }
        if self.entries.contains_key(c.id()) {
            return Err(CacheError::DuplicateId(c.id().into()));
        }
        let victims = self.victims(c.volume_gb, now, evictable)?;
        let evicted = victims
            .iter()
            .filter_map(|id| self.entries.remove(id))
            .collect();
        c.set_location(&self.id);
        self.entries.insert(c.id().into(), c);
        Ok(Admission { evicted })
    }

    /// Ids to evict so that `needed` GB fit, in eviction order.
    fn victims(
        &self,
        needed: f64,
        now: f64,
        evictable: &dyn Fn(&CachedQuery) -> bool,
    ) -> Result<Vec<String>, CacheError> {
        let mut free = self.free_gb();
        if needed <= free {
            return Ok(Vec::new());
        }
        let mut ranked: Vec<(f64, &CachedQuery)> = self
            .entries
            .values()
            .filter(|e| evictable(e))
            .map(|e| (e.score(now, self.aging), e))
            .collect();
        ranked.sort_by(eviction_order);
        let mut out = Vec::new();
        for (_, e) in ranked {
            if needed <= free {
                break;
            }
            free += e.volume_gb;
            out.push(e.id().into());
        }
        if needed <= free {
            Ok(out)
        } else {
            Err(CacheError::InsufficientSpace {
                unit: self.id.clone(),
                needed,
            })
        }
    }

    /// Evicts lowest-scoring entries until usage fits the capacity.
    pub fn shrink_to_fit(&mut self, now: f64) -> Vec<CachedQuery> {
        let mut ranked: Vec<(f64, &CachedQuery)> = self
            .entries
            .values()
            .map(|e| (e.score(now, self.aging), e))
            .collect();
        ranked.sort_by(eviction_order);
        let mut over = self.used_gb() - self.capacity_gb;
        let mut ids = Vec::new();
        for (_, e) in ranked {
            if over <= 0.0 {
                break;
            }
            over -= e.volume_gb;
            ids.push(String::from(e.id()));
        }
        ids.iter()
            .filter_map(|id| self.entries.remove(id))
            .collect()
    }

    /// Σ over distinct leaves of (copies − 1) × leaf volume.
    pub fn duplication_overhead(&self) -> f64 {
        duplication_overhead(self.entries.values())
    }

    /// One maintenance pass over the current window: fragments entries
    /// whose parts are used independently, merges entries that are queried
    /// together, lists idle entries as eviction candidates and proposes
    /// relocations toward the dominant demand. The window is closed
    /// afterwards.
    pub fn maintenance_pass(
        &mut self,
        topology: &Topology,
        params: &MaintenanceParams,
        ids: &mut IdSource,
        now: f64,
    ) -> Vec<MaintenanceAction> {
        let mut actions = Vec::new();

        // fragment
        let mut fragmented = BTreeSet::new();
        let current: Vec<String> = self.entries.keys().cloned().collect();
        for id in &current {
            let entry = &self.entries[id];
            let parts = split(entry.expr.root(), &entry.window.hits, params.theta_freq);
            if parts.len() < 2 {
                continue;
            }
            let entry = self.entries.remove(id).expect("listed above");
            let mut names = Vec::new();
            for part in parts {
                let name = ids.fresh();
                let tree =
                    QueryEvaluationTree::new(name.clone(), part).expect("sub-tree of a valid tree");
                self.entries.insert(name.clone(), entry.derive(tree));
                fragmented.insert(name.clone());
                names.push(name);
            }
            actions.push(MaintenanceAction::Fragment {
                entry: id.clone(),
                fragments: names,
            });
        }

        // aggregate
        let mut pairs = Vec::new();
        for (a, ea) in &self.entries {
            if fragmented.contains(a) {
                continue;
            }
            for (b, &n) in &ea.window.co_queried {
                if a < b && n >= params.theta_assoc && !fragmented.contains(b) {
                    if let Some(eb) = self.entries.get(b) {
                        if ea.complexity() + eb.complexity() <= params.max_aggregate_leaves
                            && disjoint_leaves(ea, eb)
                        {
                            pairs.push((a.clone(), b.clone()));
                        }
                    }
                }
            }
        }
        let mut consumed = BTreeSet::new();
        for (a, b) in &pairs {
            let (ea, eb) = (&self.entries[a], &self.entries[b]);
            let name = ids.fresh();
            let root = QetNode::op(
                Operator::Par,
                alloc::vec![ea.expr.root().clone(), eb.expr.root().clone()],
            )
            .expect("two children");
            let tree = QueryEvaluationTree::new(name.clone(), root).expect("disjoint leaves");
            let merged = merge_metadata(ea, eb, tree);
            consumed.insert(a.clone());
            consumed.insert(b.clone());
            actions.push(MaintenanceAction::Aggregate {
                entries: [a.clone(), b.clone()],
                merged: name.clone(),
            });
            self.entries.insert(name, merged);
        }
        for id in &consumed {
            self.entries.remove(id);
        }
        for e in self.shrink_to_fit(now) {
            actions.push(MaintenanceAction::Displace {
                entry: e.id().into(),
            });
        }

        // evict candidates and relocation proposals
        for (id, e) in &self.entries {
            if e.window.hits.is_empty() {
                actions.push(MaintenanceAction::Evict {
                    entry: id.clone(),
                    idle_windows: e.idle_windows + 1,
                });
                continue;
            }
            let demand = e.window.demand();
            let Some((top, _)) = demand.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            else {
                continue;
            };
            let here = topology.hops(top, &self.id);
            if let Some(near) = topology.home_unit(top) {
                let closer = match (topology.hops(top, near), here) {
                    (Some(a), Some(b)) => a < b,
                    (Some(_), None) => true,
                    _ => false,
                };
                if near != self.id && closer {
                    actions.push(MaintenanceAction::Relocate {
                        entry: id.clone(),
                        demand,
                    });
                }
            }
        }
        for e in self.entries.values_mut() {
            e.close_window();
        }
        actions
    }
}

fn eviction_order(a: &(f64, &CachedQuery), b: &(f64, &CachedQuery)) -> core::cmp::Ordering {
    a.0.total_cmp(&b.0)
        .then_with(|| {
            let (x, y) = (
                a.1.most_recent_use().unwrap_or(f64::NEG_INFINITY),
                b.1.most_recent_use().unwrap_or(f64::NEG_INFINITY),
            );
            x.total_cmp(&y)
        })
        .then_with(|| a.1.id().cmp(b.1.id()))
}

/// Σ over distinct leaves of (copies − 1) × leaf volume, across `entries`.
pub fn duplication_overhead<'a>(entries: impl IntoIterator<Item = &'a CachedQuery>) -> f64 {
    let mut seen: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for e in entries {
        for leaf in e.expr.leaves() {
            let slot = seen
                .entry(leaf.id())
                .or_insert((0, leaf.semantics().volume_gb()));
            slot.0 += 1;
        }
    }
    seen.values().map(|&(n, v)| (n - 1) as f64 * v).sum()
}

fn disjoint_leaves(a: &CachedQuery, b: &CachedQuery) -> bool {
    let ours: BTreeSet<&str> = a.expr.leaf_ids().into_iter().collect();
    b.expr.leaf_ids().iter().all(|l| !ours.contains(l))
}

fn merge_metadata(a: &CachedQuery, b: &CachedQuery, expr: QueryEvaluationTree) -> CachedQuery {
    let mut out = CachedQuery::new(expr, a.location.clone());
    for src in [a, b] {
        for (loc, &t) in &src.last_used {
            let slot = out.last_used.entry(loc.clone()).or_insert(t);
            *slot = slot.max(t);
        }
        for (loc, &f) in &src.freq {
            *out.freq.entry(loc.clone()).or_insert(0) += f;
        }
        for (other, &n) in &src.co_queried {
            if other != a.id() && other != b.id() {
                *out.co_queried.entry(other.clone()).or_insert(0) += n;
            }
        }
        out.window.hits.extend(src.window.hits.iter().cloned());
    }
    out
}

/// Splits `node` wherever some child was used at least `theta` times by
/// accesses that did not need the whole node.
fn split(node: &QetNode, hits: &[Hit], theta: u64) -> Vec<QetNode> {
    if node.is_leaf() {
        return alloc::vec![node.clone()];
    }
    let all: BTreeSet<&str> = node.leaves().into_iter().map(QetNode::id).collect();
    let partial: Vec<&Hit> = hits
        .iter()
        .filter(|h| !all.iter().all(|l| h.leaves.contains(*l)))
        .collect();
    let independent = node.children().iter().any(|c| {
        let mine: BTreeSet<&str> = c.leaves().into_iter().map(QetNode::id).collect();
        let n = partial
            .iter()
            .filter(|h| h.leaves.iter().any(|l| mine.contains(l.as_str())))
            .count();
        n as u64 >= theta
    });
    if independent {
        node.children()
            .iter()
            .flat_map(|c| split(c, hits, theta))
            .collect()
    } else {
        alloc::vec![node.clone()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaintenanceParams {
    /// Independent uses of a part that trigger fragmentation.
    pub theta_freq: u64,
    /// Co-occurrences that trigger aggregation.
    pub theta_assoc: u64,
    /// Largest object aggregation may produce, in leaves.
    pub max_aggregate_leaves: usize,
}

impl Default for MaintenanceParams {
    fn default() -> Self {
        Self {
            theta_freq: 5,
            theta_assoc: 5,
            max_aggregate_leaves: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MaintenanceAction {
    Fragment {
        entry: String,
        fragments: Vec<String>,
    },
    Aggregate {
        entries: [String; 2],
        merged: String,
    },
    /// Evicted to bring the unit back within capacity after aggregation.
    Displace { entry: String },
    /// Not accessed in the window; `idle_windows` counts this window.
    Evict { entry: String, idle_windows: u32 },
    /// Most window demand comes from a location closer to another unit.
    Relocate {
        entry: String,
        demand: BTreeMap<String, u64>,
    },
}
