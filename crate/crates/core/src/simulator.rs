//! Epoch-driven simulation of caching policies over a cache network.
//!
//! Events are processed in timestamp order on a logical clock; service
//! costs are accounted per query rather than simulated as queueing. After
//! each epoch the policy runs its maintenance and the epoch's metrics are
//! recorded.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cache::{Aging, CachedQuery, IdSource, MaintenanceAction, MaintenanceParams};
use crate::matching::{answerable, search_cache, SearchStatus};
use crate::placement::{
    greedy_place_for, relocate, CacheNetwork, NetworkSpec, PlacementError, TransferKind,
    TransferLedger, TransferRecord, TransferStatus,
};
use crate::query::{QetNode, SemanticDescriptor};
use crate::workload::{generate, QueryEvent, WorkloadConfig, WorkloadError, DATA_SERVERS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("event {index} is earlier than its predecessor")]
    Unsorted { index: usize },
    #[error("user location {0} is not part of the network")]
    UnknownUser(String),
    #[error("negative cost constant {0}")]
    NegativeCost(&'static str),
    #[error("repeats must be at least 1")]
    NoRepeats,
    #[error("no policies selected")]
    NoPolicies,
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
}

/// Tick costs of the response-time model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    pub lookup_ticks: f64,
    pub retrieval_ticks_per_gb: f64,
    /// Data-server processing per missed GB.
    pub server_process_per_gb: f64,
    /// Network transfer per GB, for misses and for inter-cache transfers.
    pub network_ticks_per_gb: f64,
    pub query_proc_ticks: f64,
    /// Extra processing per sub-query; zero keeps processing per query.
    pub query_proc_per_leaf_ticks: f64,
    pub inter_cache_per_hop_ticks: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            lookup_ticks: 1.0,
            retrieval_ticks_per_gb: 1.0,
            server_process_per_gb: 2.0,
            network_ticks_per_gb: 1.0,
            query_proc_ticks: 1.0,
            query_proc_per_leaf_ticks: 0.0,
            inter_cache_per_hop_ticks: 1.0,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<(), SimError> {
        let fields = [
            (self.lookup_ticks, "lookup_ticks"),
            (self.retrieval_ticks_per_gb, "retrieval_ticks_per_gb"),
            (self.server_process_per_gb, "server_process_per_gb"),
            (self.network_ticks_per_gb, "network_ticks_per_gb"),
            (self.query_proc_ticks, "query_proc_ticks"),
            (self.query_proc_per_leaf_ticks, "query_proc_per_leaf_ticks"),
            (self.inter_cache_per_hop_ticks, "inter_cache_per_hop_ticks"),
        ];
        match fields.iter().find(|(v, _)| !(*v >= 0.0)) {
            Some((_, name)) => Err(SimError::NegativeCost(name)),
            None => Ok(()),
        }
    }
}

/// What serving one query cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub found_gb: f64,
    pub missed_gb: f64,
    /// Σ hops from the user to each cache unit that contributed data.
    pub hops: u32,
    pub found_leaves: usize,
    pub missed_leaves: usize,
    pub status: SearchStatus,
}

/// lookup + found × retrieval + missed × (server + network) + processing
/// + hops × per-hop.
pub fn response_time(o: &QueryOutcome, cm: &CostModel) -> f64 {
    let leaves = (o.found_leaves + o.missed_leaves) as f64;
    cm.lookup_ticks
        + o.found_gb * cm.retrieval_ticks_per_gb
        + o.missed_gb * cm.server_process_per_gb
        + o.missed_gb * cm.network_ticks_per_gb
        + cm.query_proc_ticks
        + leaves * cm.query_proc_per_leaf_ticks
        + f64::from(o.hops) * cm.inter_cache_per_hop_ticks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Sqf,
    SemanticCache,
    FullQuery,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [
        PolicyKind::Sqf,
        PolicyKind::SemanticCache,
        PolicyKind::FullQuery,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Sqf => "sqf",
            PolicyKind::SemanticCache => "semantic",
            PolicyKind::FullQuery => "full_query",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sqf" => Some(PolicyKind::Sqf),
            "semantic" | "sc" | "semantic_cache" => Some(PolicyKind::SemanticCache),
            "full_query" | "fq" | "full" => Some(PolicyKind::FullQuery),
            _ => None,
        }
    }
}

/// A caching policy driven by the simulator.
pub trait CachePolicy {
    fn kind(&self) -> PolicyKind;
    /// Serves one query, updating cache state; inter-cache transfers made
    /// to answer it go to `ledger`.
    fn on_query(
        &mut self,
        event: &QueryEvent,
        net: &mut CacheNetwork,
        ledger: &mut TransferLedger,
    ) -> QueryOutcome;
    /// End-of-epoch maintenance at clock `now`.
    fn on_maintenance(&mut self, net: &mut CacheNetwork, now: f64, ledger: &mut TransferLedger);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SqfParams {
    pub maintenance: MaintenanceParams,
    /// Idle windows after which an object is dropped.
    pub evict_after_idle: u32,
    pub relocate: bool,
}

impl Default for SqfParams {
    fn default() -> Self {
        Self {
            maintenance: MaintenanceParams::default(),
            evict_after_idle: 2,
            relocate: true,
        }
    }
}

/// Sub-query fragmentation: leaf-level containment search, remainder
/// caching, and demand-driven fragmentation, aggregation, eviction and
/// relocation between epochs.
#[derive(Debug, Clone)]
pub struct Sqf {
    pub params: SqfParams,
    ids: IdSource,
}

impl Sqf {
    pub fn new(params: SqfParams) -> Self {
        Self {
            params,
            ids: IdSource::new("sqf-"),
        }
    }
}

/// Distributed semantic caching: the same containment search and remainder
/// caching as SQF, but cached segments keep their initial shape and place.
#[derive(Debug, Clone)]
pub struct SemanticCache {
    ids: IdSource,
}

impl SemanticCache {
    pub fn new() -> Self {
        Self {
            ids: IdSource::new("sc-"),
        }
    }
}

impl Default for SemanticCache {
    fn default() -> Self {
        Self::new()
    }
}

/// Whole result sets cached as single objects at one location; hits only
/// on equivalent queries.
#[derive(Debug, Clone)]
pub struct FullQuery {
    ids: IdSource,
    site: Option<String>,
}

impl FullQuery {
    pub fn new() -> Self {
        Self {
            ids: IdSource::new("fq-"),
            site: None,
        }
    }

    /// The unit holding all results: the greedy placement for one access
    /// from every user location.
    pub fn site(&mut self, net: &CacheNetwork) -> String {
        self.site
            .get_or_insert_with(|| {
                let demand = net
                    .topology
                    .user_locations()
                    .map(|u| (String::from(u), 1))
                    .collect();
                greedy_place_for(&demand, 0.0, net).expect("network has units")
            })
            .clone()
    }
}

impl Default for FullQuery {
    fn default() -> Self {
        Self::new()
    }
}

pub fn make_policy(kind: PolicyKind, sqf: SqfParams) -> alloc::boxed::Box<dyn CachePolicy> {
    match kind {
        PolicyKind::Sqf => alloc::boxed::Box::new(Sqf::new(sqf)),
        PolicyKind::SemanticCache => alloc::boxed::Box::new(SemanticCache::new()),
        PolicyKind::FullQuery => alloc::boxed::Box::new(FullQuery::new()),
    }
}

/// Containment search, access recording, remote-serving transfers and
/// remainder admission shared by SQF and semantic caching.
fn serve_by_containment(
    event: &QueryEvent,
    net: &mut CacheNetwork,
    ledger: &mut TransferLedger,
    ids: &mut IdSource,
) -> QueryOutcome {
    let user = event.user_loc.as_str();
    let tree = &event.tree;
    let outcome = search_cache(tree, net, Some(user));
    let volume: BTreeMap<&str, f64> = tree
        .leaves()
        .into_iter()
        .map(|l| (l.id(), l.semantics().volume_gb()))
        .collect();

    // per answering object: its unit, probe volume served, own leaves used
    let mut answering: BTreeMap<String, (String, f64, BTreeSet<String>)> = BTreeMap::new();
    for c in &outcome.contained {
        let slot = answering
            .entry(c.cached_query.clone())
            .or_insert_with(|| (c.unit.clone(), 0.0, BTreeSet::new()));
        slot.1 += volume[c.sub_query.as_str()];
        let entry = net.find(&c.cached_query).expect("search result is cached");
        let node = entry.expr().node(&c.node).expect("answering node exists");
        let used = narrowest(
            node,
            tree.leaf(&c.sub_query).expect("probe leaf").semantics(),
        );
        slot.2
            .extend(used.leaves().into_iter().map(|l| String::from(l.id())));
    }
    let remainder_id = (!outcome.remainder.is_empty()).then(|| ids.fresh());
    let mut companions: Vec<&str> = answering.keys().map(String::as_str).collect();
    if let Some(r) = &remainder_id {
        companions.push(r);
    }

    let mut hops = 0;
    let mut found_gb = 0.0;
    for (id, (unit, served, leaves)) in &answering {
        let entry = net.find_mut(id).expect("search result is cached");
        entry
            .record_hit(user, event.ts, &companions, leaves.clone())
            .expect("events are time ordered");
        let h = net.topology.hops(user, unit).expect("validated user");
        hops += h;
        found_gb += served;
        if h > 0 {
            ledger.push(TransferRecord {
                kind: TransferKind::Serve,
                entry: id.clone(),
                from: unit.clone(),
                to: String::from(net.topology.home_unit(user).expect("network has units")),
                volume_gb: *served,
                hops: h,
                status: TransferStatus::Moved,
                evicted: Vec::new(),
            });
        }
    }

    let mut missed_gb = 0.0;
    if let Some(rid) = remainder_id {
        missed_gb = outcome.remainder.iter().map(|l| volume[l.as_str()]).sum();
        let keep: BTreeSet<&str> = outcome.remainder.iter().map(String::as_str).collect();
        if let Some(part) = tree.prune(rid, &|l| keep.contains(l)) {
            let others: Vec<&str> = answering.keys().map(String::as_str).collect();
            admit_near(net, CachedQuery::new(part, ""), user, event.ts, &others);
        }
    }
    QueryOutcome {
        found_gb,
        missed_gb,
        hops,
        found_leaves: outcome.contained.len(),
        missed_leaves: outcome.remainder.len(),
        status: outcome.status,
    }
}

/// The deepest node under `node` that still answers `probe`: the parts of
/// a cached object a hit actually reads.
fn narrowest<'a>(mut node: &'a QetNode, probe: &SemanticDescriptor) -> &'a QetNode {
    while let Some(child) = node
        .children()
        .iter()
        .find(|c| answerable(probe, c.semantics()) == Ok(true))
    {
        node = child;
    }
    node
}

/// Caches a new object near the user, counting the admitting access: the
/// nearest unit with room for it, or else the user's home unit after
/// eviction. Objects named in `protect` are not displaced.
fn admit_near(
    net: &mut CacheNetwork,
    mut object: CachedQuery,
    user: &str,
    ts: f64,
    protect: &[&str],
) {
    object
        .record_access(user, ts, protect)
        .expect("fresh object");
    let volume = object.volume_gb();
    let target = net
        .units
        .iter()
        .filter(|u| u.free_gb() >= volume)
        .filter_map(|u| Some((net.topology.hops(user, u.id())?, u.id())))
        .min()
        .map(|(_, id)| String::from(id))
        .unwrap_or_else(|| String::from(net.topology.home_unit(user).expect("network has units")));
    let unit = net.unit_mut(&target).expect("target is a unit");
    let _ = unit.admit_with(object, ts, &|e| !protect.contains(&e.id()));
}

impl CachePolicy for Sqf {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Sqf
    }

    fn on_query(
        &mut self,
        event: &QueryEvent,
        net: &mut CacheNetwork,
        ledger: &mut TransferLedger,
    ) -> QueryOutcome {
        serve_by_containment(event, net, ledger, &mut self.ids)
    }

    fn on_maintenance(&mut self, net: &mut CacheNetwork, now: f64, ledger: &mut TransferLedger) {
        let mut proposals = Vec::new();
        for i in 0..net.units.len() {
            let (topology, units) = (&net.topology, &mut net.units);
            let unit = &mut units[i];
            for action in
                unit.maintenance_pass(topology, &self.params.maintenance, &mut self.ids, now)
            {
                match action {
                    MaintenanceAction::Evict {
                        entry,
                        idle_windows,
                    } if idle_windows >= self.params.evict_after_idle => {
                        unit.remove(&entry);
                    }
                    MaintenanceAction::Relocate { entry, demand } => {
                        proposals.push((entry, demand))
                    }
                    _ => {}
                }
            }
        }
        if !self.params.relocate {
            return;
        }
        for (entry, demand) in proposals {
            let Some(object) = net.find(&entry) else {
                continue;
            };
            let (current, volume) = (String::from(object.location()), object.volume_gb());
            let Ok(dest) = greedy_place_for(&demand, volume, net) else {
                continue;
            };
            let cost = |unit: &str| -> u64 {
                demand
                    .iter()
                    .map(|(loc, &f)| {
                        f * u64::from(net.topology.hops(loc, unit).unwrap_or(u32::MAX))
                    })
                    .sum()
            };
            if dest != current && cost(&dest) < cost(&current) {
                if let Ok(record) = relocate(net, &entry, &dest, now) {
                    ledger.push(record);
                }
            }
        }
    }
}

impl CachePolicy for SemanticCache {
    fn kind(&self) -> PolicyKind {
        PolicyKind::SemanticCache
    }

    fn on_query(
        &mut self,
        event: &QueryEvent,
        net: &mut CacheNetwork,
        ledger: &mut TransferLedger,
    ) -> QueryOutcome {
        serve_by_containment(event, net, ledger, &mut self.ids)
    }

    fn on_maintenance(&mut self, net: &mut CacheNetwork, _now: f64, _ledger: &mut TransferLedger) {
        close_windows(net);
    }
}

impl CachePolicy for FullQuery {
    fn kind(&self) -> PolicyKind {
        PolicyKind::FullQuery
    }

    fn on_query(
        &mut self,
        event: &QueryEvent,
        net: &mut CacheNetwork,
        ledger: &mut TransferLedger,
    ) -> QueryOutcome {
        let user = event.user_loc.as_str();
        let tree = &event.tree;
        let total = tree.leaf_volume_gb();
        let leaves = tree.complexity();
        let probe = tree.root().semantics();
        let hit = net
            .search_order(Some(user))
            .into_iter()
            .find(|e| e.expr().root().semantics().same_content(probe))
            .map(|e| (String::from(e.id()), String::from(e.location())));
        match hit {
            Some((id, unit)) => {
                net.find_mut(&id)
                    .expect("just found")
                    .record_access(user, event.ts, &[])
                    .expect("events are time ordered");
                let h = net.topology.hops(user, &unit).expect("validated user");
                if h > 0 {
                    ledger.push(TransferRecord {
                        kind: TransferKind::Serve,
                        entry: id,
                        from: unit,
                        to: String::from(net.topology.home_unit(user).expect("network has units")),
                        volume_gb: total,
                        hops: h,
                        status: TransferStatus::Moved,
                        evicted: Vec::new(),
                    });
                }
                QueryOutcome {
                    found_gb: total,
                    missed_gb: 0.0,
                    hops: h,
                    found_leaves: leaves,
                    missed_leaves: 0,
                    status: SearchStatus::FullyFound,
                }
            }
            None => {
                let mut object = CachedQuery::new(tree.renamed(self.ids.fresh()), "");
                object
                    .record_access(user, event.ts, &[])
                    .expect("fresh object");
                let site = self.site(net);
                let _ = net
                    .unit_mut(&site)
                    .expect("site is a unit")
                    .admit(object, event.ts);
                QueryOutcome {
                    found_gb: 0.0,
                    missed_gb: total,
                    hops: 0,
                    found_leaves: 0,
                    missed_leaves: leaves,
                    status: SearchStatus::NotFound,
                }
            }
        }
    }

    fn on_maintenance(&mut self, net: &mut CacheNetwork, _now: f64, _ledger: &mut TransferLedger) {
        close_windows(net);
    }
}

fn close_windows(net: &mut CacheNetwork) {
    for unit in &mut net.units {
        let ids: Vec<String> = unit.entries().map(|e| String::from(e.id())).collect();
        for id in ids {
            unit.get_mut(&id).expect("listed").close_window();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochResult {
    /// One-based.
    pub epoch: usize,
    pub queries: usize,
    pub avg_response_ticks: f64,
    pub pct_data_found: f64,
    /// Average inter-cache transfer cost of the epoch's transfers.
    pub inter_cache_cost: f64,
    /// Objects moved by maintenance.
    pub relocations: usize,
    /// All inter-cache transfers, serving and relocation.
    pub transfers: usize,
    pub duplication_gb: f64,
    /// Sub-queries that had to go to the data servers.
    pub cache_faults: usize,
}

/// Processes one epoch of events, then runs the policy's maintenance.
pub fn run_epoch(
    policy: &mut dyn CachePolicy,
    events: &[QueryEvent],
    net: &mut CacheNetwork,
    cm: &CostModel,
    epoch: usize,
) -> Result<EpochResult, SimError> {
    if let Some(i) = (1..events.len()).find(|&i| events[i].ts < events[i - 1].ts) {
        return Err(SimError::Unsorted { index: i });
    }
    if let Some(e) = events.iter().find(|e| {
        net.topology.home_unit(&e.user_loc).is_none() || net.topology.kind(&e.user_loc).is_none()
    }) {
        return Err(SimError::UnknownUser(e.user_loc.clone()));
    }
    let mut ledger = TransferLedger::default();
    let (mut ticks, mut found, mut missed, mut faults) = (0.0, 0.0, 0.0, 0);
    for e in events {
        let o = policy.on_query(e, net, &mut ledger);
        ticks += response_time(&o, cm);
        found += o.found_gb;
        missed += o.missed_gb;
        faults += o.missed_leaves;
    }
    let now = events.last().map_or(0.0, |e| e.ts);
    policy.on_maintenance(net, now, &mut ledger);
    ticks += ledger.relocation_hop_ticks(cm.inter_cache_per_hop_ticks);
    let n = events.len();
    Ok(EpochResult {
        epoch,
        queries: n,
        avg_response_ticks: if n == 0 { 0.0 } else { ticks / n as f64 },
        pct_data_found: if found + missed > 0.0 {
            100.0 * (found / (found + missed))
        } else {
            0.0
        },
        inter_cache_cost: ledger.cost(cm.network_ticks_per_gb),
        relocations: ledger.relocations(),
        transfers: ledger.delta_n(),
        duplication_gb: net.duplication_overhead(),
        cache_faults: faults,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub workload: WorkloadConfig,
    pub network: NetworkSpec,
    pub cost: CostModel,
    pub sqf: SqfParams,
    /// Score decay per workload window.
    pub decay: f64,
    pub policies: Vec<PolicyKind>,
    pub epochs: usize,
    pub repeats: usize,
    pub base_seed: u64,
    /// Seed of repeat r is `base_seed + r × seed_stride`.
    pub seed_stride: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            workload: WorkloadConfig::default(),
            network: NetworkSpec::default(),
            cost: CostModel::default(),
            sqf: SqfParams::default(),
            decay: 0.9,
            policies: PolicyKind::ALL.to_vec(),
            epochs: 14,
            repeats: 8,
            base_seed: 1,
            seed_stride: 1,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        self.workload.validate()?;
        self.cost.validate()?;
        if self.repeats == 0 {
            return Err(SimError::NoRepeats);
        }
        if self.policies.is_empty() {
            return Err(SimError::NoPolicies);
        }
        self.build_network()?;
        Ok(())
    }

    pub fn repeat_seed(&self, repeat: usize) -> u64 {
        self.base_seed
            .wrapping_add((repeat as u64).wrapping_mul(self.seed_stride))
    }

    /// A fresh, empty network for one run.
    pub fn build_network(&self) -> Result<CacheNetwork, SimError> {
        let mut net = self
            .network
            .build(&self.workload.user_locations, &DATA_SERVERS)?;
        for u in &mut net.units {
            u.aging = Aging {
                decay: self.decay,
                period: self.workload.window_duration,
            };
        }
        for user in &self.workload.user_locations {
            if net.topology.kind(user).is_none() {
                return Err(SimError::UnknownUser(user.clone()));
            }
        }
        Ok(net)
    }
}

/// One policy's epoch series in one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRun {
    pub policy: PolicyKind,
    pub repeat: usize,
    pub seed: u64,
    pub epochs: Vec<EpochResult>,
}

/// Runs one policy over the given events from an empty cache; returns its
/// epoch series and the final cache network.
pub fn run_policy(
    scenario: &Scenario,
    kind: PolicyKind,
    events: &[QueryEvent],
    repeat: usize,
    seed: u64,
) -> Result<(PolicyRun, CacheNetwork), SimError> {
    let per = scenario.workload.queries_per_window.max(1);
    let mut net = scenario.build_network()?;
    let mut policy = make_policy(kind, scenario.sqf);
    let mut epochs = Vec::new();
    for (i, chunk) in events.chunks(per).enumerate() {
        epochs.push(run_epoch(
            policy.as_mut(),
            chunk,
            &mut net,
            &scenario.cost,
            i + 1,
        )?);
    }
    let run = PolicyRun {
        policy: kind,
        repeat,
        seed,
        epochs,
    };
    Ok((run, net))
}

/// Runs every policy over the given events from an empty cache.
pub fn run_policies(
    scenario: &Scenario,
    events: &[QueryEvent],
    repeat: usize,
    seed: u64,
) -> Result<Vec<PolicyRun>, SimError> {
    scenario
        .policies
        .iter()
        .map(|&kind| run_policy(scenario, kind, events, repeat, seed).map(|(run, _)| run))
        .collect()
}

/// All policies for one repeat, on the workload generated from that
/// repeat's seed.
pub fn run_repeat(scenario: &Scenario, repeat: usize) -> Result<Vec<PolicyRun>, SimError> {
    let seed = scenario.repeat_seed(repeat);
    let workload = WorkloadConfig {
        seed,
        ..scenario.workload.clone()
    };
    let events = generate(&workload, scenario.epochs)?;
    run_policies(scenario, &events, repeat, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    AvgResponse,
    PctFound,
    IntercacheCost,
    Relocations,
    DuplicationGb,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::AvgResponse,
        Metric::PctFound,
        Metric::IntercacheCost,
        Metric::Relocations,
        Metric::DuplicationGb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::AvgResponse => "avg_response",
            Metric::PctFound => "pct_found",
            Metric::IntercacheCost => "intercache_cost",
            Metric::Relocations => "relocations",
            Metric::DuplicationGb => "duplication_gb",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub fn of(self, r: &EpochResult) -> f64 {
        match self {
            Metric::AvgResponse => r.avg_response_ticks,
            Metric::PctFound => r.pct_data_found,
            Metric::IntercacheCost => r.inter_cache_cost,
            Metric::Relocations => r.relocations as f64,
            Metric::DuplicationGb => r.duplication_gb,
        }
    }
}

/// Mean and standard error of one metric at one epoch across repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub policy: PolicyKind,
    pub metric: Metric,
    pub epoch: usize,
    pub mean: f64,
    /// Sample standard deviation over √n; zero for a single repeat.
    pub stderr: f64,
    pub repeats: usize,
}

pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    // identical samples are reported exactly, without summation rounding
    if values.iter().all(|v| *v == values[0]) {
        return (values[0], 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, libm::sqrt(var) / libm::sqrt(n as f64))
}

/// Per policy, metric and epoch: mean and standard error over repeats.
/// Points are ordered by policy (first appearance), metric, epoch.
pub fn summarize(runs: &[PolicyRun]) -> Vec<SeriesPoint> {
    let mut policies: Vec<PolicyKind> = Vec::new();
    for r in runs {
        if !policies.contains(&r.policy) {
            policies.push(r.policy);
        }
    }
    let mut out = Vec::new();
    for &policy in &policies {
        let mine: Vec<&PolicyRun> = runs.iter().filter(|r| r.policy == policy).collect();
        let epochs = mine.iter().map(|r| r.epochs.len()).max().unwrap_or(0);
        for metric in Metric::ALL {
            for e in 0..epochs {
                let values: Vec<f64> = mine
                    .iter()
                    .filter_map(|r| r.epochs.get(e))
                    .map(|r| metric.of(r))
                    .collect();
                let (mean, stderr) = mean_stderr(&values);
                out.push(SeriesPoint {
                    policy,
                    metric,
                    epoch: e + 1,
                    mean,
                    stderr,
                    repeats: values.len(),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub runs: Vec<PolicyRun>,
    pub series: Vec<SeriesPoint>,
}

/// Runs all repeats in sequence and aggregates them.
pub fn run_experiment(scenario: &Scenario) -> Result<ExperimentResult, SimError> {
    scenario.validate()?;
    let mut runs = Vec::new();
    for r in 0..scenario.repeats {
        runs.extend(run_repeat(scenario, r)?);
    }
    let series = summarize(&runs);
    Ok(ExperimentResult { runs, series })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(found: f64, missed: f64, hops: u32) -> QueryOutcome {
        QueryOutcome {
            found_gb: found,
            missed_gb: missed,
            hops,
            found_leaves: 1,
            missed_leaves: 0,
            status: SearchStatus::FullyFound,
        }
    }

    #[test]
    fn response_terms() {
        let cm = CostModel::default();
        assert_eq!(response_time(&outcome(5.0, 0.0, 0), &cm), 7.0);
        assert_eq!(response_time(&outcome(0.0, 5.0, 0), &cm), 17.0);
        assert_eq!(response_time(&outcome(0.0, 0.0, 0), &cm), 2.0);
        assert_eq!(response_time(&outcome(0.0, 0.0, 3), &cm), 5.0);
    }

    #[test]
    fn stderr_of_identical_values_is_zero() {
        assert_eq!(mean_stderr(&[2.0; 8]), (2.0, 0.0));
        let (m, s) = mean_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn policy_names_round_trip() {
        for p in PolicyKind::ALL {
            assert_eq!(PolicyKind::parse(p.as_str()), Some(p));
        }
        for m in Metric::ALL {
            assert_eq!(Metric::parse(m.as_str()), Some(m));
        }
    }
}
