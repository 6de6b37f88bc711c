//! Cache network topology, greedy placement of cached objects, relocation
//! and inter-cache transfer cost.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cache::{CacheUnit, CachedQuery};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlacementError {
    #[error("duplicate location {0}")]
    DuplicateLocation(String),
    #[error("unknown location {0}")]
    UnknownLocation(String),
    #[error("hop matrix must be {n}x{n}")]
    MatrixShape { n: usize },
    #[error("hop matrix is not a metric at ({a}, {b})")]
    NotSymmetric { a: String, b: String },
    #[error("locations {a} and {b} are not connected")]
    Disconnected { a: String, b: String },
    #[error("network has no cache units")]
    NoUnits,
    #[error("edge probability {0} is outside [0, 1]")]
    EdgeProbability(f64),
    #[error("no cache unit can hold {volume} GB")]
    NoFeasibleUnit { volume: f64 },
    #[error("{count} relocations but {volumes} volumes")]
    CountMismatch { count: usize, volumes: usize },
    #[error("no cached query {0}")]
    UnknownEntry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocationKind {
    Unit,
    User,
    Server,
}

/// Locations and hop distances between them.
///
/// User locations and data servers sit at the site of a cache unit (their
/// *home*), so their distance to every unit is the home's distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    names: Vec<String>,
    kinds: Vec<LocationKind>,
    index: BTreeMap<String, usize>,
    hops: Vec<u32>,
}

impl Topology {
    /// Explicit hop matrix over `units`, `users`, `servers` in that order.
    pub fn from_matrix(
        units: &[&str],
        users: &[&str],
        servers: &[&str],
        matrix: &[Vec<u32>],
    ) -> Result<Self, PlacementError> {
        let mut t = Self::skeleton(units, users, servers)?;
        let n = t.names.len();
        if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
            return Err(PlacementError::MatrixShape { n });
        }
        for (i, row) in matrix.iter().enumerate() {
            for (j, &h) in row.iter().enumerate() {
                if (i == j && h != 0) || h != matrix[j][i] {
                    return Err(PlacementError::NotSymmetric {
                        a: t.names[i].clone(),
                        b: t.names[j].clone(),
                    });
                }
                if h == u32::MAX {
                    return Err(PlacementError::Disconnected {
                        a: t.names[i].clone(),
                        b: t.names[j].clone(),
                    });
                }
                t.hops[i * n + j] = h;
            }
        }
        Ok(t)
    }

    /// Units joined by one-hop `edges` (pairs of unit indices); users and
    /// servers are placed at the unit index given with them.
    pub fn from_unit_edges(
        units: &[&str],
        edges: &[(usize, usize)],
        users: &[(&str, usize)],
        servers: &[(&str, usize)],
    ) -> Result<Self, PlacementError> {
        let user_names: Vec<&str> = users.iter().map(|u| u.0).collect();
        let server_names: Vec<&str> = servers.iter().map(|s| s.0).collect();
        let mut t = Self::skeleton(units, &user_names, &server_names)?;
        let k = units.len();
        let mut adj = vec![Vec::new(); k];
        for &(a, b) in edges {
            if a >= k || b >= k {
                return Err(PlacementError::UnknownLocation(alloc::format!(
                    "unit #{}",
                    a.max(b)
                )));
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        let unit_hops: Vec<Vec<u32>> = (0..k).map(|s| bfs(&adj, s)).collect();
        for i in 0..k {
            for j in 0..k {
                if unit_hops[i][j] == u32::MAX {
                    return Err(PlacementError::Disconnected {
                        a: units[i].into(),
                        b: units[j].into(),
                    });
                }
            }
        }
        let mut site: Vec<usize> = (0..k).collect();
        for &(_, u) in users.iter().chain(servers) {
            if u >= k {
                return Err(PlacementError::UnknownLocation(alloc::format!("unit #{u}")));
            }
            site.push(u);
        }
        let n = site.len();
        for i in 0..n {
            for j in 0..n {
                t.hops[i * n + j] = if i == j {
                    0
                } else {
                    unit_hops[site[i]][site[j]]
                };
            }
        }
        Ok(t)
    }

    /// Every pair of units one hop apart; users and servers are assigned to
    /// units round-robin.
    pub fn complete(
        units: &[&str],
        users: &[&str],
        servers: &[&str],
    ) -> Result<Self, PlacementError> {
        if units.is_empty() {
            return Err(PlacementError::NoUnits);
        }
        let k = units.len();
        let mut edges = Vec::new();
        for a in 0..k {
            for b in a + 1..k {
                edges.push((a, b));
            }
        }
        let users: Vec<(&str, usize)> =
            users.iter().enumerate().map(|(i, u)| (*u, i % k)).collect();
        let servers: Vec<(&str, usize)> = servers
            .iter()
            .enumerate()
            .map(|(i, s)| (*s, i % k))
            .collect();
        Self::from_unit_edges(units, &edges, &users, &servers)
    }

    /// Seeded random connected graph: a random spanning tree plus each
    /// remaining unit pair joined with probability `edge_probability`.
    /// Users and servers are placed at uniformly chosen units.
    pub fn random(
        units: &[&str],
        users: &[&str],
        servers: &[&str],
        edge_probability: f64,
        seed: u64,
    ) -> Result<Self, PlacementError> {
        if units.is_empty() {
            return Err(PlacementError::NoUnits);
        }
        if !(0.0..=1.0).contains(&edge_probability) {
            return Err(PlacementError::EdgeProbability(edge_probability));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = units.len();
        let mut edges = Vec::new();
        for v in 1..k {
            edges.push((rng.random_range(0..v), v));
        }
        for a in 0..k {
            for b in a + 1..k {
                if !edges.contains(&(a, b)) && rng.random_bool(edge_probability) {
                    edges.push((a, b));
                }
            }
        }
        let users: Vec<(&str, usize)> =
            users.iter().map(|u| (*u, rng.random_range(0..k))).collect();
        let servers: Vec<(&str, usize)> = servers
            .iter()
            .map(|s| (*s, rng.random_range(0..k)))
            .collect();
        Self::from_unit_edges(units, &edges, &users, &servers)
    }

    fn skeleton(units: &[&str], users: &[&str], servers: &[&str]) -> Result<Self, PlacementError> {
        if units.is_empty() {
            return Err(PlacementError::NoUnits);
        }
        let mut t = Topology {
            names: Vec::new(),
            kinds: Vec::new(),
            index: BTreeMap::new(),
            hops: Vec::new(),
        };
        let groups = [
            (units, LocationKind::Unit),
            (users, LocationKind::User),
            (servers, LocationKind::Server),
        ];
        for (names, kind) in groups {
            for name in names {
                if t.index.insert((*name).into(), t.names.len()).is_some() {
                    return Err(PlacementError::DuplicateLocation((*name).into()));
                }
                t.names.push((*name).into());
                t.kinds.push(kind);
            }
        }
        let n = t.names.len();
        t.hops = vec![0; n * n];
        Ok(t)
    }

    fn of(&self, kind: LocationKind) -> impl Iterator<Item = &str> {
        self.names
            .iter()
            .zip(&self.kinds)
            .filter(move |(_, k)| **k == kind)
            .map(|(n, _)| n.as_str())
    }

    pub fn units(&self) -> impl Iterator<Item = &str> {
        self.of(LocationKind::Unit)
    }

    pub fn user_locations(&self) -> impl Iterator<Item = &str> {
        self.of(LocationKind::User)
    }

    pub fn data_servers(&self) -> impl Iterator<Item = &str> {
        self.of(LocationKind::Server)
    }

    pub fn locations(&self) -> impl Iterator<Item = (&str, LocationKind)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.kinds.iter().copied())
    }

    pub fn kind(&self, loc: &str) -> Option<LocationKind> {
        self.index.get(loc).map(|&i| self.kinds[i])
    }

    pub fn hops(&self, a: &str, b: &str) -> Option<u32> {
        let (i, j) = (*self.index.get(a)?, *self.index.get(b)?);
        Some(self.hops[i * self.names.len() + j])
    }

    /// The unit closest to `loc`; lowest id on ties.
    pub fn home_unit(&self, loc: &str) -> Option<&str> {
        self.units()
            .filter_map(|u| Some((self.hops(loc, u)?, u)))
            .min()
            .map(|(_, u)| u)
    }
}

fn bfs(adj: &[Vec<usize>], start: usize) -> Vec<u32> {
    let mut dist = vec![u32::MAX; adj.len()];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if dist[w] == u32::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Cache units over a topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheNetwork {
    pub topology: Topology,
    pub units: Vec<CacheUnit>,
}

impl CacheNetwork {
    /// One unit of `capacity_gb` per topology unit.
    pub fn new(topology: Topology, capacity_gb: f64) -> Self {
        let units = topology
            .units()
            .map(|u| CacheUnit::new(u, capacity_gb))
            .collect();
        Self { topology, units }
    }

    pub fn unit(&self, id: &str) -> Option<&CacheUnit> {
        self.units.iter().find(|u| u.id() == id)
    }

    pub fn unit_mut(&mut self, id: &str) -> Option<&mut CacheUnit> {
        self.units.iter_mut().find(|u| u.id() == id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &CachedQuery> {
        self.units.iter().flat_map(CacheUnit::entries)
    }

    pub fn find(&self, entry: &str) -> Option<&CachedQuery> {
        self.units.iter().find_map(|u| u.get(entry))
    }

    pub fn find_mut(&mut self, entry: &str) -> Option<&mut CachedQuery> {
        self.units.iter_mut().find_map(|u| u.get_mut(entry))
    }

    pub fn used_gb(&self) -> f64 {
        self.units.iter().map(CacheUnit::used_gb).sum()
    }

    /// Leaf copies beyond the first, across all units.
    pub fn duplication_overhead(&self) -> f64 {
        crate::cache::duplication_overhead(self.entries())
    }

    /// Entries in search order: nearest unit first (by hops from `from`),
    /// then most accessed, most recently used, lowest id.
    pub fn search_order(&self, from: Option<&str>) -> Vec<&CachedQuery> {
        let mut out: Vec<(u32, &CachedQuery)> = self
            .units
            .iter()
            .flat_map(|u| {
                let d = from
                    .and_then(|f| self.topology.hops(f, u.id()))
                    .unwrap_or(if from.is_some() { u32::MAX } else { 0 });
                u.entries().map(move |e| (d, e))
            })
            .collect();
        out.sort_by(|(da, a), (db, b)| {
            da.cmp(db)
                .then_with(|| Reverse(a.total_freq()).cmp(&Reverse(b.total_freq())))
                .then_with(|| {
                    let ta = a.most_recent_use().unwrap_or(f64::NEG_INFINITY);
                    let tb = b.most_recent_use().unwrap_or(f64::NEG_INFINITY);
                    tb.total_cmp(&ta)
                })
                .then_with(|| a.id().cmp(b.id()))
        });
        out.into_iter().map(|(_, e)| e).collect()
    }
}

/// Unit ids `c01`, `c02`, … so that id order matches creation order.
pub fn unit_ids(n: usize) -> Vec<String> {
    let width = alloc::format!("{n}").len().max(2);
    (1..=n).map(|i| alloc::format!("c{i:0width$}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSpec {
    pub id: String,
    pub capacity_gb: f64,
}

/// How to build a cache network. Random and complete networks place the
/// given user locations and data servers themselves; an explicit matrix
/// lists every location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NetworkSpec {
    Random {
        units: usize,
        capacity_gb: f64,
        edge_probability: f64,
        seed: u64,
    },
    Complete {
        units: usize,
        capacity_gb: f64,
    },
    Matrix {
        units: Vec<UnitSpec>,
        users: Vec<String>,
        servers: Vec<String>,
        /// Rows and columns: units, then users, then servers.
        hops: Vec<Vec<u32>>,
    },
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec::Random {
            units: 20,
            capacity_gb: 40.0,
            edge_probability: 0.1,
            seed: 7,
        }
    }
}

impl NetworkSpec {
    pub fn build(
        &self,
        users: &[String],
        servers: &[&str],
    ) -> Result<CacheNetwork, PlacementError> {
        let users: Vec<&str> = users.iter().map(String::as_str).collect();
        match self {
            NetworkSpec::Random {
                units,
                capacity_gb,
                edge_probability,
                seed,
            } => {
                let ids = unit_ids(*units);
                let ids: Vec<&str> = ids.iter().map(String::as_str).collect();
                let t = Topology::random(&ids, &users, servers, *edge_probability, *seed)?;
                Ok(CacheNetwork::new(t, *capacity_gb))
            }
            NetworkSpec::Complete { units, capacity_gb } => {
                let ids = unit_ids(*units);
                let ids: Vec<&str> = ids.iter().map(String::as_str).collect();
                Ok(CacheNetwork::new(
                    Topology::complete(&ids, &users, servers)?,
                    *capacity_gb,
                ))
            }
            NetworkSpec::Matrix {
                units,
                users: listed,
                servers,
                hops,
            } => {
                let ids: Vec<&str> = units.iter().map(|u| u.id.as_str()).collect();
                let listed_users: Vec<&str> = listed.iter().map(String::as_str).collect();
                let servers: Vec<&str> = servers.iter().map(String::as_str).collect();
                if let Some(missing) = users.iter().find(|u| !listed_users.contains(u)) {
                    return Err(PlacementError::UnknownLocation((*missing).into()));
                }
                let t = Topology::from_matrix(&ids, &listed_users, &servers, hops)?;
                let units = units
                    .iter()
                    .map(|u| CacheUnit::new(u.id.clone(), u.capacity_gb))
                    .collect();
                Ok(CacheNetwork { topology: t, units })
            }
        }
    }
}

/// The unit minimising Σ demand(loc) × hops(loc, unit) among units large
/// enough for the fragment, using its lifetime access counts.
pub fn greedy_place(fragment: &CachedQuery, net: &CacheNetwork) -> Result<String, PlacementError> {
    greedy_place_for(&fragment.freq, fragment.volume_gb(), net)
}

/// Greedy placement for an explicit demand map; lowest unit id on ties.
pub fn greedy_place_for(
    demand: &BTreeMap<String, u64>,
    volume_gb: f64,
    net: &CacheNetwork,
) -> Result<String, PlacementError> {
    net.units
        .iter()
        .filter(|u| u.capacity_gb() >= volume_gb)
        .map(|u| {
            let cost: u64 = demand
                .iter()
                .map(|(loc, &f)| f * u64::from(net.topology.hops(loc, u.id()).unwrap_or(u32::MAX)))
                .sum();
            (cost, u.id())
        })
        .min()
        .map(|(_, id)| id.into())
        .ok_or(PlacementError::NoFeasibleUnit { volume: volume_gb })
}

/// Average inter-cache transfer cost, evaluated term by term:
/// (1/δn) Σ (δn × v × d_net). Zero when nothing moved.
pub fn transfer_cost(delta_n: usize, volumes: &[f64], d_net: f64) -> Result<f64, PlacementError> {
    if delta_n != volumes.len() {
        return Err(PlacementError::CountMismatch {
            count: delta_n,
            volumes: volumes.len(),
        });
    }
    if delta_n == 0 {
        return Ok(0.0);
    }
    let n = delta_n as f64;
    Ok(volumes.iter().map(|v| n * v * d_net).sum::<f64>() / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransferStatus {
    Moved,
    NoOp,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransferKind {
    /// Cached data shipped to the requesting user's unit to answer a query.
    Serve,
    /// A cached object moved to another unit during maintenance.
    Relocate,
}

/// One inter-cache movement of cached data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRecord {
    pub kind: TransferKind,
    pub entry: String,
    pub from: String,
    pub to: String,
    pub volume_gb: f64,
    pub hops: u32,
    pub status: TransferStatus,
    /// Objects displaced at the destination.
    pub evicted: Vec<String>,
}

/// Moves a cached object to unit `to`, evicting there if needed. On failure
/// the object stays where it was.
pub fn relocate(
    net: &mut CacheNetwork,
    entry: &str,
    to: &str,
    now: f64,
) -> Result<TransferRecord, PlacementError> {
    let from = net
        .find(entry)
        .map(|e| String::from(e.location()))
        .ok_or_else(|| PlacementError::UnknownEntry(entry.into()))?;
    if net.unit(to).is_none() {
        return Err(PlacementError::UnknownLocation(to.into()));
    }
    let hops = net.topology.hops(&from, to).unwrap_or(0);
    let mut record = TransferRecord {
        kind: TransferKind::Relocate,
        entry: entry.into(),
        from: from.clone(),
        to: to.into(),
        volume_gb: 0.0,
        hops: 0,
        status: TransferStatus::NoOp,
        evicted: Vec::new(),
    };
    if from == to {
        return Ok(record);
    }
    let object = net
        .unit_mut(&from)
        .and_then(|u| u.remove(entry))
        .expect("found above");
    record.volume_gb = object.volume_gb();
    let backup = object.clone();
    match net.unit_mut(to).expect("checked").admit(object, now) {
        Ok(adm) => {
            record.hops = hops;
            record.status = TransferStatus::Moved;
            record.evicted = adm.evicted.iter().map(|e| String::from(e.id())).collect();
        }
        Err(_) => {
            let source = net.unit_mut(&from).expect("source exists");
            source
                .admit_with(backup, now, &|_| false)
                .expect("space it just vacated");
            record.status = TransferStatus::Failed;
        }
    }
    Ok(record)
}

/// Transfers of one epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransferLedger {
    pub records: Vec<TransferRecord>,
}

impl TransferLedger {
    pub fn push(&mut self, r: TransferRecord) {
        self.records.push(r);
    }

    fn moved(&self) -> impl Iterator<Item = &TransferRecord> {
        self.records
            .iter()
            .filter(|r| r.status == TransferStatus::Moved)
    }

    /// δn: transfers that took place.
    pub fn delta_n(&self) -> usize {
        self.moved().count()
    }

    /// Objects moved by maintenance.
    pub fn relocations(&self) -> usize {
        self.moved()
            .filter(|r| r.kind == TransferKind::Relocate)
            .count()
    }

    pub fn relocation_hop_ticks(&self, per_hop: f64) -> f64 {
        self.moved()
            .filter(|r| r.kind == TransferKind::Relocate)
            .map(|r| f64::from(r.hops) * per_hop)
            .sum()
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.moved().map(|r| r.volume_gb).collect()
    }

    pub fn cost(&self, d_net: f64) -> f64 {
        transfer_cost(self.delta_n(), &self.volumes(), d_net).expect("consistent by construction")
    }

    pub fn hop_ticks(&self, per_hop: f64) -> f64 {
        self.moved().map(|r| f64::from(r.hops) * per_hop).sum()
    }

    pub fn failures(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.status == TransferStatus::Failed)
            .count()
    }
}
