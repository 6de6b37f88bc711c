//! Qgene: a seeded generator of timestamped query-plan workloads.
//!
//! Queries draw their sub-queries from a fixed universe. Which sub-queries
//! are popular is governed by the overlap distribution: a sample is turned
//! into a popularity rank, and the rank into a universe member through a
//! seeded permutation. Uniform ranks make every member equally likely;
//! Poisson and exponential ranks concentrate demand on the first few.
//!
//! The universe is built from relations with four nested range variants
//! each (`k < 25`, `k < 50`, `k < 75`, `k < 100`), so narrower variants can
//! be answered from cached wider ones.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::query::{
    AttrRef, Comparator, Constant, Operator, Predicate, QetNode, QueryEvaluationTree, Relation,
    SemanticDescriptor,
};

/// Nested variants generated per relation.
pub const VARIANTS: usize = 4;
/// Data-server tags assigned to relations in turn.
pub const DATA_SERVERS: [&str; 3] = ["DB1", "DB2", "DB3"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorkloadError {
    #[error("invalid distribution {0}")]
    Distribution(String),
    #[error("invalid {0} range")]
    Range(&'static str),
    #[error("queries per window must be at least 1")]
    QueriesPerWindow,
    #[error("at least one user location is required")]
    NoUsers,
    #[error("universe of {universe} sub-queries cannot fill {complexity} distinct leaves")]
    UniverseTooSmall { universe: usize, complexity: usize },
    #[error("{0} must lie in [0, 1]")]
    Probability(&'static str),
    #[error("window duration must be positive")]
    WindowDuration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Dist {
    Poisson { lambda: f64 },
    Exponential { lambda: f64 },
    Uniform { a: f64, b: f64 },
}

impl Dist {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let ok = match *self {
            Dist::Poisson { lambda } | Dist::Exponential { lambda } => {
                lambda > 0.0 && lambda.is_finite()
            }
            Dist::Uniform { a, b } => a <= b && a.is_finite() && b.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(WorkloadError::Distribution(format!("{self:?}")))
        }
    }

    /// Theoretical mean.
    pub fn mean(&self) -> f64 {
        match *self {
            Dist::Poisson { lambda } => lambda,
            Dist::Exponential { lambda } => 1.0 / lambda,
            Dist::Uniform { a, b } => (a + b) / 2.0,
        }
    }

    /// A continuous sample (Uniform over `[a, b]`).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Dist::Poisson { lambda } => Poisson::new(lambda).expect("validated").sample(rng),
            Dist::Exponential { lambda } => Exp::new(lambda).expect("validated").sample(rng),
            Dist::Uniform { a, b } => {
                if a == b {
                    a
                } else {
                    rng.random_range(a..=b)
                }
            }
        }
    }

    /// A zero-based popularity rank below `k`. Uniform draws an integer
    /// rank in `[a, b]` (one-based); the others scale their sample by
    /// `scale`. Results are clamped to the universe.
    pub fn rank<R: Rng + ?Sized>(&self, rng: &mut R, k: usize, scale: f64) -> usize {
        let idx = match *self {
            Dist::Uniform { a, b } => {
                let lo = libm::ceil(a) as i64;
                let hi = (libm::floor(b) as i64).max(lo);
                rng.random_range(lo..=hi) - 1
            }
            _ => libm::floor(self.sample(rng) * scale) as i64,
        };
        idx.clamp(0, k as i64 - 1) as usize
    }
}

/// Switches the overlap distribution once `epoch` epochs have completed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub epoch: usize,
    pub overlap: Dist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadConfig {
    /// Aging period for cache scores, in ticks.
    pub window_duration: f64,
    pub queries_per_window: usize,
    pub overlap: Dist,
    pub inter_arrival: Dist,
    pub complexity_range: [usize; 2],
    pub universe_size: usize,
    pub user_locations: Vec<String>,
    pub volume_range: [f64; 2],
    pub seed: u64,
    pub epoch_schedule: Vec<ScheduleEntry>,
    /// Multiplier from Poisson/exponential samples to ranks.
    pub rank_scale: f64,
    /// Probability that a leaf is drawn uniformly instead.
    pub jitter: f64,
    /// Probability that a leaf's rank is shifted by the user location, so
    /// that each location has its own popular set.
    pub locality: f64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            window_duration: 1000.0,
            queries_per_window: 715,
            overlap: Dist::Poisson { lambda: 4.0 },
            inter_arrival: Dist::Exponential { lambda: 1.0 },
            complexity_range: [2, 4],
            universe_size: 64,
            user_locations: (1..=10).map(|i| format!("uloc-{i}")).collect(),
            volume_range: [1.0, 10.0],
            seed: 42,
            epoch_schedule: Vec::new(),
            rank_scale: 1.0,
            jitter: 0.05,
            locality: 0.0,
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        self.overlap.validate()?;
        self.inter_arrival.validate()?;
        if let Dist::Uniform { a, .. } = self.inter_arrival {
            if a < 0.0 {
                return Err(WorkloadError::Distribution(format!(
                    "{:?}",
                    self.inter_arrival
                )));
            }
        }
        for s in &self.epoch_schedule {
            s.overlap.validate()?;
        }
        let [cmin, cmax] = self.complexity_range;
        if cmin == 0 || cmin > cmax {
            return Err(WorkloadError::Range("complexity"));
        }
        let [vmin, vmax] = self.volume_range;
        if !(vmin >= 0.0 && vmin <= vmax && vmax.is_finite()) {
            return Err(WorkloadError::Range("volume"));
        }
        if self.queries_per_window == 0 {
            return Err(WorkloadError::QueriesPerWindow);
        }
        if self.user_locations.is_empty() {
            return Err(WorkloadError::NoUsers);
        }
        if self.universe_size < cmax {
            return Err(WorkloadError::UniverseTooSmall {
                universe: self.universe_size,
                complexity: cmax,
            });
        }
        if !(self.window_duration > 0.0) {
            return Err(WorkloadError::WindowDuration);
        }
        for (p, name) in [(self.jitter, "jitter"), (self.locality, "locality")] {
            if !(0.0..=1.0).contains(&p) {
                return Err(WorkloadError::Probability(name));
            }
        }
        if !(self.rank_scale > 0.0) {
            return Err(WorkloadError::Range("rank scale"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEvent {
    pub tree: QueryEvaluationTree,
    pub user_loc: String,
    pub ts: f64,
}

/// Id of universe member `i`.
pub fn sub_query_id(i: usize) -> String {
    format!("s{i}")
}

/// The sub-query universe: member `i` is variant `i % 4` of relation `i / 4`.
pub fn universe(config: &WorkloadConfig) -> Vec<SemanticDescriptor> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5e_ed0f_0be5);
    let [vmin, vmax] = config.volume_range;
    let relations = config.universe_size.div_ceil(VARIANTS);
    let mut out = Vec::with_capacity(config.universe_size);
    for r in 0..relations {
        let name = format!("t{r}");
        let server = DATA_SERVERS[r % DATA_SERVERS.len()];
        let spread: f64 = rng.random();
        for j in 0..VARIANTS {
            if out.len() == config.universe_size {
                break;
            }
            let attrs = ["k", "a", "b"]
                .iter()
                .map(|a| AttrRef::new(name.clone(), *a))
                .collect();
            let bound = Constant::Int(25 * (j as i64 + 1));
            let pred = Predicate::selection(AttrRef::new(name.clone(), "k"), Comparator::Lt, bound);
            let volume = vmin + (vmax - vmin) * spread * (j + 1) as f64 / VARIANTS as f64;
            out.push(
                SemanticDescriptor::new(
                    alloc::vec![Relation::at(name.clone(), server)],
                    attrs,
                    alloc::vec![pred],
                    volume,
                )
                .normalize(),
            );
        }
    }
    out
}

/// Streaming workload generator.
#[derive(Debug, Clone)]
pub struct Qgene {
    config: WorkloadConfig,
    rng: ChaCha8Rng,
    universe: Vec<SemanticDescriptor>,
    /// Popularity rank → universe member.
    order: Vec<usize>,
    overlap: Dist,
    epoch: usize,
    emitted: usize,
    clock: f64,
}

impl Qgene {
    pub fn new(config: WorkloadConfig) -> Result<Self, WorkloadError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let universe = universe(&config);
        // relations in random order, each relation's variants adjacent
        let mut relations: Vec<usize> = (0..universe.len().div_ceil(VARIANTS)).collect();
        relations.shuffle(&mut rng);
        let mut order = Vec::with_capacity(universe.len());
        for r in relations {
            let mut variants: Vec<usize> =
                (r * VARIANTS..((r + 1) * VARIANTS).min(universe.len())).collect();
            variants.shuffle(&mut rng);
            order.extend(variants);
        }
        Ok(Self {
            overlap: config.overlap,
            config,
            rng,
            universe,
            order,
            epoch: 0,
            emitted: 0,
            clock: 0.0,
        })
    }

    pub fn config(&self) -> &WorkloadConfig {
        &self.config
    }

    pub fn universe(&self) -> &[SemanticDescriptor] {
        &self.universe
    }

    /// Universe members from most to least popular.
    pub fn popularity(&self) -> &[usize] {
        &self.order
    }

    pub fn overlap(&self) -> Dist {
        self.overlap
    }

    /// Zero-based index of the epoch the next event belongs to.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Applies the schedule entry for `epoch`, if any: the overlap
    /// distribution is replaced and the popularity ranking is rotated by
    /// half the universe so that hot sub-queries go cold.
    pub fn mutate_at_epoch(&mut self, epoch: usize) {
        if let Some(s) = self
            .config
            .epoch_schedule
            .iter()
            .rev()
            .find(|s| s.epoch == epoch)
        {
            self.overlap = s.overlap;
            let half = self.order.len() / 2;
            self.order.rotate_left(half);
        }
    }

    /// The next event; epoch boundaries fall every `queries_per_window`
    /// events.
    pub fn next_event(&mut self) -> QueryEvent {
        let epoch = self.emitted / self.config.queries_per_window;
        while self.epoch < epoch {
            self.epoch += 1;
            self.mutate_at_epoch(self.epoch);
        }
        self.clock += self.config.inter_arrival.sample(&mut self.rng).max(0.0);
        self.emitted += 1;
        let users = &self.config.user_locations;
        let u = self.rng.random_range(0..users.len());
        let user_loc = users[u].clone();
        let [cmin, cmax] = self.config.complexity_range;
        let c = self.rng.random_range(cmin..=cmax);
        let members = self.pick_members(c, u);
        let tree = self.build_tree(format!("Q{}", self.emitted), &members);
        QueryEvent {
            tree,
            user_loc,
            ts: self.clock,
        }
    }

    /// All events of the next epoch.
    pub fn next_epoch(&mut self) -> Vec<QueryEvent> {
        (0..self.config.queries_per_window)
            .map(|_| self.next_event())
            .collect()
    }

    fn pick_members(&mut self, c: usize, user: usize) -> Vec<usize> {
        let k = self.universe.len();
        let shift = user * k / self.config.user_locations.len();
        let mut picked: Vec<usize> = Vec::with_capacity(c);
        let mut attempts = 0;
        while picked.len() < c {
            let rank = if self.rng.random_bool(self.config.jitter) {
                self.rng.random_range(0..k)
            } else {
                let r = self.overlap.rank(&mut self.rng, k, self.config.rank_scale);
                if self.rng.random_bool(self.config.locality) {
                    (r + shift) % k
                } else {
                    r
                }
            };
            let mut m = self.order[rank];
            attempts += 1;
            if attempts > 64 * c {
                // concentrated distributions: take the next unused member
                let mut r = rank;
                while picked.contains(&self.order[r]) {
                    r = (r + 1) % k;
                }
                m = self.order[r];
            }
            if !picked.contains(&m) {
                picked.push(m);
            }
        }
        picked
    }

    /// `(PAR tree of the first c−1 leaves) _ last leaf`; a single leaf
    /// stands alone.
    fn build_tree(&mut self, query_id: String, members: &[usize]) -> QueryEvaluationTree {
        let mut leaves: Vec<QetNode> = members
            .iter()
            .map(|&m| QetNode::leaf(sub_query_id(m), self.universe[m].clone()))
            .collect();
        let root = if leaves.len() == 1 {
            leaves.pop().expect("one leaf")
        } else {
            let last = leaves.pop().expect("two leaves");
            let par = self.par_tree(leaves);
            QetNode::op(Operator::Seq, alloc::vec![par, last]).expect("two children")
        };
        QueryEvaluationTree::new(query_id, root).expect("distinct leaves")
    }

    fn par_tree(&mut self, mut leaves: Vec<QetNode>) -> QetNode {
        if leaves.len() == 1 {
            return leaves.pop().expect("one leaf");
        }
        let cut = self.rng.random_range(1..leaves.len());
        let right = leaves.split_off(cut);
        let l = self.par_tree(leaves);
        let r = self.par_tree(right);
        QetNode::op(Operator::Par, alloc::vec![l, r]).expect("two children")
    }
}

/// `epochs` windows of events from a fresh generator.
pub fn generate(config: &WorkloadConfig, epochs: usize) -> Result<Vec<QueryEvent>, WorkloadError> {
    let mut g = Qgene::new(config.clone())?;
    Ok((0..epochs * config.queries_per_window)
        .map(|_| g.next_event())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_complexity() {
        let cfg = WorkloadConfig {
            complexity_range: [3, 3],
            queries_per_window: 50,
            ..Default::default()
        };
        let events = generate(&cfg, 2).unwrap();
        assert_eq!(events.len(), 100);
        assert!(events.iter().all(|e| e.tree.complexity() == 3));
        assert!(events.windows(2).all(|w| w[0].ts <= w[1].ts));
    }

    #[test]
    fn seeded_determinism() {
        let cfg = WorkloadConfig {
            queries_per_window: 30,
            ..Default::default()
        };
        assert_eq!(generate(&cfg, 3).unwrap(), generate(&cfg, 3).unwrap());
        let other = WorkloadConfig {
            seed: 43,
            ..cfg.clone()
        };
        assert_ne!(generate(&cfg, 1).unwrap(), generate(&other, 1).unwrap());
    }

    #[test]
    fn bad_parameters() {
        let bad = WorkloadConfig {
            overlap: Dist::Poisson { lambda: 0.0 },
            ..Default::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(WorkloadError::Distribution(_))
        ));
        let bad = WorkloadConfig {
            inter_arrival: Dist::Uniform { a: 3.0, b: 1.0 },
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = WorkloadConfig {
            complexity_range: [4, 2],
            ..Default::default()
        };
        assert_eq!(bad.validate(), Err(WorkloadError::Range("complexity")));
    }

    #[test]
    fn schedule_switches_at_boundaries() {
        let cfg = WorkloadConfig {
            queries_per_window: 10,
            epoch_schedule: alloc::vec![
                ScheduleEntry {
                    epoch: 5,
                    overlap: Dist::Exponential { lambda: 0.5 }
                },
                ScheduleEntry {
                    epoch: 10,
                    overlap: Dist::Poisson { lambda: 3.0 }
                },
            ],
            ..Default::default()
        };
        let mut g = Qgene::new(cfg).unwrap();
        let before = g.popularity().to_vec();
        let mut seen = Vec::new();
        for _ in 0..12 {
            g.next_epoch();
            seen.push(g.overlap());
        }
        // overlap in force during zero-based epochs 0..=11
        assert_eq!(seen[4], Dist::Poisson { lambda: 4.0 });
        assert_eq!(seen[5], Dist::Exponential { lambda: 0.5 });
        assert_eq!(seen[9], Dist::Exponential { lambda: 0.5 });
        assert_eq!(seen[10], Dist::Poisson { lambda: 3.0 });
        assert_eq!(g.popularity(), &before[..]);
    }

    #[test]
    fn universe_variants_nest() {
        let u = universe(&WorkloadConfig::default());
        assert_eq!(u.len(), 64);
        assert!(u[0].volume_gb() <= u[3].volume_gb());
        assert_eq!(u[5].relations[0].location.as_deref(), Some("DB2"));
    }
}
