//! In-process tiered memory fabric with role-scoped access.
//!
//! Tiers: a sensory ring buffer, two-level working memory, and the long-term
//! episodic, semantic and procedural stores, plus the shared policy region that
//! carries directives from the contextual loop down to the reflexive loop.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{Compliance, PowerAction};
use crate::agents::PolicyParams;
use crate::episodic::{Episode, EpisodeDraft, EpisodicError, EpisodicStore};
use crate::matrix::BeamSnrMatrix;
use crate::radio::StageProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LoopRole {
    Reflexive,
    Contextual,
    Evolutionary,
}

impl LoopRole {
    pub const ALL: [LoopRole; 3] = [LoopRole::Reflexive, LoopRole::Contextual, LoopRole::Evolutionary];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    Sensory,
    Working,
    Episodic,
    Semantic,
    Procedural,
    SharedPolicy,
}

impl Tier {
    pub const ALL: [Tier; 6] = [
        Tier::Sensory,
        Tier::Working,
        Tier::Episodic,
        Tier::Semantic,
        Tier::Procedural,
        Tier::SharedPolicy,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Access {
    Read,
    Write,
}

impl Access {
    pub const ALL: [Access; 2] = [Access::Read, Access::Write];
}

/// Direct tier access rights per loop.
///
/// Episodic writes by the contextual loop are not direct accesses; they go
/// through [`Fabric::consolidate`], which checks [`permits_consolidation`].
pub fn permits(role: LoopRole, tier: Tier, access: Access) -> bool {
    use Access::*;
    use LoopRole::*;
    use Tier::*;
    matches!(
        (role, tier, access),
        (Reflexive, Sensory, Read)
            | (Reflexive, Sensory, Write)
            | (Reflexive, SharedPolicy, Read)
            | (Contextual, Sensory, Read)
            | (Contextual, Working, Read)
            | (Contextual, Working, Write)
            | (Contextual, Procedural, Read)
            | (Contextual, SharedPolicy, Write)
            | (Evolutionary, Episodic, Read)
            | (Evolutionary, Semantic, Read)
            | (Evolutionary, Procedural, Write)
    )
}

pub fn permits_consolidation(role: LoopRole) -> bool {
    role == LoopRole::Contextual
}

#[derive(Debug, Error, PartialEq)]
pub enum FabricError {
    #[error("{role:?} may not {access:?} the {tier:?} tier")]
    AccessDenied {
        role: LoopRole,
        tier: Tier,
        access: Access,
    },
    #[error("snapshot shape {found:?} does not match fabric shape {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("no procedural entry named {0:?}")]
    NotFound(String),
    #[error("snapshot tick {tick} is not after the last written tick {last}")]
    NonMonotonicTick { tick: u64, last: u64 },
    #[error("semantic fact {0:?} is not defined")]
    MissingFact(String),
    #[error("window length must be at least 1")]
    EmptyWindow,
    #[error("invalid fabric configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Episodic(#[from] EpisodicError),
}

/// One sensory sample: the full matrix plus what the reflexive loop observed alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub tick: u64,
    pub matrix: Arc<BeamSnrMatrix>,
    pub stage: Option<StageProfile>,
    /// Throughput delivered by the action executed at this tick, when known.
    pub throughput: Option<f64>,
}

impl Snapshot {
    pub fn new(tick: u64, matrix: BeamSnrMatrix) -> Self {
        Self {
            tick,
            matrix: Arc::new(matrix),
            stage: None,
            throughput: None,
        }
    }
}

/// Fixed-capacity ring of snapshots; a write into a full buffer replaces the oldest.
#[derive(Debug, Clone)]
pub struct SensoryBuffer {
    capacity: usize,
    slots: Vec<Snapshot>,
    write_cursor: usize,
}

impl SensoryBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "sensory capacity must be at least 1");
        Self {
            capacity,
            slots: Vec::with_capacity(capacity),
            write_cursor: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn write_cursor(&self) -> usize {
        self.write_cursor
    }

    pub fn push(&mut self, snap: Snapshot) {
        if self.slots.len() < self.capacity {
            self.slots.push(snap);
        } else {
            self.slots[self.write_cursor] = snap;
        }
        self.write_cursor = (self.write_cursor + 1) % self.capacity;
    }

    /// Up to `n` most recent snapshots, oldest first.
    pub fn window(&self, n: usize) -> Vec<Snapshot> {
        let len = self.slots.len();
        let take = n.min(len);
        // Once full, the oldest slot sits at the cursor.
        let oldest = if len < self.capacity { 0 } else { self.write_cursor };
        (len - take..len)
            .map(|i| self.slots[(oldest + i) % len].clone())
            .collect()
    }

    pub fn latest_tick(&self) -> Option<u64> {
        self.window(1).first().map(|s| s.tick)
    }

    pub fn clear(&mut self) {
        self.slots.clear();
        self.write_cursor = 0;
    }
}

/// A record promoted into working memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Feature {
    Scalar(f64),
    Vector(Vec<f64>),
}

/// Two-level working memory: a small fast map that spills least-recently-written
/// records into a larger pooled map, which in turn evicts its oldest entries.
#[derive(Debug, Clone)]
pub struct WorkingMemory {
    fast: IndexMap<String, Feature>,
    pooled: IndexMap<String, Feature>,
    fast_capacity: usize,
    pooled_capacity: usize,
}

impl WorkingMemory {
    pub fn new(fast_capacity: usize, pooled_capacity: usize) -> Self {
        assert!(fast_capacity >= 1, "fast capacity must be at least 1");
        Self {
            fast: IndexMap::new(),
            pooled: IndexMap::new(),
            fast_capacity,
            pooled_capacity,
        }
    }

    pub fn insert(&mut self, key: &str, record: Feature) {
        self.pooled.shift_remove(key);
        self.fast.shift_remove(key);
        self.fast.insert(key.to_owned(), record);
        while self.fast.len() > self.fast_capacity {
            let (k, v) = self.fast.shift_remove_index(0).expect("fast map is non-empty");
            self.pooled.insert(k, v);
        }
        while self.pooled.len() > self.pooled_capacity {
            self.pooled.shift_remove_index(0);
        }
    }

    pub fn get(&self, key: &str) -> Option<&Feature> {
        self.fast.get(key).or_else(|| self.pooled.get(key))
    }

    pub fn fast_keys(&self) -> Vec<&str> {
        self.fast.keys().map(String::as_str).collect()
    }

    pub fn pooled_keys(&self) -> Vec<&str> {
        self.pooled.keys().map(String::as_str).collect()
    }

    pub fn fast_capacity(&self) -> usize {
        self.fast_capacity
    }

    pub fn pooled_capacity(&self) -> usize {
        self.pooled_capacity
    }

    pub fn clear(&mut self) {
        self.fast.clear();
        self.pooled.clear();
    }
}

/// Immutable named facts the node knows about its deployment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SemanticFacts {
    facts: BTreeMap<String, f64>,
}

impl SemanticFacts {
    pub const POWER_BUDGET: &'static str = "power_budget";
    pub const BEAM_COUNT: &'static str = "beam_count";
    pub const SUBCARRIER_COUNT: &'static str = "subcarrier_count";

    pub fn new(facts: impl IntoIterator<Item = (String, f64)>) -> Self {
        Self {
            facts: facts.into_iter().collect(),
        }
    }

    /// Power budget plus grid dimensions.
    pub fn for_deployment(power_budget: f64, beams: usize, subcarriers: usize) -> Self {
        Self::new([
            (Self::POWER_BUDGET.to_owned(), power_budget),
            (Self::BEAM_COUNT.to_owned(), beams as f64),
            (Self::SUBCARRIER_COUNT.to_owned(), subcarriers as f64),
        ])
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.facts.get(name).copied()
    }
}

/// Ok iff the action is non-negative and within the `power_budget` fact.
pub fn check_compliance(action: &PowerAction, facts: &SemanticFacts) -> Result<Compliance, FabricError> {
    let budget = facts
        .get(SemanticFacts::POWER_BUDGET)
        .ok_or_else(|| FabricError::MissingFact(SemanticFacts::POWER_BUDGET.into()))?;
    Ok(action.check_budget(budget))
}

/// Directive executed by the reflexive loop: the learner state and the chosen arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivePolicy {
    pub params: PolicyParams,
    pub arm: usize,
}

/// Shared region written by the contextual loop and read by the reflexive loop.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SharedPolicyRegion {
    active: Option<Arc<ActivePolicy>>,
    version: u64,
}

impl SharedPolicyRegion {
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn active(&self) -> Option<&Arc<ActivePolicy>> {
        self.active.as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Consolidation {
    Accepted(u64),
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Denial {
    pub role: LoopRole,
    pub tier: Tier,
    pub access: Access,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FabricConfig {
    pub beams: usize,
    pub subcarriers: usize,
    pub sensory_capacity: usize,
    pub fast_capacity: usize,
    pub pooled_capacity: usize,
}

impl Default for FabricConfig {
    fn default() -> Self {
        Self {
            beams: 8,
            subcarriers: 100,
            sensory_capacity: 32,
            fast_capacity: 8,
            pooled_capacity: 64,
        }
    }
}

impl FabricConfig {
    pub fn validate(&self) -> Result<(), FabricError> {
        if self.beams == 0 || self.subcarriers == 0 {
            return Err(FabricError::InvalidConfig("grid dimensions must be positive".into()));
        }
        if self.sensory_capacity == 0 || self.fast_capacity == 0 {
            return Err(FabricError::InvalidConfig(
                "sensory and fast capacities must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// The unified memory fabric. Every tier operation names the calling loop and is
/// checked against the access matrix; refusals are logged as well as returned.
#[derive(Debug)]
pub struct Fabric {
    shape: (usize, usize),
    sensory: SensoryBuffer,
    last_tick: Option<u64>,
    working: WorkingMemory,
    episodic: EpisodicStore,
    semantic: SemanticFacts,
    procedural: BTreeMap<String, PolicyParams>,
    shared: SharedPolicyRegion,
    denials: RefCell<Vec<Denial>>,
}

impl Fabric {
    pub fn new(cfg: &FabricConfig, facts: SemanticFacts) -> Result<Self, FabricError> {
        cfg.validate()?;
        Ok(Self {
            shape: (cfg.beams, cfg.subcarriers),
            sensory: SensoryBuffer::new(cfg.sensory_capacity),
            last_tick: None,
            working: WorkingMemory::new(cfg.fast_capacity, cfg.pooled_capacity),
            episodic: EpisodicStore::new(),
            semantic: facts,
            procedural: BTreeMap::new(),
            shared: SharedPolicyRegion::default(),
            denials: RefCell::new(Vec::new()),
        })
    }

    fn guard(&self, role: LoopRole, tier: Tier, access: Access) -> Result<(), FabricError> {
        if permits(role, tier, access) {
            Ok(())
        } else {
            self.deny(role, tier, access)
        }
    }

    fn deny(&self, role: LoopRole, tier: Tier, access: Access) -> Result<(), FabricError> {
        self.denials.borrow_mut().push(Denial { role, tier, access });
        Err(FabricError::AccessDenied { role, tier, access })
    }

    /// Every refused access so far.
    pub fn denials(&self) -> Vec<Denial> {
        self.denials.borrow().clone()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    /// Starts a new event: volatile tiers are cleared and the semantic facts are
    /// loaded afresh. Episodic and procedural memory persist.
    pub fn begin_event(&mut self, facts: SemanticFacts) {
        self.sensory.clear();
        self.last_tick = None;
        self.working.clear();
        self.semantic = facts;
        self.shared = SharedPolicyRegion::default();
    }

    pub fn write_snapshot(&mut self, role: LoopRole, snap: Snapshot) -> Result<(), FabricError> {
        self.guard(role, Tier::Sensory, Access::Write)?;
        if snap.matrix.shape() != self.shape {
            return Err(FabricError::DimensionMismatch {
                expected: self.shape,
                found: snap.matrix.shape(),
            });
        }
        if let Some(last) = self.last_tick {
            if snap.tick <= last {
                return Err(FabricError::NonMonotonicTick {
                    tick: snap.tick,
                    last,
                });
            }
        }
        self.last_tick = Some(snap.tick);
        self.sensory.push(snap);
        Ok(())
    }

    /// Up to `n` most recent snapshots, newest last. Matrices are shared, not copied.
    pub fn read_window(&self, role: LoopRole, n: usize) -> Result<Vec<Snapshot>, FabricError> {
        self.guard(role, Tier::Sensory, Access::Read)?;
        if n == 0 {
            return Err(FabricError::EmptyWindow);
        }
        Ok(self.sensory.window(n))
    }

    pub fn sensory(&self) -> &SensoryBuffer {
        &self.sensory
    }

    pub fn promote_features(&mut self, role: LoopRole, key: &str, record: Feature) -> Result<(), FabricError> {
        self.guard(role, Tier::Working, Access::Write)?;
        self.working.insert(key, record);
        Ok(())
    }

    pub fn recall(&self, role: LoopRole, key: &str) -> Result<Option<&Feature>, FabricError> {
        self.guard(role, Tier::Working, Access::Read)?;
        Ok(self.working.get(key))
    }

    pub fn working(&self) -> &WorkingMemory {
        &self.working
    }

    /// Appends `episode` to episodic memory iff `significance > threshold`.
    pub fn consolidate(
        &mut self,
        role: LoopRole,
        significance: f64,
        episode: EpisodeDraft,
        threshold: f64,
    ) -> Result<Consolidation, FabricError> {
        if !permits_consolidation(role) {
            return self
                .deny(role, Tier::Episodic, Access::Write)
                .map(|_| Consolidation::Rejected);
        }
        if significance > threshold {
            let id = self.episodic.append(episode)?;
            Ok(Consolidation::Accepted(id))
        } else {
            Ok(Consolidation::Rejected)
        }
    }

    pub fn episodic(&self, role: LoopRole) -> Result<&EpisodicStore, FabricError> {
        self.guard(role, Tier::Episodic, Access::Read)?;
        Ok(&self.episodic)
    }

    /// Nearest stored episode to `query` by cosine similarity.
    pub fn retrieve_nearest(
        &self,
        role: LoopRole,
        query: &[f64],
    ) -> Result<Option<(&Episode, f64)>, FabricError> {
        Ok(self.episodic(role)?.retrieve_nearest(query)?)
    }

    pub fn fact(&self, role: LoopRole, name: &str) -> Result<f64, FabricError> {
        self.guard(role, Tier::Semantic, Access::Read)?;
        self.semantic
            .get(name)
            .ok_or_else(|| FabricError::MissingFact(name.to_owned()))
    }

    pub fn store_policy(&mut self, role: LoopRole, policy_id: &str, params: PolicyParams) -> Result<(), FabricError> {
        self.guard(role, Tier::Procedural, Access::Write)?;
        self.procedural.insert(policy_id.to_owned(), params);
        Ok(())
    }

    pub fn load_policy(&self, role: LoopRole, policy_id: &str) -> Result<PolicyParams, FabricError> {
        self.guard(role, Tier::Procedural, Access::Read)?;
        self.procedural
            .get(policy_id)
            .cloned()
            .ok_or_else(|| FabricError::NotFound(policy_id.to_owned()))
    }

    /// Publishes a directive; returns the new version.
    pub fn write_shared_policy(&mut self, role: LoopRole, policy: ActivePolicy) -> Result<u64, FabricError> {
        self.guard(role, Tier::SharedPolicy, Access::Write)?;
        self.shared.version += 1;
        self.shared.active = Some(Arc::new(policy));
        Ok(self.shared.version)
    }

    /// Current directive and its version, if any has been published.
    pub fn read_shared_policy(&self, role: LoopRole) -> Result<Option<(u64, Arc<ActivePolicy>)>, FabricError> {
        self.guard(role, Tier::SharedPolicy, Access::Read)?;
        Ok(self.shared.active.clone().map(|p| (self.shared.version, p)))
    }

    pub fn shared_version(&self) -> u64 {
        self.shared.version
    }

    /// Compliance guard applied to every action before it reaches the radio.
    pub fn check_compliance(&self, action: &PowerAction) -> Result<Compliance, FabricError> {
        check_compliance(action, &self.semantic)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::ComplianceRule;

    fn fabric(capacity: usize) -> Fabric {
        let cfg = FabricConfig {
            beams: 2,
            subcarriers: 3,
            sensory_capacity: capacity,
            fast_capacity: 2,
            pooled_capacity: 4,
        };
        Fabric::new(&cfg, SemanticFacts::for_deployment(60.0, 2, 3)).unwrap()
    }

    fn snap(tick: u64) -> Snapshot {
        Snapshot::new(tick, BeamSnrMatrix::filled(2, 3, tick as f64))
    }

    fn ticks(f: &Fabric, n: usize) -> Vec<u64> {
        f.read_window(LoopRole::Contextual, n)
            .unwrap()
            .iter()
            .map(|s| s.tick)
            .collect()
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut f = fabric(4);
        for t in 1..=5 {
            f.write_snapshot(LoopRole::Reflexive, snap(t)).unwrap();
        }
        assert_eq!(ticks(&f, 10), vec![2, 3, 4, 5]);
        assert_eq!(ticks(&f, 2), vec![4, 5]);
    }

    #[test]
    fn capacity_one_keeps_latest() {
        let mut f = fabric(1);
        f.write_snapshot(LoopRole::Reflexive, snap(1)).unwrap();
        f.write_snapshot(LoopRole::Reflexive, snap(2)).unwrap();
        assert_eq!(ticks(&f, 3), vec![2]);
    }

    #[test]
    fn sensory_access_by_role() {
        let mut f = fabric(4);
        assert!(matches!(
            f.write_snapshot(LoopRole::Contextual, snap(1)),
            Err(FabricError::AccessDenied { .. })
        ));
        assert!(matches!(
            f.read_window(LoopRole::Evolutionary, 1),
            Err(FabricError::AccessDenied { .. })
        ));
        assert_eq!(f.denials().len(), 2);
        assert!(f.read_window(LoopRole::Reflexive, 3).unwrap().is_empty());
    }

    #[test]
    fn write_rejects_wrong_shape_and_stale_tick() {
        let mut f = fabric(4);
        let wrong = Snapshot::new(1, BeamSnrMatrix::filled(3, 3, 1.0));
        assert!(matches!(
            f.write_snapshot(LoopRole::Reflexive, wrong),
            Err(FabricError::DimensionMismatch { .. })
        ));
        f.write_snapshot(LoopRole::Reflexive, snap(3)).unwrap();
        assert_eq!(
            f.write_snapshot(LoopRole::Reflexive, snap(3)),
            Err(FabricError::NonMonotonicTick { tick: 3, last: 3 })
        );
    }

    #[test]
    fn read_returns_what_was_written() {
        let mut f = fabric(4);
        let m = BeamSnrMatrix::new(2, 3, vec![1.5, -2.25, 3.0, 17.125, 0.0, 9.0]).unwrap();
        f.write_snapshot(LoopRole::Reflexive, Snapshot::new(1, m.clone())).unwrap();
        let w = f.read_window(LoopRole::Contextual, 1).unwrap();
        assert_eq!(*w[0].matrix, m);
    }

    #[test]
    fn working_memory_spills_and_overwrites() {
        let mut f = fabric(4);
        for k in ["a", "b", "c"] {
            f.promote_features(LoopRole::Contextual, k, Feature::Scalar(1.0)).unwrap();
        }
        assert_eq!(f.working().fast_keys(), vec!["b", "c"]);
        assert_eq!(f.working().pooled_keys(), vec!["a"]);

        f.promote_features(LoopRole::Contextual, "a", Feature::Scalar(2.0)).unwrap();
        assert_eq!(
            f.recall(LoopRole::Contextual, "a").unwrap(),
            Some(&Feature::Scalar(2.0))
        );
        assert_eq!(f.working().fast_keys(), vec!["c", "a"]);
        assert_eq!(f.working().pooled_keys(), vec!["b"]);

        assert!(matches!(
            f.promote_features(LoopRole::Reflexive, "x", Feature::Scalar(0.0)),
            Err(FabricError::AccessDenied { .. })
        ));
    }

    #[test]
    fn pooled_evicts_oldest() {
        let mut w = WorkingMemory::new(1, 2);
        for k in ["a", "b", "c", "d"] {
            w.insert(k, Feature::Scalar(0.0));
        }
        assert_eq!(w.fast_keys(), vec!["d"]);
        assert_eq!(w.pooled_keys(), vec!["b", "c"]);
        assert!(w.get("a").is_none());
    }

    #[test]
    fn policy_round_trip_and_roles() {
        let mut f = fabric(4);
        let p = PolicyParams::new(3, 0.2);
        f.store_policy(LoopRole::Evolutionary, "beam_recovery_v1", p.clone()).unwrap();
        assert_eq!(f.load_policy(LoopRole::Contextual, "beam_recovery_v1").unwrap(), p);
        assert_eq!(
            f.load_policy(LoopRole::Contextual, "missing"),
            Err(FabricError::NotFound("missing".into()))
        );
        assert!(matches!(
            f.store_policy(LoopRole::Contextual, "x", p),
            Err(FabricError::AccessDenied { .. })
        ));
    }

    #[test]
    fn compliance_guard_reads_budget_fact() {
        let f = fabric(4);
        let ok = PowerAction::from_boosts(2, 3, vec![10.0; 6]);
        assert_eq!(f.check_compliance(&ok).unwrap(), Compliance::Ok);
        let over = PowerAction::from_boosts(2, 3, vec![10.0, 10.0, 10.0, 10.0, 10.0, 10.1]);
        assert_eq!(
            f.check_compliance(&over).unwrap(),
            Compliance::Violation(ComplianceRule::PowerBudget)
        );
        let none = SemanticFacts::default();
        assert_eq!(
            check_compliance(&ok, &none),
            Err(FabricError::MissingFact("power_budget".into()))
        );
    }

    #[test]
    fn shared_region_versions() {
        let mut f = fabric(4);
        assert_eq!(f.read_shared_policy(LoopRole::Reflexive).unwrap(), None);
        let p = ActivePolicy {
            params: PolicyParams::new(2, 0.2),
            arm: 1,
        };
        assert_eq!(f.write_shared_policy(LoopRole::Contextual, p.clone()).unwrap(), 1);
        assert_eq!(f.write_shared_policy(LoopRole::Contextual, p).unwrap(), 2);
        let (v, active) = f.read_shared_policy(LoopRole::Reflexive).unwrap().unwrap();
        assert_eq!((v, active.arm), (2, 1));
        assert!(f.read_shared_policy(LoopRole::Contextual).is_err());
    }
}
