//! Generators and fixtures shared by the integration tests.
#![allow(dead_code)]

use airan_sim::engine::{Environment, InterferenceEnv};
use airan_sim::episodic::EpisodeDraft;
use airan_sim::fabric::{ActivePolicy, FabricError, Feature, Snapshot};
use airan_sim::matrix::{BeamSnrMatrix, ElementMask};
use airan_sim::radio::{generate_baseline, BaselineConfig, StageProfile};
use airan_sim::{Access, Fabric, InterferenceEvent, InterferenceKind, LoopRole, PolicyParams, PowerAction, Tier};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub const BEAMS: usize = 8;
pub const SUBCARRIERS: usize = 100;

/// Access rights written out independently of the implementation.
/// The reflexive loop also reads the shared policy region, which is how
/// directives reach it.
pub fn expected_access(role: LoopRole, tier: Tier, access: Access) -> bool {
    use Access::*;
    use LoopRole::*;
    use Tier::*;
    let table: &[(LoopRole, Tier, Access)] = &[
        (Reflexive, Sensory, Read),
        (Reflexive, Sensory, Write),
        (Reflexive, SharedPolicy, Read),
        (Contextual, Sensory, Read),
        (Contextual, Working, Read),
        (Contextual, Working, Write),
        (Contextual, Procedural, Read),
        (Contextual, SharedPolicy, Write),
        (Contextual, Episodic, Write),
        (Evolutionary, Episodic, Read),
        (Evolutionary, Semantic, Read),
        (Evolutionary, Procedural, Write),
    ];
    table.contains(&(role, tier, access))
}

/// Performs the fabric operation for `(tier, access)` as `role`.
/// Returns `None` when the fabric exposes no such operation.
pub fn attempt(fabric: &mut Fabric, role: LoopRole, tier: Tier, access: Access) -> Option<Result<(), FabricError>> {
    use Access::*;
    let params = PolicyParams::new(4, 0.1);
    let res = match (tier, access) {
        (Tier::Sensory, Read) => fabric.read_window(role, 1).map(drop),
        (Tier::Sensory, Write) => {
            let tick = fabric.sensory().latest_tick().map_or(0, |t| t + 1);
            fabric.write_snapshot(role, Snapshot::new(tick, BeamSnrMatrix::filled(BEAMS, SUBCARRIERS, 10.0)))
        }
        (Tier::Working, Read) => fabric.recall(role, "k").map(drop),
        (Tier::Working, Write) => fabric.promote_features(role, "k", Feature::Scalar(1.0)),
        (Tier::Episodic, Read) => fabric.episodic(role).map(drop),
        (Tier::Episodic, Write) => fabric.consolidate(role, 1.0, draft(unit_axis(18, 0)), 0.1).map(drop),
        (Tier::Semantic, Read) => fabric.fact(role, "power_budget").map(drop),
        (Tier::Semantic, Write) => return None,
        (Tier::Procedural, Read) => match fabric.load_policy(role, "p") {
            Err(FabricError::NotFound(_)) => Ok(()),
            other => other.map(drop),
        },
        (Tier::Procedural, Write) => fabric.store_policy(role, "p", params),
        (Tier::SharedPolicy, Read) => fabric.read_shared_policy(role).map(drop),
        (Tier::SharedPolicy, Write) => fabric.write_shared_policy(role, ActivePolicy { params, arm: 0 }).map(drop),
    };
    Some(res)
}

pub fn unit_axis(dim: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[i] = 1.0;
    v
}

pub fn unit_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub fn draft(embedding: Vec<f64>) -> EpisodeDraft {
    EpisodeDraft {
        embedding,
        family_hint: None,
        converged_policy: PolicyParams::new(4, 0.2),
        outcome: 0.0,
        event_index: 1,
    }
}

/// Inclusive depth range per regime: both experiments' defaults widened by 1 dB.
pub fn depth_range(kind: InterferenceKind) -> (f64, f64) {
    match kind {
        InterferenceKind::CoChannel => (12.0, 15.0),
        InterferenceKind::Multipath => (13.0, 24.0),
        InterferenceKind::Misalignment => (19.0, 31.0),
    }
}

/// A random labeled event: 2-3 adjacent rows, two separated 12-wide bands, or one row.
pub fn labeled_event(rng: &mut impl Rng) -> InterferenceEvent {
    let kind = InterferenceKind::ALL[rng.random_range(0..3)];
    let (lo, hi) = depth_range(kind);
    let depth_db = rng.random_range(lo..=hi);
    let mask = match kind {
        InterferenceKind::CoChannel => {
            let n = rng.random_range(2..=3);
            let start = rng.random_range(0..=BEAMS - n);
            let rows: Vec<usize> = (start..start + n).collect();
            ElementMask::rows(&rows, SUBCARRIERS)
        }
        InterferenceKind::Multipath => {
            let width = 12;
            let a = rng.random_range(0..=SUBCARRIERS - 2 * width - width);
            let b = rng.random_range(a + 2 * width..=SUBCARRIERS - width);
            ElementMask::bands(&[(a, a + width), (b, b + width)], BEAMS)
        }
        InterferenceKind::Misalignment => ElementMask::rows(&[rng.random_range(0..BEAMS)], SUBCARRIERS),
    };
    InterferenceEvent { kind, mask, depth_db }
}

/// `base` lowered on the event mask, plus i.i.d. Gaussian measurement noise.
pub fn noisy_observation(base: &BeamSnrMatrix, ev: &InterferenceEvent, sigma_db: f64, rng: &mut impl Rng) -> BeamSnrMatrix {
    let noise = Normal::new(0.0, sigma_db).expect("valid sigma");
    let hit = ev.mask.flat_indices(SUBCARRIERS);
    let mut depth = vec![0.0; BEAMS * SUBCARRIERS];
    for i in hit {
        depth[i] = ev.depth_db;
    }
    let values = base
        .values()
        .iter()
        .zip(&depth)
        .map(|(b, d)| b - d + noise.sample(rng))
        .collect();
    BeamSnrMatrix::new(BEAMS, SUBCARRIERS, values).expect("finite grid")
}

pub fn baseline(seed: u64) -> BeamSnrMatrix {
    generate_baseline(seed, &BaselineConfig::default()).expect("default baseline config is valid")
}

/// Passes everything through to an [`InterferenceEnv`] and audits each action it is asked to apply.
pub struct AuditedEnv {
    pub inner: InterferenceEnv,
    pub budget: f64,
    pub applied: usize,
    pub violations: usize,
    pub max_used: f64,
}

impl AuditedEnv {
    pub fn new(inner: InterferenceEnv, budget: f64) -> Self {
        Self {
            inner,
            budget,
            applied: 0,
            violations: 0,
            max_used: 0.0,
        }
    }
}

impl Environment for AuditedEnv {
    fn sense(&mut self, tick: u64) -> BeamSnrMatrix {
        self.inner.sense(tick)
    }

    fn apply(&mut self, tick: u64, action: &PowerAction) -> f64 {
        self.applied += 1;
        if !action.check_budget(self.budget).is_ok() {
            self.violations += 1;
        }
        self.max_used = self.max_used.max(action.budget_used());
        self.inner.apply(tick, action)
    }

    fn stage(&self, tick: u64) -> StageProfile {
        self.inner.stage(tick)
    }
}
