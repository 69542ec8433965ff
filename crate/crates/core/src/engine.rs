//! Multi-rate loop engine.
//!
//! Each tick the reflexive loop senses the channel, executes the published
//! directive and records a snapshot. Every `contextual_period` ticks the
//! contextual loop reads the sensory window, extracts features, updates the
//! learner and publishes a new directive. The evolutionary loop answers
//! retrieval requests and, at the end of an event, files the learned policy.

use std::sync::Arc;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{Compliance, ComplianceRule, PowerAction};
use crate::agents::{bandit_step, warm_start, ArmSet, BanditConfig, PolicyParams};
use crate::episodic::EpisodeDraft;
use crate::fabric::{ActivePolicy, Consolidation, Fabric, FabricError, Feature, LoopRole, SemanticFacts, Snapshot};
use crate::matrix::BeamSnrMatrix;
use crate::radio::{capped_efficiency, InterferenceEvent, RadioError, StageProfile, StageSchedule};
use crate::seeding::SimRng;

/// Number of subcarrier bands in the deviation embedding.
pub const EMBEDDING_BANDS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error("shape {found:?} does not match baseline shape {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("deviation from baseline is identically zero")]
    ZeroDeviation,
    #[error("baseline has zero norm")]
    ZeroBaseline,
    #[error("directive violates compliance rule {0}")]
    Compliance(ComplianceRule),
    #[error("no directive has been published")]
    NoDirective,
    #[error("invalid loop configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoopConfig {
    /// Reflexive ticks per contextual step.
    pub contextual_period: u64,
    /// Consolidation gate on the episode's peak anomaly score.
    pub anomaly_threshold: f64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            contextual_period: 10,
            anomaly_threshold: 0.10,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.contextual_period == 0 {
            return Err(EngineError::InvalidConfig("contextual_period must be at least 1".into()));
        }
        if !(self.anomaly_threshold >= 0.0 && self.anomaly_threshold.is_finite()) {
            return Err(EngineError::InvalidConfig("anomaly_threshold must be >= 0".into()));
        }
        Ok(())
    }
}

/// Normalized Frobenius deviation `||base - observed|| / ||base||`.
pub fn anomaly_score(observed: &BeamSnrMatrix, base: &BeamSnrMatrix) -> Result<f64, EngineError> {
    if observed.shape() != base.shape() {
        return Err(EngineError::DimensionMismatch {
            expected: base.shape(),
            found: observed.shape(),
        });
    }
    let denom = base.frobenius_norm();
    if denom == 0.0 {
        return Err(EngineError::ZeroBaseline);
    }
    Ok(base.minus(observed).frobenius_norm() / denom)
}

/// Unit-length deviation profile: per-beam mean deficits followed by per-band
/// mean deficits over [`EMBEDDING_BANDS`] equal subcarrier bands.
pub fn extract_deviation_embedding(observed: &BeamSnrMatrix, base: &BeamSnrMatrix) -> Result<Vec<f64>, EngineError> {
    if observed.shape() != base.shape() {
        return Err(EngineError::DimensionMismatch {
            expected: base.shape(),
            found: observed.shape(),
        });
    }
    let (beams, subcarriers) = base.shape();
    let delta = base.minus(observed);
    let mut v: Vec<f64> = (0..beams).map(|b| delta.row_mean(b)).collect();
    for band in 0..EMBEDDING_BANDS {
        let start = band * subcarriers / EMBEDDING_BANDS;
        let end = ((band + 1) * subcarriers / EMBEDDING_BANDS).max(start + 1).min(subcarriers);
        let cols = end.saturating_sub(start);
        let sum: f64 = (start..end).map(|k| delta.column_mean(k)).sum();
        v.push(if cols == 0 { 0.0 } else { sum / cols as f64 });
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(EngineError::ZeroDeviation);
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

/// The physical side of the simulation as seen by the reflexive loop.
pub trait Environment {
    /// Channel state observed at `tick`.
    fn sense(&mut self, tick: u64) -> BeamSnrMatrix;
    /// Delivers `action` on the channel sensed at `tick`; returns throughput.
    fn apply(&mut self, tick: u64, action: &PowerAction) -> f64;
    fn stage(&self, tick: u64) -> StageProfile;
}

/// A baseline channel with one persistent interference event, per-tick
/// Gaussian fading on every element, and stage-dependent load.
#[derive(Debug, Clone)]
pub struct InterferenceEnv {
    baseline: BeamSnrMatrix,
    depth: Vec<f64>,
    schedule: StageSchedule,
    ticks_per_minute: u64,
    noise: Option<Normal<f64>>,
    rng: SimRng,
    reference: Vec<f64>,
    observed: Vec<f64>,
}

impl InterferenceEnv {
    pub fn new(
        baseline: BeamSnrMatrix,
        event: Option<&InterferenceEvent>,
        schedule: StageSchedule,
        ticks_per_minute: u64,
        noise_sigma_db: f64,
        rng: SimRng,
    ) -> Result<Self, EngineError> {
        let (beams, subcarriers) = baseline.shape();
        let mut depth = vec![0.0; baseline.len()];
        if let Some(ev) = event {
            if !ev.mask.fits(beams, subcarriers) {
                return Err(RadioError::IndexOutOfBounds { beams, subcarriers }.into());
            }
            for i in ev.mask.flat_indices(subcarriers) {
                depth[i] = ev.depth_db;
            }
        }
        if ticks_per_minute == 0 {
            return Err(EngineError::InvalidConfig("ticks per minute must be at least 1".into()));
        }
        let noise = if noise_sigma_db > 0.0 {
            Some(Normal::new(0.0, noise_sigma_db).map_err(|e| EngineError::InvalidConfig(e.to_string()))?)
        } else {
            None
        };
        let reference = baseline.values().to_vec();
        let observed = reference.iter().zip(&depth).map(|(r, d)| r - d).collect();
        Ok(Self {
            baseline,
            depth,
            schedule,
            ticks_per_minute,
            noise,
            rng,
            reference,
            observed,
        })
    }
}

impl Environment for InterferenceEnv {
    fn sense(&mut self, _tick: u64) -> BeamSnrMatrix {
        let cells = self
            .baseline
            .values()
            .iter()
            .zip(&self.depth)
            .zip(self.reference.iter_mut().zip(self.observed.iter_mut()));
        for ((&base, &depth), (reference, observed)) in cells {
            let fade = self.noise.map_or(0.0, |n| n.sample(&mut self.rng));
            *reference = base + fade;
            *observed = *reference - depth;
        }
        let (beams, subcarriers) = self.baseline.shape();
        BeamSnrMatrix::new(beams, subcarriers, self.observed.clone()).expect("sensed grid is finite")
    }

    fn apply(&mut self, tick: u64, action: &PowerAction) -> f64 {
        let se = capped_efficiency(&self.observed, action.boosts(), &self.reference);
        se * self.stage(tick).load
    }

    fn stage(&self, tick: u64) -> StageProfile {
        *self.schedule.at((tick / self.ticks_per_minute) as u32)
    }
}

/// Which controller runs in the contextual loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentProfile {
    /// Learns from scratch every event; never touches episodic memory.
    Interface,
    /// Embeds the deviation profile, warm-starts from the nearest past episode,
    /// and consolidates significant episodes.
    Memory,
}

impl AgentProfile {
    pub fn label(self) -> &'static str {
        match self {
            AgentProfile::Interface => "interface",
            AgentProfile::Memory => "memory",
        }
    }
}

/// Per-event inputs to [`run_episode`].
#[derive(Debug, Clone, Copy)]
pub struct EpisodeSetup<'a> {
    pub event_index: u32,
    pub ticks: u64,
    pub baseline: &'a BeamSnrMatrix,
    pub arms: &'a ArmSet,
    pub power_budget: f64,
    /// Contextual steps whose throughput makes up the episode outcome.
    pub outcome_window: usize,
    pub family_hint: Option<&'a str>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalRecord {
    pub episode_id: Option<u64>,
    pub similarity: Option<f64>,
    pub warm: bool,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    /// Throughput delivered at each reflexive tick.
    pub rewards: Vec<f64>,
    /// Shared-region version executed at each tick.
    pub versions: Vec<u64>,
    /// Arm executed at each tick.
    pub arms: Vec<usize>,
    pub contextual_ticks: Vec<u64>,
    /// Mean throughput over each contextual interval.
    pub interval_rewards: Vec<f64>,
    pub anomalies: Vec<f64>,
    pub max_anomaly: f64,
    pub embedding: Option<Vec<f64>>,
    pub retrieval: Option<RetrievalRecord>,
    pub consolidation: Option<Consolidation>,
    pub final_version: u64,
    pub converged: PolicyParams,
}

impl EpisodeTrace {
    /// Sum of the first `intervals` interval throughputs.
    pub fn cumulative(&self, intervals: usize) -> f64 {
        self.interval_rewards.iter().take(intervals).sum()
    }
}

fn warm_key(event_index: u32) -> String {
    format!("warm_start/event_{event_index}")
}

fn converged_key(event_index: u32) -> String {
    format!("converged/event_{event_index}")
}

/// Runs one event through the three loops.
#[allow(clippy::too_many_arguments)]
pub fn run_episode<E: Environment>(
    env: &mut E,
    agent: AgentProfile,
    fabric: &mut Fabric,
    cfg: &LoopConfig,
    bandit: &BanditConfig,
    setup: &EpisodeSetup<'_>,
    rng: &mut SimRng,
) -> Result<EpisodeTrace, EngineError> {
    use LoopRole::*;
    cfg.validate()?;
    let period = cfg.contextual_period;
    let (beams, subcarriers) = setup.baseline.shape();
    if fabric.shape() != (beams, subcarriers) {
        return Err(EngineError::DimensionMismatch {
            expected: (beams, subcarriers),
            found: fabric.shape(),
        });
    }
    fabric.begin_event(SemanticFacts::for_deployment(setup.power_budget, beams, subcarriers));

    let defaults = PolicyParams::new(setup.arms.len(), bandit.epsilon);
    let mut params = defaults.clone();
    let mut played = params.greedy_arm();
    fabric.write_shared_policy(
        Contextual,
        ActivePolicy {
            params: params.clone(),
            arm: played,
        },
    )?;

    let mut trace = EpisodeTrace {
        rewards: Vec::with_capacity(setup.ticks as usize),
        versions: Vec::with_capacity(setup.ticks as usize),
        arms: Vec::with_capacity(setup.ticks as usize),
        contextual_ticks: Vec::new(),
        interval_rewards: Vec::new(),
        anomalies: Vec::new(),
        max_anomaly: 0.0,
        embedding: None,
        retrieval: None,
        consolidation: None,
        final_version: 0,
        converged: defaults.clone(),
    };
    let mut embedding_attempted = false;
    let mut pending_query: Option<Vec<f64>> = None;
    let mut prior_key: Option<String> = None;
    let mut executing: Option<(u64, Arc<ActivePolicy>, PowerAction)> = None;

    for tick in 0..setup.ticks {
        // Reflexive loop.
        let matrix = env.sense(tick);
        let (version, policy) = fabric.read_shared_policy(Reflexive)?.ok_or(EngineError::NoDirective)?;
        if executing.as_ref().is_none_or(|(v, _, _)| *v != version) {
            let action = setup.arms.action(policy.arm, setup.power_budget);
            if let Compliance::Violation(rule) = fabric.check_compliance(&action)? {
                return Err(EngineError::Compliance(rule));
            }
            executing = Some((version, policy, action));
        }
        let (_, policy, action) = executing.as_ref().expect("directive loaded above");
        let throughput = env.apply(tick, action);
        fabric.write_snapshot(
            Reflexive,
            Snapshot {
                tick,
                matrix: Arc::new(matrix),
                stage: Some(env.stage(tick)),
                throughput: Some(throughput),
            },
        )?;
        trace.rewards.push(throughput);
        trace.versions.push(version);
        trace.arms.push(policy.arm);

        // Contextual loop.
        if (tick + 1) % period == 0 {
            let window = fabric.read_window(Contextual, period as usize)?;
            let latest = window.last().expect("window holds the snapshot written this tick");
            let anomaly = anomaly_score(&latest.matrix, setup.baseline)?;
            trace.anomalies.push(anomaly);
            trace.max_anomaly = trace.max_anomaly.max(anomaly);
            fabric.promote_features(Contextual, "anomaly", Feature::Scalar(anomaly))?;

            let n = window.len() as f64;
            let mean_tp = window.iter().filter_map(|s| s.throughput).sum::<f64>() / n;
            let normalized = window
                .iter()
                .map(|s| s.throughput.unwrap_or(0.0) / s.stage.map_or(1.0, |st| st.load))
                .sum::<f64>()
                / n;
            trace.interval_rewards.push(mean_tp);
            fabric.promote_features(Contextual, "interval_reward", Feature::Scalar(mean_tp))?;

            if agent == AgentProfile::Memory && !embedding_attempted {
                embedding_attempted = true;
                match extract_deviation_embedding(&latest.matrix, setup.baseline) {
                    Ok(e) => {
                        fabric.promote_features(Contextual, "deviation_embedding", Feature::Vector(e.clone()))?;
                        pending_query = Some(e.clone());
                        trace.embedding = Some(e);
                    }
                    Err(EngineError::ZeroDeviation) => {}
                    Err(e) => return Err(e),
                }
            }

            if let Some(key) = prior_key.take() {
                match fabric.load_policy(Contextual, &key) {
                    Ok(prior) => params = prior,
                    Err(FabricError::NotFound(_)) => {}
                    Err(e) => return Err(e.into()),
                }
            }

            played = bandit_step(&mut params, played, normalized, bandit.alpha, rng);
            fabric.write_shared_policy(
                Contextual,
                ActivePolicy {
                    params: params.clone(),
                    arm: played,
                },
            )?;
            trace.contextual_ticks.push(tick);
        }

        // Evolutionary loop: answer a pending retrieval request.
        if let Some(query) = pending_query.take() {
            let retrieved = fabric.retrieve_nearest(Evolutionary, &query)?;
            let record = RetrievalRecord {
                episode_id: retrieved.map(|(ep, _)| ep.id),
                similarity: retrieved.map(|(_, s)| s),
                warm: false,
                tick,
            };
            let (prior, warm) = warm_start(retrieved, &defaults, bandit);
            let key = warm_key(setup.event_index);
            if warm {
                fabric.store_policy(Evolutionary, &key, prior)?;
            }
            prior_key = Some(key);
            trace.retrieval = Some(RetrievalRecord { warm, ..record });
        }
    }

    // End of event: ascending consolidation, then the evolutionary loop files the policy.
    if agent == AgentProfile::Memory {
        if let Some(embedding) = trace.embedding.clone() {
            let draft = EpisodeDraft {
                embedding,
                family_hint: setup.family_hint.map(str::to_owned),
                converged_policy: params.clone(),
                outcome: trace.cumulative(setup.outcome_window),
                event_index: setup.event_index,
            };
            trace.consolidation = Some(fabric.consolidate(
                Contextual,
                trace.max_anomaly,
                draft,
                cfg.anomaly_threshold,
            )?);
        }
    }
    fabric.store_policy(Evolutionary, &converged_key(setup.event_index), params.clone())?;
    trace.final_version = fabric.shared_version();
    trace.converged = params;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabric::FabricConfig;
    use crate::matrix::ElementMask;
    use crate::radio::InterferenceKind;
    use crate::seeding;
    use approx::assert_abs_diff_eq;

    #[test]
    fn anomaly_examples() {
        let base = BeamSnrMatrix::filled(8, 100, 16.0);
        assert_eq!(anomaly_score(&base, &base).unwrap(), 0.0);
        let obs = BeamSnrMatrix::from_fn(8, 100, |b, _| if b == 3 { 1.0 } else { 16.0 });
        let expect = 15.0 * 10.0 / (16.0 * 800f64.sqrt());
        assert_abs_diff_eq!(anomaly_score(&obs, &base).unwrap(), expect, epsilon = 1e-12);
        assert_abs_diff_eq!(expect, 0.331, epsilon = 1e-3);
        assert_abs_diff_eq!(
            anomaly_score(&obs.scaled(2.5), &base.scaled(2.5)).unwrap(),
            expect,
            epsilon = 1e-12
        );
    }

    #[test]
    fn embedding_of_single_beam_collapse() {
        let base = BeamSnrMatrix::filled(8, 100, 16.0);
        let obs = BeamSnrMatrix::from_fn(8, 100, |b, _| if b == 0 { 6.0 } else { 16.0 });
        let e = extract_deviation_embedding(&obs, &base).unwrap();
        assert_eq!(e.len(), 18);
        assert_abs_diff_eq!(e.iter().map(|x| x * x).sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(e[1..8].iter().all(|&x| x == 0.0));
        assert!(e[0] > e[8]);
        assert!(e[8..].iter().all(|&x| (x - e[8]).abs() < 1e-12));
        assert_eq!(extract_deviation_embedding(&base, &base), Err(EngineError::ZeroDeviation));
    }

    fn setup_run(event: Option<&InterferenceEvent>, ticks: u64, agent: AgentProfile) -> (EpisodeTrace, Fabric) {
        let base = BeamSnrMatrix::from_fn(8, 100, |b, k| 14.0 + b as f64 + 0.01 * k as f64);
        let arms = ArmSet::standard(8, 100);
        let mut fabric = Fabric::new(&FabricConfig::default(), SemanticFacts::default()).unwrap();
        let mut env = InterferenceEnv::new(
            base.clone(),
            event,
            StageSchedule::default(),
            10,
            0.0,
            seeding::stream(1, &[seeding::TAG_ENV]),
        )
        .unwrap();
        let setup = EpisodeSetup {
            event_index: 1,
            ticks,
            baseline: &base,
            arms: &arms,
            power_budget: 100.0,
            outcome_window: 3,
            family_hint: None,
        };
        let mut rng = seeding::stream(1, &[seeding::TAG_BANDIT]);
        let trace = run_episode(
            &mut env,
            agent,
            &mut fabric,
            &LoopConfig::default(),
            &BanditConfig::default(),
            &setup,
            &mut rng,
        )
        .unwrap();
        (trace, fabric)
    }

    #[test]
    fn thirty_ticks_give_three_contextual_steps() {
        let (trace, fabric) = setup_run(None, 30, AgentProfile::Memory);
        assert_eq!(trace.contextual_ticks, vec![9, 19, 29]);
        assert_eq!(trace.final_version, 4);
        assert_eq!(trace.rewards.len(), 30);
        assert!(trace.rewards.iter().all(|r| r.is_finite()));
        assert!(fabric.denials().is_empty());
    }

    #[test]
    fn quiet_channel_is_not_consolidated() {
        let (trace, fabric) = setup_run(None, 30, AgentProfile::Memory);
        assert_eq!(trace.max_anomaly, 0.0);
        assert_eq!(trace.consolidation, None);
        assert!(fabric.episodic(LoopRole::Evolutionary).unwrap().is_empty());
    }

    #[test]
    fn significant_event_is_consolidated() {
        let ev = InterferenceEvent {
            kind: InterferenceKind::Misalignment,
            mask: ElementMask::rows(&[7], 100),
            depth_db: 20.0,
        };
        let (trace, fabric) = setup_run(Some(&ev), 30, AgentProfile::Memory);
        assert_eq!(trace.consolidation, Some(Consolidation::Accepted(0)));
        assert_eq!(fabric.episodic(LoopRole::Evolutionary).unwrap().len(), 1);
        assert!(fabric.denials().is_empty());

        let (trace, fabric) = setup_run(Some(&ev), 30, AgentProfile::Interface);
        assert_eq!(trace.consolidation, None);
        assert!(fabric.episodic(LoopRole::Evolutionary).unwrap().is_empty());
    }

    #[test]
    fn reflexive_executes_latest_published_version() {
        let (trace, _) = setup_run(None, 50, AgentProfile::Interface);
        for (t, &v) in trace.versions.iter().enumerate() {
            let written_before = trace.contextual_ticks.iter().filter(|&&c| c < t as u64).count() as u64;
            assert_eq!(v, 1 + written_before);
        }
    }
}
