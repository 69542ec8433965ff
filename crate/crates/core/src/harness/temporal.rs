//! Recurring events: both agents run the same learner on the same channel
//! realizations; only the memory agent keeps an episodic store across events.

use serde::Serialize;

use super::config::ExperimentConfig;
use super::stats;
use super::{parallel_map, ExperimentError};
use crate::agents::ArmSet;
use crate::engine::{run_episode, AgentProfile, EpisodeSetup, InterferenceEnv};
use crate::episodic::EpisodicStore;
use crate::fabric::{Fabric, LoopRole, SemanticFacts};
use crate::radio::{generate_baseline, make_event_pattern, PatternFamily};
use crate::seeding::{self, TAG_BANDIT, TAG_ENV};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentEventRecord {
    pub cumulative: f64,
    /// Similarity of the retrieved episode, if a retrieval happened.
    pub similarity: Option<f64>,
    pub warm: bool,
    /// Episodic store size after the event.
    pub store_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub event: u32,
    pub family: PatternFamily,
    pub interface: AgentEventRecord,
    pub memory: AgentEventRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub events: Vec<EventRecord>,
    /// The memory agent's episodic store at the end of the run.
    pub episodes: EpisodicStore,
}

/// Seed-averaged values for one event and agent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventSummary {
    pub event: u32,
    pub agent: AgentProfile,
    pub cumulative: f64,
    /// Mean over seeds that retrieved an episode; `None` if none did.
    pub similarity: Option<f64>,
    pub store_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalResult {
    pub runs: Vec<SeedRun>,
    /// Ordered by event, interface before memory.
    pub summaries: Vec<EventSummary>,
}

impl TemporalResult {
    /// Seed-averaged early-window throughput per event.
    pub fn series(&self, agent: AgentProfile) -> Vec<f64> {
        self.summaries
            .iter()
            .filter(|s| s.agent == agent)
            .map(|s| s.cumulative)
            .collect()
    }

    /// Per-seed early-window throughput per event.
    pub fn seed_series(&self, seed_index: usize, agent: AgentProfile) -> Vec<f64> {
        self.runs[seed_index]
            .events
            .iter()
            .map(|e| match agent {
                AgentProfile::Interface => e.interface.cumulative,
                AgentProfile::Memory => e.memory.cumulative,
            })
            .collect()
    }
}

/// All events of one seed, both agents.
pub fn run_temporal_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun, ExperimentError> {
    let t = &cfg.temporal;
    let schedule = t.schedule()?;
    let period = cfg.loops.contextual_period;
    let baseline = generate_baseline(seed, &cfg.radio)?;
    let arms = ArmSet::standard(cfg.radio.beams, cfg.radio.subcarriers);
    let mut interface_fabric = Fabric::new(&cfg.fabric(), SemanticFacts::default())?;
    let mut memory_fabric = Fabric::new(&cfg.fabric(), SemanticFacts::default())?;

    let mut events = Vec::with_capacity(t.events as usize);
    for e in 1..=t.events {
        let event = make_event_pattern(e, seed, &t.pattern, &baseline)?;
        let family = PatternFamily::for_event(e);
        let setup = EpisodeSetup {
            event_index: e,
            ticks: t.intervals as u64 * period,
            baseline: &baseline,
            arms: &arms,
            power_budget: t.budget_factor * event.degradation(),
            outcome_window: t.early_window as usize,
            family_hint: Some(family.label()),
        };
        let play = |agent: AgentProfile, fabric: &mut Fabric| -> Result<AgentEventRecord, ExperimentError> {
            // Both agents see identical channel draws and exploration draws.
            let mut env = InterferenceEnv::new(
                baseline.clone(),
                Some(&event),
                schedule.clone(),
                period,
                t.noise_sigma_db,
                seeding::stream(seed, &[TAG_ENV, e as u64]),
            )?;
            let mut rng = seeding::stream(seed, &[TAG_BANDIT, e as u64]);
            let trace = run_episode(&mut env, agent, fabric, &cfg.loops, &cfg.bandit, &setup, &mut rng)?;
            Ok(AgentEventRecord {
                cumulative: trace.cumulative(setup.outcome_window),
                similarity: trace.retrieval.as_ref().and_then(|r| r.similarity),
                warm: trace.retrieval.as_ref().is_some_and(|r| r.warm),
                store_size: fabric.episodic(LoopRole::Evolutionary)?.len(),
            })
        };
        let interface = play(AgentProfile::Interface, &mut interface_fabric)?;
        let memory = play(AgentProfile::Memory, &mut memory_fabric)?;
        events.push(EventRecord {
            event: e,
            family,
            interface,
            memory,
        });
    }
    let denied = interface_fabric.denials().len() + memory_fabric.denials().len();
    if denied > 0 {
        return Err(ExperimentError::RoleViolation(denied));
    }
    Ok(SeedRun {
        seed,
        events,
        episodes: memory_fabric.episodic(LoopRole::Evolutionary)?.clone(),
    })
}

pub fn run_temporal(cfg: &ExperimentConfig) -> Result<TemporalResult, ExperimentError> {
    cfg.validate()?;
    let seeds = cfg.temporal.seeds.seeds();
    let runs = parallel_map(&seeds, |&seed| run_temporal_seed(cfg, seed))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let mut summaries = Vec::new();
    for i in 0..cfg.temporal.events as usize {
        for agent in [AgentProfile::Interface, AgentProfile::Memory] {
            let records: Vec<&AgentEventRecord> = runs
                .iter()
                .map(|r| match agent {
                    AgentProfile::Interface => &r.events[i].interface,
                    AgentProfile::Memory => &r.events[i].memory,
                })
                .collect();
            let sims: Vec<f64> = records.iter().filter_map(|r| r.similarity).collect();
            summaries.push(EventSummary {
                event: i as u32 + 1,
                agent,
                cumulative: stats::mean(&records.iter().map(|r| r.cumulative).collect::<Vec<_>>()),
                similarity: (!sims.is_empty()).then(|| stats::mean(&sims)),
                store_size: stats::mean(&records.iter().map(|r| r.store_size as f64).collect::<Vec<_>>()),
            });
        }
    }
    Ok(TemporalResult { runs, summaries })
}
