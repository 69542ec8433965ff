mod common;

use airan_sim::engine::{run_episode, EpisodeSetup, InterferenceEnv};
use airan_sim::episodic::cosine_similarity;
use airan_sim::fabric::{Consolidation, SemanticFacts};
use airan_sim::harness::config::{ExperimentConfig, SeedRange};
use airan_sim::harness::emit;
use airan_sim::harness::spatial::run_spatial;
use airan_sim::harness::temporal::{run_temporal, run_temporal_seed};
use airan_sim::radio::make_event_pattern;
use airan_sim::seeding::{self, TAG_BANDIT, TAG_ENV};
use airan_sim::{AgentProfile, ArmSet, EpisodeTrace, EpisodicStore, Fabric, LoopRole};
use common::*;
use proptest::prelude::*;

fn short_config(events: u32) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.temporal.seeds = SeedRange::new(2, 2);
    cfg.temporal.events = events;
    cfg
}

/// Runs events `1..=events` of one seed for `agent` on a single fabric.
fn traces(cfg: &ExperimentConfig, seed: u64, agent: AgentProfile, events: u32, ticks: u64) -> (Vec<EpisodeTrace>, Fabric) {
    let t = &cfg.temporal;
    let base = baseline(seed);
    let arms = ArmSet::standard(BEAMS, SUBCARRIERS);
    let mut fabric = Fabric::new(&cfg.fabric(), SemanticFacts::default()).unwrap();
    let mut out = Vec::new();
    for e in 1..=events {
        let ev = make_event_pattern(e, seed, &t.pattern, &base).unwrap();
        let setup = EpisodeSetup {
            event_index: e,
            ticks,
            baseline: &base,
            arms: &arms,
            power_budget: t.budget_factor * ev.degradation(),
            outcome_window: t.early_window as usize,
            family_hint: None,
        };
        let mut env = InterferenceEnv::new(
            base.clone(),
            Some(&ev),
            t.schedule().unwrap(),
            cfg.loops.contextual_period,
            t.noise_sigma_db,
            seeding::stream(seed, &[TAG_ENV, e as u64]),
        )
        .unwrap();
        let mut rng = seeding::stream(seed, &[TAG_BANDIT, e as u64]);
        out.push(run_episode(&mut env, agent, &mut fabric, &cfg.loops, &cfg.bandit, &setup, &mut rng).unwrap());
    }
    (out, fabric)
}

#[test]
fn traces_are_reproducible() {
    let cfg = short_config(6);
    for agent in [AgentProfile::Interface, AgentProfile::Memory] {
        let (a, _) = traces(&cfg, 9, agent, 6, 400);
        let (b, _) = traces(&cfg, 9, agent, 6, 400);
        assert_eq!(a, b);
    }
}

#[test]
fn full_runs_log_no_denials() {
    let cfg = short_config(8);
    for agent in [AgentProfile::Interface, AgentProfile::Memory] {
        let (_, fabric) = traces(&cfg, 4, agent, 8, 1800);
        assert!(fabric.denials().is_empty(), "{:?}", fabric.denials());
    }
}

#[test]
fn reflexive_loop_runs_the_latest_directive() {
    let cfg = short_config(5);
    let period = cfg.loops.contextual_period;
    let (all, _) = traces(&cfg, 6, AgentProfile::Memory, 5, 300);
    for tr in &all {
        for (t, &v) in tr.versions.iter().enumerate() {
            assert_eq!(v, 1 + t as u64 / period, "tick {t}");
        }
        for (t, w) in tr.arms.chunks(period as usize).enumerate() {
            assert!(w.iter().all(|&a| a == w[0]), "arm changed inside interval {t}");
        }
        assert_eq!(tr.final_version, 1 + 300 / period);
    }
}

#[test]
fn contextual_work_happens_only_on_boundaries() {
    let cfg = short_config(2);
    let period = cfg.loops.contextual_period;
    let (all, _) = traces(&cfg, 3, AgentProfile::Memory, 2, 250);
    for tr in &all {
        assert_eq!(tr.contextual_ticks.len(), 25);
        assert!(tr.contextual_ticks.iter().all(|t| (t + 1) % period == 0));
        assert_eq!(tr.interval_rewards.len(), tr.contextual_ticks.len());
        assert_eq!(tr.anomalies.len(), tr.contextual_ticks.len());
        if let Some(r) = &tr.retrieval {
            assert_eq!(r.tick, period - 1);
        }
    }
}

#[test]
fn episodic_store_counts_accepted_events() {
    let cfg = short_config(7);
    let (all, fabric) = traces(&cfg, 5, AgentProfile::Memory, 7, 200);
    let accepted = all
        .iter()
        .filter(|t| matches!(t.consolidation, Some(Consolidation::Accepted(_))))
        .count();
    let store = fabric.episodic(LoopRole::Evolutionary).unwrap();
    assert_eq!(store.len(), accepted);
    for (i, ep) in store.episodes().iter().enumerate() {
        assert_eq!(ep.id, i as u64);
    }
    let (interface, fabric) = traces(&cfg, 5, AgentProfile::Interface, 7, 200);
    assert!(interface.iter().all(|t| t.consolidation.is_none() && t.retrieval.is_none()));
    assert!(fabric.episodic(LoopRole::Evolutionary).unwrap().is_empty());
}

#[test]
fn temporal_runs_are_reproducible() {
    let cfg = short_config(5);
    let a = run_temporal_seed(&cfg, 2).unwrap();
    let b = run_temporal_seed(&cfg, 2).unwrap();
    assert_eq!(a, b);
    let res = run_temporal(&cfg).unwrap();
    assert_eq!(res.runs.len(), 2);
    assert_eq!(res.runs[0], a);
    assert_eq!(
        emit::temporal_seed_table(&res).to_csv_string(),
        emit::temporal_seed_table(&run_temporal(&cfg).unwrap()).to_csv_string()
    );
}

#[test]
fn both_agents_match_on_the_first_event() {
    let res = run_temporal(&short_config(1)).unwrap();
    for run in &res.runs {
        assert_eq!(run.events[0].interface.cumulative, run.events[0].memory.cumulative);
    }
}

#[test]
fn config_round_trip_preserves_behavior() {
    let cfg = ExperimentConfig::default();
    let text = cfg.to_toml().unwrap();
    let back = ExperimentConfig::from_toml(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(
        emit::spatial_table(&run_spatial(&back).unwrap()).to_csv_string(),
        emit::spatial_table(&run_spatial(&cfg).unwrap()).to_csv_string()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nearest_equals_exhaustive_scan(seed in any::<u64>(), size in 0usize..=200) {
        let mut rng = seeding::stream(seed, &[21]);
        let mut store = EpisodicStore::new();
        for _ in 0..size {
            store.append(draft(unit_vector(&mut rng, 18))).unwrap();
        }
        let q = unit_vector(&mut rng, 18);
        let got = store.retrieve_nearest(&q).unwrap().map(|(e, _)| e.id);
        let scan = store
            .episodes()
            .iter()
            .map(|e| (e.id, cosine_similarity(&q, &e.embedding).unwrap()))
            .fold(None, |best: Option<(u64, f64)>, (id, s)| match best {
                Some((_, b)) if b >= s => best,
                _ => Some((id, s)),
            })
            .map(|(id, _)| id);
        prop_assert_eq!(got, scan);
    }
}
