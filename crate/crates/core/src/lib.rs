//! Deterministic simulator of a memory-centric AI-RAN node.
//!
//! A tiered memory fabric ([`fabric`]) is shared by three cognitive loops
//! ([`engine`]) that control a synthetic beam-SNR channel ([`radio`]). Two
//! agents ([`agents`]) compete: one sees only a compressed KPI, the other the
//! full matrix plus an episodic store ([`episodic`]). The [`harness`] runs the
//! spatial recovery and recurring-event experiments and writes their results.

pub mod action;
pub mod agents;
pub mod engine;
pub mod episodic;
pub mod fabric;
pub mod harness;
pub mod matrix;
pub mod radio;
pub mod seeding;

pub use action::{Compliance, ComplianceRule, PowerAction};
pub use agents::{ArmSet, BanditConfig, Diagnosis, DiagnosisLabel, PolicyParams, Thresholds};
pub use engine::{AgentProfile, EpisodeTrace, Environment, LoopConfig};
pub use episodic::{Episode, EpisodicStore};
pub use fabric::{Access, Fabric, FabricConfig, LoopRole, Tier};
pub use matrix::{BeamSnrMatrix, Element, ElementMask};
pub use radio::{InterferenceEvent, InterferenceKind};
