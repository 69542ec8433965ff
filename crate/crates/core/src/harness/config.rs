//! Experiment configuration, read from TOML. Every key has a default and
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{BanditConfig, Thresholds};
use crate::engine::LoopConfig;
use crate::fabric::FabricConfig;
use crate::radio::{BaselineConfig, InterferenceKind, PatternConfig, StageSchedule};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Inclusive seed range `first..=first + count - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRange {
    pub first: u64,
    pub count: u64,
}

impl SeedRange {
    pub fn new(first: u64, count: u64) -> Self {
        Self { first, count }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (self.first..self.first + self.count).collect()
    }

    /// Parses `n..m` (inclusive) or a single `n`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let bad = || ConfigError::Invalid(format!("seed range {text:?} is not `n` or `n..m`"));
        match text.split_once("..") {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad())?;
                let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
                if b < a {
                    return Err(bad());
                }
                Ok(Self::new(a, b - a + 1))
            }
            None => Ok(Self::new(text.trim().parse().map_err(|_| bad())?, 1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpatialConfig {
    pub seeds: SeedRange,
    pub co_channel_beams: Vec<usize>,
    /// Subcarrier ranges `[start, end)`.
    pub multipath_bands: Vec<[usize; 2]>,
    /// Collapsed beam; the baseline's strongest beam when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub misalignment_beam: Option<usize>,
    pub co_channel_depth_db: f64,
    pub multipath_depth_db: f64,
    pub misalignment_depth_db: f64,
    /// Power budget as a fraction of the injected degradation.
    pub budget_factor: f64,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        Self {
            seeds: SeedRange::new(1, 20),
            co_channel_beams: vec![2, 3, 4],
            multipath_bands: vec![[20, 32], [60, 72]],
            misalignment_beam: None,
            co_channel_depth_db: 13.0,
            multipath_depth_db: 14.0,
            misalignment_depth_db: 20.0,
            budget_factor: 0.75,
        }
    }
}

impl SpatialConfig {
    pub fn depth(&self, kind: InterferenceKind) -> f64 {
        match kind {
            InterferenceKind::CoChannel => self.co_channel_depth_db,
            InterferenceKind::Multipath => self.multipath_depth_db,
            InterferenceKind::Misalignment => self.misalignment_depth_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemporalConfig {
    pub seeds: SeedRange,
    pub events: u32,
    /// Control intervals (minutes) per event.
    pub intervals: u32,
    /// Intervals summed into the early-window outcome.
    pub early_window: u32,
    pub budget_factor: f64,
    pub noise_sigma_db: f64,
    /// Six boundaries of the five crowd stages, in minutes.
    pub stage_bounds: Vec<u32>,
    pub stage_loads: Vec<f64>,
    pub pattern: PatternConfig,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        let schedule = StageSchedule::default();
        let mut stage_bounds: Vec<u32> = schedule.stages().iter().map(|s| s.start).collect();
        stage_bounds.push(schedule.total_minutes());
        Self {
            seeds: SeedRange::new(1, 10),
            events: 10,
            intervals: 180,
            early_window: 30,
            budget_factor: 1.0,
            noise_sigma_db: 0.5,
            stage_bounds,
            stage_loads: schedule.stages().iter().map(|s| s.load).collect(),
            pattern: PatternConfig::default(),
        }
    }
}

impl TemporalConfig {
    pub fn schedule(&self) -> Result<StageSchedule, ConfigError> {
        StageSchedule::new(&self.stage_bounds, &self.stage_loads).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

/// Capacities of the volatile memory tiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemoryConfig {
    pub sensory_capacity: usize,
    pub fast_capacity: usize,
    pub pooled_capacity: usize,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        let f = FabricConfig::default();
        Self {
            sensory_capacity: f.sensory_capacity,
            fast_capacity: f.fast_capacity,
            pooled_capacity: f.pooled_capacity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("results") }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub radio: BaselineConfig,
    pub spatial: SpatialConfig,
    pub temporal: TemporalConfig,
    #[serde(rename = "loop")]
    pub loops: LoopConfig,
    pub memory: MemoryConfig,
    pub bandit: BanditConfig,
    pub classifier: Thresholds,
    pub output: OutputConfig,
}

fn check(ok: bool, msg: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Invalid(msg.to_owned()))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn fabric(&self) -> FabricConfig {
        FabricConfig {
            beams: self.radio.beams,
            subcarriers: self.radio.subcarriers,
            sensory_capacity: self.memory.sensory_capacity,
            fast_capacity: self.memory.fast_capacity,
            pooled_capacity: self.memory.pooled_capacity,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.radio.validate().map_err(|e| invalid(&e))?;
        self.loops.validate().map_err(|e| invalid(&e))?;
        self.bandit.validate().map_err(|e| invalid(&e))?;
        self.classifier.validate().map_err(|e| invalid(&e))?;
        self.fabric().validate().map_err(|e| invalid(&e))?;

        let (beams, subcarriers) = (self.radio.beams, self.radio.subcarriers);
        let s = &self.spatial;
        check(s.seeds.count >= 1, "spatial.seeds.count must be at least 1")?;
        check(
            (2..=3).contains(&s.co_channel_beams.len())
                && s.co_channel_beams.windows(2).all(|w| w[1] == w[0] + 1)
                && s.co_channel_beams.iter().all(|&b| b < beams),
            "spatial.co_channel_beams must list 2-3 adjacent beams inside the grid",
        )?;
        check(
            !s.multipath_bands.is_empty()
                && s.multipath_bands.iter().all(|[a, b]| a < b && *b <= subcarriers),
            "spatial.multipath_bands must be non-empty ranges inside the grid",
        )?;
        check(
            s.misalignment_beam.is_none_or(|b| b < beams),
            "spatial.misalignment_beam is outside the grid",
        )?;
        for d in [s.co_channel_depth_db, s.multipath_depth_db, s.misalignment_depth_db] {
            check(d.is_finite() && d >= 0.0, "spatial depths must be >= 0")?;
        }
        check(
            s.budget_factor.is_finite() && s.budget_factor >= 0.0,
            "spatial.budget_factor must be >= 0",
        )?;

        let t = &self.temporal;
        check(t.seeds.count >= 1, "temporal.seeds.count must be at least 1")?;
        check(t.events >= 1, "temporal.events must be at least 1")?;
        check(
            t.early_window >= 1 && t.early_window <= t.intervals,
            "temporal.early_window must lie in [1, intervals]",
        )?;
        check(
            t.budget_factor.is_finite() && t.budget_factor >= 0.0,
            "temporal.budget_factor must be >= 0",
        )?;
        check(
            t.noise_sigma_db.is_finite() && t.noise_sigma_db >= 0.0,
            "temporal.noise_sigma_db must be >= 0",
        )?;
        let schedule = t.schedule()?;
        check(
            schedule.total_minutes() == t.intervals,
            "temporal.stage_bounds must end at temporal.intervals",
        )?;
        let p = &t.pattern;
        check(
            p.co_channel_low_beams.iter().chain(&p.co_channel_high_beams).all(|&b| b < beams),
            "temporal.pattern beams are outside the grid",
        )?;
        check(
            p.multipath_band_width >= 1
                && p.multipath_band_starts.iter().all(|&s| s + p.multipath_band_width <= subcarriers),
            "temporal.pattern bands are outside the grid",
        )?;
        Ok(())
    }
}
