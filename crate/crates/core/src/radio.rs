//! Synthetic radio environment: baseline beam-SNR grids, interference signatures,
//! KPI compression, spectral efficiency and stage-dependent throughput.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{Compliance, ComplianceRule, PowerAction};
use crate::matrix::{db_to_linear, linear_to_db, BeamSnrMatrix, ElementMask};
use crate::seeding::{self, TAG_BASELINE, TAG_PATTERN};

#[derive(Debug, Error, PartialEq)]
pub enum RadioError {
    #[error("interference mask exceeds the {beams}x{subcarriers} grid")]
    IndexOutOfBounds { beams: usize, subcarriers: usize },
    #[error("shape mismatch: {expected:?} vs {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("action violates compliance rule {0}")]
    ComplianceViolation(ComplianceRule),
    #[error("invalid radio configuration: {0}")]
    InvalidConfig(String),
}

/// Grid size and the statistics of the synthetic baseline channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub beams: usize,
    pub subcarriers: usize,
    pub beam_mean_min_db: f64,
    pub beam_mean_max_db: f64,
    pub jitter_sigma_db: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            beams: 8,
            subcarriers: 100,
            beam_mean_min_db: 12.0,
            beam_mean_max_db: 24.0,
            jitter_sigma_db: 1.0,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<(), RadioError> {
        if self.beams == 0 || self.subcarriers == 0 {
            return Err(RadioError::InvalidConfig("grid dimensions must be positive".into()));
        }
        if !(self.beam_mean_min_db.is_finite()
            && self.beam_mean_max_db.is_finite()
            && self.beam_mean_min_db <= self.beam_mean_max_db)
        {
            return Err(RadioError::InvalidConfig("beam mean range is empty".into()));
        }
        if !(self.jitter_sigma_db >= 0.0 && self.jitter_sigma_db.is_finite()) {
            return Err(RadioError::InvalidConfig("jitter sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-beam means drawn uniformly from the configured range, plus Gaussian jitter per element.
pub fn generate_baseline(seed: u64, cfg: &BaselineConfig) -> Result<BeamSnrMatrix, RadioError> {
    cfg.validate()?;
    let mut rng = seeding::stream(seed, &[TAG_BASELINE]);
    let means: Vec<f64> = (0..cfg.beams)
        .map(|_| {
            if cfg.beam_mean_max_db > cfg.beam_mean_min_db {
                rng.random_range(cfg.beam_mean_min_db..=cfg.beam_mean_max_db)
            } else {
                cfg.beam_mean_min_db
            }
        })
        .collect();
    let jitter = Normal::new(0.0, cfg.jitter_sigma_db)
        .map_err(|e| RadioError::InvalidConfig(e.to_string()))?;
    Ok(BeamSnrMatrix::from_fn(cfg.beams, cfg.subcarriers, |b, _| {
        if cfg.jitter_sigma_db > 0.0 {
            means[b] + jitter.sample(&mut rng)
        } else {
            means[b]
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InterferenceKind {
    CoChannel,
    Multipath,
    Misalignment,
}

impl InterferenceKind {
    pub const ALL: [InterferenceKind; 3] = [
        InterferenceKind::CoChannel,
        InterferenceKind::Multipath,
        InterferenceKind::Misalignment,
    ];

    pub fn label(self) -> &'static str {
        match self {
            InterferenceKind::CoChannel => "co_channel",
            InterferenceKind::Multipath => "multipath",
            InterferenceKind::Misalignment => "misalignment",
        }
    }
}

/// A typed interference signature: which elements drop, and by how much.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceEvent {
    pub kind: InterferenceKind,
    pub mask: ElementMask,
    pub depth_db: f64,
}

impl InterferenceEvent {
    /// Total injected degradation in dB-element units.
    pub fn degradation(&self) -> f64 {
        self.depth_db * self.mask.len() as f64
    }
}

/// Lowers every masked element of `base` by the event depth. `base` is not modified.
pub fn inject_interference(
    base: &BeamSnrMatrix,
    ev: &InterferenceEvent,
) -> Result<BeamSnrMatrix, RadioError> {
    let (beams, subcarriers) = base.shape();
    if !ev.mask.fits(beams, subcarriers) {
        return Err(RadioError::IndexOutOfBounds { beams, subcarriers });
    }
    let mut out = base.clone();
    let values = out.values_mut();
    for i in ev.mask.flat_indices(subcarriers) {
        values[i] -= ev.depth_db;
    }
    Ok(out)
}

/// Average SINR as an interface would report it: linear power mean, back to dB.
pub fn compress_to_kpi(m: &BeamSnrMatrix) -> f64 {
    let mean = m.values().iter().map(|&v| db_to_linear(v)).sum::<f64>() / m.len() as f64;
    linear_to_db(mean)
}

/// Mean Shannon efficiency `log2(1 + snr)` over the grid after applying boosts,
/// where each boosted element is capped at its baseline value.
pub fn spectral_efficiency(
    observed: &BeamSnrMatrix,
    action: &PowerAction,
    base: &BeamSnrMatrix,
    power_budget: f64,
) -> Result<f64, RadioError> {
    if observed.shape() != base.shape() {
        return Err(RadioError::DimensionMismatch {
            expected: base.shape(),
            found: observed.shape(),
        });
    }
    if !action.matches_shape(base) {
        return Err(RadioError::DimensionMismatch {
            expected: base.shape(),
            found: action.shape(),
        });
    }
    if let Compliance::Violation(rule) = action.check_budget(power_budget) {
        return Err(RadioError::ComplianceViolation(rule));
    }
    Ok(capped_efficiency(observed.values(), action.boosts(), base.values()))
}

/// Unchecked kernel shared with the tick loop; slices must have equal length.
pub(crate) fn capped_efficiency(observed: &[f64], boosts: &[f64], base: &[f64]) -> f64 {
    let n = observed.len();
    let total: f64 = observed
        .iter()
        .zip(boosts)
        .zip(base)
        .map(|((&o, &b), &cap)| (1.0 + db_to_linear((o + b).min(cap))).log2())
        .sum();
    total / n as f64
}

/// Crowd stage of a stadium event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Arrival,
    Game,
    Halftime,
    SecondHalf,
    Departure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageProfile {
    pub stage: Stage,
    pub load: f64,
    /// Minutes `[start, end)`.
    pub start: u32,
    pub end: u32,
}

/// Normalized throughput: efficiency scaled by the stage's traffic load.
pub fn throughput(se: f64, stage: &StageProfile) -> f64 {
    se * stage.load
}

/// Ordered stage partition of one event.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSchedule {
    stages: Vec<StageProfile>,
}

impl StageSchedule {
    pub const STAGE_ORDER: [Stage; 5] = [
        Stage::Arrival,
        Stage::Game,
        Stage::Halftime,
        Stage::SecondHalf,
        Stage::Departure,
    ];

    /// `bounds` holds the six boundaries of the five stages; `loads` one factor per stage.
    pub fn new(bounds: &[u32], loads: &[f64]) -> Result<Self, RadioError> {
        if bounds.len() != Self::STAGE_ORDER.len() + 1 || loads.len() != Self::STAGE_ORDER.len() {
            return Err(RadioError::InvalidConfig(
                "stage schedule needs 6 bounds and 5 loads".into(),
            ));
        }
        if bounds[0] != 0 || bounds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RadioError::InvalidConfig(
                "stage bounds must start at 0 and strictly increase".into(),
            ));
        }
        if loads.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
            return Err(RadioError::InvalidConfig("stage loads must lie in (0, 1]".into()));
        }
        let stages = Self::STAGE_ORDER
            .iter()
            .enumerate()
            .map(|(i, &stage)| StageProfile {
                stage,
                load: loads[i],
                start: bounds[i],
                end: bounds[i + 1],
            })
            .collect();
        Ok(Self { stages })
    }

    pub fn total_minutes(&self) -> u32 {
        self.stages.last().map_or(0, |s| s.end)
    }

    pub fn stages(&self) -> &[StageProfile] {
        &self.stages
    }

    /// Stage covering `minute`; minutes past the end map to the last stage.
    pub fn at(&self, minute: u32) -> &StageProfile {
        self.stages
            .iter()
            .find(|s| minute >= s.start && minute < s.end)
            .unwrap_or_else(|| self.stages.last().expect("schedule is never empty"))
    }
}

impl Default for StageSchedule {
    fn default() -> Self {
        Self::new(&[0, 30, 90, 105, 160, 180], &[0.6, 1.0, 0.7, 0.95, 0.5])
            .expect("default schedule is valid")
    }
}

/// The four pattern families cycled through by recurring events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatternFamily {
    CoChannelLow,
    CoChannelHigh,
    Multipath,
    Misalignment,
}

impl PatternFamily {
    /// Event 1 maps to the first family; the cycle has period four.
    pub fn for_event(event_index: u32) -> Self {
        match event_index.saturating_sub(1) % 4 {
            0 => PatternFamily::CoChannelLow,
            1 => PatternFamily::CoChannelHigh,
            2 => PatternFamily::Multipath,
            _ => PatternFamily::Misalignment,
        }
    }

    pub fn kind(self) -> InterferenceKind {
        match self {
            PatternFamily::CoChannelLow | PatternFamily::CoChannelHigh => {
                InterferenceKind::CoChannel
            }
            PatternFamily::Multipath => InterferenceKind::Multipath,
            PatternFamily::Misalignment => InterferenceKind::Misalignment,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PatternFamily::CoChannelLow => "co_channel_low",
            PatternFamily::CoChannelHigh => "co_channel_high",
            PatternFamily::Multipath => "multipath",
            PatternFamily::Misalignment => "misalignment",
        }
    }
}

/// Geometry and depth of the recurring-event pattern families.
///
/// Location jitter (beams, band start) is drawn once per seed so that repeats of
/// a family stay near-identical; each event adds a small band shift and depth jitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatternConfig {
    pub co_channel_low_beams: Vec<usize>,
    pub co_channel_high_beams: Vec<usize>,
    pub multipath_band_starts: Vec<usize>,
    pub multipath_band_width: usize,
    pub co_channel_depth_db: f64,
    pub multipath_depth_db: f64,
    pub misalignment_depth_db: f64,
    pub beam_jitter: usize,
    pub subcarrier_jitter: usize,
    pub event_subcarrier_jitter: usize,
    pub depth_jitter_db: f64,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            co_channel_low_beams: vec![1, 2, 3],
            co_channel_high_beams: vec![4, 5, 6],
            multipath_band_starts: vec![20, 60],
            multipath_band_width: 12,
            co_channel_depth_db: 14.0,
            multipath_depth_db: 23.0,
            misalignment_depth_db: 30.0,
            beam_jitter: 1,
            subcarrier_jitter: 3,
            event_subcarrier_jitter: 1,
            depth_jitter_db: 1.0,
        }
    }
}

fn shift_within(indices: &[usize], offset: i64, limit: usize) -> Vec<usize> {
    let lo = indices.iter().copied().min().unwrap_or(0) as i64;
    let hi = indices.iter().copied().max().unwrap_or(0) as i64;
    // Clamp the shift so the whole group stays inside [0, limit).
    let offset = offset.clamp(-lo, limit as i64 - 1 - hi);
    indices.iter().map(|&i| (i as i64 + offset) as usize).collect()
}

fn symmetric_draw(rng: &mut impl Rng, span: usize) -> i64 {
    if span == 0 {
        0
    } else {
        rng.random_range(-(span as i64)..=span as i64)
    }
}

/// Interference pattern for event `event_index` (1-based) of a recurring series.
///
/// Misalignment collapses the dominant beam of `baseline`.
pub fn make_event_pattern(
    event_index: u32,
    seed: u64,
    cfg: &PatternConfig,
    baseline: &BeamSnrMatrix,
) -> Result<InterferenceEvent, RadioError> {
    let (beams, subcarriers) = baseline.shape();
    let mut seed_rng = seeding::stream(seed, &[TAG_PATTERN]);
    let beam_offset = symmetric_draw(&mut seed_rng, cfg.beam_jitter);
    let band_offset = symmetric_draw(&mut seed_rng, cfg.subcarrier_jitter);

    let mut event_rng = seeding::stream(seed, &[TAG_PATTERN, event_index as u64]);
    let event_shift = symmetric_draw(&mut event_rng, cfg.event_subcarrier_jitter);
    let depth_delta = if cfg.depth_jitter_db > 0.0 {
        event_rng.random_range(-cfg.depth_jitter_db..=cfg.depth_jitter_db)
    } else {
        0.0
    };

    let family = PatternFamily::for_event(event_index);
    let (mask, depth) = match family {
        PatternFamily::CoChannelLow | PatternFamily::CoChannelHigh => {
            let nominal = if family == PatternFamily::CoChannelLow {
                &cfg.co_channel_low_beams
            } else {
                &cfg.co_channel_high_beams
            };
            if nominal.is_empty() || nominal.iter().any(|&b| b >= beams) {
                return Err(RadioError::IndexOutOfBounds { beams, subcarriers });
            }
            let rows = shift_within(nominal, beam_offset, beams);
            (ElementMask::rows(&rows, subcarriers), cfg.co_channel_depth_db)
        }
        PatternFamily::Multipath => {
            let width = cfg.multipath_band_width;
            if width == 0 || width > subcarriers {
                return Err(RadioError::IndexOutOfBounds { beams, subcarriers });
            }
            let starts = shift_within(
                &cfg.multipath_band_starts,
                band_offset + event_shift,
                subcarriers - width + 1,
            );
            let ranges: Vec<(usize, usize)> = starts.iter().map(|&s| (s, s + width)).collect();
            (ElementMask::bands(&ranges, beams), cfg.multipath_depth_db)
        }
        PatternFamily::Misalignment => (
            ElementMask::rows(&[baseline.dominant_beam()], subcarriers),
            cfg.misalignment_depth_db,
        ),
    };
    Ok(InterferenceEvent {
        kind: family.kind(),
        mask,
        depth_db: (depth + depth_delta).max(0.0),
    })
}
