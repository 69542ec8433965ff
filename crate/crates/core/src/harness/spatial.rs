//! Single-shot recovery from each interference regime: uniform KPI-driven boost
//! versus diagnosis-driven, mask-targeted boost.

use serde::Serialize;

use super::config::{ConfigError, ExperimentConfig};
use super::stats;
use super::{parallel_map, ExperimentError};
use crate::agents::{diagnose, interface_agent_act, memory_agent_act, DiagnosisLabel};
use crate::matrix::{BeamSnrMatrix, ElementMask};
use crate::radio::{
    compress_to_kpi, generate_baseline, inject_interference, spectral_efficiency, InterferenceEvent, InterferenceKind,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpatialRow {
    pub regime: InterferenceKind,
    pub seed: u64,
    pub se_interface: f64,
    pub se_memory: f64,
    pub gain_pct: f64,
    /// Mean boost the memory agent placed on each truly affected element.
    pub recovered_db: f64,
    pub diagnosis: DiagnosisLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeSummary {
    pub regime: InterferenceKind,
    pub se_interface: f64,
    pub se_memory: f64,
    pub gain_pct_mean: f64,
    pub gain_pct_stdev: f64,
    pub gain_pct_min: f64,
    pub gain_pct_max: f64,
    pub recovered_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialResult {
    /// Sorted by regime, then seed.
    pub rows: Vec<SpatialRow>,
    pub summaries: Vec<RegimeSummary>,
}

impl SpatialResult {
    pub fn summary(&self, regime: InterferenceKind) -> &RegimeSummary {
        self.summaries
            .iter()
            .find(|s| s.regime == regime)
            .expect("every regime is summarized")
    }

    pub fn rows_for(&self, regime: InterferenceKind) -> impl Iterator<Item = &SpatialRow> {
        self.rows.iter().filter(move |r| r.regime == regime)
    }
}

/// The configured event of `kind` on `base`.
pub fn spatial_event(cfg: &ExperimentConfig, kind: InterferenceKind, base: &BeamSnrMatrix) -> InterferenceEvent {
    let s = &cfg.spatial;
    let (beams, subcarriers) = base.shape();
    let mask = match kind {
        InterferenceKind::CoChannel => ElementMask::rows(&s.co_channel_beams, subcarriers),
        InterferenceKind::Multipath => {
            let ranges: Vec<(usize, usize)> = s.multipath_bands.iter().map(|&[a, b]| (a, b)).collect();
            ElementMask::bands(&ranges, beams)
        }
        InterferenceKind::Misalignment => {
            ElementMask::rows(&[s.misalignment_beam.unwrap_or_else(|| base.dominant_beam())], subcarriers)
        }
    };
    InterferenceEvent {
        kind,
        mask,
        depth_db: s.depth(kind),
    }
}

/// Both agents' outcome on one seeded event.
pub fn run_spatial_case(cfg: &ExperimentConfig, kind: InterferenceKind, seed: u64) -> Result<SpatialRow, ExperimentError> {
    let base = generate_baseline(seed, &cfg.radio)?;
    let (beams, subcarriers) = base.shape();
    let event = spatial_event(cfg, kind, &base);
    let observed = inject_interference(&base, &event)?;
    let budget = cfg.spatial.budget_factor * event.degradation();

    let kpi = compress_to_kpi(&observed);
    let uniform = interface_agent_act(kpi, budget, beams, subcarriers);
    let targeted = memory_agent_act(&observed, &base, budget, &cfg.classifier)?;
    let diagnosis = diagnose(&observed, &base, &cfg.classifier)?.label;

    let se_interface = spectral_efficiency(&observed, &uniform, &base, budget)?;
    let se_memory = spectral_efficiency(&observed, &targeted, &base, budget)?;
    Ok(SpatialRow {
        regime: kind,
        seed,
        se_interface,
        se_memory,
        gain_pct: 100.0 * (se_memory - se_interface) / se_interface,
        recovered_db: targeted.mean_over(&event.mask),
        diagnosis,
    })
}

pub fn run_spatial(cfg: &ExperimentConfig) -> Result<SpatialResult, ExperimentError> {
    cfg.validate()?;
    let seeds = cfg.spatial.seeds.seeds();
    if seeds.is_empty() {
        return Err(ConfigError::Invalid("no spatial seeds".into()).into());
    }
    let jobs: Vec<(InterferenceKind, u64)> = InterferenceKind::ALL
        .iter()
        .flat_map(|&k| seeds.iter().map(move |&s| (k, s)))
        .collect();
    let rows = parallel_map(&jobs, |&(kind, seed)| run_spatial_case(cfg, kind, seed))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let summaries = InterferenceKind::ALL
        .iter()
        .map(|&regime| {
            let of = |f: fn(&SpatialRow) -> f64| -> Vec<f64> { rows.iter().filter(|r| r.regime == regime).map(f).collect() };
            let gains = of(|r| r.gain_pct);
            RegimeSummary {
                regime,
                se_interface: stats::mean(&of(|r| r.se_interface)),
                se_memory: stats::mean(&of(|r| r.se_memory)),
                gain_pct_mean: stats::mean(&gains),
                gain_pct_stdev: stats::stdev(&gains),
                gain_pct_min: gains.iter().copied().fold(f64::INFINITY, f64::min),
                gain_pct_max: gains.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                recovered_db: stats::mean(&of(|r| r.recovered_db)),
            }
        })
        .collect();
    Ok(SpatialResult { rows, summaries })
}
