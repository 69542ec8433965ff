//! End-to-end experiments, seed sweeps and result emission.

pub mod config;
pub mod emit;
pub mod plot;
pub mod spatial;
pub mod stats;
pub mod temporal;

use thiserror::Error;

use crate::agents::AgentError;
use crate::engine::EngineError;
use crate::fabric::FabricError;
use crate::radio::{InterferenceKind, RadioError};
use config::{ConfigError, ExperimentConfig};
use emit::{Cell, Table};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error("{0} fabric accesses were denied during the run")]
    RoleViolation(usize),
}

/// Maps `f` over `items` on scoped threads; results keep the input order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(items.len().max(1));
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                scope.spawn(move || part.iter().map(f).collect::<Vec<R>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

/// Spatial gains over a grid of budget factors and depth scales.
pub fn sweep(cfg: &ExperimentConfig, budget_factors: &[f64], depth_scales: &[f64]) -> Result<Table, ExperimentError> {
    let mut rows = Vec::new();
    for &bf in budget_factors {
        for &scale in depth_scales {
            let mut c = cfg.clone();
            c.spatial.budget_factor = bf;
            c.spatial.co_channel_depth_db *= scale;
            c.spatial.multipath_depth_db *= scale;
            c.spatial.misalignment_depth_db *= scale;
            let res = spatial::run_spatial(&c)?;
            let seeds = c.spatial.seeds.seeds();
            let ordered = seeds.iter().all(|&seed| {
                let g = |k: InterferenceKind| {
                    res.rows
                        .iter()
                        .find(|r| r.regime == k && r.seed == seed)
                        .map_or(f64::NAN, |r| r.gain_pct)
                };
                g(InterferenceKind::CoChannel) > g(InterferenceKind::Multipath)
                    && g(InterferenceKind::Multipath) > g(InterferenceKind::Misalignment)
            });
            for s in &res.summaries {
                rows.push(vec![
                    Cell::Num(bf),
                    Cell::Num(scale),
                    Cell::Text(s.regime.label().into()),
                    Cell::Num(s.gain_pct_mean),
                    Cell::Num(s.gain_pct_stdev),
                    Cell::Int(ordered as u64),
                ]);
            }
        }
    }
    Ok(Table {
        header: vec![
            "budget_factor",
            "depth_scale",
            "regime",
            "gain_pct_mean",
            "gain_pct_stdev",
            "ordered_every_seed",
        ],
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_keeps_order() {
        let xs: Vec<u64> = (0..37).collect();
        assert_eq!(parallel_map(&xs, |x| x * 2), xs.iter().map(|x| x * 2).collect::<Vec<_>>());
        assert!(parallel_map(&Vec::<u64>::new(), |x| *x).is_empty());
    }
}
