//! Episodic vector store with cosine retrieval.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::PolicyParams;

/// Allowed deviation of a query or stored embedding from unit length.
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum EpisodicError {
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("query norm {0} is not 1")]
    NonUnitQuery(f64),
    #[error("episode embedding norm {0} is not 1")]
    NonUnitEmbedding(f64),
    #[error("vector length {found} does not match {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// One consolidated experience.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: u64,
    pub embedding: Vec<f64>,
    /// Debug label only; nothing in the control path reads it.
    pub family_hint: Option<String>,
    pub converged_policy: PolicyParams,
    pub outcome: f64,
    pub event_index: u32,
}

/// An episode before the store assigns its id.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeDraft {
    pub embedding: Vec<f64>,
    pub family_hint: Option<String>,
    pub converged_policy: PolicyParams,
    pub outcome: f64,
    pub event_index: u32,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, EpisodicError> {
    if a.len() != b.len() {
        return Err(EpisodicError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(EpisodicError::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Append-only list of episodes with dense ids starting at 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodicStore {
    episodes: Vec<Episode>,
}

impl EpisodicStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn episodes(&self) -> &[Episode] {
        &self.episodes
    }

    pub fn append(&mut self, draft: EpisodeDraft) -> Result<u64, EpisodicError> {
        let n = norm(&draft.embedding);
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(EpisodicError::NonUnitEmbedding(n));
        }
        if let Some(first) = self.episodes.first() {
            if first.embedding.len() != draft.embedding.len() {
                return Err(EpisodicError::DimensionMismatch {
                    expected: first.embedding.len(),
                    found: draft.embedding.len(),
                });
            }
        }
        let id = self.episodes.len() as u64;
        self.episodes.push(Episode {
            id,
            embedding: draft.embedding,
            family_hint: draft.family_hint,
            converged_policy: draft.converged_policy,
            outcome: draft.outcome,
            event_index: draft.event_index,
        });
        Ok(id)
    }

    /// Episode with the largest dot product against a unit `query`; ties go to the lowest id.
    pub fn retrieve_nearest(&self, query: &[f64]) -> Result<Option<(&Episode, f64)>, EpisodicError> {
        let n = norm(query);
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(EpisodicError::NonUnitQuery(n));
        }
        let mut best: Option<(&Episode, f64)> = None;
        for ep in &self.episodes {
            if ep.embedding.len() != query.len() {
                return Err(EpisodicError::DimensionMismatch {
                    expected: ep.embedding.len(),
                    found: query.len(),
                });
            }
            let s = dot(query, &ep.embedding);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((ep, s));
            }
        }
        Ok(best)
    }

    /// One JSON object per line, in id order.
    pub fn export_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for ep in &self.episodes {
            serde_json::to_writer(&mut out, ep)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}
