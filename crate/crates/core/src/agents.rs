//! Control policies: the KPI-only interface agent, the full-state memory agent,
//! the pattern classifier, and the epsilon-greedy learner both agents share.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::PowerAction;
use crate::episodic::Episode;
use crate::matrix::{BeamSnrMatrix, ElementMask};

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("observed shape {found:?} does not match baseline shape {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("invalid agent configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiagnosisLabel {
    CoChannel,
    Multipath,
    Misalignment,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnosis {
    pub label: DiagnosisLabel,
    pub inferred_mask: ElementMask,
}

impl Diagnosis {
    pub fn unknown() -> Self {
        Self {
            label: DiagnosisLabel::Unknown,
            inferred_mask: ElementMask::empty(),
        }
    }
}

/// Classifier thresholds, all in dB of deficit except the coverage fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub deep_db: f64,
    pub row_db: f64,
    pub row_coverage: f64,
    pub column_db: f64,
    pub min_column_run: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            deep_db: 10.0,
            row_db: 4.0,
            row_coverage: 0.9,
            column_db: 4.0,
            min_column_run: 5,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), AgentError> {
        let finite = [self.deep_db, self.row_db, self.column_db]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !finite {
            return Err(AgentError::InvalidConfig("classifier thresholds must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.row_coverage) {
            return Err(AgentError::InvalidConfig("row coverage must lie in [0, 1]".into()));
        }
        if self.min_column_run == 0 {
            return Err(AgentError::InvalidConfig("minimum column run must be at least 1".into()));
        }
        Ok(())
    }
}

/// Longest run of consecutive `true` entries as `(start, len)`; earliest run wins ties.
fn longest_run(flags: &[bool]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut start = 0;
    for i in 0..=flags.len() {
        let on = i < flags.len() && flags[i];
        if on {
            continue;
        }
        let len = i - start;
        if len > 0 && best.is_none_or(|(_, l)| len > l) {
            best = Some((start, len));
        }
        start = i + 1;
    }
    best
}

/// All runs of consecutive `true` entries of at least `min_len`, as `[start, end)`.
fn runs(flags: &[bool], min_len: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..=flags.len() {
        if i < flags.len() && flags[i] {
            continue;
        }
        if i - start >= min_len && i > start {
            out.push((start, i));
        }
        start = i + 1;
    }
    out
}

/// Classifies the deficit pattern `base - observed`.
///
/// Rules apply in order: a single deep row is a misalignment; two or more
/// adjacent rows that are elevated across the band are co-channel; runs of
/// columns elevated on every beam are multipath; anything else is unknown.
pub fn diagnose(observed: &BeamSnrMatrix, base: &BeamSnrMatrix, th: &Thresholds) -> Result<Diagnosis, AgentError> {
    if observed.shape() != base.shape() {
        return Err(AgentError::DimensionMismatch {
            expected: base.shape(),
            found: observed.shape(),
        });
    }
    let (beams, subcarriers) = base.shape();
    let delta = base.minus(observed);
    let row_means: Vec<f64> = (0..beams).map(|b| delta.row_mean(b)).collect();

    let deep: Vec<usize> = (0..beams).filter(|&b| row_means[b] >= th.deep_db).collect();
    if deep.len() == 1 {
        return Ok(Diagnosis {
            label: DiagnosisLabel::Misalignment,
            inferred_mask: ElementMask::rows(&deep, subcarriers),
        });
    }

    let elevated_rows: Vec<bool> = (0..beams)
        .map(|b| {
            let covered = delta.row(b).iter().filter(|&&d| d >= th.row_db).count();
            row_means[b] >= th.row_db && covered as f64 >= th.row_coverage * subcarriers as f64
        })
        .collect();
    if let Some((start, len)) = longest_run(&elevated_rows) {
        if len >= 2 {
            let rows: Vec<usize> = (start..start + len).collect();
            return Ok(Diagnosis {
                label: DiagnosisLabel::CoChannel,
                inferred_mask: ElementMask::rows(&rows, subcarriers),
            });
        }
    }

    let elevated_cols: Vec<bool> = (0..subcarriers)
        .map(|k| {
            delta.column_mean(k) >= th.column_db && (0..beams).all(|b| delta.get(b, k) >= th.column_db)
        })
        .collect();
    let bands = runs(&elevated_cols, th.min_column_run);
    if !bands.is_empty() {
        return Ok(Diagnosis {
            label: DiagnosisLabel::Multipath,
            inferred_mask: ElementMask::bands(&bands, beams),
        });
    }
    Ok(Diagnosis::unknown())
}

/// Uniform boost of `budget / elements` on every element, whatever the cause.
pub fn interface_agent_act(_kpi_db: f64, budget: f64, beams: usize, subcarriers: usize) -> PowerAction {
    let n = (beams * subcarriers) as f64;
    PowerAction::uniform(beams, subcarriers, budget.max(0.0) / n)
}

/// Fires when the KPI falls more than `margin_db` below its rolling mean.
#[derive(Debug, Clone)]
pub struct KpiTrigger {
    window: usize,
    margin_db: f64,
    history: std::collections::VecDeque<f64>,
}

impl KpiTrigger {
    pub fn new(window: usize, margin_db: f64) -> Self {
        assert!(window >= 1);
        Self {
            window,
            margin_db,
            history: std::collections::VecDeque::with_capacity(window),
        }
    }

    /// Feeds one KPI sample; returns whether it triggers. A triggering sample
    /// is not folded into the rolling baseline.
    pub fn observe(&mut self, kpi_db: f64) -> bool {
        let fired = !self.history.is_empty() && kpi_db < self.baseline() - self.margin_db;
        if !fired {
            if self.history.len() == self.window {
                self.history.pop_front();
            }
            self.history.push_back(kpi_db);
        }
        fired
    }

    pub fn baseline(&self) -> f64 {
        self.history.iter().sum::<f64>() / self.history.len().max(1) as f64
    }
}

/// Diagnoses the pattern and spends the budget on the inferred mask in
/// proportion to each element's deficit, never beyond it. Falls back to a
/// uniform boost when the pattern is unknown.
pub fn memory_agent_act(
    observed: &BeamSnrMatrix,
    base: &BeamSnrMatrix,
    budget: f64,
    th: &Thresholds,
) -> Result<PowerAction, AgentError> {
    let (beams, subcarriers) = base.shape();
    let budget = budget.max(0.0);
    let diagnosis = diagnose(observed, base, th)?;
    if diagnosis.label == DiagnosisLabel::Unknown {
        return Ok(interface_agent_act(0.0, budget, beams, subcarriers));
    }
    let idx = diagnosis.inferred_mask.flat_indices(subcarriers);
    let deficits: Vec<f64> = idx
        .iter()
        .map(|&i| (base.values()[i] - observed.values()[i]).max(0.0))
        .collect();
    let total: f64 = deficits.iter().sum();
    let mut action = PowerAction::zero(beams, subcarriers);
    if total > 0.0 {
        let boosts = action.boosts_mut();
        for (&i, &d) in idx.iter().zip(&deficits) {
            boosts[i] = (budget * d / total).min(d);
        }
    }
    Ok(action)
}

/// State of the epsilon-greedy learner: one value and pull count per arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub arm_values: Vec<f64>,
    pub arm_counts: Vec<u64>,
    pub epsilon: f64,
}

impl PolicyParams {
    pub fn new(arms: usize, epsilon: f64) -> Self {
        Self {
            arm_values: vec![0.0; arms],
            arm_counts: vec![0; arms],
            epsilon,
        }
    }

    pub fn arms(&self) -> usize {
        self.arm_values.len()
    }

    /// Highest-valued arm; ties go to the lowest id.
    pub fn greedy_arm(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.arm_values.iter().enumerate() {
            if v > self.arm_values[best] {
                best = i;
            }
        }
        best
    }

    pub fn is_valid(&self) -> bool {
        !self.arm_values.is_empty()
            && self.arm_values.len() == self.arm_counts.len()
            && self.arm_values.iter().all(|v| v.is_finite())
            && (0.0..=1.0).contains(&self.epsilon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BanditConfig {
    pub epsilon: f64,
    pub alpha: f64,
    pub warm_epsilon: f64,
    pub similarity_min: f64,
}

impl Default for BanditConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.2,
            alpha: 0.2,
            warm_epsilon: 0.02,
            similarity_min: 0.8,
        }
    }
}

impl BanditConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.epsilon) && unit(self.warm_epsilon) && unit(self.alpha) && self.alpha > 0.0) {
            return Err(AgentError::InvalidConfig(
                "epsilon and warm_epsilon must lie in [0, 1], alpha in (0, 1]".into(),
            ));
        }
        if !(-1.0..=1.0).contains(&self.similarity_min) {
            return Err(AgentError::InvalidConfig("similarity_min must lie in [-1, 1]".into()));
        }
        Ok(())
    }
}

/// Explores a uniformly random arm with probability epsilon, else exploits.
pub fn select_arm(params: &PolicyParams, rng: &mut impl Rng) -> usize {
    if rng.random::<f64>() < params.epsilon {
        rng.random_range(0..params.arms())
    } else {
        params.greedy_arm()
    }
}

/// Recency-weighted value update. The first pull of an arm adopts the reward outright.
pub fn record(params: &mut PolicyParams, arm: usize, reward: f64, alpha: f64) {
    let v = &mut params.arm_values[arm];
    if params.arm_counts[arm] == 0 {
        *v = reward;
    } else {
        *v += alpha * (reward - *v);
    }
    params.arm_counts[arm] += 1;
}

/// Credits `reward` to the arm that earned it, then picks the next arm.
pub fn bandit_step(
    params: &mut PolicyParams,
    played: usize,
    reward: f64,
    alpha: f64,
    rng: &mut impl Rng,
) -> usize {
    record(params, played, reward, alpha);
    select_arm(params, rng)
}

/// Seeds the learner from a retrieved episode when it is similar enough.
/// Returns the parameters and whether they came from memory.
pub fn warm_start(
    retrieved: Option<(&Episode, f64)>,
    defaults: &PolicyParams,
    cfg: &BanditConfig,
) -> (PolicyParams, bool) {
    match retrieved {
        Some((ep, sim)) if sim >= cfg.similarity_min && ep.converged_policy.arms() == defaults.arms() => {
            let mut params = ep.converged_policy.clone();
            params.epsilon = cfg.warm_epsilon;
            (params, true)
        }
        _ => (defaults.clone(), false),
    }
}

/// A candidate recovery mask the learner can play.
#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub id: usize,
    pub label: String,
    pub mask: ElementMask,
}

/// The candidate masks: the whole grid, beam-row groups of one to three rows,
/// and paired subcarrier bands.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSet {
    beams: usize,
    subcarriers: usize,
    arms: Vec<Arm>,
}

impl ArmSet {
    pub fn standard(beams: usize, subcarriers: usize) -> Self {
        let mut masks: Vec<(String, ElementMask)> = vec![("all".into(), ElementMask::full(beams, subcarriers))];
        for b in 0..beams {
            masks.push((format!("beam{b}"), ElementMask::rows(&[b], subcarriers)));
        }
        for b in 0..beams.saturating_sub(2) {
            masks.push((format!("beams{b}-{}", b + 2), ElementMask::rows(&[b, b + 1, b + 2], subcarriers)));
        }
        for b in 0..beams.saturating_sub(1) {
            masks.push((format!("beams{b}-{}", b + 1), ElementMask::rows(&[b, b + 1], subcarriers)));
        }
        let width = (subcarriers * 12 / 100).max(1);
        let gap = subcarriers * 40 / 100;
        let step = (subcarriers * 3 / 100).max(1);
        let mut start = 0;
        while start + gap < subcarriers && start + width <= subcarriers && start < subcarriers * 54 / 100 {
            let second = (start + gap, (start + gap + width).min(subcarriers));
            masks.push((
                format!("bands{start}+{}", start + gap),
                ElementMask::bands(&[(start, start + width), second], beams),
            ));
            start += step;
        }
        let arms = masks
            .into_iter()
            .enumerate()
            .map(|(id, (label, mask))| Arm { id, label, mask })
            .collect();
        Self {
            beams,
            subcarriers,
            arms,
        }
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn get(&self, id: usize) -> &Arm {
        &self.arms[id]
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    /// The arm's mask with `budget` spread evenly over it.
    pub fn action(&self, id: usize, budget: f64) -> PowerAction {
        PowerAction::spread_over(&self.arms[id].mask, self.beams, self.subcarriers, budget.max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episodic::{EpisodeDraft, EpisodicStore};
    use crate::seeding;
    use approx::assert_abs_diff_eq;

    fn base() -> BeamSnrMatrix {
        BeamSnrMatrix::from_fn(8, 100, |b, k| 14.0 + b as f64 + 0.01 * k as f64)
    }

    fn lowered(rows: &[usize], cols: &[(usize, usize)], depth: f64) -> BeamSnrMatrix {
        let b = base();
        BeamSnrMatrix::from_fn(8, 100, |r, k| {
            let hit = rows.contains(&r) || cols.iter().any(|&(s, e)| k >= s && k < e);
            b.get(r, k) - if hit { depth } else { 0.0 }
        })
    }

    #[test]
    fn diagnoses_each_regime() {
        let th = Thresholds::default();
        let d = diagnose(&lowered(&[5], &[], 15.0), &base(), &th).unwrap();
        assert_eq!(d.label, DiagnosisLabel::Misalignment);
        assert_eq!(d.inferred_mask, ElementMask::rows(&[5], 100));

        let d = diagnose(&lowered(&[2, 3, 4], &[], 9.0), &base(), &th).unwrap();
        assert_eq!(d.label, DiagnosisLabel::CoChannel);
        assert_eq!(d.inferred_mask, ElementMask::rows(&[2, 3, 4], 100));

        let d = diagnose(&lowered(&[], &[(20, 32), (60, 72)], 7.0), &base(), &th).unwrap();
        assert_eq!(d.label, DiagnosisLabel::Multipath);
        assert_eq!(d.inferred_mask, ElementMask::bands(&[(20, 32), (60, 72)], 8));

        let d = diagnose(&base(), &base(), &th).unwrap();
        assert_eq!(d, Diagnosis::unknown());
    }

    #[test]
    fn diagnose_rejects_shape_mismatch() {
        let other = BeamSnrMatrix::filled(4, 100, 1.0);
        assert!(matches!(
            diagnose(&other, &base(), &Thresholds::default()),
            Err(AgentError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn interface_action_examples() {
        let a = interface_agent_act(10.0, 800.0, 8, 100);
        assert!(a.boosts().iter().all(|&b| b == 1.0));
        assert!(a.check_budget(800.0).is_ok());
        assert_eq!(interface_agent_act(10.0, 0.0, 8, 100), PowerAction::zero(8, 100));
    }

    #[test]
    fn memory_action_recovers_misalignment_fully() {
        let obs = lowered(&[5], &[], 15.0);
        let a = memory_agent_act(&obs, &base(), 1500.0, &Thresholds::default()).unwrap();
        for b in 0..8 {
            for k in 0..100 {
                let expect = if b == 5 { 15.0 } else { 0.0 };
                assert_abs_diff_eq!(a.get(b, k), expect, epsilon = 1e-9);
            }
        }
        let zero = memory_agent_act(&obs, &base(), 0.0, &Thresholds::default()).unwrap();
        assert_eq!(zero.budget_used(), 0.0);
    }

    #[test]
    fn kpi_trigger_needs_a_drop() {
        let mut t = KpiTrigger::new(5, 1.0);
        assert!(!t.observe(15.0));
        assert!(!t.observe(14.5));
        assert!(t.observe(13.0));
        assert!(!t.observe(14.0));
    }

    #[test]
    fn greedy_choice_and_ties() {
        let mut rng = seeding::stream(1, &[]);
        let mut p = PolicyParams::new(2, 0.0);
        p.arm_values = vec![1.0, 2.0];
        assert_eq!(select_arm(&p, &mut rng), 1);
        p.arm_values = vec![1.0, 1.0];
        assert_eq!(select_arm(&p, &mut rng), 0);
    }

    #[test]
    fn recency_weighted_update() {
        let mut p = PolicyParams::new(1, 0.0);
        p.arm_values[0] = 1.0;
        p.arm_counts[0] = 3;
        record(&mut p, 0, 2.0, 0.2);
        assert_abs_diff_eq!(p.arm_values[0], 1.2, epsilon = 1e-12);
        assert_eq!(p.arm_counts[0], 4);

        let mut fresh = PolicyParams::new(1, 0.0);
        record(&mut fresh, 0, 3.0, 0.2);
        assert_eq!(fresh.arm_values[0], 3.0);
    }

    #[test]
    fn warm_start_gate() {
        let cfg = BanditConfig::default();
        let defaults = PolicyParams::new(3, 0.2);
        assert_eq!(warm_start(None, &defaults, &cfg), (defaults.clone(), false));

        let mut store = EpisodicStore::new();
        let mut learned = PolicyParams::new(3, 0.2);
        learned.arm_values = vec![0.1, 0.9, 0.3];
        store
            .append(EpisodeDraft {
                embedding: vec![1.0, 0.0],
                family_hint: None,
                converged_policy: learned.clone(),
                outcome: 1.0,
                event_index: 1,
            })
            .unwrap();
        let ep = &store.episodes()[0];
        let (p, warm) = warm_start(Some((ep, 0.95)), &defaults, &cfg);
        assert!(warm);
        assert_eq!(p.arm_values, learned.arm_values);
        assert_eq!(p.epsilon, 0.02);
        assert_eq!(warm_start(Some((ep, 0.5)), &defaults, &cfg), (defaults, false));
    }

    #[test]
    fn standard_arm_set_has_forty_arms() {
        let arms = ArmSet::standard(8, 100);
        assert_eq!(arms.len(), 40);
        assert_eq!(arms.get(0).mask.len(), 800);
        for arm in arms.arms() {
            assert!(!arm.mask.is_empty());
            assert!(arm.mask.fits(8, 100));
            assert!(arms.action(arm.id, 120.0).check_budget(120.0).is_ok());
        }
    }
}
