//! Per-element power boost actions and the budget rule they must satisfy.

use serde::{Deserialize, Serialize};

use crate::matrix::{BeamSnrMatrix, ElementMask};

/// Slack for accumulated rounding when summing many equal shares of a budget.
const BUDGET_TOLERANCE: f64 = 1e-9;

/// Grid of non-negative dB boost offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAction {
    beams: usize,
    subcarriers: usize,
    boosts: Vec<f64>,
}

/// Which compliance rule an action broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComplianceRule {
    PowerBudget,
    NonNegativity,
}

impl std::fmt::Display for ComplianceRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ComplianceRule::PowerBudget => f.write_str("power_budget"),
            ComplianceRule::NonNegativity => f.write_str("nonnegativity"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compliance {
    Ok,
    Violation(ComplianceRule),
}

impl Compliance {
    pub fn is_ok(self) -> bool {
        matches!(self, Compliance::Ok)
    }
}

impl PowerAction {
    pub fn zero(beams: usize, subcarriers: usize) -> Self {
        Self {
            beams,
            subcarriers,
            boosts: vec![0.0; beams * subcarriers],
        }
    }

    /// Raw constructor; compliance is checked separately, so negative offsets are representable.
    pub fn from_boosts(beams: usize, subcarriers: usize, boosts: Vec<f64>) -> Self {
        assert_eq!(boosts.len(), beams * subcarriers);
        Self {
            beams,
            subcarriers,
            boosts,
        }
    }

    /// Same offset on every element.
    pub fn uniform(beams: usize, subcarriers: usize, per_element_db: f64) -> Self {
        Self {
            beams,
            subcarriers,
            boosts: vec![per_element_db; beams * subcarriers],
        }
    }

    /// Splits `budget` evenly over the elements of `mask`; zero elsewhere.
    pub fn spread_over(mask: &ElementMask, beams: usize, subcarriers: usize, budget: f64) -> Self {
        let mut action = Self::zero(beams, subcarriers);
        if mask.is_empty() {
            return action;
        }
        let share = budget / mask.len() as f64;
        for i in mask.flat_indices(subcarriers) {
            action.boosts[i] = share;
        }
        action
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.beams, self.subcarriers)
    }

    pub fn boosts(&self) -> &[f64] {
        &self.boosts
    }

    pub fn get(&self, beam: usize, subcarrier: usize) -> f64 {
        self.boosts[beam * self.subcarriers + subcarrier]
    }

    pub(crate) fn boosts_mut(&mut self) -> &mut [f64] {
        &mut self.boosts
    }

    /// Total budget consumed, in dB-element units.
    pub fn budget_used(&self) -> f64 {
        self.boosts.iter().sum()
    }

    /// Ok iff every offset is non-negative and the offsets sum to at most `power_budget`.
    pub fn check_budget(&self, power_budget: f64) -> Compliance {
        if self.boosts.iter().any(|&b| b < 0.0 || !b.is_finite()) {
            return Compliance::Violation(ComplianceRule::NonNegativity);
        }
        let slack = BUDGET_TOLERANCE * power_budget.abs().max(1.0);
        if self.budget_used() > power_budget + slack {
            return Compliance::Violation(ComplianceRule::PowerBudget);
        }
        Compliance::Ok
    }

    /// Mean offset over the elements of `mask`, i.e. recovered dB per affected element.
    pub fn mean_over(&self, mask: &ElementMask) -> f64 {
        if mask.is_empty() {
            return 0.0;
        }
        mask.flat_indices(self.subcarriers)
            .into_iter()
            .map(|i| self.boosts[i])
            .sum::<f64>()
            / mask.len() as f64
    }

    pub fn matches_shape(&self, m: &BeamSnrMatrix) -> bool {
        self.shape() == m.shape()
    }
}
