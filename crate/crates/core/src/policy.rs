//! Power policies and solver reports.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::channel::{DiscreteChannelModel, EquationCoefficients};
use crate::error::{check_len, invalid, Result};
use crate::rate::OrderingMethod;

/// One common power per channel state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricPolicy(Vec<f64>);

impl SymmetricPolicy {
    pub fn new(powers: Vec<f64>) -> Result<Self> {
        if powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("policy powers must be finite and non-negative"));
        }
        Ok(Self(powers))
    }

    pub fn zeros(states: usize) -> Self {
        Self(vec![0.0; states])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Σ fₘ Pₘ.
    pub fn average_power(&self, probs: &[f64]) -> f64 {
        self.0.iter().zip(probs).map(|(p, f)| p * f).sum()
    }
}

impl Index<usize> for SymmetricPolicy {
    type Output = f64;

    fn index(&self, m: usize) -> &f64 {
        &self.0[m]
    }
}

impl IndexMut<usize> for SymmetricPolicy {
    fn index_mut(&mut self, m: usize) -> &mut f64 {
        &mut self.0[m]
    }
}

/// Per-user, per-state powers stored as an `users × states` row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetricPolicy {
    users: usize,
    states: usize,
    powers: Vec<f64>,
}

impl AsymmetricPolicy {
    pub fn zeros(users: usize, states: usize) -> Self {
        Self {
            users,
            states,
            powers: vec![0.0; users * states],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let users = rows.len();
        let states = rows.first().map_or(0, Vec::len);
        for r in &rows {
            check_len(states, r.len())?;
        }
        let powers: Vec<f64> = rows.into_iter().flatten().collect();
        if powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("policy powers must be finite and non-negative"));
        }
        Ok(Self {
            users,
            states,
            powers,
        })
    }

    pub fn from_symmetric(users: usize, policy: &SymmetricPolicy) -> Self {
        let mut out = Self::zeros(users, policy.len());
        for l in 0..users {
            for m in 0..policy.len() {
                out[(l, m)] = policy[m];
            }
        }
        out
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn column(&self, m: usize) -> Vec<f64> {
        (0..self.users).map(|l| self[(l, m)]).collect()
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.powers[l * self.states..(l + 1) * self.states]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.users).map(|l| self.row(l).to_vec()).collect()
    }

    /// Σₘ fₘ P_{lm} for every user l.
    pub fn average_powers(&self, probs: &[f64]) -> Vec<f64> {
        (0..self.users)
            .map(|l| self.row(l).iter().zip(probs).map(|(p, f)| p * f).sum())
            .collect()
    }
}

impl Index<(usize, usize)> for AsymmetricPolicy {
    type Output = f64;

    fn index(&self, (l, m): (usize, usize)) -> &f64 {
        &self.powers[l * self.states + m]
    }
}

impl IndexMut<(usize, usize)> for AsymmetricPolicy {
    fn index_mut(&mut self, (l, m): (usize, usize)) -> &mut f64 {
        &mut self.powers[l * self.states + m]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Policy {
    Symmetric(SymmetricPolicy),
    Asymmetric(AsymmetricPolicy),
}

impl Policy {
    pub(crate) fn check_shape(&self, users: usize, states: usize) -> Result<()> {
        match self {
            Policy::Symmetric(p) => check_len(states, p.len()),
            Policy::Asymmetric(p) => {
                check_len(users, p.users())?;
                check_len(states, p.states())
            }
        }
    }

    /// States where at least one user transmits.
    pub fn active_set(&self) -> Vec<usize> {
        match self {
            Policy::Symmetric(p) => (0..p.len()).filter(|&m| p[m] > 0.0).collect(),
            Policy::Asymmetric(p) => (0..p.states())
                .filter(|&m| (0..p.users()).any(|l| p[(l, m)] > 0.0))
                .collect(),
        }
    }

    pub fn num_states(&self) -> usize {
        match self {
            Policy::Symmetric(p) => p.len(),
            Policy::Asymmetric(p) => p.states(),
        }
    }

    /// Power matrix with one row per user (a single row for symmetric policies).
    pub fn rows(&self) -> Vec<Vec<f64>> {
        match self {
            Policy::Symmetric(p) => vec![p.as_slice().to_vec()],
            Policy::Asymmetric(p) => p.rows(),
        }
    }
}

/// Which procedure produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlgorithmId {
    /// Closed-form KKT solution on a fixed support.
    SymmetricKkt,
    /// Local numerical solution on a fixed support.
    AsymmetricLocal,
    ConstantPower,
    WaterFillingFirstPass,
    WaterFilling,
    Iterative(OrderingMethod),
    IterativeBest,
    Exhaustive,
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgorithmId::SymmetricKkt => write!(f, "kkt"),
            AlgorithmId::AsymmetricLocal => write!(f, "local"),
            AlgorithmId::ConstantPower => write!(f, "A0"),
            AlgorithmId::WaterFillingFirstPass => write!(f, "A1-first"),
            AlgorithmId::WaterFilling => write!(f, "A1"),
            AlgorithmId::Iterative(m) => write!(f, "A2-{m}"),
            AlgorithmId::IterativeBest => write!(f, "A2"),
            AlgorithmId::Exhaustive => write!(f, "A3"),
        }
    }
}

/// Bookkeeping accumulated over every inner fixed-support solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub inner_solves: usize,
    /// Largest amount by which an inner solve missed its budget window
    /// `[budget − tol, budget]`; zero when every solve landed inside it.
    pub max_budget_violation: f64,
}

impl Diagnostics {
    pub fn merge(&mut self, other: &Diagnostics) {
        self.inner_solves += other.inner_solves;
        self.max_budget_violation = self.max_budget_violation.max(other.max_budget_violation);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub policy: Policy,
    /// 0-based indices of states with positive power.
    pub active_set: Vec<usize>,
    pub expected_rate: f64,
    pub multiplier: Option<f64>,
    pub iterations: usize,
    pub algorithm: AlgorithmId,
    pub diagnostics: Diagnostics,
    /// False when the result is only a best local optimum.
    pub certified: bool,
}

impl SolveReport {
    /// Builds a report whose active set and rate are derived from `policy`.
    pub fn evaluate(
        model: &DiscreteChannelModel,
        a: &EquationCoefficients,
        policy: Policy,
        algorithm: AlgorithmId,
    ) -> Result<Self> {
        let expected_rate = crate::rate::expected_rate(model, a, &policy)?;
        Ok(Self {
            active_set: policy.active_set(),
            policy,
            expected_rate,
            multiplier: None,
            iterations: 0,
            algorithm,
            diagnostics: Diagnostics::default(),
            certified: true,
        })
    }

    pub(crate) fn with_multiplier(mut self, lambda: Option<f64>) -> Self {
        self.multiplier = lambda;
        self
    }

    pub(crate) fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub(crate) fn relabel(mut self, algorithm: AlgorithmId) -> Self {
        self.algorithm = algorithm;
        self
    }

    /// Active set as a string of '0'/'1' characters, state 1 first.
    pub fn active_mask(&self) -> String {
        let mut mask = vec!['0'; self.policy.num_states()];
        for &m in &self.active_set {
            mask[m] = '1';
        }
        mask.into_iter().collect()
    }

    pub fn symmetric_powers(&self) -> Option<&SymmetricPolicy> {
        match &self.policy {
            Policy::Symmetric(p) => Some(p),
            Policy::Asymmetric(_) => None,
        }
    }

    pub fn asymmetric_powers(&self) -> Option<&AsymmetricPolicy> {
        match &self.policy {
            Policy::Asymmetric(p) => Some(p),
            Policy::Symmetric(_) => None,
        }
    }
}
