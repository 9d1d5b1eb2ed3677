//! Channel and equation-coefficient data model for the discrete fading case.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};

/// Tolerance applied when validating that probabilities sum to one.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// Integer coefficient vector of the linear combination decoded at the relay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct EquationCoefficients {
    coeffs: Vec<i64>,
}

impl EquationCoefficients {
    pub fn new(coeffs: Vec<i64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(invalid(format!(
                "equation coefficients need at least 2 entries, got {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().all(|&c| c == 0) {
            return Err(invalid("equation coefficients must not be all zero"));
        }
        Ok(Self { coeffs })
    }

    pub fn users(&self) -> usize {
        self.coeffs.len()
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(|&c| c as f64).collect()
    }

    /// ‖a‖², always at least 1.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|&c| (c * c) as f64).sum()
    }
}

impl TryFrom<Vec<i64>> for EquationCoefficients {
    type Error = crate::Error;

    fn try_from(v: Vec<i64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<EquationCoefficients> for Vec<i64> {
    fn from(a: EquationCoefficients) -> Self {
        a.coeffs
    }
}

/// One joint channel realisation together with its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    gains: Vec<f64>,
    prob: f64,
}

impl ChannelState {
    pub fn new(gains: Vec<f64>, prob: f64) -> Result<Self> {
        if gains.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(invalid("channel gains must be finite and non-negative"));
        }
        if gains.iter().all(|&g| g == 0.0) {
            return Err(invalid("channel state needs at least one nonzero gain"));
        }
        if !(prob > 0.0 && prob <= 1.0) {
            return Err(invalid(format!(
                "state probability {prob} is outside (0, 1]"
            )));
        }
        Ok(Self { gains, prob })
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn prob(&self) -> f64 {
        self.prob
    }
}

/// Probability mass function of a single user's channel gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Marginal {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Self {
        Self { values, probs }
    }
}

/// Finite set of joint channel states with their probabilities.
///
/// Built either from independent per-user marginals (the joint probability
/// of a state is the product of its marginal probabilities) or directly from
/// a list of joint states. States from marginals are enumerated with the
/// first user's index varying slowest, so for two users the order is
/// `(h11, h21), (h11, h22), ..., (h12, h21), ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteChannelModel {
    marginals: Option<Vec<Marginal>>,
    states: Vec<ChannelState>,
    users: usize,
}

fn normalize(probs: &[f64], what: &str) -> Result<Vec<f64>> {
    if probs.iter().any(|p| !p.is_finite() || *p <= 0.0) {
        return Err(invalid(format!("{what}: probabilities must be positive")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(invalid(format!(
            "{what}: probabilities sum to {total}, expected 1"
        )));
    }
    Ok(probs.iter().map(|p| p / total).collect())
}

impl DiscreteChannelModel {
    pub fn from_marginals(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.len() < 2 {
            return Err(invalid("a channel model needs at least 2 users"));
        }
        let mut normalized = Vec::with_capacity(marginals.len());
        for (i, m) in marginals.iter().enumerate() {
            check_len(m.values.len(), m.probs.len())?;
            if m.values.is_empty() {
                return Err(invalid(format!("user {}: empty marginal", i + 1)));
            }
            if m.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(invalid(format!(
                    "user {}: channel values must be finite and non-negative",
                    i + 1
                )));
            }
            normalized.push(normalize(&m.probs, &format!("user {}", i + 1))?);
        }

        let users = marginals.len();
        let count: usize = marginals.iter().map(|m| m.values.len()).product();
        let mut states = Vec::with_capacity(count);
        let mut index = vec![0usize; users];
        for _ in 0..count {
            let gains: Vec<f64> = (0..users).map(|u| marginals[u].values[index[u]]).collect();
            let prob: f64 = (0..users).map(|u| normalized[u][index[u]]).product();
            states.push(ChannelState::new(gains, prob)?);
            for u in (0..users).rev() {
                index[u] += 1;
                if index[u] < marginals[u].values.len() {
                    break;
                }
                index[u] = 0;
            }
        }

        let marginals = marginals
            .into_iter()
            .zip(normalized)
            .map(|(m, probs)| Marginal::new(m.values, probs))
            .collect();
        Ok(Self {
            marginals: Some(marginals),
            states,
            users,
        })
    }

    /// Model given directly by joint states `(gains, probability)`.
    pub fn from_states(states: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let Some(first) = states.first() else {
            return Err(invalid("a channel model needs at least one state"));
        };
        let users = first.0.len();
        if users < 2 {
            return Err(invalid("a channel model needs at least 2 users"));
        }
        for (gains, _) in &states {
            check_len(users, gains.len())?;
        }
        let probs: Vec<f64> = states.iter().map(|(_, p)| *p).collect();
        let probs = normalize(&probs, "joint states")?;
        let states = states
            .into_iter()
            .zip(probs)
            .map(|((g, _), p)| ChannelState::new(g, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            marginals: None,
            states,
            users,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[ChannelState] {
        &self.states
    }

    pub fn state(&self, m: usize) -> &ChannelState {
        &self.states[m]
    }

    pub fn probs(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.prob).collect()
    }

    pub fn marginals(&self) -> Option<&[Marginal]> {
        self.marginals.as_deref()
    }

    pub(crate) fn check_coefficients(&self, a: &EquationCoefficients) -> Result<()> {
        check_len(self.users, a.users())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joint_enumeration_multiplies_marginals() {
        let model = DiscreteChannelModel::from_marginals(vec![
            Marginal::new(vec![1.0, 3.0], vec![0.6, 0.4]),
            Marginal::new(vec![0.5, 2.0], vec![0.8, 0.2]),
        ])
        .unwrap();
        assert_eq!(model.num_states(), 4);
        let gains: Vec<_> = model.states().iter().map(|s| s.gains().to_vec()).collect();
        assert_eq!(
            gains,
            vec![
                vec![1.0, 0.5],
                vec![1.0, 2.0],
                vec![3.0, 0.5],
                vec![3.0, 2.0]
            ]
        );
        let expected = [0.48, 0.12, 0.32, 0.08];
        for (s, f) in model.states().iter().zip(expected) {
            assert!((s.prob() - f).abs() < 1e-15);
        }
        let total: f64 = model.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn marginals_not_summing_to_one_are_rejected() {
        let err = DiscreteChannelModel::from_marginals(vec![
            Marginal::new(vec![1.0, 3.0], vec![0.5, 0.4]),
            Marginal::new(vec![1.0], vec![1.0]),
        ]);
        assert!(err.is_err());
    }

    #[test]
    fn rounded_probabilities_are_renormalized() {
        let model = DiscreteChannelModel::from_marginals(vec![
            Marginal::new(vec![1.0, 2.0], vec![0.5, 0.5 + 5e-10]),
            Marginal::new(vec![1.0], vec![1.0]),
        ])
        .unwrap();
        let total: f64 = model.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coefficient_invariants() {
        assert!(EquationCoefficients::new(vec![0, 0]).is_err());
        assert!(EquationCoefficients::new(vec![1]).is_err());
        let a = EquationCoefficients::new(vec![2, -1]).unwrap();
        assert_eq!(a.norm_sq(), 5.0);
    }

    #[test]
    fn zero_gain_state_is_rejected() {
        assert!(ChannelState::new(vec![0.0, 0.0], 0.5).is_err());
        assert!(ChannelState::new(vec![1.0, 0.0], 0.0).is_err());
    }
}
