//! Computation-rate expressions and the per-state quantities derived from them.
//!
//! All logarithms are base 2, so rates are in bits per channel use.

use std::f64::consts::LN_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::{DiscreteChannelModel, EquationCoefficients};
use crate::error::{check_len, invalid, Result};
use crate::policy::Policy;

/// Relative tolerance under which a channel is treated as collinear with `a`.
pub const COLLINEAR_RTOL: f64 = 1e-12;

/// Scalar goodness score used to order channel states. Serialized as 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum OrderingMethod {
    /// ‖h‖² − ε(h): how little power a state needs before its rate turns positive.
    Additive,
    /// ‖h‖² / ε(h): the state's asymptotic rate at large power.
    Ratio,
}

impl OrderingMethod {
    pub const BOTH: [OrderingMethod; 2] = [OrderingMethod::Additive, OrderingMethod::Ratio];

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Self::Additive),
            2 => Ok(Self::Ratio),
            _ => Err(invalid(format!("ordering method must be 1 or 2, got {i}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Self::Additive => 1,
            Self::Ratio => 2,
        }
    }
}

impl TryFrom<u8> for OrderingMethod {
    type Error = crate::error::Error;

    fn try_from(i: u8) -> Result<Self> {
        Self::from_index(i)
    }
}

impl From<OrderingMethod> for u8 {
    fn from(m: OrderingMethod) -> u8 {
        m.index()
    }
}

impl fmt::Display for OrderingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "O{}", self.index())
    }
}

/// Scalar summary of one channel vector against fixed coefficients.
///
/// Every symmetric-policy quantity depends on `h` only through ‖h‖², hᵀa
/// and ‖a‖², so solvers precompute this once per state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateGeometry {
    pub norm_sq: f64,
    pub dot: f64,
    pub a_norm_sq: f64,
    pub misalignment: f64,
    pub collinear: bool,
}

impl StateGeometry {
    pub fn new(h: &[f64], a: &[f64]) -> Self {
        debug_assert_eq!(h.len(), a.len());
        let norm_sq: f64 = h.iter().map(|x| x * x).sum();
        let a_norm_sq: f64 = a.iter().map(|x| x * x).sum();
        let dot: f64 = h.iter().zip(a).map(|(x, y)| x * y).sum();
        let scale = norm_sq * a_norm_sq;
        let misalignment = (scale - dot * dot).max(0.0);
        Self {
            norm_sq,
            dot,
            a_norm_sq,
            misalignment,
            collinear: misalignment < COLLINEAR_RTOL * scale,
        }
    }

    pub fn dot_sq(&self) -> f64 {
        self.dot * self.dot
    }

    /// Symmetric rate before the positive-part clamp.
    pub fn symmetric_rate(&self, power: f64) -> f64 {
        0.5 * ((1.0 + power * self.norm_sq) / (self.a_norm_sq + power * self.misalignment)).log2()
    }

    /// Derivative of [`Self::symmetric_rate`] with respect to the power.
    pub fn symmetric_rate_derivative(&self, power: f64) -> f64 {
        let (d, b) = (self.quadratic_coeff(), self.linear_coeff());
        self.dot_sq() / (2.0 * LN_2 * (d * power * power + b * power + self.a_norm_sq))
    }

    /// ‖h‖²·ε(h), the quadratic coefficient of the stationarity condition.
    pub fn quadratic_coeff(&self) -> f64 {
        self.norm_sq * self.misalignment
    }

    /// 2‖h‖²‖a‖² − (hᵀa)², equal to ‖h‖²‖a‖² + ε(h).
    pub fn linear_coeff(&self) -> f64 {
        self.norm_sq * self.a_norm_sq + self.misalignment
    }

    /// Unclamped stationary power for multiplier `lambda > 0`.
    pub fn stationary_power(&self, lambda: f64) -> f64 {
        if self.norm_sq == 0.0 {
            return f64::NEG_INFINITY;
        }
        if self.collinear {
            return 1.0 / lambda - 1.0 / self.norm_sq;
        }
        let d = self.quadratic_coeff();
        let b = self.linear_coeff();
        let c = self.a_norm_sq - self.dot_sq() / lambda;
        // b² − 4dc ≥ (‖h‖²‖a‖² − ε)² ≥ 0 because c ≤ ‖a‖².
        let disc = (b * b - 4.0 * d * c).max(0.0);
        // Rationalised positive root; avoids cancellation when 4dc ≪ b².
        -2.0 * c / (b + disc.sqrt())
    }

    /// Multiplier at which the stationary power equals `power` (inverse of
    /// [`Self::stationary_power`] on its positive branch).
    pub fn multiplier_for_power(&self, power: f64) -> f64 {
        let d = self.quadratic_coeff();
        let b = self.linear_coeff();
        self.dot_sq() / (d * power * power + b * power + self.a_norm_sq)
    }

    pub fn is_good(&self) -> bool {
        self.norm_sq > self.misalignment
    }

    pub fn order_score(&self, method: OrderingMethod) -> f64 {
        match method {
            OrderingMethod::Additive => self.norm_sq - self.misalignment,
            OrderingMethod::Ratio => {
                if self.collinear {
                    f64::INFINITY
                } else {
                    self.norm_sq / self.misalignment
                }
            }
        }
    }
}

fn check_dims(h: &[f64], a: &EquationCoefficients) -> Result<()> {
    check_len(a.users(), h.len())
}

/// ‖h‖²‖a‖² − (hᵀa)², floored at zero.
pub fn misalignment(h: &[f64], a: &EquationCoefficients) -> Result<f64> {
    check_dims(h, a)?;
    Ok(StateGeometry::new(h, &a.to_f64()).misalignment)
}

/// Whether `h` is collinear with `a` up to [`COLLINEAR_RTOL`].
pub fn is_collinear(h: &[f64], a: &EquationCoefficients) -> Result<bool> {
    check_dims(h, a)?;
    Ok(StateGeometry::new(h, &a.to_f64()).collinear)
}

fn check_powers(p: &[f64]) -> Result<()> {
    if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(invalid("powers must be finite and non-negative"));
    }
    Ok(())
}

/// Rate of one state under per-user powers, before clamping. May be negative.
pub fn asymmetric_rate_unclamped(h: &[f64], a: &EquationCoefficients, p: &[f64]) -> Result<f64> {
    check_dims(h, a)?;
    check_len(h.len(), p.len())?;
    check_powers(p)?;
    Ok(asymmetric_rate_raw(h, &a.to_f64(), p))
}

pub(crate) fn asymmetric_rate_raw(h: &[f64], a: &[f64], p: &[f64]) -> f64 {
    let mut energy = 0.0;
    let mut proj = 0.0;
    for ((&hl, &al), &pl) in h.iter().zip(a).zip(p) {
        let g = pl.sqrt() * hl;
        energy += g * g;
        proj += g * al;
    }
    let a_norm_sq: f64 = a.iter().map(|x| x * x).sum();
    let excess = (energy * a_norm_sq - proj * proj).max(0.0);
    0.5 * ((1.0 + energy) / (a_norm_sq + excess)).log2()
}

/// Rate of one state when every user transmits with power `power`, before clamping.
pub fn symmetric_rate_unclamped(h: &[f64], a: &EquationCoefficients, power: f64) -> Result<f64> {
    check_dims(h, a)?;
    check_powers(&[power])?;
    Ok(StateGeometry::new(h, &a.to_f64()).symmetric_rate(power))
}

/// Positive part of a rate.
pub fn clamped(rate: f64) -> f64 {
    rate.max(0.0)
}

/// Probability-weighted sum of clamped per-state rates.
pub fn expected_rate(
    model: &DiscreteChannelModel,
    a: &EquationCoefficients,
    policy: &Policy,
) -> Result<f64> {
    model.check_coefficients(a)?;
    policy.check_shape(model.users(), model.num_states())?;
    let af = a.to_f64();
    let rate = model
        .states()
        .iter()
        .enumerate()
        .map(|(m, s)| {
            let r = match policy {
                Policy::Symmetric(p) => StateGeometry::new(s.gains(), &af).symmetric_rate(p[m]),
                Policy::Asymmetric(p) => asymmetric_rate_raw(s.gains(), &af, &p.column(m)),
            };
            s.prob() * clamped(r)
        })
        .sum();
    Ok(rate)
}

/// Geometry of every state of `model`.
pub fn state_geometries(
    model: &DiscreteChannelModel,
    a: &EquationCoefficients,
) -> Vec<StateGeometry> {
    let af = a.to_f64();
    model
        .states()
        .iter()
        .map(|s| StateGeometry::new(s.gains(), &af))
        .collect()
}

/// Splits state indices (0-based) into the good set, where a positive
/// symmetric rate is reachable, and its complement. Ties go to the bad set.
pub fn classify_states(
    model: &DiscreteChannelModel,
    a: &EquationCoefficients,
) -> Result<(Vec<usize>, Vec<usize>)> {
    model.check_coefficients(a)?;
    Ok(state_geometries(model, a)
        .iter()
        .enumerate()
        .map(|(m, g)| (m, g.is_good()))
        .fold((Vec::new(), Vec::new()), |(mut good, mut bad), (m, ok)| {
            if ok {
                good.push(m);
            } else {
                bad.push(m);
            }
            (good, bad)
        }))
}

/// Ordering score of a state; the ratio criterion is `+∞` for collinear states.
pub fn order_criterion(h: &[f64], a: &EquationCoefficients, method: OrderingMethod) -> Result<f64> {
    check_dims(h, a)?;
    Ok(StateGeometry::new(h, &a.to_f64()).order_score(method))
}

/// Sorts `states` ascending by score (worst first), ties by index.
pub(crate) fn sort_by_score(states: &mut [usize], geom: &[StateGeometry], method: OrderingMethod) {
    states.sort_by(|&i, &j| {
        geom[i]
            .order_score(method)
            .total_cmp(&geom[j].order_score(method))
            .then(i.cmp(&j))
    });
}
