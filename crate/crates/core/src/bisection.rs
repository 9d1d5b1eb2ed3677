//! Multiplier bisection shared by the discrete and continuous symmetric solvers.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Bracket, tolerance and iteration cap for the multiplier search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BisectionConfig {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// Accepted shortfall of the spent budget: stop once `0 ≤ budget − q ≤ power_tol`.
    pub power_tol: f64,
    pub max_iter: usize,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        Self {
            lambda_lo: 1e-6,
            lambda_hi: 1e6,
            power_tol: 1e-3,
            max_iter: 200,
        }
    }
}

impl BisectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_lo > 0.0 && self.lambda_lo < self.lambda_hi) {
            return Err(invalid("bisection needs 0 < lambda_lo < lambda_hi"));
        }
        if self.power_tol.is_nan() || self.power_tol <= 0.0 {
            return Err(invalid("bisection power tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(invalid("bisection needs max_iter ≥ 1"));
        }
        Ok(())
    }
}

/// Times each bracket end may be pushed outwards by a factor of ten.
pub const MAX_WIDENINGS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionOutcome {
    pub multiplier: f64,
    /// q(multiplier), the budget actually spent.
    pub spent: f64,
    pub iterations: usize,
}

/// Finds a multiplier whose spent power `q` lies in `[budget − tol, budget]`.
///
/// `q` must be non-increasing in the multiplier. The bracket ends are widened
/// up to [`MAX_WIDENINGS`] times when they do not straddle the budget.
pub fn bisect_budget(
    q: impl Fn(f64) -> f64,
    budget: f64,
    cfg: &BisectionConfig,
) -> Result<BisectionOutcome> {
    cfg.validate()?;
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(invalid(format!(
            "power budget must be positive, got {budget}"
        )));
    }

    let mut lo = cfg.lambda_lo;
    let mut q_lo = q(lo);
    for _ in 0..MAX_WIDENINGS {
        if q_lo > budget {
            break;
        }
        lo *= 0.1;
        q_lo = q(lo);
    }
    if q_lo <= budget {
        return Err(Error::Bracket {
            lambda: lo,
            spent: q_lo,
            budget,
        });
    }

    let mut hi = cfg.lambda_hi;
    for _ in 0..MAX_WIDENINGS {
        if q(hi) < budget {
            break;
        }
        hi *= 10.0;
    }
    let q_hi = q(hi);
    if q_hi >= budget {
        return Err(Error::Bracket {
            lambda: hi,
            spent: q_hi,
            budget,
        });
    }

    let mut lambda = 0.5 * (lo + hi);
    let mut spent = q(lambda);
    let mut iterations = 0;
    while budget - spent > cfg.power_tol || budget - spent < 0.0 {
        if iterations >= cfg.max_iter {
            return Err(Error::MaxIterations { iterations, lo, hi });
        }
        if budget - spent > 0.0 {
            hi = lambda;
        } else {
            lo = lambda;
        }
        lambda = 0.5 * (lo + hi);
        spent = q(lambda);
        iterations += 1;
    }
    Ok(BisectionOutcome {
        multiplier: lambda,
        spent,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lands_in_budget_window() {
        let cfg = BisectionConfig::default();
        let out = bisect_budget(|l| (1.0 / l - 0.5).max(0.0), 1.5, &cfg).unwrap();
        assert!(out.spent <= 1.5 && out.spent >= 1.5 - cfg.power_tol);
        assert!((out.multiplier - 0.5).abs() < 1e-3);
    }

    #[test]
    fn widens_the_lower_end() {
        let cfg = BisectionConfig::default();
        // q(1e-6) = 1e4 is below the budget until λ drops to 1e-9.
        let out = bisect_budget(|l| (0.01 / l).min(1e12), 5e6, &cfg).unwrap();
        assert!(out.multiplier < 1e-8);
    }

    #[test]
    fn reports_bracket_failure() {
        let cfg = BisectionConfig::default();
        let err = bisect_budget(|_| 0.0, 1.0, &cfg).unwrap_err();
        assert!(matches!(err, Error::Bracket { .. }));
    }

    #[test]
    fn reports_iteration_cap() {
        let cfg = BisectionConfig {
            max_iter: 3,
            power_tol: 1e-12,
            ..Default::default()
        };
        let err = bisect_budget(|l| 1.0 / l, 1.0, &cfg).unwrap_err();
        assert!(matches!(err, Error::MaxIterations { iterations: 3, .. }));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = BisectionConfig {
            lambda_lo: 2.0,
            lambda_hi: 1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!(bisect_budget(|l| 1.0 / l, -1.0, &BisectionConfig::default()).is_err());
    }
}
