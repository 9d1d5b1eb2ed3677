//! Symmetric power allocation for continuously distributed channel vectors.
//!
//! Expectations are tensor-trapezoid quadratures of the density over a
//! truncation box. The power at a channel vector `h` is the clamped
//! stationary power for a common multiplier `μ`, restricted to a domain
//! `D_S`. The multiplier is found with the same budget bisection as the
//! discrete solver.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bisection::{bisect_budget, BisectionConfig};
use crate::channel::EquationCoefficients;
use crate::error::{check_len, invalid, Result};
use crate::rate::{clamped, OrderingMethod, StateGeometry};

/// Default quadrature nodes per dimension.
pub const DEFAULT_GRID: usize = 128;
/// Fewest quadrature nodes per dimension accepted.
pub const MIN_GRID: usize = 16;
/// Truncation bound of the built-in Gaussian model in every dimension.
pub const GAUSSIAN_BOX: (f64, f64) = (0.0, 5.0);
/// Smallest share of the known total mass the truncated grid must retain.
pub const MIN_MASS: f64 = 0.999;

pub type Density = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One quadrature node: a channel vector and its weight (trapezoid weight
/// times density).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureNode {
    pub h: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone)]
pub struct ContinuousChannelModel {
    pdf: Density,
    support_box: Vec<(f64, f64)>,
    grid: usize,
    nodes: Vec<QuadratureNode>,
}

impl fmt::Debug for ContinuousChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContinuousChannelModel")
            .field("support_box", &self.support_box)
            .field("grid", &self.grid)
            .field("nodes", &self.nodes.len())
            .finish()
    }
}

impl ContinuousChannelModel {
    /// A density on a box. When `total_mass` is given, the quadrature of the
    /// density over the box must reach [`MIN_MASS`] of it.
    pub fn new(
        pdf: Density,
        support_box: Vec<(f64, f64)>,
        grid: usize,
        total_mass: Option<f64>,
    ) -> Result<Self> {
        if support_box.is_empty() {
            return Err(invalid("support box needs at least one dimension"));
        }
        if support_box
            .iter()
            .any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi))
        {
            return Err(invalid("support box bounds must be finite with lo < hi"));
        }
        if grid < MIN_GRID {
            return Err(invalid(format!(
                "quadrature needs at least {MIN_GRID} nodes per dimension, got {grid}"
            )));
        }
        let nodes = build_nodes(&pdf, &support_box, grid);
        if nodes
            .iter()
            .any(|n| !(n.weight.is_finite() && n.weight >= 0.0))
        {
            return Err(invalid(
                "density must be finite and non-negative on the support box",
            ));
        }
        let model = Self {
            pdf,
            support_box,
            grid,
            nodes,
        };
        let mass = model.mass();
        match total_mass {
            Some(total) if mass < MIN_MASS * total => Err(invalid(format!(
                "truncated density mass {mass} is below {MIN_MASS} of {total}"
            ))),
            _ if mass <= 0.0 => Err(invalid("density has no mass on the support box")),
            _ => Ok(model),
        }
    }

    /// Independent half-normal gains for two users: `f(h) = (2/π)·e^{−‖h‖²/2}`.
    pub fn gaussian() -> Self {
        Self::gaussian_with_grid(DEFAULT_GRID).expect("default grid is valid")
    }

    pub fn gaussian_with_grid(grid: usize) -> Result<Self> {
        let pdf: Density = Arc::new(|h: &[f64]| {
            let r2: f64 = h.iter().map(|x| x * x).sum();
            2.0 / std::f64::consts::PI * (-0.5 * r2).exp()
        });
        Self::new(pdf, vec![GAUSSIAN_BOX; 2], grid, Some(1.0))
    }

    pub fn users(&self) -> usize {
        self.support_box.len()
    }

    pub fn support_box(&self) -> &[(f64, f64)] {
        &self.support_box
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn pdf(&self, h: &[f64]) -> f64 {
        (self.pdf)(h)
    }

    pub fn nodes(&self) -> &[QuadratureNode] {
        &self.nodes
    }

    /// Same density and box on a different grid.
    pub fn with_grid(&self, grid: usize) -> Result<Self> {
        Self::new(self.pdf.clone(), self.support_box.clone(), grid, None)
    }

    pub fn mass(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    /// Quadrature of `g(h)·f(h)` over the box.
    pub fn integrate(&self, g: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
        let values: Vec<f64> = self.nodes.par_iter().map(|n| n.weight * g(&n.h)).collect();
        pairwise_sum(&values)
    }
}

fn build_nodes(pdf: &Density, support_box: &[(f64, f64)], grid: usize) -> Vec<QuadratureNode> {
    let axes: Vec<Vec<(f64, f64)>> = support_box
        .iter()
        .map(|&(lo, hi)| {
            let step = (hi - lo) / (grid - 1) as f64;
            (0..grid)
                .map(|i| {
                    let w = if i == 0 || i == grid - 1 {
                        0.5 * step
                    } else {
                        step
                    };
                    (lo + step * i as f64, w)
                })
                .collect()
        })
        .collect();
    let dims = axes.len();
    let total = grid.pow(dims as u32);
    (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut h = vec![0.0; dims];
            let mut w = 1.0;
            for d in (0..dims).rev() {
                let (x, wx) = axes[d][idx % grid];
                h[d] = x;
                w *= wx;
                idx /= grid;
            }
            let weight = w * pdf(&h);
            QuadratureNode { h, weight }
        })
        .collect()
}

/// Sum with a fixed binary splitting order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let (left, right) = values.split_at(values.len() / 2);
    pairwise_sum(left) + pairwise_sum(right)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapingConfig {
    pub initial_threshold: f64,
    pub step: f64,
    pub rate_tol: f64,
    pub ordering: OrderingMethod,
}

impl Default for ShapingConfig {
    fn default() -> Self {
        Self {
            initial_threshold: 0.0,
            step: 0.1,
            rate_tol: 1e-3,
            ordering: OrderingMethod::Additive,
        }
    }
}

impl ShapingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid("shaping step must be positive"));
        }
        if self.rate_tol.is_nan() || self.rate_tol < 0.0 || self.initial_threshold.is_nan() {
            return Err(invalid("shaping tolerance must be non-negative"));
        }
        Ok(())
    }
}

/// A set of channel vectors receiving power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    /// The whole support box.
    Full,
    Empty,
    /// `{h good : O(h) > threshold}`.
    Shaped {
        ordering: OrderingMethod,
        threshold: f64,
    },
}

impl Domain {
    /// The good domain `{‖h‖² > ε(h)}`.
    pub fn good() -> Self {
        shape_domain(0.0, OrderingMethod::Additive)
    }

    pub fn contains_geometry(&self, g: &StateGeometry) -> bool {
        match *self {
            Domain::Full => true,
            Domain::Empty => false,
            Domain::Shaped {
                ordering,
                threshold,
            } => g.is_good() && g.order_score(ordering) > threshold,
        }
    }

    pub fn contains(&self, h: &[f64], a: &EquationCoefficients) -> Result<bool> {
        check_len(a.users(), h.len())?;
        Ok(self.contains_geometry(&StateGeometry::new(h, &a.to_f64())))
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Full => write!(f, "full"),
            Domain::Empty => write!(f, "empty"),
            Domain::Shaped {
                ordering,
                threshold,
            } => write!(f, "{ordering}>{threshold}"),
        }
    }
}

/// Good channel vectors whose ordering score exceeds `threshold`.
pub fn shape_domain(threshold: f64, ordering: OrderingMethod) -> Domain {
    Domain::Shaped {
        ordering,
        threshold,
    }
}

fn check_model(model: &ContinuousChannelModel, a: &EquationCoefficients) -> Result<()> {
    check_len(model.users(), a.users())
}

fn check_multiplier(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("multiplier must be positive, got {mu}")))
    }
}

fn power_at(g: &StateGeometry, mu: f64) -> f64 {
    g.stationary_power(mu).max(0.0)
}

/// Clamped stationary power at channel `h` for multiplier `mu`.
pub fn p_continuous(h: &[f64], a: &EquationCoefficients, mu: f64) -> Result<f64> {
    check_len(a.users(), h.len())?;
    check_multiplier(mu)?;
    Ok(power_at(&StateGeometry::new(h, &a.to_f64()), mu))
}

fn domain_power(g: &StateGeometry, domain: &Domain, mu: f64) -> f64 {
    if domain.contains_geometry(g) {
        power_at(g, mu)
    } else {
        0.0
    }
}

/// Probability mass of `domain`.
pub fn domain_mass(
    model: &ContinuousChannelModel,
    a: &EquationCoefficients,
    domain: &Domain,
) -> Result<f64> {
    check_model(model, a)?;
    let af = a.to_f64();
    Ok(model.integrate(|h| {
        f64::from(u8::from(
            domain.contains_geometry(&StateGeometry::new(h, &af)),
        ))
    }))
}

/// Average power spent by the policy `(domain, mu)`.
pub fn expected_power(
    model: &ContinuousChannelModel,
    a: &EquationCoefficients,
    domain: &Domain,
    mu: f64,
) -> Result<f64> {
    check_model(model, a)?;
    check_multiplier(mu)?;
    let af = a.to_f64();
    Ok(model.integrate(|h| domain_power(&StateGeometry::new(h, &af), domain, mu)))
}

/// Expected clamped rate over the whole box when power `power(h)` is used.
pub fn expected_rate_with(
    model: &ContinuousChannelModel,
    a: &EquationCoefficients,
    power: impl Fn(&StateGeometry) -> f64 + Sync,
) -> Result<f64> {
    check_model(model, a)?;
    let af = a.to_f64();
    Ok(model.integrate(|h| {
        let g = StateGeometry::new(h, &af);
        clamped(g.symmetric_rate(power(&g)))
    }))
}

/// A solved continuous policy: power `P(h, multiplier)` on `domain`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSolution {
    pub domain: Domain,
    pub multiplier: f64,
    /// Average power actually spent.
    pub spent: f64,
    pub expected_rate: f64,
    pub iterations: usize,
}

impl ContinuousSolution {
    pub fn power(&self, h: &[f64], a: &EquationCoefficients) -> Result<f64> {
        check_len(a.users(), h.len())?;
        Ok(domain_power(
            &StateGeometry::new(h, &a.to_f64()),
            &self.domain,
            self.multiplier,
        ))
    }
}

/// Optimal symmetric policy restricted to `domain` under average power `budget`.
pub fn solve_cp2(
    model: &ContinuousChannelModel,
    a: &EquationCoefficients,
    domain: &Domain,
    budget: f64,
    cfg: &BisectionConfig,
) -> Result<ContinuousSolution> {
    check_model(model, a)?;
    if domain_mass(model, a, domain)? <= 0.0 {
        return Err(invalid(format!("domain {domain} has no probability mass")));
    }
    let af = a.to_f64();
    let geoms: Vec<(StateGeometry, f64)> = model
        .nodes()
        .iter()
        .map(|n| (StateGeometry::new(&n.h, &af), n.weight))
        .filter(|(g, w)| *w > 0.0 && domain.contains_geometry(g))
        .collect();
    let q = |mu: f64| {
        let values: Vec<f64> = geoms.par_iter().map(|(g, w)| w * power_at(g, mu)).collect();
        pairwise_sum(&values)
    };
    let out = bisect_budget(q, budget, cfg)?;
    let expected_rate = expected_rate_with(model, a, |g| domain_power(g, domain, out.multiplier))?;
    Ok(ContinuousSolution {
        domain: *domain,
        multiplier: out.multiplier,
        spent: out.spent,
        expected_rate,
        iterations: out.iterations,
    })
}

/// Every good channel vector transmits with power `budget`.
pub fn constant_power_rate(
    model: &ContinuousChannelModel,
    a: &EquationCoefficients,
    budget: f64,
) -> Result<f64> {
    if !(budget >= 0.0 && budget.is_finite()) {
        return Err(invalid(format!(
            "power budget must be non-negative, got {budget}"
        )));
    }
    let good = Domain::good();
    expected_rate_with(model, a, |g| {
        if good.contains_geometry(g) {
            budget
        } else {
            0.0
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapingReport {
    /// Best shaped solution found.
    pub best: ContinuousSolution,
    /// Shaping threshold of the best solution.
    pub threshold: f64,
    /// Number of domains solved.
    pub rounds: usize,
    /// Solution on the initial domain (the good domain at threshold 0).
    pub water_filling: ContinuousSolution,
    /// Rate of constant power on the good domain.
    pub constant_power_rate: f64,
}

/// Raises the shaping threshold by `step` while the expected rate improves by
/// more than `rate_tol`, and returns the last improving solution.
pub fn algo_iterative_continuous(
    model: &ContinuousChannelModel,
    a: &EquationCoefficients,
    budget: f64,
    shaping: &ShapingConfig,
    bisection: &BisectionConfig,
) -> Result<ShapingReport> {
    shaping.validate()?;
    let mut threshold = shaping.initial_threshold;
    let first = solve_cp2(
        model,
        a,
        &shape_domain(threshold, shaping.ordering),
        budget,
        bisection,
    )?;
    let mut best = first;
    let mut rounds = 1;
    loop {
        let next_threshold = threshold + shaping.step;
        let domain = shape_domain(next_threshold, shaping.ordering);
        if domain_mass(model, a, &domain)? <= 0.0 {
            break;
        }
        let next = solve_cp2(model, a, &domain, budget, bisection)?;
        rounds += 1;
        if next.expected_rate - best.expected_rate > shaping.rate_tol {
            best = next;
            threshold = next_threshold;
        } else {
            break;
        }
    }
    Ok(ShapingReport {
        best,
        threshold,
        rounds,
        water_filling: first,
        constant_power_rate: constant_power_rate(model, a, budget)?,
    })
}
