//! Symmetric policies: every user transmits with the same power in a state.
//!
//! On a fixed support the problem is concave and its optimum is the clamped
//! stationary power `(P^KKT(λ))⁺` with λ chosen so the budget is met. The
//! multiplier follows the scaled convention in which the stationarity
//! condition reads `(hᵀa)² / (d P² + b P + ‖a‖²) = λ`; it equals
//! `2 ln 2` times the derivative of the rate in bits.
//!
//! The algorithms differ only in how they pick the support:
//! constant power ([`algo_a0`]), two-pass water-filling ([`algo_a1`]),
//! ordered elimination ([`algo_a2`]) and exhaustive search ([`algo_a3`]).

use crate::bisection::{bisect_budget, BisectionConfig};
use crate::channel::{DiscreteChannelModel, EquationCoefficients};
use crate::error::{check_len, invalid, Error, Result};
use crate::policy::{AlgorithmId, Diagnostics, Policy, SolveReport, SymmetricPolicy};
use crate::rate::{sort_by_score, state_geometries, OrderingMethod, StateGeometry};
use crate::search::{self, FixedSupport};

/// Largest state count accepted by [`algo_a3`].
pub const EXHAUSTIVE_MAX_STATES: usize = 20;

/// Upper end of the bracket used for the tangency root in [`threshold`].
pub const TANGENCY_UPPER: f64 = 1e8;

/// Coefficients of the stationarity quadratic `d P² + b P + c(λ) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktCoefficients {
    pub d: f64,
    pub b: f64,
    dot_sq: f64,
    a_norm_sq: f64,
}

impl KktCoefficients {
    pub fn new(h: &[f64], a: &EquationCoefficients) -> Result<Self> {
        check_len(a.users(), h.len())?;
        Ok(Self::from_geometry(&StateGeometry::new(h, &a.to_f64())))
    }

    pub fn from_geometry(g: &StateGeometry) -> Self {
        Self {
            d: g.quadratic_coeff(),
            b: g.linear_coeff(),
            dot_sq: g.dot_sq(),
            a_norm_sq: g.a_norm_sq,
        }
    }

    /// ‖a‖² − (hᵀa)²/λ.
    pub fn c(&self, lambda: f64) -> f64 {
        self.a_norm_sq - self.dot_sq / lambda
    }
}

fn check_multiplier(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!(
            "multiplier must be positive, got {lambda}"
        )))
    }
}

/// Unclamped stationary power of state `h` for multiplier `lambda`.
pub fn p_kkt(h: &[f64], a: &EquationCoefficients, lambda: f64) -> Result<f64> {
    check_len(a.users(), h.len())?;
    check_multiplier(lambda)?;
    if h.iter().all(|&x| x == 0.0) {
        return Err(invalid("channel vector must be nonzero"));
    }
    Ok(StateGeometry::new(h, &a.to_f64()).stationary_power(lambda))
}

/// Precomputed per-state data for one (model, a) pair.
pub(crate) struct SymmetricProblem<'a> {
    model: &'a DiscreteChannelModel,
    a: &'a EquationCoefficients,
    geom: Vec<StateGeometry>,
    probs: Vec<f64>,
    budget: f64,
    cfg: BisectionConfig,
}

impl<'a> SymmetricProblem<'a> {
    pub(crate) fn new(
        model: &'a DiscreteChannelModel,
        a: &'a EquationCoefficients,
        budget: f64,
        cfg: &BisectionConfig,
    ) -> Result<Self> {
        model.check_coefficients(a)?;
        cfg.validate()?;
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(invalid(format!(
                "power budget must be positive, got {budget}"
            )));
        }
        Ok(Self {
            model,
            a,
            geom: state_geometries(model, a),
            probs: model.probs(),
            budget,
            cfg: *cfg,
        })
    }

    fn good_set(&self) -> Vec<usize> {
        (0..self.geom.len())
            .filter(|&m| self.geom[m].is_good())
            .collect()
    }

    fn spent(&self, support: &[usize], lambda: f64) -> f64 {
        support
            .iter()
            .map(|&m| self.probs[m] * self.geom[m].stationary_power(lambda).max(0.0))
            .sum()
    }
}

impl FixedSupport for SymmetricProblem<'_> {
    fn solve(&self, support: &[usize]) -> Result<SolveReport> {
        let states = self.geom.len();
        if support.is_empty() {
            let policy = Policy::Symmetric(SymmetricPolicy::zeros(states));
            return SolveReport::evaluate(self.model, self.a, policy, AlgorithmId::SymmetricKkt);
        }
        let out = bisect_budget(|l| self.spent(support, l), self.budget, &self.cfg)?;
        let mut powers = SymmetricPolicy::zeros(states);
        for &m in support {
            powers[m] = self.geom[m].stationary_power(out.multiplier).max(0.0);
        }
        let shortfall = self.budget - out.spent;
        let violation = (shortfall - self.cfg.power_tol).max(-shortfall).max(0.0);
        let mut report = SolveReport::evaluate(
            self.model,
            self.a,
            Policy::Symmetric(powers),
            AlgorithmId::SymmetricKkt,
        )?
        .with_multiplier(Some(out.multiplier))
        .with_iterations(out.iterations);
        report.diagnostics = Diagnostics {
            inner_solves: 1,
            max_budget_violation: violation,
        };
        Ok(report)
    }

    fn state_rates(&self, report: &SolveReport) -> Vec<f64> {
        let p = report.symmetric_powers().expect("symmetric report");
        self.geom
            .iter()
            .enumerate()
            .map(|(m, g)| g.symmetric_rate(p[m]))
            .collect()
    }
}

fn check_support(support: &[usize], states: usize) -> Result<()> {
    if support.is_empty() {
        return Err(invalid("support must be nonempty"));
    }
    let mut seen = vec![false; states];
    for &m in support {
        if m >= states {
            return Err(invalid(format!(
                "support index {m} out of range for {states} states"
            )));
        }
        if std::mem::replace(&mut seen[m], true) {
            return Err(invalid(format!("support index {m} repeated")));
        }
    }
    Ok(())
}

/// Optimal symmetric policy restricted to `support` (0-based state indices).
///
/// Powers outside the support are zero; the expected rate is evaluated with
/// clamping on the whole model.
pub fn solve_dp2s(
    model: &DiscreteChannelModel,
    a: &EquationCoefficients,
    support: &[usize],
    budget: f64,
    cfg: &BisectionConfig,
) -> Result<SolveReport> {
    let problem = SymmetricProblem::new(model, a, budget, cfg)?;
    check_support(support, model.num_states())?;
    problem.solve(support)
}

/// Budget above which the good set is the optimal active set.
#[derive(Debug, Clone, PartialEq)]
pub struct Threshold {
    pub pbar: f64,
    /// Smallest per-state tangency multiplier.
    pub multiplier: f64,
    /// `(state, x, λ)` for every good state: `x` solves `R(x) = R'(x)·x`
    /// and `λ` is the multiplier whose stationary power is `x`.
    pub tangency: Vec<(usize, f64, f64)>,
}

/// Root of `R(x) − R'(x)·x` on `[0, TANGENCY_UPPER]`, increasing in `x` for good states.
fn tangency_point(g: &StateGeometry, state: usize) -> Result<f64> {
    let gap = |x: f64| g.symmetric_rate(x) - g.symmetric_rate_derivative(x) * x;
    if gap(0.0) >= 0.0 {
        return Ok(0.0);
    }
    if gap(TANGENCY_UPPER) <= 0.0 {
        return Err(Error::NoSignChange {
            state,
            upper: TANGENCY_UPPER,
        });
    }
    let (mut lo, mut hi) = (0.0f64, TANGENCY_UPPER);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Computes the large-budget threshold together with its intermediate values.
pub fn threshold(model: &DiscreteChannelModel, a: &EquationCoefficients) -> Result<Threshold> {
    model.check_coefficients(a)?;
    let geom = state_geometries(model, a);
    let good: Vec<usize> = (0..geom.len()).filter(|&m| geom[m].is_good()).collect();
    if good.is_empty() {
        return Err(invalid("good set is empty; no threshold exists"));
    }
    let tangency = good
        .iter()
        .map(|&m| {
            let x = tangency_point(&geom[m], m)?;
            Ok((m, x, geom[m].multiplier_for_power(x)))
        })
        .collect::<Result<Vec<_>>>()?;
    let multiplier = tangency.iter().map(|t| t.2).fold(f64::INFINITY, f64::min);
    let pbar = good
        .iter()
        .map(|&m| model.state(m).prob() * geom[m].stationary_power(multiplier).max(0.0))
        .sum();
    Ok(Threshold {
        pbar,
        multiplier,
        tangency,
    })
}

/// Budget above which water-filling over the good set is optimal.
pub fn threshold_pbar(model: &DiscreteChannelModel, a: &EquationCoefficients) -> Result<f64> {
    threshold(model, a).map(|t| t.pbar)
}

/// Constant power `budget` on every good state, zero elsewhere.
pub fn algo_a0(
    model: &DiscreteChannelModel,
    a: &EquationCoefficients,
    budget: f64,
) -> Result<SolveReport> {
    model.check_coefficients(a)?;
    if !(budget >= 0.0 && budget.is_finite()) {
        return Err(invalid(format!(
            "power budget must be non-negative, got {budget}"
        )));
    }
    let mut powers = SymmetricPolicy::zeros(model.num_states());
    for (m, g) in state_geometries(model, a).iter().enumerate() {
        if g.is_good() {
            powers[m] = budget;
        }
    }
    SolveReport::evaluate(
        model,
        a,
        Policy::Symmetric(powers),
        AlgorithmId::ConstantPower,
    )
}

/// Both passes of the water-filling algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPassReport {
    /// Solution on the initial support (the good set, or all states when asymmetric).
    pub first_pass: SolveReport,
    /// Re-solve on the states whose first-pass rate was positive.
    pub second_pass: SolveReport,
}

impl TwoPassReport {
    pub(crate) fn from_passes(first: SolveReport, second: SolveReport) -> Self {
        let iterations = first.iterations + second.iterations;
        Self {
            first_pass: first.relabel(AlgorithmId::WaterFillingFirstPass),
            second_pass: second
                .relabel(AlgorithmId::WaterFilling)
                .with_iterations(iterations),
        }
    }
}

/// Water-filling over the good set followed by one pruning re-solve.
pub fn algo_a1(
    model: &DiscreteChannelModel,
    a: &EquationCoefficients,
    budget: f64,
    cfg: &BisectionConfig,
) -> Result<TwoPassReport> {
    let problem = SymmetricProblem::new(model, a, budget, cfg)?;
    let (first, second) = search::two_pass(&problem, &problem.good_set())?;
    Ok(TwoPassReport::from_passes(first, second))
}

/// Ordered elimination over the good set using one ordering criterion.
pub fn algo_a2(
    model: &DiscreteChannelModel,
    a: &EquationCoefficients,
    budget: f64,
    method: OrderingMethod,
    cfg: &BisectionConfig,
) -> Result<SolveReport> {
    let problem = SymmetricProblem::new(model, a, budget, cfg)?;
    let mut ordered = problem.good_set();
    sort_by_score(&mut ordered, &problem.geom, method);
    let (report, rounds) = search::ordered_elimination(&problem, &ordered)?;
    Ok(report
        .relabel(AlgorithmId::Iterative(method))
        .with_iterations(rounds))
}

/// Runs [`algo_a2`] with both criteria and keeps the larger rate (the
/// additive criterion wins ties).
pub fn algo_a2_best(
    model: &DiscreteChannelModel,
    a: &EquationCoefficients,
    budget: f64,
    cfg: &BisectionConfig,
) -> Result<SolveReport> {
    let additive = algo_a2(model, a, budget, OrderingMethod::Additive, cfg)?;
    let ratio = algo_a2(model, a, budget, OrderingMethod::Ratio, cfg)?;
    Ok(pick_larger(additive, ratio).relabel(AlgorithmId::IterativeBest))
}

pub(crate) fn pick_larger(first: SolveReport, second: SolveReport) -> SolveReport {
    let mut diagnostics = first.diagnostics;
    diagnostics.merge(&second.diagnostics);
    let iterations = first.iterations + second.iterations;
    let mut best = if second.expected_rate > first.expected_rate {
        second
    } else {
        first
    };
    best.diagnostics = diagnostics;
    best.iterations = iterations;
    best
}

/// Exhaustive search over every subset of the good set.
pub fn algo_a3(
    model: &DiscreteChannelModel,
    a: &EquationCoefficients,
    budget: f64,
    cfg: &BisectionConfig,
) -> Result<SolveReport> {
    if model.num_states() > EXHAUSTIVE_MAX_STATES {
        return Err(Error::Capacity {
            states: model.num_states(),
            cap: EXHAUSTIVE_MAX_STATES,
        });
    }
    let problem = SymmetricProblem::new(model, a, budget, cfg)?;
    let good = problem.good_set();
    let report = search::exhaustive(&problem, &good)?;
    let subsets = 1usize << good.len();
    Ok(report
        .relabel(AlgorithmId::Exhaustive)
        .with_iterations(subsets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Marginal;

    fn a11() -> EquationCoefficients {
        EquationCoefficients::new(vec![1, 1]).unwrap()
    }

    fn example1() -> DiscreteChannelModel {
        DiscreteChannelModel::from_marginals(vec![
            Marginal::new(vec![1.0, 3.0], vec![0.6, 0.4]),
            Marginal::new(vec![0.5, 2.0], vec![0.8, 0.2]),
        ])
        .unwrap()
    }

    fn single(h: Vec<f64>) -> DiscreteChannelModel {
        DiscreteChannelModel::from_states(vec![(h, 1.0)]).unwrap()
    }

    #[test]
    fn kkt_coefficients_match_hand_values() {
        let k = KktCoefficients::new(&[1.0, 0.5], &a11()).unwrap();
        assert!((k.d - 0.3125).abs() < 1e-15);
        assert!((k.b - 2.75).abs() < 1e-15);
        assert!((k.c(0.5) + 2.5).abs() < 1e-15);
        let k = KktCoefficients::new(&[1.0, 1.0], &a11()).unwrap();
        assert_eq!(k.d, 0.0);
    }

    #[test]
    fn p_kkt_examples() {
        let a = a11();
        assert!((p_kkt(&[1.0, 1.0], &a, 0.5).unwrap() - 1.5).abs() < 1e-15);
        let expected = (-2.75 + (2.75f64 * 2.75 + 4.0 * 0.3125 * 2.5).sqrt()) / (2.0 * 0.3125);
        let p = p_kkt(&[1.0, 0.5], &a, 0.5).unwrap();
        assert!((p - expected).abs() < 1e-12);
        assert!((p - 0.8307).abs() < 1e-4);
        let p = p_kkt(&[1.0, 0.5], &a, 10.0).unwrap();
        assert!(p < 0.0);
        assert_eq!(p.max(0.0), 0.0);
        assert!(p_kkt(&[1.0, 0.5], &a, 0.0).is_err());
        assert!(p_kkt(&[1.0, 0.5], &a, -1.0).is_err());
    }

    #[test]
    fn stationary_power_satisfies_the_quadratic() {
        let a = a11();
        for h in [[1.0, 0.5], [3.0, 2.0], [0.2, 1.7]] {
            let k = KktCoefficients::new(&h, &a).unwrap();
            for lambda in [0.01, 0.3, 1.0, 4.0] {
                let p = p_kkt(&h, &a, lambda).unwrap();
                let residual = k.d * p * p + k.b * p + k.c(lambda);
                assert!(
                    residual.abs() < 1e-9 * (1.0 + k.c(lambda).abs()),
                    "{h:?} {lambda}"
                );
            }
        }
    }

    #[test]
    fn single_collinear_state() {
        let model = single(vec![1.0, 1.0]);
        let cfg = BisectionConfig::default();
        let r = solve_dp2s(&model, &a11(), &[0], 1.5, &cfg).unwrap();
        let p = r.symmetric_powers().unwrap()[0];
        assert!(p <= 1.5 && p >= 1.5 - cfg.power_tol);
        assert!((r.multiplier.unwrap() - 0.5).abs() < 1e-3);
        assert!((r.expected_rate - 0.5).abs() < 1e-3);
        let a0 = algo_a0(&model, &a11(), 1.5).unwrap();
        assert!((a0.expected_rate - 0.5).abs() < 1e-15);
    }

    #[test]
    fn solve_dp2s_meets_budget_window() {
        let model = example1();
        let cfg = BisectionConfig::default();
        let r = solve_dp2s(&model, &a11(), &[0, 1, 2, 3], 3.0, &cfg).unwrap();
        let spent = r.symmetric_powers().unwrap().average_power(&model.probs());
        assert!((3.0 - 1e-3..=3.0).contains(&spent));
        assert_eq!(r.diagnostics.max_budget_violation, 0.0);
    }

    #[test]
    fn solve_dp2s_rejects_bad_support() {
        let model = example1();
        let cfg = BisectionConfig::default();
        assert!(solve_dp2s(&model, &a11(), &[], 1.0, &cfg).is_err());
        assert!(solve_dp2s(&model, &a11(), &[4], 1.0, &cfg).is_err());
        assert!(solve_dp2s(&model, &a11(), &[1, 1], 1.0, &cfg).is_err());
        assert!(solve_dp2s(&model, &a11(), &[1], 0.0, &cfg).is_err());
    }

    #[test]
    fn example1_threshold() {
        let t = threshold(&example1(), &a11()).unwrap();
        assert!((t.pbar - 2.09).abs() < 0.01, "{}", t.pbar);
        assert_eq!(t.tangency.len(), 4);
    }

    #[test]
    fn a0_zero_budget_gives_zero_rate() {
        let r = algo_a0(&example1(), &a11(), 0.0).unwrap();
        assert_eq!(r.expected_rate, 0.0);
        assert!(r.active_set.is_empty() || r.expected_rate == 0.0);
    }

    #[test]
    fn a3_on_single_good_state_equals_direct_solve() {
        let model = single(vec![1.0, 0.5]);
        let cfg = BisectionConfig::default();
        let a3 = algo_a3(&model, &a11(), 2.0, &cfg).unwrap();
        let direct = solve_dp2s(&model, &a11(), &[0], 2.0, &cfg).unwrap();
        assert_eq!(a3.expected_rate, direct.expected_rate);
    }

    #[test]
    fn a3_rejects_large_models() {
        let states: Vec<_> = (0..21)
            .map(|i| (vec![1.0 + i as f64, 1.0], 1.0 / 21.0))
            .collect();
        let model = DiscreteChannelModel::from_states(states).unwrap();
        let err = algo_a3(&model, &a11(), 1.0, &BisectionConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Capacity { states: 21, .. }));
    }

    #[test]
    fn no_good_states_gives_zero_policy() {
        let a22 = EquationCoefficients::new(vec![2, 2]).unwrap();
        let model = single(vec![1.0, 0.0]);
        let cfg = BisectionConfig::default();
        let a1 = algo_a1(&model, &a22, 1.0, &cfg).unwrap();
        assert_eq!(a1.second_pass.expected_rate, 0.0);
        let a3 = algo_a3(&model, &a22, 1.0, &cfg).unwrap();
        assert!(a3.active_set.is_empty());
        assert!(threshold_pbar(&model, &a22).is_err());
    }
}
