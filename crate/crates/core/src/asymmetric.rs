//! Asymmetric policies: each user has its own power in every state.
//!
//! On a fixed support the objective `Σ fₘ Rₘ(pₘ)` is smooth but not concave,
//! so it is maximised locally by projected gradient ascent with Armijo
//! backtracking from several starting points: the optimal symmetric policy on
//! the same support and seeded Dirichlet draws. The feasible set is a product
//! of per-user weighted simplices `{x ≥ 0, Σₘ fₘ xₘ ≤ P̄}` and projections onto
//! it are exact.
//!
//! The rate has an infinite one-sided derivative in `P_{lm}` at zero whenever
//! the other users of state `m` already transmit, so iterates are kept at or
//! above [`POWER_FLOOR`] and entries left at the floor are zeroed at the end.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bisection::BisectionConfig;
use crate::channel::{DiscreteChannelModel, EquationCoefficients};
use crate::error::{check_len, invalid, Error, Result};
use crate::policy::{AlgorithmId, AsymmetricPolicy, Diagnostics, Policy, SolveReport};
use crate::rate::{asymmetric_rate_raw, sort_by_score, state_geometries, OrderingMethod};
use crate::search::{self, FixedSupport};
use crate::symmetric::{pick_larger, solve_dp2s, TwoPassReport};

/// Largest state count accepted by [`algo_a3_asym`].
pub const EXHAUSTIVE_MAX_STATES: usize = 12;

/// Smallest power an optimised entry may take during the ascent.
pub const POWER_FLOOR: f64 = 1e-12;

const ARMIJO_C: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
/// Consecutive iterations without relative progress before a run counts as stalled.
const STALL_ROUNDS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NlpConfig {
    pub starts: usize,
    pub step_init: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Bisection settings for the symmetric warm start.
    pub warm_start: BisectionConfig,
}

impl Default for NlpConfig {
    fn default() -> Self {
        Self {
            starts: 8,
            step_init: 0.1,
            grad_tol: 1e-7,
            max_iter: 5000,
            seed: 0,
            warm_start: BisectionConfig::default(),
        }
    }
}

impl NlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.starts == 0 {
            return Err(invalid("optimizer needs at least one start"));
        }
        if !(self.step_init > 0.0 && self.grad_tol > 0.0) {
            return Err(invalid("optimizer step and tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(invalid("optimizer needs max_iter ≥ 1"));
        }
        self.warm_start.validate()
    }
}

/// Euclidean projection of `v` onto `{x ≥ 0, Σ wᵢ xᵢ ≤ budget}` with `w > 0`.
pub fn project_weighted_simplex(v: &mut [f64], weights: &[f64], budget: f64) {
    debug_assert_eq!(v.len(), weights.len());
    let spent: f64 = v.iter().zip(weights).map(|(x, w)| x.max(0.0) * w).sum();
    if spent <= budget {
        v.iter_mut().for_each(|x| *x = x.max(0.0));
        return;
    }
    // x(τ) = max(v − τw, 0); entries leave the support at breakpoints vᵢ/wᵢ.
    let mut order: Vec<usize> = (0..v.len()).filter(|&i| v[i] > 0.0).collect();
    order.sort_by(|&i, &j| (v[j] / weights[j]).total_cmp(&(v[i] / weights[i])));
    let (mut wv, mut ww) = (0.0, 0.0);
    let mut tau = 0.0;
    for (k, &i) in order.iter().enumerate() {
        wv += weights[i] * v[i];
        ww += weights[i] * weights[i];
        tau = (wv - budget) / ww;
        let next = order
            .get(k + 1)
            .map_or(f64::NEG_INFINITY, |&j| v[j] / weights[j]);
        if tau >= next {
            break;
        }
    }
    let tau = tau.max(0.0);
    for (x, w) in v.iter_mut().zip(weights) {
        *x = (*x - tau * w).max(0.0);
    }
}

/// Data for one (model, a, support, budget) instance of the smooth problem.
struct Dp2<'a> {
    gains: Vec<&'a [f64]>,
    probs: Vec<f64>,
    a: Vec<f64>,
    a_norm_sq: f64,
    users: usize,
    budget: f64,
}

impl<'a> Dp2<'a> {
    fn new(
        model: &'a DiscreteChannelModel,
        a: &EquationCoefficients,
        support: &[usize],
        budget: f64,
    ) -> Self {
        Self {
            gains: support.iter().map(|&m| model.state(m).gains()).collect(),
            probs: support.iter().map(|&m| model.state(m).prob()).collect(),
            a: a.to_f64(),
            a_norm_sq: a.norm_sq(),
            users: model.users(),
            budget,
        }
    }

    fn states(&self) -> usize {
        self.probs.len()
    }

    /// Column `j` of the flat `users × states` variable vector.
    fn column(&self, x: &[f64], j: usize) -> Vec<f64> {
        let k = self.states();
        (0..self.users).map(|l| x[l * k + j]).collect()
    }

    fn value(&self, x: &[f64]) -> f64 {
        (0..self.states())
            .map(|j| {
                self.probs[j] * asymmetric_rate_raw(self.gains[j], &self.a, &self.column(x, j))
            })
            .sum()
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let k = self.states();
        let mut value = 0.0;
        for j in 0..k {
            let h = self.gains[j];
            let (mut energy, mut proj) = (0.0, 0.0);
            for l in 0..self.users {
                let p = x[l * k + j];
                energy += p * h[l] * h[l];
                proj += p.sqrt() * h[l] * self.a[l];
            }
            let excess = (energy * self.a_norm_sq - proj * proj).max(0.0);
            let denom = self.a_norm_sq + excess;
            value += self.probs[j] * 0.5 * ((1.0 + energy) / denom).log2();
            let scale = self.probs[j] / (2.0 * std::f64::consts::LN_2);
            for l in 0..self.users {
                let p = x[l * k + j];
                let ha = h[l] * self.a[l];
                // d(proj²)/dp, including its one-sided limits at p = 0.
                let dproj_sq = if p > 0.0 {
                    proj * ha / p.sqrt()
                } else if ha == 0.0 {
                    0.0
                } else if proj == 0.0 {
                    ha * ha
                } else {
                    f64::INFINITY.copysign(proj * ha)
                };
                let hh = h[l] * h[l];
                grad[l * k + j] =
                    scale * (hh / (1.0 + energy) - (self.a_norm_sq * hh - dproj_sq) / denom);
            }
        }
        value
    }

    fn project(&self, x: &mut [f64]) {
        let k = self.states();
        let reserve: f64 = self.probs.iter().sum::<f64>() * POWER_FLOOR;
        let mut row = vec![0.0; k];
        for l in 0..self.users {
            for j in 0..k {
                row[j] = x[l * k + j] - POWER_FLOOR;
            }
            project_weighted_simplex(&mut row, &self.probs, (self.budget - reserve).max(0.0));
            for j in 0..k {
                x[l * k + j] = row[j] + POWER_FLOOR;
            }
        }
    }
}

/// Objective value and gradient of the smooth problem on `support`.
///
/// The gradient has the shape of the full policy and is zero outside the
/// support. Entries at zero power carry the one-sided derivative, which is
/// `±∞` when the other users of that state already transmit.
pub fn dp2_objective_grad(
    model: &DiscreteChannelModel,
    a: &EquationCoefficients,
    support: &[usize],
    policy: &AsymmetricPolicy,
) -> Result<(f64, AsymmetricPolicy)> {
    model.check_coefficients(a)?;
    check_len(model.users(), policy.users())?;
    check_len(model.num_states(), policy.states())?;
    check_support(support, model.num_states())?;
    let dp2 = Dp2::new(model, a, support, f64::INFINITY);
    let k = support.len();
    let mut x = vec![0.0; model.users() * k];
    for l in 0..model.users() {
        for (j, &m) in support.iter().enumerate() {
            let p = policy[(l, m)];
            if !(p >= 0.0 && p.is_finite()) {
                return Err(invalid("policy powers must be finite and non-negative"));
            }
            x[l * k + j] = p;
        }
    }
    let mut g = vec![0.0; x.len()];
    let value = dp2.value_grad(&x, &mut g);
    let mut grad = AsymmetricPolicy::zeros(model.users(), model.num_states());
    for l in 0..model.users() {
        for (j, &m) in support.iter().enumerate() {
            grad[(l, m)] = g[l * k + j];
        }
    }
    Ok((value, grad))
}

struct RunResult {
    x: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
}

fn stationarity(dp2: &Dp2, x: &[f64], g: &[f64]) -> f64 {
    let mut moved: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| xi + gi).collect();
    dp2.project(&mut moved);
    moved
        .iter()
        .zip(x)
        .map(|(m, xi)| (m - xi).abs())
        .fold(0.0, f64::max)
}

fn ascend(dp2: &Dp2, start: Vec<f64>, cfg: &NlpConfig) -> RunResult {
    let n = start.len();
    let mut x = start;
    dp2.project(&mut x);
    let mut g = vec![0.0; n];
    let mut value = dp2.value_grad(&x, &mut g);
    let mut step = cfg.step_init;
    let mut trial = vec![0.0; n];
    let mut trial_g = vec![0.0; n];
    let mut stalled = 0;
    for it in 0..cfg.max_iter {
        if stationarity(dp2, &x, &g) <= cfg.grad_tol || stalled >= STALL_ROUNDS {
            return RunResult {
                x,
                value,
                iterations: it,
                converged: true,
            };
        }
        let mut accepted = false;
        while step > 1e-30 {
            for i in 0..n {
                trial[i] = x[i] + step * g[i];
            }
            dp2.project(&mut trial);
            let predicted: f64 = (0..n).map(|i| g[i] * (trial[i] - x[i])).sum();
            let trial_value = dp2.value(&trial);
            if trial_value >= value + ARMIJO_C * predicted {
                accepted = true;
                break;
            }
            step *= BACKTRACK;
        }
        if !accepted {
            return RunResult {
                x,
                value,
                iterations: it,
                converged: true,
            };
        }
        let new_value = dp2.value_grad(&trial, &mut trial_g);
        if new_value - value <= 1e-15 * value.abs().max(1.0) {
            stalled += 1;
        } else {
            stalled = 0;
        }
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut trial_g);
        value = new_value;
        step = (step * 2.0).min(1e6);
    }
    let converged = stationarity(dp2, &x, &g) <= cfg.grad_tol;
    RunResult {
        x,
        value,
        iterations: cfg.max_iter,
        converged,
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

struct AsymmetricProblem<'a> {
    model: &'a DiscreteChannelModel,
    a: &'a EquationCoefficients,
    budget: f64,
    cfg: NlpConfig,
}

impl<'a> AsymmetricProblem<'a> {
    fn new(
        model: &'a DiscreteChannelModel,
        a: &'a EquationCoefficients,
        budget: f64,
        cfg: &NlpConfig,
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
            budget,
            cfg: *cfg,
        })
    }

    fn to_policy(&self, support: &[usize], x: &[f64], zero_floor: bool) -> AsymmetricPolicy {
        let k = support.len();
        let mut policy = AsymmetricPolicy::zeros(self.model.users(), self.model.num_states());
        for l in 0..self.model.users() {
            for (j, &m) in support.iter().enumerate() {
                let p = x[l * k + j];
                policy[(l, m)] = if zero_floor && p <= 2.0 * POWER_FLOOR {
                    0.0
                } else {
                    p
                };
            }
        }
        policy
    }

    fn starting_points(&self, dp2: &Dp2, support: &[usize]) -> Vec<Vec<f64>> {
        let users = self.model.users();
        let k = support.len();
        let mut starts = Vec::with_capacity(self.cfg.starts);
        let warm = solve_dp2s(
            self.model,
            self.a,
            support,
            self.budget,
            &self.cfg.warm_start,
        )
        .ok()
        .and_then(|r| r.symmetric_powers().cloned());
        let first: Vec<f64> = match warm {
            Some(p) => (0..users)
                .flat_map(|_| support.iter().map(|&m| p[m]).collect::<Vec<_>>())
                .collect(),
            None => {
                let mass: f64 = dp2.probs.iter().sum();
                vec![self.budget / mass; users * k]
            }
        };
        starts.push(first);
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        while starts.len() < self.cfg.starts {
            let mut x = vec![0.0; users * k];
            for l in 0..users {
                let draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                let total: f64 = draws.iter().sum();
                for j in 0..k {
                    x[l * k + j] = self.budget * draws[j] / total / dp2.probs[j];
                }
            }
            starts.push(x);
        }
        starts
    }

    fn evaluate(&self, policy: AsymmetricPolicy) -> Result<SolveReport> {
        SolveReport::evaluate(
            self.model,
            self.a,
            Policy::Asymmetric(policy),
            AlgorithmId::AsymmetricLocal,
        )
    }

    fn budget_violation(&self, policy: &AsymmetricPolicy) -> f64 {
        policy
            .average_powers(&self.model.probs())
            .into_iter()
            .map(|p| (p - self.budget).max(0.0))
            .fold(0.0, f64::max)
    }
}

impl FixedSupport for AsymmetricProblem<'_> {
    fn solve(&self, support: &[usize]) -> Result<SolveReport> {
        if support.is_empty() {
            let zero = AsymmetricPolicy::zeros(self.model.users(), self.model.num_states());
            return self.evaluate(zero);
        }
        let dp2 = Dp2::new(self.model, self.a, support, self.budget);
        let starts = self.starting_points(&dp2, support);
        let runs: Vec<RunResult> = starts
            .into_par_iter()
            .map(|s| ascend(&dp2, s, &self.cfg))
            .collect();
        let iterations = runs.iter().map(|r| r.iterations).sum();
        let any_converged = runs.iter().any(|r| r.converged);

        // Candidates: each run's end point, with and without floor entries zeroed.
        let mut best: Option<SolveReport> = None;
        for run in &runs {
            debug_assert!(run.value.is_finite());
            for zero_floor in [true, false] {
                let report = self.evaluate(self.to_policy(support, &run.x, zero_floor))?;
                if best
                    .as_ref()
                    .is_none_or(|b| report.expected_rate > b.expected_rate)
                {
                    best = Some(report);
                }
            }
        }
        let mut best = best.expect("at least one start");
        best.iterations = iterations;
        best.certified = false;
        best.diagnostics = Diagnostics {
            inner_solves: 1,
            max_budget_violation: self
                .budget_violation(best.asymmetric_powers().expect("asymmetric")),
        };
        if !any_converged {
            return Err(Error::NonConvergence {
                starts: runs.len(),
                best: Box::new(best),
            });
        }
        Ok(best)
    }

    fn state_rates(&self, report: &SolveReport) -> Vec<f64> {
        let p = report.asymmetric_powers().expect("asymmetric report");
        let af = self.a.to_f64();
        (0..self.model.num_states())
            .map(|m| asymmetric_rate_raw(self.model.state(m).gains(), &af, &p.column(m)))
            .collect()
    }
}

/// Best local optimum of the smooth asymmetric problem on `support`.
pub fn solve_dp2(
    model: &DiscreteChannelModel,
    a: &EquationCoefficients,
    support: &[usize],
    budget: f64,
    cfg: &NlpConfig,
) -> Result<SolveReport> {
    let problem = AsymmetricProblem::new(model, a, budget, cfg)?;
    check_support(support, model.num_states())?;
    problem.solve(support)
}

/// Every user transmits with power `budget` in every state.
pub fn algo_a0_asym(
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
    let rows = vec![vec![budget; model.num_states()]; model.users()];
    let policy = AsymmetricPolicy::from_rows(rows)?;
    SolveReport::evaluate(
        model,
        a,
        Policy::Asymmetric(policy),
        AlgorithmId::ConstantPower,
    )
}

/// Two-pass water-filling starting from all states.
pub fn algo_a1_asym(
    model: &DiscreteChannelModel,
    a: &EquationCoefficients,
    budget: f64,
    cfg: &NlpConfig,
) -> Result<TwoPassReport> {
    let problem = AsymmetricProblem::new(model, a, budget, cfg)?;
    let all: Vec<usize> = (0..model.num_states()).collect();
    let (first, second) = search::two_pass(&problem, &all)?;
    let mut report = TwoPassReport::from_passes(first, second);
    report.first_pass.certified = false;
    report.second_pass.certified = false;
    Ok(report)
}

/// Ordered elimination over all states using one ordering criterion.
pub fn algo_a2_asym(
    model: &DiscreteChannelModel,
    a: &EquationCoefficients,
    budget: f64,
    method: OrderingMethod,
    cfg: &NlpConfig,
) -> Result<SolveReport> {
    let problem = AsymmetricProblem::new(model, a, budget, cfg)?;
    let geom = state_geometries(model, a);
    let mut ordered: Vec<usize> = (0..model.num_states()).collect();
    sort_by_score(&mut ordered, &geom, method);
    let (mut report, rounds) = search::ordered_elimination(&problem, &ordered)?;
    report.certified = false;
    Ok(report
        .relabel(AlgorithmId::Iterative(method))
        .with_iterations(rounds))
}

/// [`algo_a2_asym`] with both criteria, keeping the larger rate.
pub fn algo_a2_asym_best(
    model: &DiscreteChannelModel,
    a: &EquationCoefficients,
    budget: f64,
    cfg: &NlpConfig,
) -> Result<SolveReport> {
    let additive = algo_a2_asym(model, a, budget, OrderingMethod::Additive, cfg)?;
    let ratio = algo_a2_asym(model, a, budget, OrderingMethod::Ratio, cfg)?;
    Ok(pick_larger(additive, ratio).relabel(AlgorithmId::IterativeBest))
}

/// Exhaustive search over all subsets of states. The result is the best
/// local optimum found, not a certified global one.
pub fn algo_a3_asym(
    model: &DiscreteChannelModel,
    a: &EquationCoefficients,
    budget: f64,
    cfg: &NlpConfig,
) -> Result<SolveReport> {
    if model.num_states() > EXHAUSTIVE_MAX_STATES {
        return Err(Error::Capacity {
            states: model.num_states(),
            cap: EXHAUSTIVE_MAX_STATES,
        });
    }
    let problem = AsymmetricProblem::new(model, a, budget, cfg)?;
    let all: Vec<usize> = (0..model.num_states()).collect();
    let mut report = search::exhaustive(&problem, &all)?;
    report.certified = false;
    Ok(report
        .relabel(AlgorithmId::Exhaustive)
        .with_iterations(1 << model.num_states()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Marginal;
    use proptest::prelude::*;

    fn a11() -> EquationCoefficients {
        EquationCoefficients::new(vec![1, 1]).unwrap()
    }

    fn remark() -> DiscreteChannelModel {
        DiscreteChannelModel::from_marginals(vec![
            Marginal::new(vec![0.5, 1.0], vec![0.5, 0.5]),
            Marginal::new(vec![0.5, 1.0], vec![0.5, 0.5]),
        ])
        .unwrap()
    }

    #[test]
    fn projection_leaves_feasible_points() {
        let mut v = vec![0.5, 0.2, 0.1];
        project_weighted_simplex(&mut v, &[1.0, 1.0, 1.0], 1.0);
        assert_eq!(v, vec![0.5, 0.2, 0.1]);
        let mut v = vec![-0.5, 0.2];
        project_weighted_simplex(&mut v, &[1.0, 1.0], 1.0);
        assert_eq!(v, vec![0.0, 0.2]);
    }

    #[test]
    fn projection_onto_unit_simplex() {
        let mut v = vec![1.0, 1.0];
        project_weighted_simplex(&mut v, &[1.0, 1.0], 1.0);
        assert!((v[0] - 0.5).abs() < 1e-15 && (v[1] - 0.5).abs() < 1e-15);
        let mut v = vec![3.0, 0.0, 0.5];
        project_weighted_simplex(&mut v, &[1.0, 1.0, 1.0], 1.0);
        assert!((v[0] - 1.0).abs() < 1e-15 && v[1] == 0.0 && v[2] == 0.0);
    }

    proptest! {
        #[test]
        fn projection_satisfies_variational_inequality(
            v in prop::collection::vec(-5.0f64..5.0, 1..8),
            wseed in prop::collection::vec(0.05f64..1.0, 8),
            budget in 0.1f64..4.0,
            zseed in prop::collection::vec(0.0f64..1.0, 8),
        ) {
            let w = &wseed[..v.len()];
            let mut y = v.clone();
            project_weighted_simplex(&mut y, w, budget);
            let spent: f64 = y.iter().zip(w).map(|(a, b)| a * b).sum();
            prop_assert!(y.iter().all(|&x| x >= 0.0));
            prop_assert!(spent <= budget * (1.0 + 1e-12));
            // Any feasible z: (v − y)ᵀ(z − y) ≤ 0.
            let zt: f64 = zseed[..v.len()].iter().zip(w).map(|(a, b)| a * b).sum();
            let z: Vec<f64> = zseed[..v.len()].iter().map(|x| x * budget / zt.max(budget)).collect();
            let inner: f64 = (0..v.len()).map(|i| (v[i] - y[i]) * (z[i] - y[i])).sum();
            prop_assert!(inner <= 1e-9);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let model = remark();
        let support = [0, 1, 2, 3];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..2)
                .map(|_| {
                    (0..4)
                        .map(|_| rand::Rng::random_range(&mut rng, 0.1..4.0))
                        .collect()
                })
                .collect();
            let p = AsymmetricPolicy::from_rows(rows).unwrap();
            let (_, g) = dp2_objective_grad(&model, &a11(), &support, &p).unwrap();
            for l in 0..2 {
                for m in 0..4 {
                    let step = 1e-6;
                    let (mut up, mut dn) = (p.clone(), p.clone());
                    up[(l, m)] += step;
                    dn[(l, m)] -= step;
                    let fu = dp2_objective_grad(&model, &a11(), &support, &up).unwrap().0;
                    let fd = dp2_objective_grad(&model, &a11(), &support, &dn).unwrap().0;
                    let fdg = (fu - fd) / (2.0 * step);
                    let rel = (fdg - g[(l, m)]).abs() / g[(l, m)].abs().max(1e-8);
                    assert!(rel < 1e-4, "{l} {m}: {fdg} vs {}", g[(l, m)]);
                }
            }
        }
    }

    #[test]
    fn gradient_symmetric_for_collinear_state() {
        let model = DiscreteChannelModel::from_states(vec![(vec![0.7, 0.7], 1.0)]).unwrap();
        let p = AsymmetricPolicy::from_rows(vec![vec![1.3], vec![1.3]]).unwrap();
        let (_, g) = dp2_objective_grad(&model, &a11(), &[0], &p).unwrap();
        assert!((g[(0, 0)] - g[(1, 0)]).abs() < 1e-15);
    }

    #[test]
    fn gradient_one_sided_at_zero() {
        let model = DiscreteChannelModel::from_states(vec![(vec![0.5, 1.0], 1.0)]).unwrap();
        let p = AsymmetricPolicy::from_rows(vec![vec![0.0], vec![1.0]]).unwrap();
        let (_, g) = dp2_objective_grad(&model, &a11(), &[0], &p).unwrap();
        assert_eq!(g[(0, 0)], f64::INFINITY);
        assert!(g[(1, 0)].is_finite());
    }

    #[test]
    fn single_collinear_state_splits_power_evenly() {
        let model = DiscreteChannelModel::from_states(vec![(vec![1.0, 1.0], 1.0)]).unwrap();
        let r = solve_dp2(&model, &a11(), &[0], 1.7, &NlpConfig::default()).unwrap();
        let p = r.asymmetric_powers().unwrap();
        assert!((p[(0, 0)] - 1.7).abs() < 1e-6 && (p[(1, 0)] - 1.7).abs() < 1e-6);
        // Grid over the split of the total power confirms the even split is best.
        let af = [1.0, 1.0];
        let best = (0..=1000)
            .map(|i| {
                let p1 = 3.4 * i as f64 / 1000.0;
                asymmetric_rate_raw(&[1.0, 1.0], &af, &[p1.min(1.7), (3.4 - p1).min(1.7)])
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(r.expected_rate >= best - 1e-9);
    }

    #[test]
    fn misaligned_single_state_has_zero_rate() {
        let model = DiscreteChannelModel::from_states(vec![(vec![1.0, 0.0], 1.0)]).unwrap();
        let r = solve_dp2(&model, &a11(), &[0], 3.0, &NlpConfig::default()).unwrap();
        assert_eq!(r.expected_rate, 0.0);
    }

    #[test]
    fn two_level_support_reaches_known_rate() {
        let r = solve_dp2(&remark(), &a11(), &[1, 3], 2.0, &NlpConfig::default()).unwrap();
        assert!(
            (r.expected_rate - 0.4102).abs() < 5e-3,
            "{}",
            r.expected_rate
        );
        let p = r.asymmetric_powers().unwrap();
        let paper = [[0.0, 3.3896, 0.0, 4.6105], [0.0, 2.5853, 0.0, 5.4145]];
        for l in 0..2 {
            for m in 0..4 {
                assert!(
                    (p[(l, m)] - paper[l][m]).abs() < 0.05,
                    "{l} {m} {}",
                    p[(l, m)]
                );
            }
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = NlpConfig {
            seed: 42,
            ..Default::default()
        };
        let r1 = solve_dp2(&remark(), &a11(), &[1, 2, 3], 1.3, &cfg).unwrap();
        let r2 = solve_dp2(&remark(), &a11(), &[1, 2, 3], 1.3, &cfg).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn a3_guard() {
        let states: Vec<_> = (0..13)
            .map(|i| (vec![1.0 + i as f64, 1.0], 1.0 / 13.0))
            .collect();
        let model = DiscreteChannelModel::from_states(states).unwrap();
        let err = algo_a3_asym(&model, &a11(), 1.0, &NlpConfig::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::Capacity {
                states: 13,
                cap: 12
            }
        ));
    }
}
