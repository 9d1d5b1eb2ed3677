//! Active-set search strategies shared by the symmetric and asymmetric solvers.
//!
//! Each strategy only needs a way to solve the smooth problem on a fixed
//! support and to read back the per-state (unclamped) rates of a solution.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::Result;
use crate::policy::{Diagnostics, SolveReport};

pub(crate) trait FixedSupport: Sync {
    /// Solves on `support`; an empty support yields the all-zero policy.
    fn solve(&self, support: &[usize]) -> Result<SolveReport>;

    /// Unclamped rate of every state under the report's policy.
    fn state_rates(&self, report: &SolveReport) -> Vec<f64>;
}

fn positive_states(
    solver: &impl FixedSupport,
    report: &SolveReport,
    support: &[usize],
) -> Vec<usize> {
    let rates = solver.state_rates(report);
    support
        .iter()
        .copied()
        .filter(|&m| rates[m] > 0.0)
        .collect()
}

/// Solve on `initial`, drop states whose rate is not positive, re-solve.
pub(crate) fn two_pass(
    solver: &impl FixedSupport,
    initial: &[usize],
) -> Result<(SolveReport, SolveReport)> {
    let first = solver.solve(initial)?;
    let survivors = positive_states(solver, &first, initial);
    let mut second = solver.solve(&survivors)?;
    second.diagnostics.merge(&first.diagnostics);
    Ok((first, second))
}

/// Ordered elimination: `ordered` runs from the worst state to the best.
///
/// Each round solves on the current support (re-solving on the positive-rate
/// survivors if some state ends up with zero rate), then removes the worst
/// remaining state. Stops when the expected rate decreases or the support is
/// exhausted and returns the best policy seen.
pub(crate) fn ordered_elimination(
    solver: &impl FixedSupport,
    ordered: &[usize],
) -> Result<(SolveReport, usize)> {
    let mut diagnostics = Diagnostics::default();
    let mut best: Option<SolveReport> = None;
    let mut rounds = 0;
    for start in 0..ordered.len() {
        let support = &ordered[start..];
        let mut candidate = solver.solve(support)?;
        diagnostics.merge(&candidate.diagnostics);
        let rates = solver.state_rates(&candidate);
        if support.iter().any(|&m| rates[m] <= 0.0) {
            let survivors: Vec<usize> = support
                .iter()
                .copied()
                .filter(|&m| rates[m] > 0.0)
                .collect();
            candidate = solver.solve(&survivors)?;
            diagnostics.merge(&candidate.diagnostics);
        }
        rounds += 1;
        match &best {
            Some(b) if candidate.expected_rate < b.expected_rate => break,
            _ => best = Some(candidate),
        }
    }
    let mut best = match best {
        Some(b) => b,
        None => solver.solve(&[])?,
    };
    best.diagnostics = diagnostics;
    Ok((best, rounds))
}

/// Lexicographic comparison of two subsets given as bitmasks over `candidates`.
fn lex_cmp(a: u64, b: u64) -> Ordering {
    // Subsets compare as sorted index sequences; a proper prefix comes first.
    let (mut a, mut b) = (a, b);
    loop {
        match (a == 0, b == 0) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
        let (ta, tb) = (a.trailing_zeros(), b.trailing_zeros());
        if ta != tb {
            return ta.cmp(&tb);
        }
        a &= a - 1;
        b &= b - 1;
    }
}

/// Returns true when subset `a` is preferred over `b` at equal rate.
fn prefer(a: u64, b: u64) -> bool {
    a.count_ones()
        .cmp(&b.count_ones())
        .then_with(|| lex_cmp(a, b))
        .is_lt()
}

/// Solves on every subset of `candidates` and keeps the best expected rate.
///
/// Ties are broken towards smaller subsets, then lexicographically smaller
/// ones, so the result does not depend on evaluation order.
pub(crate) fn exhaustive(solver: &impl FixedSupport, candidates: &[usize]) -> Result<SolveReport> {
    assert!(candidates.len() < 63, "subset masks are 64-bit");
    let subsets = 1u64 << candidates.len();
    let best = (0..subsets)
        .into_par_iter()
        .map(|mask| {
            let support: Vec<usize> = candidates
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &m)| m)
                .collect();
            solver.solve(&support).map(|r| (mask, r))
        })
        .try_reduce_with(|x, y| {
            let (keep, other) = match x.1.expected_rate.total_cmp(&y.1.expected_rate) {
                Ordering::Greater => (x, y),
                Ordering::Less => (y, x),
                Ordering::Equal if prefer(x.0, y.0) => (x, y),
                Ordering::Equal => (y, x),
            };
            let mut keep = keep;
            keep.1.diagnostics.merge(&other.1.diagnostics);
            Ok(keep)
        })
        .expect("at least the empty subset")?;
    Ok(best.1)
}
