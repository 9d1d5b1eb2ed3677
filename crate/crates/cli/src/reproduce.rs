//! Golden-value checks for the built-in presets.

use cf_power::symmetric::threshold;

use crate::config::{preset, Algorithm, ConfigError, ExperimentConfig};
use crate::sweep::{run_sweep, Cell};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

impl Check {
    fn new(
        name: &str,
        expected: impl Into<String>,
        observed: impl Into<String>,
        pass: bool,
    ) -> Self {
        Self {
            name: name.to_string(),
            expected: expected.into(),
            observed: observed.into(),
            pass,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Reproduction {
    pub config: ExperimentConfig,
    pub cells: Vec<Cell>,
    pub checks: Vec<Check>,
}

impl Reproduction {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRow {
    pub name: String,
    pub pbar: f64,
    pub multiplier: f64,
}

/// Large-budget threshold of a discrete configuration.
pub fn report_thresholds(name: &str, cfg: &ExperimentConfig) -> Result<ThresholdRow, ConfigError> {
    let model = cfg.discrete_model()?;
    let a = cfg.coefficients()?;
    let t = threshold(&model, &a).map_err(|e| ConfigError::Invalid {
        field: "model".into(),
        line: None,
        message: e.to_string(),
    })?;
    Ok(ThresholdRow {
        name: name.to_string(),
        pbar: t.pbar,
        multiplier: t.multiplier,
    })
}

/// Rates of one algorithm along the grid; `None` where the cell failed.
fn series(cells: &[Cell], alg: Algorithm) -> Vec<(f64, Option<f64>)> {
    cells
        .iter()
        .filter(|c| c.row.algorithm_id == alg)
        .map(|c| (c.row.pbar, c.row.expected_rate))
        .collect()
}

/// Largest `rate(hi) − rate(lo)` over budgets in `[from, to]`, with its budget.
fn max_gap(cells: &[Cell], hi: Algorithm, lo: Algorithm, from: f64, to: f64) -> (f64, f64) {
    series(cells, hi)
        .into_iter()
        .zip(series(cells, lo))
        .filter(|((p, _), _)| *p >= from - 1e-12 && *p <= to + 1e-12)
        .filter_map(|((p, h), (_, l))| Some((h? - l?, p)))
        .fold((f64::NEG_INFINITY, f64::NAN), |best, x| {
            if x.0 > best.0 {
                x
            } else {
                best
            }
        })
}

fn threshold_check(name: &str, cfg: &ExperimentConfig, want: f64, tol: f64) -> Check {
    match report_thresholds(name, cfg) {
        Ok(t) => Check::new(
            "threshold",
            format!("{want} ± {tol}"),
            format!("{:.4}", t.pbar),
            (t.pbar - want).abs() <= tol,
        ),
        Err(e) => Check::new("threshold", format!("{want} ± {tol}"), e.to_string(), false),
    }
}

fn gap_check(
    name: &str,
    cells: &[Cell],
    hi: Algorithm,
    lo: Algorithm,
    range: (f64, f64),
    min_gap: f64,
) -> Check {
    let (gap, at) = max_gap(cells, hi, lo, range.0, range.1);
    Check::new(
        name,
        format!(
            "{hi} − {lo} > {min_gap:e} somewhere in [{}, {}]",
            range.0, range.1
        ),
        format!("{gap:.3e} at {at}"),
        gap > min_gap,
    )
}

fn agree_check(
    name: &str,
    cells: &[Cell],
    x: Algorithm,
    y: Algorithm,
    range: (f64, f64),
    tol: f64,
) -> Check {
    let (up, at_up) = max_gap(cells, x, y, range.0, range.1);
    let (down, at_down) = max_gap(cells, y, x, range.0, range.1);
    let (worst, at) = if up.abs() >= down.abs() {
        (up.abs(), at_up)
    } else {
        (down.abs(), at_down)
    };
    Check::new(
        name,
        format!("|{x} − {y}| ≤ {tol:e} on [{}, {}]", range.0, range.1),
        format!("{worst:.3e} at {at}"),
        worst <= tol,
    )
}

/// `higher ≥ lower` at every budget, up to `slack`.
fn dominance_check(cells: &[Cell], higher: Algorithm, lower: Algorithm, slack: f64) -> Check {
    let (gap, at) = max_gap(cells, lower, higher, f64::NEG_INFINITY, f64::INFINITY);
    Check::new(
        &format!("{higher} ≥ {lower}"),
        "at every budget",
        if gap > 0.0 {
            format!("worst shortfall {gap:.3e} at {at}")
        } else {
            "no shortfall".into()
        },
        gap <= slack,
    )
}

/// Runs a preset on its grid and checks its golden values.
pub fn reproduce(name: &str, seed: Option<u64>) -> Result<Reproduction, ConfigError> {
    let mut config = preset(name)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let cells = run_sweep(&config)?;
    let errors = cells.iter().filter(|c| c.row.error.is_some()).count();
    let mut checks = vec![Check::new(
        "cells solved",
        "no errors",
        format!("{errors} errors"),
        errors == 0,
    )];
    use Algorithm::*;
    match name {
        "example1" => {
            checks.push(threshold_check(name, &config, 2.09, 0.01));
            checks.push(agree_check(
                "A1 optimal above threshold",
                &cells,
                A1,
                A3,
                (2.2, 5.0),
                1e-6,
            ));
            checks.push(agree_check(
                "A2 optimal below threshold",
                &cells,
                A2,
                A3,
                (0.0, 2.09),
                1e-6,
            ));
            checks.push(gap_check("A1 rate drop", &cells, A3, A1, (0.8, 0.9), 1e-3));
            checks.push(dominance_check(&cells, A1, A0, 0.0));
        }
        "example2" => {
            checks.push(threshold_check(name, &config, 5.02, 0.01));
            checks.push(gap_check(
                "A2 suboptimal",
                &cells,
                A3,
                A2,
                (1.25, 2.25),
                1e-6,
            ));
            checks.push(dominance_check(&cells, A3, A2, 1e-9));
            checks.push(dominance_check(&cells, A1, A0, 0.0));
        }
        "example3" => {
            checks.push(threshold_check(name, &config, 13.05, 0.05));
            checks.push(dominance_check(&cells, A2, A1, 1e-9));
            checks.push(dominance_check(&cells, A1, A0, 0.0));
        }
        "remark" => {
            let a3 = cells
                .iter()
                .find(|c| c.row.algorithm_id == A3 && c.row.pbar == 2.0);
            let (rate, set) = a3.map_or((f64::NAN, String::new()), |c| {
                (
                    c.row.expected_rate.unwrap_or(f64::NAN),
                    c.row.active_set.clone(),
                )
            });
            checks.push(Check::new(
                "A3 rate",
                "0.4102 ± 5e-3",
                format!("{rate:.5}"),
                (rate - 0.4102).abs() <= 5e-3,
            ));
            checks.push(Check::new(
                "A3 active set",
                "{2,4} or {3,4} (0101 or 0011)",
                set.clone(),
                set == "0101" || set == "0011",
            ));
        }
        "gaussian" => {
            checks.push(dominance_check(&cells, A2, A1, 0.0));
            checks.push(dominance_check(&cells, A1, A0, 0.0));
        }
        _ => {}
    }
    Ok(Reproduction {
        config,
        cells,
        checks,
    })
}
