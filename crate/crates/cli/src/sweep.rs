//! Budget sweeps: one row per (budget, algorithm) cell.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use cf_power::asymmetric::{algo_a0_asym, algo_a1_asym, algo_a2_asym_best, algo_a3_asym};
use cf_power::continuous::{
    algo_iterative_continuous, constant_power_rate, solve_cp2, ContinuousChannelModel, Domain,
};
use cf_power::symmetric::{algo_a0, algo_a1, algo_a2_best, algo_a3};
use cf_power::{DiscreteChannelModel, EquationCoefficients, SolveReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, ConfigError, ExperimentConfig, PolicyKind};

pub const CSV_HEADER: [&str; 9] = [
    "pbar",
    "algorithm_id",
    "policy_kind",
    "expected_rate",
    "active_set",
    "multiplier",
    "iterations",
    "wall_ms",
    "error",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub pbar: f64,
    pub algorithm_id: Algorithm,
    pub policy_kind: PolicyKind,
    pub expected_rate: Option<f64>,
    /// '0'/'1' per discrete state, or a domain descriptor for continuous runs.
    pub active_set: String,
    pub multiplier: Option<f64>,
    pub iterations: usize,
    pub wall_ms: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyDump {
    /// One row per user; a single row for symmetric policies.
    Discrete { powers: Vec<Vec<f64>> },
    /// Stationary power for `multiplier` on `domain`, zero elsewhere.
    Continuous { domain: Domain, multiplier: f64 },
    /// Constant power on the good domain.
    Constant { power: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub pbar: f64,
    pub algorithm: Algorithm,
    pub policy_kind: PolicyKind,
    pub expected_rate: f64,
    pub policy: PolicyDump,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub row: SweepRow,
    pub policy: Option<PolicyRecord>,
}

enum Model {
    Discrete(DiscreteChannelModel),
    Continuous(ContinuousChannelModel),
}

struct Outcome {
    rate: f64,
    active_set: String,
    multiplier: Option<f64>,
    iterations: usize,
    policy: PolicyDump,
}

impl From<SolveReport> for Outcome {
    fn from(r: SolveReport) -> Self {
        Self {
            rate: r.expected_rate,
            active_set: r.active_mask(),
            multiplier: r.multiplier,
            iterations: r.iterations,
            policy: PolicyDump::Discrete {
                powers: r.policy.rows(),
            },
        }
    }
}

fn solve_discrete(
    cfg: &ExperimentConfig,
    model: &DiscreteChannelModel,
    a: &EquationCoefficients,
    pbar: f64,
    algorithm: Algorithm,
) -> cf_power::Result<Outcome> {
    let (b, nlp) = (&cfg.bisection, cfg.nlp_config());
    let report = match (cfg.policy_kind, algorithm) {
        (PolicyKind::Asymmetric, Algorithm::A0) => algo_a0_asym(model, a, pbar)?,
        (PolicyKind::Asymmetric, Algorithm::A1) => algo_a1_asym(model, a, pbar, &nlp)?.second_pass,
        (PolicyKind::Asymmetric, Algorithm::A2) => algo_a2_asym_best(model, a, pbar, &nlp)?,
        (PolicyKind::Asymmetric, Algorithm::A3) => algo_a3_asym(model, a, pbar, &nlp)?,
        (_, Algorithm::A0) => algo_a0(model, a, pbar)?,
        (_, Algorithm::A1) => algo_a1(model, a, pbar, b)?.second_pass,
        (_, Algorithm::A2) => algo_a2_best(model, a, pbar, b)?,
        (_, Algorithm::A3) => algo_a3(model, a, pbar, b)?,
    };
    Ok(report.into())
}

fn solve_continuous(
    cfg: &ExperimentConfig,
    model: &ContinuousChannelModel,
    a: &EquationCoefficients,
    pbar: f64,
    algorithm: Algorithm,
) -> cf_power::Result<Outcome> {
    let solution = match algorithm {
        Algorithm::A0 => {
            return Ok(Outcome {
                rate: constant_power_rate(model, a, pbar)?,
                active_set: Domain::good().to_string(),
                multiplier: None,
                iterations: 0,
                policy: PolicyDump::Constant { power: pbar },
            })
        }
        Algorithm::A1 => solve_cp2(model, a, &Domain::good(), pbar, &cfg.bisection)?,
        _ => algo_iterative_continuous(model, a, pbar, &cfg.shaping, &cfg.bisection)?.best,
    };
    Ok(Outcome {
        rate: solution.expected_rate,
        active_set: solution.domain.to_string(),
        multiplier: Some(solution.multiplier),
        iterations: solution.iterations,
        policy: PolicyDump::Continuous {
            domain: solution.domain,
            multiplier: solution.multiplier,
        },
    })
}

/// Runs every (budget, algorithm) cell. Rows come back ordered by budget,
/// then by the configured algorithm order; a failing cell records its error
/// and the sweep continues.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<Cell>, ConfigError> {
    cfg.validate()?;
    let a = cfg.coefficients()?;
    let model = match cfg.policy_kind {
        PolicyKind::Continuous => Model::Continuous(cfg.continuous_model()?),
        _ => Model::Discrete(cfg.discrete_model()?),
    };
    let cells: Vec<(f64, Algorithm)> = cfg
        .pbar_grid
        .iter()
        .flat_map(|&p| cfg.algorithms.iter().map(move |&alg| (p, alg)))
        .collect();
    Ok(cells
        .into_par_iter()
        .map(|(pbar, algorithm)| {
            let start = Instant::now();
            let outcome = match &model {
                Model::Discrete(m) => solve_discrete(cfg, m, &a, pbar, algorithm),
                Model::Continuous(m) => solve_continuous(cfg, m, &a, pbar, algorithm),
            };
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            let mut row = SweepRow {
                pbar,
                algorithm_id: algorithm,
                policy_kind: cfg.policy_kind,
                expected_rate: None,
                active_set: String::new(),
                multiplier: None,
                iterations: 0,
                wall_ms,
                error: None,
            };
            match outcome {
                Ok(o) => {
                    row.expected_rate = Some(o.rate);
                    row.active_set = o.active_set;
                    row.multiplier = o.multiplier;
                    row.iterations = o.iterations;
                    let policy = PolicyRecord {
                        pbar,
                        algorithm,
                        policy_kind: cfg.policy_kind,
                        expected_rate: o.rate,
                        policy: o.policy,
                    };
                    Cell {
                        row,
                        policy: Some(policy),
                    }
                }
                Err(e) => {
                    row.error = Some(e.to_string());
                    Cell { row, policy: None }
                }
            }
        })
        .collect())
}

/// Six significant digits, scientific notation outside `[1e-4, 1e6)`.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        format!("{:.*}", (5 - mag) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

pub fn write_csv(rows: &[SweepRow], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            sig6(r.pbar),
            r.algorithm_id.to_string(),
            r.policy_kind.to_string(),
            r.expected_rate.map(sig6).unwrap_or_default(),
            r.active_set.clone(),
            r.multiplier.map(sig6).unwrap_or_default(),
            r.iterations.to_string(),
            sig6(r.wall_ms),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// File name of the policy dump for row `index`.
pub fn dump_name(index: usize, record: &PolicyRecord) -> String {
    format!(
        "{index:04}_{}_pbar{}.json",
        record.algorithm,
        sig6(record.pbar)
    )
}

/// Writes one JSON file per successful cell into `dir`.
pub fn dump_policies(cells: &[Cell], dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (i, cell) in cells.iter().enumerate() {
        if let Some(record) = &cell.policy {
            let json = serde_json::to_string_pretty(record).map_err(std::io::Error::other)?;
            std::fs::write(dir.join(dump_name(i, record)), json)?;
        }
    }
    Ok(())
}
