//! Experiment configuration files (TOML) and built-in presets.

use std::fmt;
use std::path::{Path, PathBuf};

use cf_power::asymmetric::{self, NlpConfig};
use cf_power::continuous::{ContinuousChannelModel, ShapingConfig, DEFAULT_GRID};
use cf_power::{
    presets, symmetric, BisectionConfig, DiscreteChannelModel, EquationCoefficients, Marginal,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("{field}{}: {message}", line.map_or(String::new(), |l| format!(" (line {l})")))]
    Invalid {
        field: String,
        line: Option<usize>,
        message: String,
    },
    #[error("unknown preset {0:?}; expected one of {PRESET_NAMES:?}")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    A0,
    A1,
    A2,
    A3,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Symmetric,
    Asymmetric,
    Continuous,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Symmetric => "symmetric",
            PolicyKind::Asymmetric => "asymmetric",
            PolicyKind::Continuous => "continuous",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    /// Independent users, one marginal per user.
    Discrete { marginals: Vec<Marginal> },
    /// Built-in half-normal density on [0, 5]².
    Gaussian {
        #[serde(default = "default_grid")]
        grid: usize,
    },
}

fn default_grid() -> usize {
    DEFAULT_GRID
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seeds the asymmetric optimizer; overrides `nlp.seed`.
    #[serde(default)]
    pub seed: u64,
    pub a: Vec<i64>,
    pub pbar_grid: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub policy_kind: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub model: ModelSpec,
    #[serde(default)]
    pub bisection: BisectionConfig,
    #[serde(default)]
    pub nlp: NlpConfig,
    #[serde(default)]
    pub shaping: ShapingConfig,
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        line: None,
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn coefficients(&self) -> Result<EquationCoefficients, ConfigError> {
        EquationCoefficients::new(self.a.clone()).map_err(|e| invalid("a", e.to_string()))
    }

    pub fn discrete_model(&self) -> Result<DiscreteChannelModel, ConfigError> {
        match &self.model {
            ModelSpec::Discrete { marginals } => {
                DiscreteChannelModel::from_marginals(marginals.clone())
                    .map_err(|e| invalid("model.marginals", e.to_string()))
            }
            ModelSpec::Gaussian { .. } => Err(invalid("model", "expected a discrete model")),
        }
    }

    pub fn continuous_model(&self) -> Result<ContinuousChannelModel, ConfigError> {
        match &self.model {
            ModelSpec::Gaussian { grid } => ContinuousChannelModel::gaussian_with_grid(*grid)
                .map_err(|e| invalid("model.grid", e.to_string())),
            ModelSpec::Discrete { .. } => Err(invalid("model", "expected the gaussian model")),
        }
    }

    /// Optimizer settings with the experiment seed applied.
    pub fn nlp_config(&self) -> NlpConfig {
        NlpConfig {
            seed: self.seed,
            ..self.nlp
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.pbar_grid.is_empty() {
            return Err(invalid("pbar_grid", "must not be empty"));
        }
        if let Some(p) = self
            .pbar_grid
            .iter()
            .find(|p| !(p.is_finite() && **p > 0.0))
        {
            return Err(invalid(
                "pbar_grid",
                format!("budgets must be positive, got {p}"),
            ));
        }
        if self.pbar_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("pbar_grid", "must be strictly increasing"));
        }
        if self.algorithms.is_empty() {
            return Err(invalid(
                "algorithms",
                "must list at least one of A0, A1, A2, A3",
            ));
        }
        let mut seen = self.algorithms.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.algorithms.len() {
            return Err(invalid("algorithms", "must not repeat an algorithm"));
        }
        let a = self.coefficients()?;
        self.bisection
            .validate()
            .map_err(|e| invalid("bisection", e.to_string()))?;
        self.nlp
            .validate()
            .map_err(|e| invalid("nlp", e.to_string()))?;
        self.shaping
            .validate()
            .map_err(|e| invalid("shaping", e.to_string()))?;

        let users = match self.policy_kind {
            PolicyKind::Continuous => {
                if self.algorithms.contains(&Algorithm::A3) {
                    return Err(invalid(
                        "algorithms",
                        "A3 has no continuous variant; the shaping algorithm runs as A2",
                    ));
                }
                self.continuous_model()?.users()
            }
            kind => {
                let model = self.discrete_model()?;
                let cap = if kind == PolicyKind::Symmetric {
                    symmetric::EXHAUSTIVE_MAX_STATES
                } else {
                    asymmetric::EXHAUSTIVE_MAX_STATES
                };
                if self.algorithms.contains(&Algorithm::A3) && model.num_states() > cap {
                    return Err(invalid(
                        "algorithms",
                        format!(
                            "{kind} A3 supports at most {cap} states, model has {}",
                            model.num_states()
                        ),
                    ));
                }
                model.users()
            }
        };
        if users != a.users() {
            return Err(invalid(
                "a",
                format!("has {} entries but the model has {users} users", a.users()),
            ));
        }
        Ok(())
    }
}

/// First line of `src` assigning or opening `field`, by full path or last segment.
fn line_of(src: &str, field: &str) -> Option<usize> {
    let last = field.rsplit('.').next().unwrap_or(field);
    let opens = |t: &str, key: &str| {
        t.starts_with(key) && t[key.len()..].trim_start().starts_with(['=', ']', '.'])
    };
    src.lines()
        .position(|l| {
            let t = l.trim_start().trim_start_matches('[').trim_start();
            opens(t, field) || opens(t, last)
        })
        .map(|i| i + 1)
}

pub fn parse_config(src: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str(src)?;
    cfg.validate().map_err(|e| match e {
        ConfigError::Invalid { field, message, .. } => ConfigError::Invalid {
            line: line_of(src, &field),
            field,
            message,
        },
        other => other,
    })?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&src)
}

pub fn to_toml(cfg: &ExperimentConfig) -> Result<String, ConfigError> {
    Ok(toml::to_string(cfg)?)
}

pub fn write_config(cfg: &ExperimentConfig, path: &Path) -> Result<(), ConfigError> {
    std::fs::write(path, to_toml(cfg)?).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub const PRESET_NAMES: [&str; 5] = ["example1", "example2", "example3", "remark", "gaussian"];

/// `lo, lo + 0.1, ..., hi`, rounded to one decimal.
pub fn step_grid(lo: f64, hi: f64) -> Vec<f64> {
    let (a, b) = ((lo * 10.0).round() as i64, (hi * 10.0).round() as i64);
    (a..=b).map(|i| i as f64 / 10.0).collect()
}

fn iid(values: &[f64], probs: &[f64]) -> ModelSpec {
    let m = Marginal::new(values.to_vec(), probs.to_vec());
    ModelSpec::Discrete {
        marginals: vec![m.clone(), m],
    }
}

pub fn preset(name: &str) -> Result<ExperimentConfig, ConfigError> {
    use Algorithm::*;
    let (model, pbar_grid, algorithms, policy_kind) = match name {
        "example1" => (
            ModelSpec::Discrete {
                marginals: presets::example1_marginals(),
            },
            step_grid(0.1, 5.0),
            vec![A0, A1, A2, A3],
            PolicyKind::Symmetric,
        ),
        "example2" => (
            iid(&presets::EXAMPLE2_VALUES, &presets::EXAMPLE2_PROBS),
            step_grid(0.1, 5.0),
            vec![A0, A1, A2, A3],
            PolicyKind::Symmetric,
        ),
        "example3" => (
            iid(&presets::EXAMPLE3_VALUES, &presets::EXAMPLE3_PROBS),
            step_grid(0.1, 13.0),
            vec![A0, A1, A2],
            PolicyKind::Symmetric,
        ),
        "remark" => (
            iid(&[0.5, 1.0], &[0.5, 0.5]),
            vec![2.0],
            vec![A0, A1, A2, A3],
            PolicyKind::Asymmetric,
        ),
        "gaussian" => (
            ModelSpec::Gaussian { grid: DEFAULT_GRID },
            step_grid(0.1, 4.0),
            vec![A0, A1, A2],
            PolicyKind::Continuous,
        ),
        other => return Err(ConfigError::UnknownPreset(other.to_string())),
    };
    Ok(ExperimentConfig {
        seed: 0,
        a: vec![1, 1],
        pbar_grid,
        algorithms,
        policy_kind,
        output: None,
        model,
        bisection: BisectionConfig::default(),
        nlp: NlpConfig::default(),
        shaping: ShapingConfig::default(),
    })
}
