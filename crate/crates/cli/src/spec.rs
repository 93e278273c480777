//! `RunSpec`: the TOML description of one run.

use forced_chain::spectral::{OddProjection, SolverOptions};
use forced_chain::time_domain::IntegratorConfig;
use forced_chain::{ChainConfig, ConfigError, Cx, ForcingSpectrum, Potential, PotentialError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> SpecError {
    SpecError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

/// 1-based line and column of a byte offset.
pub fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.chars().count(), |i| before[i + 1..].chars().count()) + 1;
    (line, column)
}

pub(crate) fn parse_error(text: &str, e: &toml::de::Error) -> SpecError {
    let (line, column) = e.span().map(|s| line_column(text, s.start)).unwrap_or((0, 0));
    SpecError::Parse {
        line,
        column,
        message: e.message().trim().to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    /// `N`; the chain has `2N + 1` sites.
    #[serde(default)]
    pub half_width: usize,
    #[serde(default = "one")]
    pub omega0: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub nu: f64,
    /// Period; give exactly one of `theta` and `omega`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
}

fn one() -> f64 {
    1.0
}

/// Potential families selectable from a config file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Zero,
    Quadratic { stiffness: f64 },
    RationalWell { n: u32, alpha: f64, scale: f64 },
    SinPower { n: u32, scale: f64 },
    SoftPower { alpha: f64, delta: f64, scale: f64 },
    Cosine { scale: f64 },
    SkewSine { scale: f64 },
    Quartic { beta: f64 },
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Potential<f64>, PotentialError> {
        Ok(match *self {
            PotentialSpec::Zero => Potential::zero(),
            PotentialSpec::Quadratic { stiffness } => Potential::quadratic(stiffness),
            PotentialSpec::RationalWell { n, alpha, scale } => Potential::rational_well(n, alpha, scale)?,
            PotentialSpec::SinPower { n, scale } => Potential::sin_power(n, scale)?,
            PotentialSpec::SoftPower { alpha, delta, scale } => Potential::soft_power(alpha, delta, scale)?,
            PotentialSpec::Cosine { scale } => Potential::cosine(scale),
            PotentialSpec::SkewSine { scale } => Potential::skew_sine(scale),
            PotentialSpec::Quartic { beta } => Potential::quartic(beta),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    #[serde(rename = "V", default)]
    pub pinning: PotentialSpec,
    #[serde(rename = "U", default)]
    pub interaction: PotentialSpec,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSection {
    /// `[m, Re F_m, Im F_m]` for `m >= 1`.
    #[serde(default)]
    pub modes: Vec<(i64, f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Series,
    Fixed,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub method: Method,
    pub tol: f64,
    /// Fixed harmonic truncation `M`; adaptive when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub harmonics: Option<usize>,
    /// Fixed collocation grid `T`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    pub max_order: usize,
    pub max_iter: usize,
    pub max_harmonics: usize,
    pub truncation_tol: f64,
    pub odd_projection: OddProjection,
}

impl Default for SolverSection {
    fn default() -> Self {
        let o = SolverOptions::<f64>::default();
        Self {
            method: Method::Series,
            tol: o.tol,
            harmonics: o.harmonics,
            grid: o.grid,
            max_order: o.max_order,
            max_iter: o.max_iter,
            max_harmonics: o.max_harmonics,
            truncation_tol: o.truncation_tol,
            odd_projection: o.odd_projection,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Start {
    /// `q = p = 0` at `t = 0`.
    #[default]
    Rest,
    /// The periodic orbit's own phase point at `t = 0`.
    Solution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub steps_per_period: usize,
    pub periods: usize,
    pub dense_stride: usize,
    pub start: Start,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let c = IntegratorConfig::default();
        Self {
            steps_per_period: c.steps_per_period,
            periods: c.periods,
            dense_stride: c.dense_stride,
            start: Start::Rest,
        }
    }
}

impl IntegratorSection {
    pub fn config(&self) -> IntegratorConfig {
        IntegratorConfig {
            steps_per_period: self.steps_per_period,
            periods: self.periods,
            dense_stride: self.dense_stride,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSection {
    /// Extra half-widths solved for the per-N table.
    pub scan: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepCommand {
    Gap,
    #[default]
    Solve,
    Integrate,
    Diagnose,
}

/// One sweep axis: a dotted path into the spec (e.g. `chain.nu`) and its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub command: SweepCommand,
    #[serde(default)]
    pub axis: Vec<SweepAxis>,
}

/// A complete, reproducible run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    /// Seed for randomized suites.
    #[serde(default)]
    pub seed: u64,
    pub chain: ChainSection,
    #[serde(default)]
    pub potential: PotentialSection,
    pub forcing: ForcingSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

fn config_error(e: ConfigError) -> SpecError {
    match e {
        ConfigError::Invalid { field, reason } => {
            let path = if field == "forcing" {
                "forcing.modes".to_string()
            } else {
                format!("chain.{field}")
            };
            invalid(path, reason)
        }
        other => invalid("chain", other.to_string()),
    }
}

impl RunSpec {
    /// Parses and validates a spec. Every semantic check that building the chain
    /// would perform is run here as well.
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let spec: RunSpec = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        self.chain_config()?;
        if !(self.solver.tol > 0.0 && self.solver.tol.is_finite()) {
            return Err(invalid("solver.tol", "must be positive"));
        }
        if let Some(m) = self.solver.harmonics {
            if m == 0 {
                return Err(invalid("solver.harmonics", "must be at least 1"));
            }
        }
        self.integrator
            .config()
            .validate()
            .map_err(|e| invalid("integrator.steps_per_period", e.to_string()))?;
        if let Some(s) = &self.sweep {
            for a in &s.axis {
                if a.values.is_empty() {
                    return Err(invalid(format!("sweep.axis[{}].values", a.path), "must not be empty"));
                }
            }
        }
        Ok(())
    }

    pub fn chain_config(&self) -> Result<ChainConfig<f64>, SpecError> {
        let c = &self.chain;
        let builder = ChainConfig::builder()
            .half_width(c.half_width)
            .pinning_frequency(c.omega0)
            .damping(c.gamma)
            .coupling(c.nu);
        let builder = match (c.theta, c.omega) {
            (Some(t), None) => builder.period(t),
            (None, Some(w)) => {
                if !(w > 0.0 && w.is_finite()) {
                    return Err(invalid("chain.omega", "must be positive and finite"));
                }
                builder.frequency(w)
            }
            (None, None) => return Err(invalid("chain.theta", "give the period `theta` or the frequency `omega`")),
            (Some(_), Some(_)) => return Err(invalid("chain.theta", "give only one of `theta` and `omega`")),
        };
        let pinning = self
            .potential
            .pinning
            .build()
            .map_err(|e| invalid("potential.V", e.to_string()))?;
        let interaction = self
            .potential
            .interaction
            .build()
            .map_err(|e| invalid("potential.U", e.to_string()))?;
        let modes: Vec<(i64, Cx<f64>)> = self
            .forcing
            .modes
            .iter()
            .map(|&(m, re, im)| (m, Cx::new(re, im)))
            .collect();
        let forcing = if modes.iter().all(|(m, c)| *m > 0 && c.norm() == 0.0) && !modes.is_empty() {
            // explicitly zero amplitudes mean an undriven chain
            ForcingSpectrum::from_modes(&modes).or_else(|_| Ok::<_, ConfigError>(ForcingSpectrum::zero()))
        } else if modes.is_empty() {
            return Err(invalid("forcing.modes", "at least one mode is required"));
        } else {
            ForcingSpectrum::from_modes(&modes)
        }
        .map_err(config_error)?;
        builder
            .pinning(pinning)
            .interaction(interaction)
            .forcing(forcing)
            .build()
            .map_err(config_error)
    }

    pub fn solver_options(&self) -> SolverOptions<f64> {
        let s = &self.solver;
        SolverOptions {
            tol: s.tol,
            max_order: s.max_order,
            max_iter: s.max_iter,
            harmonics: s.harmonics,
            grid: s.grid,
            max_harmonics: s.max_harmonics,
            truncation_tol: s.truncation_tol,
            odd_projection: s.odd_projection,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run spec serializes")
    }
}
