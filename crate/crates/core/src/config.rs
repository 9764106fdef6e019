//! TOML experiment configuration.
//!
//! One file drives every subcommand. Every key is optional; missing keys take
//! the defaults below and unknown keys are rejected.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::channel::{ArrayGeometry, CellConfig};
use crate::null_steering::{Solver, SolverOptions, DEFAULT_CONDITION_CEILING};
use crate::p2p::RxLayout;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// 64 x 64 array.
    #[default]
    Paper,
    /// 16 x 16 array.
    Desk,
}

impl Profile {
    pub fn array(self) -> ArrayGeometry {
        match self {
            Profile::Paper => ArrayGeometry::paper(),
            Profile::Desk => ArrayGeometry::desk(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Paper => "paper",
            Profile::Desk => "desk",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Profile::Paper),
            "desk" => Ok(Profile::Desk),
            other => Err(Error::Config(format!("unknown profile '{other}' (expected paper or desk)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NullSteeringConfig {
    pub condition_ceiling: f64,
    pub refine: bool,
}

impl Default for NullSteeringConfig {
    fn default() -> Self {
        Self { condition_ceiling: DEFAULT_CONDITION_CEILING, refine: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    /// Feasibility budget at the access point.
    pub p_max_dbm: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self { p_max_dbm: 43.0 }
    }
}

const DEFAULT_N_VALUES: [usize; 8] = [10, 25, 50, 100, 150, 200, 250, 300];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig3Config {
    pub n_values: Vec<usize>,
    pub trials: u64,
}

impl Default for Fig3Config {
    fn default() -> Self {
        Self { n_values: DEFAULT_N_VALUES.to_vec(), trials: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropLayout {
    #[default]
    Clustered,
    Uniform,
}

impl DropLayout {
    pub fn as_str(self) -> &'static str {
        match self {
            DropLayout::Clustered => "clustered",
            DropLayout::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig4Config {
    pub n_values: Vec<usize>,
    pub trials: u64,
    pub layout: DropLayout,
    /// Number of terminal groups in a clustered drop.
    pub cluster_count: usize,
    pub cluster_radius_m: f64,
    /// Drops above this κ₂(AᴴA) become flagged rows. Far above the solver
    /// default so the explicit-inverse breakdown stays visible.
    pub condition_ceiling: f64,
}

impl Default for Fig4Config {
    fn default() -> Self {
        Self {
            n_values: DEFAULT_N_VALUES.to_vec(),
            trials: 50,
            layout: DropLayout::Clustered,
            cluster_count: 10,
            cluster_radius_m: 2.0,
            condition_ceiling: 1e30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig5Config {
    pub n_bits_values: Vec<usize>,
    pub bits_per_point: u64,
    pub es_j: f64,
    pub es_n0: f64,
    pub rx_layout: RxLayout,
    pub rx_range_m: f64,
    pub rx_spacing_wavelengths: f64,
}

impl Default for Fig5Config {
    fn default() -> Self {
        Self {
            n_bits_values: vec![1, 2, 4, 8, 16, 32],
            bits_per_point: 1_000_000,
            es_j: 1.0,
            es_n0: 10.0,
            rx_layout: RxLayout::Grid,
            rx_range_m: 0.5,
            rx_spacing_wavelengths: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckWeightsConfig {
    pub n_terminals: usize,
    pub trials: u64,
}

impl Default for CheckWeightsConfig {
    fn default() -> Self {
        Self { n_terminals: 50, trials: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub profile: Profile,
    pub solver: Solver,
    pub cell: CellConfig,
    /// Overrides the profile's array when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub array: Option<ArrayGeometry>,
    pub null_steering: NullSteeringConfig,
    pub power: PowerConfig,
    pub fig3: Fig3Config,
    pub fig4: Fig4Config,
    pub fig5: Fig5Config,
    pub check_weights: CheckWeightsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            profile: Profile::Paper,
            solver: Solver::OrthogonalFactorization,
            cell: CellConfig::default(),
            array: None,
            null_steering: NullSteeringConfig::default(),
            power: PowerConfig::default(),
            fig3: Fig3Config::default(),
            fig4: Fig4Config::default(),
            fig5: Fig5Config::default(),
            check_weights: CheckWeightsConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        text.parse()
    }

    pub fn array(&self) -> ArrayGeometry {
        self.array.unwrap_or_else(|| self.profile.array())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            solver: self.solver,
            condition_ceiling: self.null_steering.condition_ceiling,
            refine: self.null_steering.refine,
        }
    }

    /// The config with the array made explicit, as recorded in manifests.
    pub fn resolved(&self) -> Self {
        Self { array: Some(self.array()), ..self.clone() }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.cell.validate()?;
        self.array().validate()?;
        let ceiling = |key: &str, v: f64| {
            if v > 1.0 {
                Ok(())
            } else {
                Err(range(key, format!("must be > 1, got {v}")))
            }
        };
        ceiling("null_steering.condition_ceiling", self.null_steering.condition_ceiling)?;
        ceiling("fig4.condition_ceiling", self.fig4.condition_ceiling)?;
        if !self.power.p_max_dbm.is_finite() {
            return Err(range("power.p_max_dbm", "must be finite".into()));
        }
        sweep("fig3.n_values", &self.fig3.n_values)?;
        at_least_one("fig3.trials", self.fig3.trials)?;
        sweep("fig4.n_values", &self.fig4.n_values)?;
        at_least_one("fig4.trials", self.fig4.trials)?;
        if self.fig4.cluster_count == 0 {
            return Err(range("fig4.cluster_count", "must be >= 1".into()));
        }
        positive("fig4.cluster_radius_m", self.fig4.cluster_radius_m)?;
        sweep("fig5.n_bits_values", &self.fig5.n_bits_values)?;
        at_least_one("fig5.bits_per_point", self.fig5.bits_per_point)?;
        positive("fig5.es_j", self.fig5.es_j)?;
        positive("fig5.es_n0", self.fig5.es_n0)?;
        positive("fig5.rx_range_m", self.fig5.rx_range_m)?;
        positive("fig5.rx_spacing_wavelengths", self.fig5.rx_spacing_wavelengths)?;
        if self.check_weights.n_terminals == 0 {
            return Err(range("check_weights.n_terminals", "must be >= 1".into()));
        }
        at_least_one("check_weights.trials", self.check_weights.trials)?;
        Ok(())
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    /// Parses and validates. Syntax and type errors carry the line number and
    /// the offending key.
    fn from_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
        config.validate()?;
        Ok(config)
    }
}

fn range(key: &str, message: String) -> Error {
    Error::Config(format!("{key} {message}"))
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(range(key, format!("must be > 0, got {v}")))
    }
}

fn at_least_one(key: &str, v: u64) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(range(key, "must be >= 1".into()))
    }
}

fn sweep(key: &str, values: &[usize]) -> Result<()> {
    if values.is_empty() || values.contains(&0) {
        return Err(range(key, "must be a non-empty list of values >= 1".into()));
    }
    Ok(())
}

fn parse_error(text: &str, e: &toml::de::Error) -> Error {
    let message = e.message().trim();
    let Some(span) = e.span() else {
        return Error::Config(message.to_string());
    };
    let line_index = text[..span.start.min(text.len())].matches('\n').count();
    let key = text
        .lines()
        .nth(line_index)
        .and_then(|l| l.split_once('='))
        .map(|(k, _)| k.trim())
        .filter(|k| !k.is_empty() && !k.starts_with('['))
        .map(|k| {
            let section = text
                .lines()
                .take(line_index)
                .filter_map(|l| l.trim().strip_prefix('[')?.strip_suffix(']'))
                .last();
            match section {
                Some(s) => format!("{}.{k}", s.trim()),
                None => k.to_string(),
            }
        });
    match key {
        Some(key) => Error::Config(format!("line {}: key `{key}`: {message}", line_index + 1)),
        None => Error::Config(format!("line {}: {message}", line_index + 1)),
    }
}
