//! Experiment configs. Every subcommand reads one JSON object; `--seed`
//! replaces the `seed` field after parsing.

use std::path::Path;

use openrates::evl::Transform;
use openrates::maps::{IntervalMap, MapSpec};
use openrates::rare_events::MethodChoice;
use openrates::real::{Rational, Real};
use openrates::sft::{Sft, SftSpec, Word, WordSpec};
use openrates::system::{GridChoice, SolverOptions};
use openrates::transfer::{DEFAULT_MARKOV_CAP, DEFAULT_MAX_ITER, DEFAULT_TOL};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Reads and parses a config file; parse errors carry line and column.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(m) => config_err(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| config_err(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridConfig {
    Markov {
        #[serde(default = "default_cap")]
        cap: usize,
    },
    Uniform {
        bins: usize,
    },
    Auto {
        #[serde(default = "default_cap")]
        cap: usize,
        #[serde(default = "default_bins")]
        bins: usize,
    },
}

fn default_cap() -> usize {
    DEFAULT_MARKOV_CAP
}

fn default_bins() -> usize {
    4096
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig::Auto {
            cap: default_cap(),
            bins: default_bins(),
        }
    }
}

impl GridConfig {
    pub fn choice(&self) -> GridChoice {
        match *self {
            GridConfig::Markov { cap } => GridChoice::Markov { cap },
            GridConfig::Uniform { bins } => GridChoice::Uniform { bins },
            GridConfig::Auto { cap, bins } => GridChoice::Auto { cap, bins },
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            GridConfig::Markov { cap } => cap >= 2,
            GridConfig::Uniform { bins } => bins >= 1,
            GridConfig::Auto { cap, bins } => cap >= 2 && bins >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(config_err("grid sizes must be positive"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MethodConfig {
    #[default]
    Auto,
    Exact,
    Matrix,
}

impl MethodConfig {
    pub fn choice(self) -> MethodChoice {
        match self {
            MethodConfig::Auto => MethodChoice::Auto,
            MethodConfig::Exact => MethodChoice::Exact,
            MethodConfig::Matrix => MethodChoice::Matrix,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) || self.max_iter == 0 {
            return Err(config_err("solver tol and max_iter must be positive"));
        }
        Ok(())
    }
}

fn build_map(spec: &MapSpec) -> Result<IntervalMap> {
    spec.build().map_err(|e| config_err(format!("map: {e}")))
}

fn rationals(v: &[Real]) -> Vec<Rational> {
    v.iter().map(|r| r.0.clone()).collect()
}

fn check_centers(centers: &[Real]) -> Result<()> {
    if centers.is_empty() {
        return Err(config_err("`centers` must not be empty"));
    }
    if centers.iter().any(|c| c.to_f64() < 0.0 || c.to_f64() > 1.0) {
        return Err(config_err("hole centers must lie in [0, 1]"));
    }
    Ok(())
}

fn check_epsilons(eps: &[Real]) -> Result<()> {
    if eps.is_empty() {
        return Err(config_err("`epsilons` must not be empty"));
    }
    if eps.iter().any(|e| e.to_f64() <= 0.0) {
        return Err(config_err("`epsilons` must be positive"));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(config_err("`epsilons` must be strictly decreasing"));
    }
    Ok(())
}

fn default_n() -> usize {
    40
}

fn default_k_max() -> usize {
    64
}

/// `escape-rate` and `extremal-index`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub map: MapSpec,
    pub centers: Vec<Real>,
    pub epsilons: Vec<Real>,
    /// Truncation `N` of the q_k series.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub method: MethodConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Search depth for periodic returns of the centers.
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Also write the q_k series of every ε.
    #[serde(default)]
    pub write_q: bool,
}

pub struct SweepSetup {
    pub map: IntervalMap,
    pub centers: Vec<Rational>,
    pub epsilons: Vec<Rational>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<SweepSetup> {
        check_centers(&self.centers)?;
        check_epsilons(&self.epsilons)?;
        if self.n == 0 {
            return Err(config_err("`n` must be positive"));
        }
        self.grid.validate()?;
        self.solver.validate()?;
        Ok(SweepSetup {
            map: build_map(&self.map)?,
            centers: rationals(&self.centers),
            epsilons: rationals(&self.epsilons),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MeasureConfig {
    #[default]
    Nu0,
    Mu0,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub samples: u64,
    #[serde(default)]
    pub measure: MeasureConfig,
}

fn default_n_max() -> usize {
    200
}

fn default_true() -> bool {
    true
}

fn default_interval_cap() -> usize {
    openrates::hitting::DEFAULT_INTERVAL_CAP
}

pub fn default_t_grid() -> Vec<f64> {
    (1..=50).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HittingConfig {
    pub map: MapSpec,
    pub centers: Vec<Real>,
    pub epsilons: Vec<Real>,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Exact interval survival curves where the map allows them.
    #[serde(default = "default_true")]
    pub exact: bool,
    #[serde(default = "default_interval_cap")]
    pub interval_cap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
}

impl HittingConfig {
    pub fn validate(&self) -> Result<SweepSetup> {
        check_centers(&self.centers)?;
        check_epsilons(&self.epsilons)?;
        if self.n_max == 0 || self.interval_cap == 0 {
            return Err(config_err("`n_max` and `interval_cap` must be positive"));
        }
        if let Some(mc) = &self.monte_carlo {
            if mc.samples == 0 {
                return Err(config_err("`monte_carlo.samples` must be positive"));
            }
            if self.seed.is_none() {
                return Err(config_err("Monte Carlo is enabled but no seed was given (set `seed` or pass --seed)"));
            }
        }
        if self.t_grid.is_empty() || self.t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(config_err("`t_grid` must hold positive finite values"));
        }
        self.grid.validate()?;
        self.solver.validate()?;
        Ok(SweepSetup {
            map: build_map(&self.map)?,
            centers: rationals(&self.centers),
            epsilons: rationals(&self.epsilons),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvlConfig {
    pub map: MapSpec,
    pub center: Real,
    #[serde(default)]
    pub transform: Transform,
    pub t: f64,
    pub n: Vec<usize>,
    pub samples: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Law of the initial point.
    #[serde(default)]
    pub init: MeasureConfig,
    /// Extremal index for the prediction; derived from the orbit of the
    /// center when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl EvlConfig {
    pub fn validate(&self) -> Result<IntervalMap> {
        if self.seed.is_none() {
            return Err(config_err("`evl` samples orbits and needs a seed (set `seed` or pass --seed)"));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(config_err("`t` must be positive"));
        }
        if self.n.is_empty() || self.n[0] == 0 || self.n.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_err("`n` must be positive and strictly increasing"));
        }
        if self.n.len() > 64 {
            return Err(config_err("at most 64 values of `n`"));
        }
        if self.samples == 0 {
            return Err(config_err("`samples` must be positive"));
        }
        let c = self.center.to_f64();
        if !(0.0..=1.0).contains(&c) {
            return Err(config_err("`center` must lie in [0, 1]"));
        }
        if let Some(th) = self.theta {
            if !(0.0..=1.0).contains(&th) {
                return Err(config_err("`theta` must lie in [0, 1]"));
            }
        }
        self.grid.validate()?;
        self.solver.validate()?;
        build_map(&self.map)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockFamily {
    pub symbol: u32,
    pub min_length: usize,
    pub max_length: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SftConfig {
    pub sft: SftSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocks: Vec<WordSpec>,
    /// Blocks `s^L` for `L` in `min_length..=max_length`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_family: Option<BlockFamily>,
}

impl SftConfig {
    pub fn validate(&self) -> Result<(Sft, Vec<Word>)> {
        let sft = self.sft.build().map_err(|e| config_err(format!("sft: {e}")))?;
        let mut words = self
            .blocks
            .iter()
            .map(|w| w.to_word(sft.alphabet()))
            .collect::<openrates::Result<Vec<_>>>()
            .map_err(|e| config_err(format!("blocks: {e}")))?;
        if let Some(f) = &self.block_family {
            if f.min_length == 0 || f.max_length < f.min_length || f.max_length > 24 {
                return Err(config_err("block_family lengths must satisfy 1 <= min_length <= max_length <= 24"));
            }
            if f.symbol as usize >= sft.alphabet() {
                return Err(config_err("block_family symbol outside the alphabet"));
            }
            words.extend((f.min_length..=f.max_length).map(|l| vec![f.symbol as u8; l]));
        }
        if words.is_empty() {
            return Err(config_err("give `blocks` or `block_family`"));
        }
        Ok((sft, words))
    }
}
