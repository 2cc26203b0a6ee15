//! Experiment configuration: TOML files, validation and bundled presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{ControlConfig, NoiseLaw};
use crate::error::{Error, Result};
use crate::model::Assumption2Constants;
use crate::models::{catalog_pair, CatalogEntry, PairOptions};
use crate::types::HyperParams;

/// Closed-loop preset: tanh ARX plant tracking a constant reference.
pub const PAPER_SIM_PRESET: &str = include_str!("../../presets/paper_sim.cfg");
/// Streaming replay preset for positive-target datasets.
pub const PAPER_REPLAY_PRESET: &str = include_str!("../../presets/paper_replay.cfg");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Open-loop estimation on regressors drawn from the pair's operating set.
    Identify,
    /// Certainty-equivalence control of a simulated plant.
    Control,
    /// One pass over a CSV dataset.
    Replay,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Identify => "identify",
            Mode::Control => "control",
            Mode::Replay => "replay",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub name: String,
    #[serde(default)]
    pub options: PairOptions,
}

/// Data-generating system for identify and control runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub theta_star: Vec<f64>,
    /// Additive noise. Censored and label pairs use their own observation model.
    #[serde(default = "no_noise")]
    pub noise: NoiseLaw,
}

fn no_noise() -> NoiseLaw {
    NoiseLaw::None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayConfig {
    /// CSV path; relative paths resolve against the config file.
    #[serde(default)]
    pub data: Option<PathBuf>,
    pub features: Vec<String>,
    pub target: String,
    /// Prepend a constant 1 to every regressor.
    #[serde(default)]
    pub intercept: bool,
    /// Reject malformed rows instead of skipping them.
    #[serde(default = "yes")]
    pub strict: bool,
}

fn yes() -> bool {
    true
}

/// Pass/fail checks evaluated on the finished runs. Unset checks are skipped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    /// Step at which average regret is compared with its final value.
    pub regret_checkpoint: Option<u64>,
    /// Required `final / checkpoint` average-regret ratio upper bound.
    pub regret_ratio: Option<f64>,
    /// Closed interval for the final average of `(y - y*)^2`.
    pub tracking_band: Option<[f64; 2]>,
    /// Seeds on which the modified rule must beat the classical one.
    pub min_wins: Option<usize>,
    /// Last-decile range of `||theta - theta*||` must stay below
    /// `settle_factor * (1 + final)`.
    pub settle_factor: Option<f64>,
    /// `mu_k ||grad f||^2 <= mu` on every step.
    pub step_size_law: bool,
    /// Replay: relative error must drop between `regret_checkpoint` and the end.
    pub relative_error_decreases: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Steps per run. Replay runs stop at the end of the data when unset.
    #[serde(default)]
    pub n_steps: Option<u64>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub pair: PairConfig,
    pub hyper: HyperParams,
    /// Weak-convexity constants; the catalog values are used when absent.
    #[serde(default)]
    pub constants: Option<Assumption2Constants>,
    /// Initial estimate; zeros when absent.
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
    /// Also run the classical `mu / r_k` rule on every seed.
    #[serde(default)]
    pub compare_classical: bool,
    #[serde(default = "one")]
    pub classical_r0: f64,
    #[serde(default)]
    pub plant: Option<PlantConfig>,
    #[serde(default)]
    pub control: Option<ControlConfig>,
    #[serde(default)]
    pub replay: Option<ReplayConfig>,
    #[serde(default)]
    pub checks: Checks,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn one() -> f64 {
    1.0
}

fn prefixed(section: &str, e: Error) -> Error {
    match e {
        Error::Config { field, message } => Error::config(format!("{section}.{field}"), message),
        other => other,
    }
}

impl ExperimentConfig {
    /// Catalog entry for the configured pair, with declared constants applied.
    pub fn catalog_entry(&self) -> Result<CatalogEntry> {
        let mut entry =
            catalog_pair(&self.pair.name, &self.pair.options).map_err(|e| prefixed("pair", e))?;
        if let Some(c) = self.constants {
            entry.constants = c;
            entry.pair.constants = Some(c);
        }
        Ok(entry)
    }

    pub fn theta0(&self, dim: usize) -> Vec<f64> {
        self.theta0.clone().unwrap_or_else(|| vec![0.0; dim])
    }

    pub fn control_config(&self) -> ControlConfig {
        self.control.clone().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        let entry = self.catalog_entry()?;
        let constants = match self.constants {
            Some(c) => c,
            None => {
                log::info!(
                    "no constants declared; using catalog values for `{}`: {:?}",
                    self.pair.name,
                    entry.constants
                );
                entry.constants
            }
        };
        // the cap is reported before the generic range check on mu
        self.hyper
            .check_step_cap(constants.delta, constants.c1)
            .map_err(|e| prefixed("hyper", e))?;
        self.hyper.validate().map_err(|e| prefixed("hyper", e))?;

        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if self.n_steps == Some(0) {
            return Err(Error::config("n_steps", "must be >= 1"));
        }
        if self.mode != Mode::Replay && self.n_steps.is_none() {
            return Err(Error::config(
                "n_steps",
                format!("required in {} mode", self.mode.as_str()),
            ));
        }
        if !(self.classical_r0 > 0.0 && self.classical_r0.is_finite()) {
            return Err(Error::config("classical_r0", "must be positive"));
        }
        let dim = entry.pair.dim();
        if let Some(t) = &self.theta0 {
            if t.len() != dim {
                return Err(Error::config(
                    "theta0",
                    format!(
                        "has {} entries, pair `{}` needs {dim}",
                        t.len(),
                        self.pair.name
                    ),
                ));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::config("theta0", "entries must be finite"));
            }
        }

        match self.mode {
            Mode::Identify | Mode::Control => {
                let plant = self.plant.as_ref().ok_or_else(|| {
                    Error::config("plant", format!("required in {} mode", self.mode.as_str()))
                })?;
                if plant.theta_star.len() != dim {
                    return Err(Error::config(
                        "plant.theta_star",
                        format!(
                            "has {} entries, pair `{}` needs {dim}",
                            plant.theta_star.len(),
                            self.pair.name
                        ),
                    ));
                }
                plant.noise.validate().map_err(|e| prefixed("plant", e))?;
            }
            Mode::Replay => {
                let replay = self
                    .replay
                    .as_ref()
                    .ok_or_else(|| Error::config("replay", "required in replay mode"))?;
                let d = replay.features.len() + usize::from(replay.intercept);
                if d != dim {
                    return Err(Error::config(
                        "replay.features",
                        format!(
                            "give {d} regressor entries, pair `{}` needs {dim}",
                            self.pair.name
                        ),
                    ));
                }
            }
        }
        if self.mode == Mode::Control {
            if self.pair.name != "tanh-arx" {
                return Err(Error::config(
                    "pair.name",
                    "control mode needs the `tanh-arx` pair",
                ));
            }
            self.control_config()
                .validate()
                .map_err(|e| prefixed("control", e))?;
        }
        if let Some(r) = self.checks.regret_ratio {
            if self.checks.regret_checkpoint.is_none() {
                return Err(Error::config(
                    "checks.regret_checkpoint",
                    format!("required by regret_ratio = {r}"),
                ));
            }
        }
        if self.checks.relative_error_decreases && self.checks.regret_checkpoint.is_none() {
            return Err(Error::config(
                "checks.regret_checkpoint",
                "required by relative_error_decreases",
            ));
        }
        Ok(())
    }
}

/// Parse and validate a config from text. `origin` names the source in errors
/// and anchors relative data paths.
pub fn parse_config(text: &str, origin: &Path) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
        what: origin.display().to_string(),
        message: e.to_string(),
    })?;
    if let (Some(replay), Some(dir)) = (cfg.replay.as_mut(), origin.parent()) {
        if let Some(data) = replay.data.as_mut() {
            if data.is_relative() && !dir.as_os_str().is_empty() {
                *data = dir.join(&*data);
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

/// Bundled presets by file name.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let text = match name {
        "paper_sim.cfg" => PAPER_SIM_PRESET,
        "paper_replay.cfg" => PAPER_REPLAY_PRESET,
        other => return Err(Error::config("preset", format!("unknown preset `{other}`"))),
    };
    parse_config(text, Path::new(name))
}
