//! JSON config schemas for the subcommands, plus manifest handling.
//!
//! Every command writes a `manifest.json` echoing its resolved config;
//! feeding a manifest back as `--config` re-runs the same experiment (the
//! loader unwraps the embedded `config` object).

use anyhow::{bail, Context};
use horizonlab_core::arloss::NormMode;
use horizonlab_core::dynamics::{Method, SystemSpec};
use horizonlab_core::net::MlpConfig;
use horizonlab_core::optimize::{Budget, OptimizerKind, SweepGrid};
use horizonlab_core::scheduler::SchedulerConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const TOOL_NAME: &str = "horizonlab";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where a trajectory comes from: a built-in system or an external CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Built-in system name; omit when `csv` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    /// Override the system's free parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<f64>>,
    /// Hopf-normal-form variant of the limit cycle's second equation.
    #[serde(default)]
    pub hopf_normal_form: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_true")]
    pub normalize: bool,
    /// Path to an external trajectory CSV (header `t,x0..x{D-1}`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

fn default_true() -> bool {
    true
}

impl DataSection {
    pub fn load(&self) -> anyhow::Result<(horizonlab_core::dynamics::Trajectory, Option<SystemSpec>)> {
        if let Some(path) = &self.csv {
            let mut traj = horizonlab_core::dynamics::Trajectory::read_csv(path)
                .with_context(|| format!("reading {}", path.display()))?;
            if self.noise_sigma > 0.0 {
                traj = horizonlab_core::dynamics::add_observation_noise(
                    &traj,
                    self.noise_sigma,
                    self.seed,
                );
            }
            if self.normalize {
                traj = horizonlab_core::dynamics::normalize(&traj)?;
            }
            return Ok((traj, None));
        }
        let Some(name) = &self.system else {
            bail!("data section needs either `system` or `csv`");
        };
        let mut spec = SystemSpec::by_name(name)?;
        if let Some(params) = &self.params {
            spec = spec.with_params(params.clone())?;
        }
        spec = spec.with_hopf_normal_form(self.hopf_normal_form);
        let samples = self
            .samples
            .ok_or_else(|| anyhow::anyhow!("data section needs `samples` for system data"))?;
        let mut dcfg = horizonlab_core::dataset::DatasetConfig::new(samples, self.seed)
            .with_noise(self.noise_sigma);
        if let Some(dt) = self.dt {
            dcfg = dcfg.with_dt(dt);
        }
        if !self.normalize {
            dcfg = dcfg.raw();
        }
        let traj = horizonlab_core::dataset::build_dataset(&spec, &dcfg)?;
        Ok((traj, Some(spec)))
    }
}

/// Train-section schema; mirrors the core TrainConfig with serde defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerKind,
    pub eta: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub budget: Budget,
    #[serde(default = "default_gamma")]
    pub grad_stop: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    #[serde(default = "default_norm_mode")]
    pub norm_mode: NormMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_clip: Option<f64>,
}

fn default_optimizer() -> OptimizerKind {
    OptimizerKind::adam()
}
fn default_batch() -> usize {
    512
}
fn default_gamma() -> f64 {
    1.5e-4
}
fn default_val_fraction() -> f64 {
    0.2
}
fn default_norm_mode() -> NormMode {
    NormMode::Squared
}

impl TrainSection {
    pub fn to_core(&self) -> horizonlab_core::optimize::TrainConfig {
        horizonlab_core::optimize::TrainConfig {
            optimizer: self.optimizer,
            eta: self.eta,
            batch_size: self.batch_size,
            budget: self.budget,
            grad_stop: self.grad_stop,
            seed: self.seed,
            val_fraction: self.val_fraction,
            norm_mode: self.norm_mode,
            grad_clip: self.grad_clip,
        }
    }
}

/// Model section: a core MlpConfig whose `input_dim` may be 0, meaning
/// "take the data dimension".
pub fn resolve_model(mut model: MlpConfig, data_dim: usize) -> anyhow::Result<MlpConfig> {
    if model.input_dim == 0 {
        model.input_dim = data_dim;
    }
    if model.input_dim != data_dim {
        bail!(
            "model input_dim {} does not match data dimension {}",
            model.input_dim,
            data_dim
        );
    }
    model.validate()?;
    Ok(model)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainCommandConfig {
    pub data: DataSection,
    pub model: MlpConfig,
    pub train: TrainSection,
    pub horizon: usize,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumCommandConfig {
    pub data: DataSection,
    pub model: MlpConfig,
    pub train: TrainSection,
    pub t_max: usize,
    pub total_budget: Budget,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCommandConfig {
    pub data: DataSection,
    pub model: MlpConfig,
    pub train: TrainSection,
    pub grid: SweepGrid,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleCommandConfig {
    pub data: DataSection,
    pub model: MlpConfig,
    pub train: TrainSection,
    pub scheduler: SchedulerConfig,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeParams {
    GradRatio {
        t_list: Vec<usize>,
        #[serde(default = "default_norm_mode")]
        norm_mode: NormMode,
        /// Horizon for the brief pre-training that puts the model in a
        /// sensible region before measuring.
        #[serde(default = "default_one")]
        pretrain_horizon: usize,
    },
    Roughness {
        t_list: Vec<usize>,
        #[serde(default = "default_points")]
        n_points: usize,
        #[serde(default = "default_flat_tol")]
        flat_tol: f64,
        /// Number of minima pairs per horizon (seeds seed, seed+1, ...).
        #[serde(default = "default_one")]
        pairs: usize,
    },
    HessianRatio {
        t_list: Vec<usize>,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    GenRatio {
        t_low: usize,
        t_high_list: Vec<usize>,
        #[serde(default = "default_one")]
        seeds: usize,
        #[serde(default = "default_delta_pair")]
        delta_pair: f64,
    },
    Scan {
        /// 1 or 2 system-parameter indices.
        dims: Vec<usize>,
        ranges: Vec<(f64, f64)>,
        #[serde(default = "default_scan_points")]
        n_per_dim: usize,
        #[serde(default = "default_true")]
        normalize: bool,
        horizon: usize,
        #[serde(default = "default_method")]
        method: Method,
    },
    EpsCheck {
        epsilon: f64,
        #[serde(default = "default_directions")]
        n_directions: usize,
        #[serde(default = "default_states")]
        n_states: usize,
        /// Optional parameter checkpoint (little-endian f64 blob).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        checkpoint: Option<PathBuf>,
    },
}

fn default_one() -> usize {
    1
}
fn default_points() -> usize {
    horizonlab_core::landscape::ROUGHNESS_POINTS_PER_UNIT
}
fn default_flat_tol() -> f64 {
    horizonlab_core::landscape::ROUGHNESS_FLAT_TOL
}
fn default_delta_pair() -> f64 {
    horizonlab_core::landscape::DELTA_PAIR_DEFAULT
}
fn default_scan_points() -> usize {
    101
}
fn default_directions() -> usize {
    8
}
fn default_states() -> usize {
    10
}
fn default_method() -> Method {
    Method::Dopri5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeCommandConfig {
    pub data: DataSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<MlpConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSection>,
    pub probe: ProbeParams,
    pub out_dir: PathBuf,
}

/// Loads a config file, unwrapping a manifest's embedded `config` object
/// when one is supplied instead.
pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let config_value = match value.get("tool") {
        Some(tool) if tool == TOOL_NAME => value
            .get("config")
            .cloned()
            .ok_or_else(|| anyhow::anyhow!("manifest lacks a `config` object"))?,
        _ => value,
    };
    serde_json::from_value(config_value)
        .with_context(|| format!("validating config schema in {}", path.display()))
}

/// Writes the manifest next to a command's outputs.
pub fn write_manifest<C: Serialize>(
    out_dir: &Path,
    command: &str,
    config: &C,
    outputs: &[String],
    status: &str,
    notes: &[String],
) -> anyhow::Result<()> {
    let manifest = serde_json::json!({
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "command": command,
        "config": config,
        "outputs": outputs,
        "status": status,
        "notes": notes,
    });
    horizonlab_core::dynamics::write_atomic(
        &out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    Ok(())
}
