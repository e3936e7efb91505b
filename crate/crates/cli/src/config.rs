use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use dchoice_core::spacetime::Schedule;
use dchoice_core::trials::RunPlan;
use dchoice_core::Scenario;
use serde::{Deserialize, Serialize};

/// Everything a run needs, as read from `--config`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub plan: Option<RunPlan>,
    #[serde(default)]
    pub resamples: Option<usize>,
    #[serde(default)]
    pub schedule: Option<Schedule>,
    #[serde(default)]
    pub outputs: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn from_preset(preset: Preset) -> Self {
        RunConfig {
            scenario: preset.scenario(),
            plan: None,
            resamples: None,
            schedule: None,
            outputs: None,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Preset {
    /// α ∈ {0, π, −π/2, π/2}, β ∈ {π/2, 0}
    WitnessMatrix,
    /// α ∈ {π/4, 3π/4, −π/2}, β ∈ {π/2, 0}
    DimensionWitness,
}

impl Preset {
    fn scenario(self) -> Scenario {
        match self {
            Preset::WitnessMatrix => Scenario::witness_matrix_settings(),
            Preset::DimensionWitness => Scenario::dimension_witness_settings(),
        }
    }
}

pub fn resolve(config: Option<&Path>, preset: Option<Preset>) -> Result<RunConfig> {
    match (config, preset) {
        (Some(path), None) => RunConfig::load(path),
        (None, Some(p)) => Ok(RunConfig::from_preset(p)),
        (Some(_), Some(_)) => anyhow::bail!("give either --config or --preset, not both"),
        (None, None) => {
            anyhow::bail!("a scenario is required: pass --config PATH or --preset NAME")
        }
    }
}

/// `--out`, else the config's `outputs`, else `./out`; created if missing.
pub fn output_dir(flag: Option<&Path>, config: Option<&RunConfig>) -> Result<PathBuf> {
    let dir = flag
        .map(Path::to_path_buf)
        .or_else(|| config.and_then(|c| c.outputs.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    Ok(dir)
}
