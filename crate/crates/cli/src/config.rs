//! Run configuration: built-in defaults, then a TOML file, then flags.

use std::path::{Path, PathBuf};

use attn_core::evolution::{EvolutionConfig, ShapingConfig};
use attn_core::genome::{Architecture, ParameterRanges};
use attn_core::{TrialConfig, WorldConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ATTN_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionSection {
    pub population_size: usize,
    pub elite_count: usize,
    pub mutation_variance: f64,
    pub generations: usize,
    pub trials_per_eval: usize,
    pub interneurons: usize,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        let d = EvolutionConfig::default();
        Self {
            population_size: d.population_size,
            elite_count: d.elite_count,
            mutation_variance: d.mutation_variance,
            generations: d.generations,
            trials_per_eval: d.trials_per_eval,
            interneurons: d.architecture.n_interneurons,
        }
    }
}

/// Everything a command needs, fully resolved and embedded in its outputs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub world: WorldConfig,
    pub trials: TrialConfig,
    pub ranges: ParameterRanges,
    pub evolution: EvolutionSection,
    pub shaping: ShapingConfig,
}

impl RunConfig {
    /// Defaults overlaid with `path` when given.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn architecture(&self) -> Result<Architecture, CliError> {
        Architecture::new(self.evolution.interneurons).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn evolution_config(&self) -> Result<EvolutionConfig, CliError> {
        let e = &self.evolution;
        let cfg = EvolutionConfig {
            population_size: e.population_size,
            elite_count: e.elite_count,
            mutation_variance: e.mutation_variance,
            generations: e.generations,
            trials_per_eval: e.trials_per_eval,
            seed: self.seed,
            architecture: self.architecture()?,
            shaping: self.shaping.clone(),
            ranges: self.ranges.clone(),
            world: self.world.clone(),
            trials: self.trials.clone(),
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: String| CliError::Config(e);
        self.world.validate().map_err(|e| cfg(e.to_string()))?;
        self.trials.validate().map_err(|e| cfg(e.to_string()))?;
        self.ranges.validate().map_err(|e| cfg(e.to_string()))?;
        self.architecture()?;
        Ok(())
    }

    /// Flag, then config file, then `ATTN_OUT_DIR`, then the working
    /// directory.
    pub fn resolve_out_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.out_dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}
