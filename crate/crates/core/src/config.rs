//! The JSON configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config_err, Result};
use crate::eval::SurfaceConfig;
use crate::net::TrainConfig;
use crate::synth::{EncodeConfig, NoiseMode, PhantomConfig, PlaneWaveScene, SamplingConfig, SolverConfig};
use crate::unwrap::UnwrapConfig;

pub const EXPERIMENT_NAMES: [&str; 4] = [
    "unwrap-noise-sweep",
    "fig4-surface",
    "phantom-table2",
    "plane-wave-smoke",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// One of [`EXPERIMENT_NAMES`].
    pub name: Option<String>,
    /// Image-noise levels of the unwrap sweep.
    pub sweep_sigmas: Vec<f64>,
    /// Wavefield SNR of the phantom study.
    pub phantom_snr_db: f64,
    /// Trained models are cached here by digest when set.
    pub model_dir: Option<PathBuf>,
    /// Pixel step between patch samples in network inversion; the model is
    /// trained at this multiple of the grid spacing.
    pub patch_dilation: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: None,
            sweep_sigmas: vec![0.0, 0.1, 0.2, 0.3, 0.4],
            phantom_snr_db: 28.0,
            model_dir: None,
            patch_dilation: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Root of every random stream; nested seed fields must be left unset
    /// or agree with it.
    pub seed: u64,
    /// Tissue density ρ in kg/m³.
    pub density: f64,
    pub frequencies_hz: Vec<f64>,
    pub direction_labels: Vec<String>,
    pub phantom: PhantomConfig,
    pub solver: SolverConfig,
    pub wave: PlaneWaveScene,
    pub wave_noise: Option<NoiseMode>,
    pub encode: EncodeConfig,
    /// Complex noise intensity added to each wrapped MR image.
    pub image_noise_sigma: f64,
    pub unwrap: UnwrapConfig,
    pub train: TrainConfig,
    pub sampling: SamplingConfig,
    pub surface: SurfaceConfig,
    pub experiment: ExperimentConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            density: 1000.0,
            frequencies_hz: vec![60.0, 80.0, 100.0],
            direction_labels: vec!["x".into()],
            phantom: PhantomConfig::default(),
            solver: SolverConfig::default(),
            wave: PlaneWaveScene::default(),
            wave_noise: None,
            encode: EncodeConfig::default(),
            image_noise_sigma: 0.0,
            unwrap: UnwrapConfig::default(),
            train: TrainConfig::default(),
            sampling: SamplingConfig::default(),
            surface: SurfaceConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(text).map_err(|e| config_err(format!("invalid config: {e}")))?;
        cfg.resolve_seeds()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn resolve_seeds(&mut self) -> Result<()> {
        for (name, nested) in [("train.seed", self.train.seed), ("surface.seed", self.surface.seed)] {
            if nested != 0 && nested != self.seed {
                return Err(config_err(format!(
                    "{name} = {nested} conflicts with seed = {}; set the top-level seed only",
                    self.seed
                )));
            }
        }
        self.train.seed = self.seed;
        self.surface.seed = self.seed;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0) {
            return Err(config_err("density must be positive"));
        }
        if self.frequencies_hz.is_empty() || self.frequencies_hz.iter().any(|f| !(*f > 0.0)) {
            return Err(config_err("frequencies_hz must be a non-empty list of positive values"));
        }
        if !(self.image_noise_sigma >= 0.0) {
            return Err(config_err("image_noise_sigma must be >= 0"));
        }
        if self.experiment.sweep_sigmas.iter().any(|s| !(*s >= 0.0)) {
            return Err(config_err("sweep_sigmas must be >= 0"));
        }
        if self.experiment.patch_dilation == 0 {
            return Err(config_err("patch_dilation must be at least 1"));
        }
        if let Some(name) = &self.experiment.name {
            if !EXPERIMENT_NAMES.contains(&name.as_str()) {
                return Err(config_err(format!(
                    "unknown experiment '{name}'; valid names: {}",
                    EXPERIMENT_NAMES.join(", ")
                )));
            }
        }
        self.unwrap.validate()?;
        self.train.validate()?;
        self.sampling.validate()?;
        self.surface.validate()?;
        self.phantom.scene()?;
        self.wave.geom()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }
}
