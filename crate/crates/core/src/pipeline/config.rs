use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::{ClassifierKind, ClassifierParams};
use crate::error::{Error, Result};
use crate::fairness::{WeightBy, DEFAULT_PRIVILEGED};
use crate::preprocess::{Horizon, SplitFractions, SynthConfig, DEFAULT_MISSINGNESS_THRESHOLD};
use crate::sdae::{ActivationPreset, Architecture, LossKind, NoiseKind, TrainConfig};
use crate::textmodel::{LdaParams, NoteSynthConfig};

/// Representation-learning preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelPreset {
    /// Plain loss, mask noise.
    Sdae,
    /// Inverse-frequency weighted loss, Gaussian noise.
    Fpm,
    /// Kamiran-Calders weights with the plain SDAE hyperparameters.
    RwSdae,
}

impl ModelPreset {
    pub const ALL: [ModelPreset; 3] = [ModelPreset::Sdae, ModelPreset::Fpm, ModelPreset::RwSdae];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sdae => "sdae",
            Self::Fpm => "fpm",
            Self::RwSdae => "rw-sdae",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Self::Sdae => "SDAE",
            Self::Fpm => "FPM",
            Self::RwSdae => "Reweighting + SDAE",
        }
    }

    pub fn needs_groups(self) -> bool {
        matches!(self, Self::Fpm | Self::RwSdae)
    }

    /// Hyperparameters before overrides.
    pub fn train_defaults(self, seed: u64) -> TrainConfig {
        match self {
            Self::Sdae => TrainConfig::sdae(seed),
            Self::Fpm => TrainConfig::fpm(seed),
            Self::RwSdae => TrainConfig {
                loss_kind: LossKind::Weighted,
                ..TrainConfig::sdae(seed)
            },
        }
    }
}

impl std::fmt::Display for ModelPreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sdae" => Ok(Self::Sdae),
            "fpm" => Ok(Self::Fpm),
            "rw-sdae" => Ok(Self::RwSdae),
            other => Err(Error::InvalidConfig(format!("unknown preset `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Existing feature matrix CSV; generated from `synth` when absent.
    pub matrix: Option<PathBuf>,
    /// Notes JSONL; topic features are added when present.
    pub notes: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            matrix: None,
            notes: None,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub hidden: Vec<usize>,
    pub rep_dim: usize,
    pub activation: ActivationPreset,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64],
            rep_dim: 32,
            activation: ActivationPreset::IdentityOut,
        }
    }
}

impl ArchitectureConfig {
    pub fn for_width(&self, data_width: usize) -> Architecture {
        Architecture::new(data_width, self.hidden.clone(), self.rep_dim, self.activation)
    }
}

/// Per-field overrides of the preset hyperparameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOverrides {
    pub loss_kind: Option<LossKind>,
    pub noise_kind: Option<NoiseKind>,
    pub noise_param: Option<f64>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub latent_penalty: Option<f64>,
}

impl TrainOverrides {
    pub fn apply(&self, mut c: TrainConfig) -> TrainConfig {
        if let Some(v) = self.loss_kind {
            c.loss_kind = v;
        }
        if let Some(v) = self.noise_kind {
            c.noise_kind = v;
        }
        if let Some(v) = self.noise_param {
            c.noise_param = v;
        }
        if let Some(v) = self.learning_rate {
            c.learning_rate = v;
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.latent_penalty {
            c.latent_penalty = v;
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaConfig {
    pub k: usize,
    /// Defaults to 50 / K.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub sweeps: usize,
    /// Gibbs sweeps when folding in a document.
    pub infer_sweeps: usize,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            k: 10,
            alpha: None,
            beta: 0.01,
            sweeps: 200,
            infer_sweeps: 50,
        }
    }
}

impl LdaConfig {
    pub fn params(&self) -> LdaParams {
        LdaParams {
            k: self.k,
            alpha: self.alpha.unwrap_or(50.0 / self.k.max(1) as f64),
            beta: self.beta,
            sweeps: self.sweeps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub presets: Vec<ModelPreset>,
    pub tasks: Vec<Horizon>,
    /// Classifiers compared on the FPM representation.
    pub accuracy_classifiers: Vec<ClassifierKind>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            presets: ModelPreset::ALL.to_vec(),
            tasks: Horizon::ALL.to_vec(),
            accuracy_classifiers: vec![ClassifierKind::Forest, ClassifierKind::Tree, ClassifierKind::Gbm],
        }
    }
}

/// Every setting of a run. Unknown keys are rejected; missing keys take the
/// defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub synth: SynthConfig,
    /// Also generate notes for synthetic patients.
    pub synth_notes: Option<NoteSynthConfig>,
    /// Feature columns with a larger missing fraction are dropped.
    pub missingness_threshold: f64,
    pub preset: ModelPreset,
    pub group_column: String,
    pub privileged: String,
    pub weight_by: WeightBy,
    /// Outcome used for Kamiran-Calders weights.
    pub reweight_label: Horizon,
    /// Train rw-sdae on a weighted bootstrap instead of weighting the loss.
    pub resample: bool,
    pub architecture: ArchitectureConfig,
    pub training: TrainOverrides,
    pub lda: LdaConfig,
    pub classifier: ClassifierKind,
    pub classifier_params: ClassifierParams,
    pub threshold: f64,
    pub task: Horizon,
    pub split: SplitFractions,
    pub stratify: bool,
    pub top_n: usize,
    pub experiment: ExperimentConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            paths: Paths::default(),
            synth: SynthConfig::default(),
            synth_notes: None,
            missingness_threshold: DEFAULT_MISSINGNESS_THRESHOLD,
            preset: ModelPreset::Fpm,
            group_column: "gender".into(),
            privileged: DEFAULT_PRIVILEGED.into(),
            weight_by: WeightBy::Group,
            reweight_label: Horizon::D30,
            resample: false,
            architecture: ArchitectureConfig::default(),
            training: TrainOverrides::default(),
            lda: LdaConfig::default(),
            classifier: ClassifierKind::Gbm,
            classifier_params: ClassifierParams::default(),
            threshold: 0.5,
            task: Horizon::D30,
            split: SplitFractions::default(),
            stratify: true,
            top_n: 10,
            experiment: ExperimentConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        if self.architecture.rep_dim == 0 || self.architecture.hidden.contains(&0) {
            return Err(Error::InvalidWidth("layer widths must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidConfig(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if self.group_column.is_empty() || self.privileged.is_empty() {
            return Err(Error::InvalidConfig("group column and privileged group must be named".into()));
        }
        if self.experiment.presets.is_empty() || self.experiment.tasks.is_empty() {
            return Err(Error::InvalidConfig("experiment needs at least one preset and task".into()));
        }
        if !(0.0..=1.0).contains(&self.missingness_threshold) {
            return Err(Error::InvalidConfig(format!(
                "missingness threshold {} outside [0, 1]",
                self.missingness_threshold
            )));
        }
        if let Some(n) = &self.synth_notes {
            n.validate()?;
        }
        self.classifier_params.validate()?;
        Ok(())
    }

    /// Preset defaults with the configured overrides.
    pub fn train_config(&self, preset: ModelPreset, seed: u64) -> TrainConfig {
        self.training.apply(preset.train_defaults(seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_unknown_keys() {
        let cfg: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"sed": 1}"#).is_err());
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"training": {"lr": 1}}"#).is_err());
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"preset": "rw-sdae", "weight_by": "group×label", "task": "1y"}"#)
                .unwrap_or_else(|e| panic!("{e}"));
        assert_eq!(cfg.preset, ModelPreset::RwSdae);
        assert_eq!(cfg.weight_by, WeightBy::GroupLabel);
    }

    #[test]
    fn preset_hyperparameters() {
        let cfg = PipelineConfig::default();
        let s = cfg.train_config(ModelPreset::Sdae, 1);
        assert_eq!((s.learning_rate, s.batch_size, s.epochs), (0.001, 128, 100));
        let f = cfg.train_config(ModelPreset::Fpm, 1);
        assert_eq!((f.learning_rate, f.batch_size, f.noise_param), (0.01, 32, 0.05));
        let r = cfg.train_config(ModelPreset::RwSdae, 1);
        assert_eq!((r.learning_rate, r.batch_size, r.loss_kind), (0.001, 128, LossKind::Weighted));
        let o = PipelineConfig {
            training: TrainOverrides { epochs: Some(3), ..Default::default() },
            ..cfg
        };
        assert_eq!(o.train_config(ModelPreset::Fpm, 1).epochs, 3);
    }
}
