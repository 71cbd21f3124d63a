use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::AutoencoderModel;
use super::train::{LossReport, TrainConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model with the settings and losses that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    /// Training preset name (`sdae`, `fpm`, `rw-sdae`).
    pub preset: String,
    pub model: AutoencoderModel,
    pub train_config: TrainConfig,
    pub loss_report: LossReport,
    /// Feature names in column order.
    pub feature_names: Vec<String>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        ck.model.validate()?;
        if ck.feature_names.len() != ck.model.data_width() {
            return Err(Error::InvalidWidth(format!(
                "{} feature names for a model of width {}",
                ck.feature_names.len(),
                ck.model.data_width()
            )));
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{gaussian, Rng};
    use crate::sdae::{init_model, train, ActivationPreset, Architecture, TrainSet};

    #[test]
    fn round_trip_is_bit_exact() {
        let x = gaussian(&mut Rng::new(1), 30, 4);
        let model = init_model(&Architecture::new(4, vec![3], 2, ActivationPreset::PaperFpm), 5).unwrap();
        let cfg = TrainConfig { epochs: 2, ..TrainConfig::sdae(3) };
        let (model, loss_report) = train(model, &TrainSet::new(&x), &TrainSet::new(&x), &cfg).unwrap();
        let ck = Checkpoint {
            version: CHECKPOINT_VERSION,
            preset: "sdae".into(),
            model,
            train_config: cfg,
            loss_report,
            feature_names: (0..4).map(|i| format!("f{i}")).collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ck.json");
        ck.save(&p).unwrap();
        let back = Checkpoint::load(&p).unwrap();
        assert_eq!(back, ck);
        let bits = |c: &Checkpoint| -> Vec<u64> {
            c.model.layers.iter().flat_map(|l| l.weights.data().iter().map(|v| v.to_bits())).collect()
        };
        assert_eq!(bits(&back), bits(&ck));

        let mut bad = ck.clone();
        bad.feature_names.pop();
        bad.save(&p).unwrap();
        assert!(Checkpoint::load(&p).is_err());
    }
}
