use serde::{Deserialize, Serialize};

use super::backprop::{backward_with_latent, sgd_step};
use super::loss::{feature_errors, latent_penalty_with_grad, mse_loss, weighted_loss};
use super::model::{forward, reconstruct, AutoencoderModel};
use crate::error::{Error, Result};
use crate::numcore::{bernoulli_mask, gaussian, Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Plain,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// Multiply by a Bernoulli mask; the parameter is the keep probability.
    Mask,
    /// Add scaled standard-normal noise; the parameter is the factor.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub loss_kind: LossKind,
    pub noise_kind: NoiseKind,
    pub noise_param: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// λ for the latent group-mean penalty; 0 disables it.
    #[serde(default)]
    pub latent_penalty: f64,
}

impl TrainConfig {
    /// Weighted loss, Gaussian noise 0.05, lr 0.01, batch 32, 100 epochs.
    pub fn fpm(seed: u64) -> Self {
        Self {
            loss_kind: LossKind::Weighted,
            noise_kind: NoiseKind::Gaussian,
            noise_param: 0.05,
            learning_rate: 0.01,
            epochs: 100,
            batch_size: 32,
            seed,
            latent_penalty: 0.0,
        }
    }

    /// Plain loss, mask keep-probability 0.95, lr 0.001, batch 128, 100 epochs.
    pub fn sdae(seed: u64) -> Self {
        Self {
            loss_kind: LossKind::Plain,
            noise_kind: NoiseKind::Mask,
            noise_param: 0.95,
            learning_rate: 0.001,
            epochs: 100,
            batch_size: 128,
            seed,
            latent_penalty: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if !(self.latent_penalty >= 0.0 && self.latent_penalty.is_finite()) {
            return Err(Error::InvalidConfig(format!("latent penalty {}", self.latent_penalty)));
        }
        match self.noise_kind {
            NoiseKind::Mask if !(0.0..=1.0).contains(&self.noise_param) => {
                Err(Error::InvalidProbability(self.noise_param))
            }
            NoiseKind::Gaussian if !(self.noise_param >= 0.0 && self.noise_param.is_finite()) => {
                Err(Error::InvalidConfig(format!("noise factor {}", self.noise_param)))
            }
            _ => Ok(()),
        }
    }
}

/// x ⊙ m with m ~ Bernoulli(p) element-wise.
pub fn corrupt_mask(x: &Matrix, p: f64, rng: &mut Rng) -> Result<Matrix> {
    let mask = bernoulli_mask(rng, x.rows(), x.cols(), p)?;
    x.hadamard(&mask)
}

/// x + f·N(0, 1) element-wise.
pub fn corrupt_gaussian(x: &Matrix, noise_factor: f64, rng: &mut Rng) -> Result<Matrix> {
    if !(noise_factor >= 0.0 && noise_factor.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise factor {noise_factor}")));
    }
    let noise = gaussian(rng, x.rows(), x.cols());
    x.zip_map(&noise, |a, e| a + noise_factor * e)
}

pub fn corrupt(x: &Matrix, kind: NoiseKind, param: f64, rng: &mut Rng) -> Result<Matrix> {
    match kind {
        NoiseKind::Mask => corrupt_mask(x, param, rng),
        NoiseKind::Gaussian => corrupt_gaussian(x, param, rng),
    }
}

/// Rows plus optional per-row loss weights and group indices.
#[derive(Debug, Clone, Copy)]
pub struct TrainSet<'a> {
    pub x: &'a Matrix,
    pub weights: Option<&'a [f64]>,
    /// Needed only when the latent penalty is on.
    pub groups: Option<&'a [usize]>,
}

impl<'a> TrainSet<'a> {
    pub fn new(x: &'a Matrix) -> Self {
        Self {
            x,
            weights: None,
            groups: None,
        }
    }

    pub fn with_weights(mut self, w: &'a [f64]) -> Self {
        self.weights = Some(w);
        self
    }

    pub fn with_groups(mut self, g: &'a [usize]) -> Self {
        self.groups = Some(g);
        self
    }

    fn effective_weights(&self, kind: LossKind) -> Result<Vec<f64>> {
        match (kind, self.weights) {
            (LossKind::Weighted, Some(w)) => {
                if w.len() != self.x.rows() {
                    return Err(Error::LengthMismatch {
                        left: w.len(),
                        right: self.x.rows(),
                    });
                }
                Ok(w.to_vec())
            }
            (LossKind::Weighted, None) => Err(Error::InvalidConfig("weighted loss without sample weights".into())),
            (LossKind::Plain, _) => Ok(vec![1.0; self.x.rows()]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossReport {
    /// Training objective per epoch: sample-weighted mean of batch losses on
    /// corrupted inputs, excluding the latent penalty.
    pub train_loss: Vec<f64>,
    /// Loss on clean validation inputs after each epoch, weighted when the
    /// loss is weighted and validation weights are given.
    pub val_loss: Vec<f64>,
    /// Latent penalty per epoch (zeros when disabled).
    pub latent_penalty: Vec<f64>,
    /// Unweighted loss on clean training inputs after the last epoch.
    pub reconstruction_loss: f64,
    /// Weighted loss on clean training inputs after the last epoch; equals
    /// `reconstruction_loss` for the plain loss.
    pub weighted_reconstruction_loss: f64,
    /// Per-feature mean squared error on clean training inputs.
    pub feature_errors: Vec<f64>,
}

fn evaluate(model: &AutoencoderModel, data: &TrainSet, kind: LossKind) -> Result<f64> {
    let rec = reconstruct(model, data.x)?;
    let weights = match (kind, data.weights) {
        (LossKind::Weighted, Some(_)) => data.effective_weights(kind)?,
        _ => vec![1.0; data.x.rows()],
    };
    weighted_loss(data.x, &rec, &weights)
}

/// Mini-batch SGD on the denoising objective.
///
/// Each epoch shuffles the rows, and each batch is corrupted, passed
/// forward and scored against its clean rows. The run is fully determined
/// by `cfg.seed` and the inputs.
pub fn train(
    mut model: AutoencoderModel,
    train_set: &TrainSet,
    val_set: &TrainSet,
    cfg: &TrainConfig,
) -> Result<(AutoencoderModel, LossReport)> {
    cfg.validate()?;
    let x = train_set.x;
    let n = x.rows();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    for set in [train_set, val_set] {
        if set.x.cols() != model.data_width() {
            return Err(Error::dims(
                "train",
                format!("data has {} columns, model expects {}", set.x.cols(), model.data_width()),
            ));
        }
    }
    let weights = train_set.effective_weights(cfg.loss_kind)?;
    super::loss::check_weights(&weights)?;
    let groups = if cfg.latent_penalty > 0.0 {
        let g = train_set
            .groups
            .ok_or_else(|| Error::InvalidConfig("latent penalty requires group indices".into()))?;
        if g.len() != n {
            return Err(Error::LengthMismatch { left: g.len(), right: n });
        }
        Some(g)
    } else {
        None
    };

    let mut rng = Rng::new(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut train_loss = Vec::with_capacity(cfg.epochs);
    let mut val_loss = Vec::with_capacity(cfg.epochs);
    let mut penalties = Vec::with_capacity(cfg.epochs);
    let mut warned_single_group = false;

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut epoch_penalty = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let clean = x.select_rows(batch);
            let w: Vec<f64> = batch.iter().map(|&i| weights[i]).collect();
            let noisy = corrupt(&clean, cfg.noise_kind, cfg.noise_param, &mut rng)?;
            let pass = forward(&model, &noisy)?;
            epoch_loss += weighted_loss(&clean, pass.output(), &w)? * batch.len() as f64;

            let latent = match groups {
                Some(g) => {
                    let bg: Vec<usize> = batch.iter().map(|&i| g[i]).collect();
                    let z = &pass.activations[model.encoder_depth];
                    match latent_penalty_with_grad(z, &bg)? {
                        Some((p, grad)) => {
                            epoch_penalty += p * batch.len() as f64;
                            Some(grad.map(|v| cfg.latent_penalty * v))
                        }
                        None => {
                            if !warned_single_group {
                                log::warn!("batch with a single group; latent penalty is 0 for it");
                                warned_single_group = true;
                            }
                            None
                        }
                    }
                }
                None => None,
            };
            let grads = backward_with_latent(&model, &pass, &clean, &w, latent.as_ref())?;
            sgd_step(&mut model, &grads, cfg.learning_rate)?;
        }
        train_loss.push(epoch_loss / n as f64);
        penalties.push(epoch_penalty / n as f64);
        let v = if val_set.x.rows() > 0 {
            evaluate(&model, val_set, cfg.loss_kind)?
        } else {
            0.0
        };
        val_loss.push(v);
        log::debug!("epoch {epoch}: train {:.6e} val {:.6e}", train_loss[epoch], v);
        if !train_loss[epoch].is_finite() {
            return Err(Error::InvalidConfig(format!(
                "training diverged at epoch {epoch}; lower the learning rate"
            )));
        }
    }

    let rec = reconstruct(&model, x)?;
    let report = LossReport {
        train_loss,
        val_loss,
        latent_penalty: penalties,
        reconstruction_loss: mse_loss(x, &rec)?,
        weighted_reconstruction_loss: weighted_loss(x, &rec, &weights)?,
        feature_errors: feature_errors(x, &rec)?.errors,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdae::model::{init_model, ActivationPreset, Architecture};

    fn data(rows: usize, cols: usize, seed: u64) -> Matrix {
        gaussian(&mut Rng::new(seed), rows, cols)
    }

    fn small_model(width: usize) -> AutoencoderModel {
        init_model(&Architecture::new(width, vec![8], 4, ActivationPreset::IdentityOut), 7).unwrap()
    }

    #[test]
    fn presets() {
        let f = TrainConfig::fpm(1);
        assert_eq!((f.learning_rate, f.batch_size, f.epochs, f.noise_param), (0.01, 32, 100, 0.05));
        assert_eq!((f.loss_kind, f.noise_kind), (LossKind::Weighted, NoiseKind::Gaussian));
        let s = TrainConfig::sdae(1);
        assert_eq!((s.learning_rate, s.batch_size, s.epochs, s.noise_param), (0.001, 128, 100, 0.95));
        assert_eq!((s.loss_kind, s.noise_kind), (LossKind::Plain, NoiseKind::Mask));
    }

    #[test]
    fn corruption_edges() {
        let x = data(50, 20, 1);
        let mut rng = Rng::new(4);
        assert_eq!(corrupt_mask(&x, 1.0, &mut rng).unwrap(), x);
        assert!(corrupt_mask(&x, 0.0, &mut rng).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(matches!(corrupt_mask(&x, 1.5, &mut rng), Err(Error::InvalidProbability(_))));
        assert_eq!(corrupt_gaussian(&x, 0.0, &mut rng).unwrap(), x);
        let a = corrupt_gaussian(&x, 0.05, &mut Rng::new(9)).unwrap();
        assert_eq!(a, corrupt_gaussian(&x, 0.05, &mut Rng::new(9)).unwrap());
    }

    #[test]
    fn mask_zeroes_about_five_percent() {
        let x = Matrix::filled(500, 200, 1.0);
        let c = corrupt_mask(&x, 0.95, &mut Rng::new(5)).unwrap();
        let zeroed = c.data().iter().filter(|&&v| v == 0.0).count() as f64 / 1e5;
        assert!((zeroed - 0.05).abs() < 0.005, "{zeroed}");
    }

    #[test]
    fn gaussian_noise_half_normal_mean() {
        let x = data(500, 200, 2);
        let c = corrupt_gaussian(&x, 0.05, &mut Rng::new(6)).unwrap();
        let mean_abs: f64 = c.data().iter().zip(x.data()).map(|(a, b)| (a - b).abs()).sum::<f64>() / 1e5;
        let expected = 0.05 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean_abs - expected).abs() < 0.0005, "{mean_abs} vs {expected}");
    }

    #[test]
    fn zero_epochs_leaves_model() {
        let x = data(10, 5, 1);
        let m = small_model(5);
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::sdae(1) };
        let (out, report) = train(m.clone(), &TrainSet::new(&x), &TrainSet::new(&x), &cfg).unwrap();
        assert_eq!(out, m);
        assert!(report.train_loss.is_empty() && report.val_loss.is_empty());
    }

    #[test]
    fn memorises_a_repeated_vector() {
        let row: Vec<f64> = (0..6).map(|j| 0.3 * j as f64 - 0.7).collect();
        let x = Matrix::from_rows(&vec![row; 200]).unwrap();
        let m = small_model(6);
        let initial = mse_loss(&x, &reconstruct(&m, &x).unwrap()).unwrap();
        let cfg = TrainConfig {
            loss_kind: LossKind::Plain,
            noise_kind: NoiseKind::Gaussian,
            noise_param: 0.0,
            learning_rate: 0.01,
            epochs: 200,
            batch_size: 32,
            seed: 3,
            latent_penalty: 0.0,
        };
        let (_, report) = train(m, &TrainSet::new(&x), &TrainSet::new(&x), &cfg).unwrap();
        assert!(report.reconstruction_loss < 0.01 * initial, "{} vs {initial}", report.reconstruction_loss);
        assert_eq!(report.train_loss.len(), 200);
        assert!(report.train_loss.iter().chain(&report.val_loss).all(|&v| v >= 0.0));
    }

    #[test]
    fn training_is_deterministic() {
        let x = data(64, 5, 8);
        let cfg = TrainConfig { epochs: 3, ..TrainConfig::fpm(2) };
        let w = vec![1.5; 64];
        let set = TrainSet::new(&x).with_weights(&w);
        let a = train(small_model(5), &set, &set, &cfg).unwrap();
        let b = train(small_model(5), &set, &set, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unit_weights_match_plain_loss_bit_for_bit() {
        let x = data(64, 5, 8);
        let ones = vec![1.0; 64];
        let weighted = TrainConfig { epochs: 3, ..TrainConfig::fpm(2) };
        let plain = TrainConfig { loss_kind: LossKind::Plain, ..weighted };
        let a = train(small_model(5), &TrainSet::new(&x).with_weights(&ones), &TrainSet::new(&x), &weighted).unwrap();
        let b = train(small_model(5), &TrainSet::new(&x), &TrainSet::new(&x), &plain).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_lambda_is_bit_identical_to_no_penalty() {
        let x = data(64, 5, 8);
        let groups: Vec<usize> = (0..64).map(|i| i % 2).collect();
        let cfg = TrainConfig { epochs: 3, ..TrainConfig::sdae(2) };
        let a = train(small_model(5), &TrainSet::new(&x).with_groups(&groups), &TrainSet::new(&x), &cfg).unwrap();
        let b = train(small_model(5), &TrainSet::new(&x), &TrainSet::new(&x), &cfg).unwrap();
        assert_eq!(a, b);
        let on = TrainConfig { latent_penalty: 1.0, ..cfg };
        let c = train(small_model(5), &TrainSet::new(&x).with_groups(&groups), &TrainSet::new(&x), &on).unwrap();
        assert_ne!(a.0, c.0);
        assert!(c.1.latent_penalty.iter().all(|&p| p > 0.0));
        assert!(train(small_model(5), &TrainSet::new(&x), &TrainSet::new(&x), &on).is_err());
    }

    #[test]
    fn loss_is_measured_against_clean_input() {
        // With huge noise the reconstruction of an all-zero model is 0, so the
        // reported loss is the distance of the clean rows to the origin.
        let x = data(40, 5, 8);
        let mut m = small_model(5);
        for l in &mut m.layers {
            l.weights.data_mut().iter_mut().for_each(|w| *w = 0.0);
        }
        let cfg = TrainConfig {
            loss_kind: LossKind::Plain,
            noise_kind: NoiseKind::Gaussian,
            noise_param: 1e3,
            learning_rate: 1e-12,
            epochs: 1,
            batch_size: 40,
            seed: 1,
            latent_penalty: 0.0,
        };
        let (_, report) = train(m, &TrainSet::new(&x), &TrainSet::new(&x), &cfg).unwrap();
        let clean = mse_loss(&x, &Matrix::zeros(40, 5)).unwrap();
        assert!((report.train_loss[0] - clean).abs() < 1e-9 * clean);
    }

    #[test]
    fn config_validation() {
        let x = data(4, 5, 8);
        let s = TrainSet::new(&x);
        for cfg in [
            TrainConfig { learning_rate: 0.0, ..TrainConfig::sdae(1) },
            TrainConfig { batch_size: 0, ..TrainConfig::sdae(1) },
            TrainConfig { noise_param: -0.1, ..TrainConfig::sdae(1) },
            TrainConfig { noise_param: -0.1, ..TrainConfig::fpm(1) },
        ] {
            assert!(train(small_model(5), &s, &s, &cfg).is_err());
        }
        // Weighted loss needs weights.
        assert!(train(small_model(5), &s, &s, &TrainConfig::fpm(1)).is_err());
    }
}
