use serde::{Deserialize, Serialize};

use super::loss::check_weights;
use super::model::{AutoencoderModel, ForwardPass};
use crate::error::{Error, Result};
use crate::numcore::{activation_derivative, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerGradient {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_like(model: &AutoencoderModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: Matrix::zeros(l.spec.input, l.spec.output),
                    bias: vec![0.0; l.spec.output],
                })
                .collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|g| g.weights.data().iter().chain(&g.bias).copied())
            .collect()
    }
}

/// Gradients of (1/n) Σ_i w_i ‖x_i − x'_i‖² with respect to every weight
/// and bias, given a forward pass on the (corrupted) input.
pub fn backward(model: &AutoencoderModel, pass: &ForwardPass, target: &Matrix, weights: &[f64]) -> Result<Gradients> {
    backward_with_latent(model, pass, target, weights, None)
}

/// As [`backward`], adding `latent_grad` (dL/dz for the encoder output) to
/// the signal reaching the encoder.
pub fn backward_with_latent(
    model: &AutoencoderModel,
    pass: &ForwardPass,
    target: &Matrix,
    weights: &[f64],
    latent_grad: Option<&Matrix>,
) -> Result<Gradients> {
    let out = pass.output();
    if out.shape() != target.shape() {
        return Err(Error::dims("backward", format!("output {:?} vs target {:?}", out.shape(), target.shape())));
    }
    if weights.len() != target.rows() {
        return Err(Error::dims("backward", format!("{} weights for {} samples", weights.len(), target.rows())));
    }
    if pass.pre_activations.len() != model.layers.len() {
        return Err(Error::dims("backward", "forward pass does not cover every layer"));
    }
    check_weights(weights)?;
    let n = target.rows().max(1) as f64;

    // dL/dx' = (2/n) w_i (x'_i − x_i)
    let mut upstream = out.clone();
    for (r, &w) in weights.iter().enumerate() {
        let scale = 2.0 * w / n;
        for (o, t) in upstream.row_mut(r).iter_mut().zip(target.row(r)) {
            *o = scale * (*o - t);
        }
    }

    let mut grads = Vec::with_capacity(model.layers.len());
    for l in (0..model.layers.len()).rev() {
        if l + 1 == model.encoder_depth {
            if let Some(g) = latent_grad {
                upstream = upstream.zip_map(g, |a, b| a + b)?;
            }
        }
        let layer = &model.layers[l];
        let delta = upstream.hadamard(&activation_derivative(layer.spec.activation, &pass.pre_activations[l]))?;
        let dw = pass.activations[l].t_matmul(&delta)?;
        let db = delta.column_sums();
        if l > 0 {
            upstream = delta.matmul_t(&layer.weights)?;
        }
        grads.push(LayerGradient { weights: dw, bias: db });
    }
    grads.reverse();
    Ok(Gradients { layers: grads })
}

/// θ ← θ − lr·∇θ for every parameter.
pub fn sgd_step(model: &mut AutoencoderModel, grads: &Gradients, learning_rate: f64) -> Result<()> {
    if grads.layers.len() != model.layers.len() {
        return Err(Error::dims(
            "sgd_step",
            format!("{} gradient layers for {} model layers", grads.layers.len(), model.layers.len()),
        ));
    }
    for (l, (layer, g)) in model.layers.iter().zip(&grads.layers).enumerate() {
        if layer.weights.shape() != g.weights.shape() || layer.bias.len() != g.bias.len() {
            return Err(Error::dims("sgd_step", format!("layer {l} gradient shape differs")));
        }
    }
    for (layer, g) in model.layers.iter_mut().zip(&grads.layers) {
        for (p, d) in layer.weights.data_mut().iter_mut().zip(g.weights.data()) {
            *p -= learning_rate * d;
        }
        for (p, d) in layer.bias.iter_mut().zip(&g.bias) {
            *p -= learning_rate * d;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{gaussian, ActivationKind, Rng};
    use crate::sdae::loss::weighted_loss;
    use crate::sdae::model::{forward, init_model, ActivationPreset, Architecture};
    use crate::sdae::train::{corrupt, NoiseKind};

    fn param_mut(model: &mut AutoencoderModel, mut idx: usize) -> &mut f64 {
        for layer in &mut model.layers {
            let nw = layer.weights.data().len();
            if idx < nw {
                return &mut layer.weights.data_mut()[idx];
            }
            idx -= nw;
            if idx < layer.bias.len() {
                return &mut layer.bias[idx];
            }
            idx -= layer.bias.len();
        }
        panic!("parameter index out of range");
    }

    fn relu_pattern(model: &AutoencoderModel, x: &Matrix) -> Vec<bool> {
        let pass = forward(model, x).unwrap();
        model
            .layers
            .iter()
            .zip(&pass.pre_activations)
            .filter(|(l, _)| l.spec.activation == ActivationKind::Relu)
            .flat_map(|(_, z)| z.data().iter().map(|&v| v > 0.0).collect::<Vec<_>>())
            .collect()
    }

    /// Returns (checked, skipped) parameter counts; panics on a mismatch.
    fn gradient_check(preset: ActivationPreset, noise: NoiseKind, weighted: bool, seed: u64) -> (usize, usize) {
        let arch = Architecture::new(7, vec![5], 3, preset);
        let mut model = init_model(&arch, seed).unwrap();
        let mut rng = Rng::new(seed + 100);
        // Non-zero biases so no pre-activation sits near a kink by construction.
        for layer in &mut model.layers {
            layer.bias.iter_mut().for_each(|b| *b = 0.1 * rng.normal());
        }
        let x = gaussian(&mut rng, 6, 7);
        let param = if noise == NoiseKind::Mask { 0.8 } else { 0.3 };
        let noisy = corrupt(&x, noise, param, &mut rng).unwrap();
        let w: Vec<f64> = if weighted {
            (0..6).map(|_| rng.uniform_range(0.2, 2.0)).collect()
        } else {
            vec![1.0; 6]
        };
        let grads = backward(&model, &forward(&model, &noisy).unwrap(), &x, &w).unwrap().flat();
        let base = relu_pattern(&model, &noisy);
        let h = 1e-6;
        let (mut checked, mut skipped) = (0, 0);
        for (i, &analytic) in grads.iter().enumerate() {
            let orig = *param_mut(&mut model, i);
            *param_mut(&mut model, i) = orig + h;
            let up_pattern = relu_pattern(&model, &noisy);
            let up = weighted_loss(&x, forward(&model, &noisy).unwrap().output(), &w).unwrap();
            *param_mut(&mut model, i) = orig - h;
            let dn_pattern = relu_pattern(&model, &noisy);
            let dn = weighted_loss(&x, forward(&model, &noisy).unwrap().output(), &w).unwrap();
            *param_mut(&mut model, i) = orig;
            if up_pattern != base || dn_pattern != base {
                skipped += 1;
                continue;
            }
            let numeric = (up - dn) / (2.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4);
            assert!(rel <= 1e-5, "{preset:?}/{noise:?}/{weighted}: param {i} analytic {analytic} numeric {numeric}");
            checked += 1;
        }
        (checked, skipped)
    }

    #[test]
    fn gradients_match_finite_differences() {
        for preset in ActivationPreset::ALL {
            for noise in [NoiseKind::Mask, NoiseKind::Gaussian] {
                for weighted in [false, true] {
                    let (checked, skipped) = gradient_check(preset, noise, weighted, 17);
                    assert!(checked > 10 * skipped, "too many kink skips: {checked}/{skipped}");
                }
            }
        }
    }

    #[test]
    fn exact_reconstruction_has_zero_gradient() {
        let model = init_model(&Architecture::new(4, vec![3], 2, ActivationPreset::IdentityOut), 2).unwrap();
        let x = gaussian(&mut Rng::new(1), 5, 4);
        let pass = forward(&model, &x).unwrap();
        let target = pass.output().clone();
        let g = backward(&model, &pass, &target, &[1.0; 5]).unwrap();
        assert!(g.flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradients_are_linear_in_weights() {
        let model = init_model(&Architecture::new(4, vec![3], 2, ActivationPreset::PaperFpm), 2).unwrap();
        let mut rng = Rng::new(3);
        let x = gaussian(&mut rng, 5, 4);
        let pass = forward(&model, &gaussian(&mut rng, 5, 4)).unwrap();
        let w = [0.5, 1.0, 1.5, 0.25, 2.0];
        let w2: Vec<f64> = w.iter().map(|v| 2.0 * v).collect();
        let g1 = backward(&model, &pass, &x, &w).unwrap().flat();
        let g2 = backward(&model, &pass, &x, &w2).unwrap().flat();
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn sgd_step_by_hand() {
        let mut model = init_model(&Architecture::new(1, vec![], 1, ActivationPreset::IdentityOut), 0).unwrap();
        model.layers.truncate(1);
        model.layers[0].spec.activation = ActivationKind::Identity;
        model.layers[0].weights.set(0, 0, 1.0);
        let mut g = Gradients::zeros_like(&model);
        g.layers[0].weights.set(0, 0, 0.5);
        sgd_step(&mut model, &g, 0.1).unwrap();
        assert_eq!(model.layers[0].weights.get(0, 0), 0.95);

        let before = model.clone();
        sgd_step(&mut model, &Gradients::zeros_like(&before), 0.3).unwrap();
        assert_eq!(model, before);
        sgd_step(&mut model, &g, 0.0).unwrap();
        assert_eq!(model, before);

        let other = init_model(&Architecture::new(2, vec![], 1, ActivationPreset::IdentityOut), 0).unwrap();
        assert!(sgd_step(&mut model, &Gradients::zeros_like(&other), 0.1).is_err());
    }
}
