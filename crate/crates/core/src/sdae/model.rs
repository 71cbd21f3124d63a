use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{activate, ActivationKind, Matrix, Rng};

/// Interior and output activations of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationPreset {
    /// ReLU interior, sigmoid output.
    PaperFpm,
    /// ReLU interior, tanh output.
    PaperAppendix,
    /// ReLU interior, linear output.
    #[default]
    IdentityOut,
}

impl ActivationPreset {
    pub fn output(self) -> ActivationKind {
        match self {
            ActivationPreset::PaperFpm => ActivationKind::Sigmoid,
            ActivationPreset::PaperAppendix => ActivationKind::Tanh,
            ActivationPreset::IdentityOut => ActivationKind::Identity,
        }
    }

    pub fn interior(self) -> ActivationKind {
        ActivationKind::Relu
    }

    pub const ALL: [ActivationPreset; 3] = [
        ActivationPreset::PaperFpm,
        ActivationPreset::PaperAppendix,
        ActivationPreset::IdentityOut,
    ];
}

impl std::str::FromStr for ActivationPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-fpm" => Ok(Self::PaperFpm),
            "paper-appendix" => Ok(Self::PaperAppendix),
            "identity-out" => Ok(Self::IdentityOut),
            other => Err(Error::InvalidConfig(format!("unknown activation preset `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub input: usize,
    pub output: usize,
    pub activation: ActivationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub spec: LayerSpec,
    /// input × output
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Widths of an autoencoder: `data → hidden… → rep → reverse(hidden)… → data`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub data_width: usize,
    pub hidden: Vec<usize>,
    pub rep_dim: usize,
    pub preset: ActivationPreset,
}

impl Architecture {
    pub fn new(data_width: usize, hidden: Vec<usize>, rep_dim: usize, preset: ActivationPreset) -> Self {
        Self {
            data_width,
            hidden,
            rep_dim,
            preset,
        }
    }

    /// Full-size network: two 500-unit layers either side of a 500-unit code.
    pub fn paper_scale(data_width: usize, preset: ActivationPreset) -> Self {
        Self::new(data_width, vec![500, 500], 500, preset)
    }

    pub fn desk_scale(data_width: usize, preset: ActivationPreset) -> Self {
        Self::new(data_width, vec![64], 32, preset)
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.data_width];
        w.extend(&self.hidden);
        w.push(self.rep_dim);
        w.extend(self.hidden.iter().rev());
        w.push(self.data_width);
        w
    }

    pub fn encoder_depth(&self) -> usize {
        self.hidden.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoencoderModel {
    pub layers: Vec<Layer>,
    /// Number of encoder layers; the representation is the output of
    /// layer `encoder_depth - 1`.
    pub encoder_depth: usize,
    pub preset: ActivationPreset,
    pub seed: u64,
}

/// Inputs and pre-activations of every layer from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    /// `activations[0]` is the input and `activations[l + 1]` the output of
    /// layer `l`.
    pub activations: Vec<Matrix>,
    pub pre_activations: Vec<Matrix>,
}

impl ForwardPass {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("a forward pass holds the input")
    }
}

/// Glorot-uniform weights and zero biases drawn from `seed`.
pub fn init_model(arch: &Architecture, seed: u64) -> Result<AutoencoderModel> {
    let widths = arch.widths();
    if let Some(pos) = widths.iter().position(|&w| w == 0) {
        return Err(Error::InvalidWidth(format!("layer width {pos} is zero in {widths:?}")));
    }
    let mut rng = Rng::new(seed);
    let n_layers = widths.len() - 1;
    let layers = (0..n_layers)
        .map(|l| {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out).map(|_| rng.uniform_range(-s, s)).collect();
            let activation = if l + 1 == n_layers {
                arch.preset.output()
            } else {
                arch.preset.interior()
            };
            Layer {
                spec: LayerSpec {
                    input: fan_in,
                    output: fan_out,
                    activation,
                },
                weights: Matrix::new(fan_in, fan_out, data).expect("sized above"),
                bias: vec![0.0; fan_out],
            }
        })
        .collect();
    Ok(AutoencoderModel {
        layers,
        encoder_depth: arch.encoder_depth(),
        preset: arch.preset,
        seed,
    })
}

impl AutoencoderModel {
    /// Builds a model from explicit layers; widths must chain and the last
    /// layer must return to the input width.
    pub fn from_layers(layers: Vec<Layer>, encoder_depth: usize, preset: ActivationPreset, seed: u64) -> Result<Self> {
        let model = Self {
            layers,
            encoder_depth,
            preset,
            seed,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidWidth("model has no layers".into()));
        }
        if self.encoder_depth == 0 || self.encoder_depth > self.layers.len() {
            return Err(Error::InvalidWidth(format!(
                "encoder depth {} with {} layers",
                self.encoder_depth,
                self.layers.len()
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let s = layer.spec;
            if s.input == 0 || s.output == 0 {
                return Err(Error::InvalidWidth(format!("layer {l} has a zero width")));
            }
            if layer.weights.shape() != (s.input, s.output) || layer.bias.len() != s.output {
                return Err(Error::InvalidWidth(format!("layer {l} parameters do not match its spec")));
            }
            if l > 0 && self.layers[l - 1].spec.output != s.input {
                return Err(Error::InvalidWidth(format!("layer {l} input does not chain")));
            }
        }
        if self.data_width() != self.layers.last().unwrap().spec.output {
            return Err(Error::InvalidWidth("output width differs from input width".into()));
        }
        Ok(())
    }

    pub fn data_width(&self) -> usize {
        self.layers[0].spec.input
    }

    pub fn rep_dim(&self) -> usize {
        self.layers[self.encoder_depth - 1].spec.output
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.data_width()];
        w.extend(self.layers.iter().map(|l| l.spec.output));
        w
    }

    pub fn n_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.data().len() + l.bias.len()).sum()
    }

    fn run(&self, x: &Matrix, n_layers: usize) -> Result<ForwardPass> {
        if x.cols() != self.data_width() {
            return Err(Error::dims(
                "forward",
                format!("input has {} columns, model expects {}", x.cols(), self.data_width()),
            ));
        }
        let mut activations = Vec::with_capacity(n_layers + 1);
        let mut pre_activations = Vec::with_capacity(n_layers);
        activations.push(x.clone());
        for layer in &self.layers[..n_layers] {
            let mut z = activations.last().unwrap().matmul(&layer.weights)?;
            z.add_row_vector(&layer.bias)?;
            activations.push(activate(&z, layer.spec.activation));
            pre_activations.push(z);
        }
        Ok(ForwardPass {
            activations,
            pre_activations,
        })
    }
}

/// Runs every layer on `x`, keeping the intermediate values.
pub fn forward(model: &AutoencoderModel, x: &Matrix) -> Result<ForwardPass> {
    model.run(x, model.layers.len())
}

/// Reconstruction `x'` of a clean input.
pub fn reconstruct(model: &AutoencoderModel, x: &Matrix) -> Result<Matrix> {
    Ok(forward(model, x)?.activations.pop().unwrap())
}

/// Patient representation: the encoder output for uncorrupted input.
pub fn encode(model: &AutoencoderModel, x: &Matrix) -> Result<Matrix> {
    Ok(model.run(x, model.encoder_depth)?.activations.pop().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = Rng::new(seed);
        crate::numcore::gaussian(&mut rng, rows, cols)
    }

    #[test]
    fn paper_scale_widths() {
        let arch = Architecture::paper_scale(100, ActivationPreset::PaperAppendix);
        assert_eq!(arch.widths(), [100, 500, 500, 500, 500, 500, 100]);
        let m = init_model(&arch, 3).unwrap();
        assert_eq!(m.widths(), [100, 500, 500, 500, 500, 500, 100]);
        assert_eq!(m.rep_dim(), 500);
        assert_eq!(m.layers.last().unwrap().spec.activation, ActivationKind::Tanh);
        assert!(m.layers[..5].iter().all(|l| l.spec.activation == ActivationKind::Relu));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let arch = Architecture::new(9, vec![6], 4, ActivationPreset::IdentityOut);
        let a = init_model(&arch, 5).unwrap();
        assert_eq!(a, init_model(&arch, 5).unwrap());
        assert_ne!(a, init_model(&arch, 6).unwrap());
        for layer in &a.layers {
            let s = (6.0 / (layer.spec.input + layer.spec.output) as f64).sqrt();
            assert!(layer.weights.data().iter().all(|w| w.abs() <= s));
            assert!(layer.bias.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn zero_width_rejected() {
        let arch = Architecture::new(4, vec![0], 2, ActivationPreset::IdentityOut);
        assert!(matches!(init_model(&arch, 0), Err(Error::InvalidWidth(_))));
        let arch = Architecture::new(4, vec![], 0, ActivationPreset::IdentityOut);
        assert!(matches!(init_model(&arch, 0), Err(Error::InvalidWidth(_))));
    }

    #[test]
    fn zero_input_gives_zero_code_at_init() {
        let arch = Architecture::new(5, vec![4], 3, ActivationPreset::IdentityOut);
        let m = init_model(&arch, 1).unwrap();
        let z = encode(&m, &Matrix::zeros(2, 5)).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
        assert!(reconstruct(&m, &Matrix::zeros(2, 5)).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_model_and_identity_layer() {
        let arch = Architecture::new(3, vec![], 2, ActivationPreset::IdentityOut);
        let mut m = init_model(&arch, 1).unwrap();
        for l in &mut m.layers {
            l.weights.data_mut().iter_mut().for_each(|w| *w = 0.0);
        }
        let x = random_matrix(4, 3, 2);
        assert!(reconstruct(&m, &x).unwrap().data().iter().all(|&v| v == 0.0));

        let id = AutoencoderModel::from_layers(
            vec![Layer {
                spec: LayerSpec {
                    input: 3,
                    output: 3,
                    activation: ActivationKind::Identity,
                },
                weights: Matrix::identity(3),
                bias: vec![0.0; 3],
            }],
            1,
            ActivationPreset::IdentityOut,
            0,
        )
        .unwrap();
        assert_eq!(reconstruct(&id, &x).unwrap(), x);
    }

    #[test]
    fn batch_matches_single_rows() {
        for preset in ActivationPreset::ALL {
            let m = init_model(&Architecture::new(6, vec![5], 3, preset), 9).unwrap();
            let x = random_matrix(3, 6, 4);
            let full = reconstruct(&m, &x).unwrap();
            let codes = encode(&m, &x).unwrap();
            assert_eq!(codes.cols(), 3);
            for r in 0..3 {
                let one = Matrix::from_rows(&[x.row(r)]).unwrap();
                let rec = reconstruct(&m, &one).unwrap();
                let code = encode(&m, &one).unwrap();
                for (a, b) in rec.row(0).iter().zip(full.row(r)) {
                    assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
                }
                for (a, b) in code.row(0).iter().zip(codes.row(r)) {
                    assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
                }
            }
        }
    }

    #[test]
    fn width_mismatch() {
        let m = init_model(&Architecture::new(6, vec![], 3, ActivationPreset::IdentityOut), 9).unwrap();
        assert!(matches!(forward(&m, &Matrix::zeros(2, 5)), Err(Error::DimensionMismatch { .. })));
        assert!(encode(&m, &Matrix::zeros(2, 7)).is_err());
    }

    #[test]
    fn from_layers_validates_chain() {
        let m = init_model(&Architecture::new(6, vec![4], 3, ActivationPreset::IdentityOut), 9).unwrap();
        let mut layers = m.layers.clone();
        layers.swap(0, 1);
        assert!(AutoencoderModel::from_layers(layers, 2, m.preset, 0).is_err());
        assert!(AutoencoderModel::from_layers(m.layers.clone(), 5, m.preset, 0).is_err());
        assert!(AutoencoderModel::from_layers(m.layers.clone(), 2, m.preset, 0).is_ok());
    }
}
