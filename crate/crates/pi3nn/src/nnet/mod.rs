//! Minimal dense feedforward engine: ReLU hidden layers, scalar output with
//! an optional absolute-value transform, MSE training with L1/L2 penalties
//! and an adaptive-moment update, all seeded and bitwise reproducible.

mod train;

pub use train::TrainConfig;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};

/// Architecture and training-penalty description of one network.
///
/// Penalties apply to weights only (biases are exempt); the loss is
/// `MSE + l1 * sum|w| + l2 * sum w^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    /// Hidden layer widths; defaults to a single layer of 100.
    pub hidden_widths: Vec<usize>,
    /// Apply `|z|` at the output so every forward value is nonnegative.
    pub output_positivity: bool,
    pub l1: f64,
    pub l2: f64,
    pub seed: u64,
}

impl MlpSpec {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_widths: vec![100],
            output_positivity: false,
            l1: 0.0,
            l2: 0.0,
            seed: 0,
        }
    }

    pub fn with_hidden(mut self, widths: Vec<usize>) -> Self {
        self.hidden_widths = widths;
        self
    }

    pub fn with_positivity(mut self, on: bool) -> Self {
        self.output_positivity = on;
        self
    }

    pub fn with_penalties(mut self, l1: f64, l2: f64) -> Self {
        self.l1 = l1;
        self.l2 = l2;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidArgument("input_dim must be positive".into()));
        }
        if self.hidden_widths.is_empty() || self.hidden_widths.contains(&0) {
            return Err(Error::InvalidArgument(
                "hidden_widths must be nonempty with positive widths".into(),
            ));
        }
        for (name, v) in [("l1", self.l1), ("l2", self.l2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// (fan_in, fan_out) of every layer, ending in the scalar output.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_widths.len() + 1);
        let mut prev = self.input_dim;
        for w in &self.hidden_widths {
            dims.push((prev, *w));
            prev = *w;
        }
        dims.push((prev, 1));
        dims
    }
}

/// A dense network with parameters. Weights are stored row-major as
/// `(out, in)` matrices; evaluation is deterministic given parameters and
/// input, and a trained model is an immutable value safe to share across
/// threads for read-only inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDto", into = "ModelDto")]
pub struct MlpModel {
    spec: MlpSpec,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

impl MlpModel {
    /// Seeded fan-in-scaled uniform initialization for the ReLU layers
    /// (limit `sqrt(6 / fan_in)`); biases start at zero.
    pub fn init(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (fan_in, fan_out) in spec.layer_dims() {
            let limit = (6.0 / fan_in as f64).sqrt();
            let data: Vec<f64> = (0..fan_out * fan_in)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            weights.push(Array2::from_shape_vec((fan_out, fan_in), data).expect("layer shape"));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self {
            spec,
            weights,
            biases,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    /// Batch forward pass: one scalar output per input row.
    pub fn forward(&self, x: &Array2<f64>) -> Result<Array1<f64>> {
        self.check_input(x)?;
        Ok(self.forward_full(x).out)
    }

    pub fn forward_one(&self, x: &[f64]) -> Result<f64> {
        let x = Array2::from_shape_vec((1, x.len()), x.to_vec())
            .map_err(|e| Error::Data(format!("input shape: {e}")))?;
        Ok(self.forward(&x)?[0])
    }

    /// Arithmetic mean of forward outputs over a batch.
    pub fn mean_output(&self, x: &Array2<f64>) -> Result<f64> {
        if x.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "mean_output needs a nonempty batch".into(),
            ));
        }
        let out = self.forward(x)?;
        Ok(out.sum() / out.len() as f64)
    }

    /// Copy of the model with the scalar output-layer bias overwritten;
    /// every other parameter is unchanged.
    pub fn with_output_bias(&self, value: f64) -> MlpModel {
        let mut model = self.clone();
        let last = model.biases.len() - 1;
        model.biases[last][0] = value;
        model
    }

    pub fn output_bias(&self) -> f64 {
        self.biases[self.biases.len() - 1][0]
    }

    /// Flat parameter vector: per layer, weights row-major then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.spec
            .layer_dims()
            .iter()
            .map(|(fi, fo)| fi * fo + fo)
            .sum()
    }

    /// Overwrite all parameters from a flat vector laid out as
    /// [`MlpModel::parameters`].
    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Shape {
                what: "parameter vector".into(),
                expected: format!("{}", self.parameter_count()),
                got: format!("{}", params.len()),
            });
        }
        let mut offset = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for v in w.iter_mut() {
                *v = params[offset];
                offset += 1;
            }
            for v in b.iter_mut() {
                *v = params[offset];
                offset += 1;
            }
        }
        Ok(())
    }

    /// Order-sensitive hash of the exact parameter bits; equal hashes before
    /// and after an operation certify that no parameter update happened.
    pub fn parameter_hash(&self) -> u64 {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            w.dim().hash(&mut hasher);
            for v in w.iter().chain(b.iter()) {
                v.to_bits().hash(&mut hasher);
            }
        }
        hasher.finish()
    }

    /// Smallest absolute pre-activation across the batch: the distance to
    /// the nearest ReLU kink (and the output `|z|` kink when positivity is
    /// on). The training loss is differentiable at a point only if this is
    /// positive, so finite-difference gradient checks need a margin wider
    /// than their step.
    #[doc(hidden)]
    pub fn kink_margin(&self, x: &Array2<f64>) -> Result<f64> {
        self.check_input(x)?;
        let n_hidden = self.weights.len() - 1;
        let mut margin = f64::INFINITY;
        let mut a = x.clone();
        for k in 0..n_hidden {
            let z = a.dot(&self.weights[k].t()) + &self.biases[k];
            margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
            a = z.mapv(|v| v.max(0.0));
        }
        if self.spec.output_positivity {
            let z_out = a.dot(&self.weights[n_hidden].t()) + &self.biases[n_hidden];
            margin = z_out.iter().fold(margin, |m, v| m.min(v.abs()));
        }
        Ok(margin)
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.spec.input_dim {
            return Err(Error::Shape {
                what: "network input".into(),
                expected: format!("{} columns", self.spec.input_dim),
                got: format!("{}", x.ncols()),
            });
        }
        Ok(())
    }

    /// Forward pass retaining per-layer activations for backprop.
    fn forward_full(&self, x: &Array2<f64>) -> ForwardPass {
        let n_hidden = self.weights.len() - 1;
        let mut hidden: Vec<Array2<f64>> = Vec::with_capacity(n_hidden);
        let mut a = x.dot(&self.weights[0].t()) + &self.biases[0];
        a.mapv_inplace(|v| v.max(0.0));
        hidden.push(a);
        for k in 1..n_hidden {
            let mut z = hidden[k - 1].dot(&self.weights[k].t()) + &self.biases[k];
            z.mapv_inplace(|v| v.max(0.0));
            hidden.push(z);
        }
        let z_out = hidden[n_hidden - 1].dot(&self.weights[n_hidden].t()) + &self.biases[n_hidden];
        let out_pre = z_out.index_axis(Axis(1), 0).to_owned();
        let out = if self.spec.output_positivity {
            out_pre.mapv(f64::abs)
        } else {
            out_pre.clone()
        };
        ForwardPass {
            hidden,
            out_pre,
            out,
        }
    }
}

pub(crate) struct ForwardPass {
    /// Post-ReLU activations of each hidden layer.
    pub hidden: Vec<Array2<f64>>,
    /// Output pre-activation, before the optional `|z|`.
    pub out_pre: Array1<f64>,
    pub out: Array1<f64>,
}

#[derive(Serialize, Deserialize)]
struct LayerDto {
    input_dim: usize,
    output_dim: usize,
    /// Row-major `(output_dim, input_dim)` weight entries.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelDto {
    spec: MlpSpec,
    layers: Vec<LayerDto>,
}

impl From<MlpModel> for ModelDto {
    fn from(m: MlpModel) -> Self {
        let layers = m
            .weights
            .iter()
            .zip(&m.biases)
            .map(|(w, b)| LayerDto {
                input_dim: w.ncols(),
                output_dim: w.nrows(),
                weights: w.iter().copied().collect(),
                bias: b.to_vec(),
            })
            .collect();
        ModelDto {
            spec: m.spec,
            layers,
        }
    }
}

impl TryFrom<ModelDto> for MlpModel {
    type Error = Error;

    fn try_from(dto: ModelDto) -> Result<Self> {
        dto.spec.validate()?;
        let dims = dto.spec.layer_dims();
        if dims.len() != dto.layers.len() {
            return Err(Error::Data(format!(
                "model document has {} layers, spec implies {}",
                dto.layers.len(),
                dims.len()
            )));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for ((fan_in, fan_out), layer) in dims.into_iter().zip(dto.layers) {
            if layer.input_dim != fan_in
                || layer.output_dim != fan_out
                || layer.weights.len() != fan_in * fan_out
                || layer.bias.len() != fan_out
            {
                return Err(Error::Data("layer shapes inconsistent with spec".into()));
            }
            weights.push(
                Array2::from_shape_vec((fan_out, fan_in), layer.weights).expect("checked shape"),
            );
            biases.push(Array1::from_vec(layer.bias));
        }
        Ok(MlpModel {
            spec: dto.spec,
            weights,
            biases,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny_net(input: usize, hidden: Vec<usize>, seed: u64) -> MlpModel {
        MlpModel::init(MlpSpec::new(input).with_hidden(hidden).with_seed(seed)).unwrap()
    }

    #[test]
    fn zero_input_zero_bias_outputs_zero() {
        let mut net = tiny_net(2, vec![2], 0);
        // weights identity-like, all biases zero
        net.set_parameters(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0])
            .unwrap();
        assert_eq!(net.forward_one(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn negative_preactivation_is_clipped() {
        let mut net = tiny_net(1, vec![1], 0);
        // hidden z = x - 1, output passes hidden through
        net.set_parameters(&[1.0, -1.0, 1.0, 0.0]).unwrap();
        assert_eq!(net.forward_one(&[0.0]).unwrap(), 0.0);
        assert_eq!(net.forward_one(&[3.0]).unwrap(), 2.0);
    }

    #[test]
    fn forward_matches_hand_rolled_2_2_1() {
        let net = tiny_net(2, vec![2], 42);
        let p = net.parameters();
        // layout: w1 (2x2 row-major), b1 (2), w2 (1x2), b2 (1)
        let (w1, b1, w2, b2) = (&p[0..4], &p[4..6], &p[6..8], p[8]);
        let x = [0.3, -1.2];
        let h0 = (w1[0] * x[0] + w1[1] * x[1] + b1[0]).max(0.0);
        let h1 = (w1[2] * x[0] + w1[3] * x[1] + b1[1]).max(0.0);
        let expect = w2[0] * h0 + w2[1] * h1 + b2;
        assert_abs_diff_eq!(net.forward_one(&x).unwrap(), expect, epsilon = 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let net = tiny_net(3, vec![4], 1);
        let x = Array2::zeros((2, 2));
        assert!(matches!(net.forward(&x), Err(Error::Shape { .. })));
    }

    #[test]
    fn positivity_gives_nonnegative_outputs() {
        for seed in 0..20 {
            let net = MlpModel::init(
                MlpSpec::new(3)
                    .with_hidden(vec![5])
                    .with_positivity(true)
                    .with_seed(seed),
            )
            .unwrap();
            let x = Array2::from_shape_fn((16, 3), |(r, c)| ((r * 3 + c) as f64 - 20.0) / 4.0);
            assert!(net.forward(&x).unwrap().iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn output_bias_overwrite_only_touches_bias() {
        let net = tiny_net(2, vec![3], 7);
        let before = net.parameters();
        let bumped = net.with_output_bias(2.5);
        assert_eq!(bumped.output_bias(), 2.5);
        let after = bumped.parameters();
        assert_eq!(before.len(), after.len());
        let changed: Vec<usize> = (0..before.len())
            .filter(|i| before[*i] != after[*i])
            .collect();
        assert_eq!(changed, vec![before.len() - 1]);
        // overwriting with the current value is the identity
        let same = net.with_output_bias(net.output_bias());
        assert_eq!(net.parameters(), same.parameters());
    }

    #[test]
    fn zero_weights_with_positivity_returns_abs_bias() {
        let spec = MlpSpec::new(1).with_hidden(vec![2]).with_positivity(true);
        let mut net = MlpModel::init(spec).unwrap();
        net.set_parameters(&vec![0.0; net.parameter_count()])
            .unwrap();
        let net = net.with_output_bias(-3.0);
        assert_eq!(net.forward_one(&[123.0]).unwrap(), 3.0);
    }

    #[test]
    fn mean_output_is_arithmetic_mean() {
        // identity chain: outputs equal inputs for positive inputs
        let mut net = tiny_net(1, vec![1], 0);
        net.set_parameters(&[1.0, 0.0, 1.0, 0.0]).unwrap();
        let x = Array2::from_shape_vec((2, 1), vec![1.0, 3.0]).unwrap();
        assert_eq!(net.mean_output(&x).unwrap(), 2.0);

        // constant net
        let constant = net.with_output_bias(4.0);
        let zeros = Array2::zeros((5, 1));
        assert_eq!(constant.mean_output(&zeros).unwrap(), 4.0);
    }

    #[test]
    fn mean_output_matches_two_pass_accumulation() {
        let net = tiny_net(4, vec![8], 13);
        let x = Array2::from_shape_fn((100, 4), |(r, c)| ((r + 7 * c) as f64).sin());
        let outputs = net.forward(&x).unwrap();
        let mut acc = 0.0;
        for v in outputs.iter() {
            acc += v;
        }
        assert_abs_diff_eq!(net.mean_output(&x).unwrap(), acc / 100.0, epsilon = 1e-12);
    }

    #[test]
    fn mean_output_empty_batch_is_error() {
        let net = tiny_net(2, vec![2], 0);
        let x = Array2::zeros((0, 2));
        assert!(net.mean_output(&x).is_err());
    }

    #[test]
    fn bias_restart_dominates_mean_output_before_retraining() {
        // pretrain on positive targets, then restart a fresh net with the
        // output bias at 10x the pretrained mean output: before any
        // retraining the mean output must stay at least half the bias
        let spec = MlpSpec::new(1)
            .with_hidden(vec![8])
            .with_positivity(true)
            .with_seed(3);
        let x = Array2::from_shape_fn((40, 1), |(r, _)| -1.0 + r as f64 / 20.0);
        let t = x.column(0).mapv(|v| 0.5 + 0.2 * v * v);
        let cfg = TrainConfig {
            epochs: 400,
            ..Default::default()
        };
        let pretrained = MlpModel::init(spec.clone())
            .unwrap()
            .train_mse(&x, &t, &cfg)
            .unwrap();
        let mu = pretrained.mean_output(&x).unwrap();
        assert!(mu > 0.0);

        let restarted = MlpModel::init(spec).unwrap().with_output_bias(10.0 * mu);
        assert!(
            restarted.mean_output(&x).unwrap() >= 5.0 * mu,
            "mean output {} vs pretrained mean {mu}",
            restarted.mean_output(&x).unwrap()
        );
    }

    #[test]
    fn json_round_trip_is_value_exact() {
        let net = MlpModel::init(
            MlpSpec::new(3)
                .with_hidden(vec![4, 2])
                .with_positivity(true)
                .with_penalties(0.02, 0.02)
                .with_seed(99),
        )
        .unwrap();
        let text = serde_json::to_string(&net).unwrap();
        let back: MlpModel = serde_json::from_str(&text).unwrap();
        assert_eq!(net.parameters(), back.parameters());
        assert_eq!(net.spec(), back.spec());
    }

    #[test]
    fn init_rejects_bad_specs() {
        assert!(MlpModel::init(MlpSpec::new(0)).is_err());
        assert!(MlpModel::init(MlpSpec::new(2).with_hidden(vec![])).is_err());
        assert!(MlpModel::init(MlpSpec::new(2).with_hidden(vec![3, 0])).is_err());
        assert!(MlpModel::init(MlpSpec::new(2).with_penalties(-0.1, 0.0)).is_err());
    }
}
