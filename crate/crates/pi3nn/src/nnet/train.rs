//! MSE training with an adaptive-moment update rule.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::MlpModel;
use crate::error::{Error, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Optimization settings. `batch_size: None` trains full-batch, the default
/// for the small datasets this crate targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: Option<usize>,
    /// Seed for mini-batch shuffling; irrelevant for full-batch runs.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 1000,
            batch_size: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::InvalidArgument(
                "batch_size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-layer gradients, same shapes as the parameters.
struct Grads {
    w: Vec<Array2<f64>>,
    b: Vec<Array1<f64>>,
}

struct AdamState {
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
    step: i32,
}

impl AdamState {
    fn new(model: &MlpModel) -> Self {
        Self {
            m_w: model
                .weights
                .iter()
                .map(|w| Array2::zeros(w.dim()))
                .collect(),
            v_w: model
                .weights
                .iter()
                .map(|w| Array2::zeros(w.dim()))
                .collect(),
            m_b: model
                .biases
                .iter()
                .map(|b| Array1::zeros(b.dim()))
                .collect(),
            v_b: model
                .biases
                .iter()
                .map(|b| Array1::zeros(b.dim()))
                .collect(),
            step: 0,
        }
    }

    fn apply(&mut self, model: &mut MlpModel, grads: &Grads, lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - BETA1.powi(self.step);
        let bc2 = 1.0 - BETA2.powi(self.step);
        for k in 0..model.weights.len() {
            update_tensor(
                &mut model.weights[k],
                &grads.w[k],
                &mut self.m_w[k],
                &mut self.v_w[k],
                lr,
                bc1,
                bc2,
            );
            update_vector(
                &mut model.biases[k],
                &grads.b[k],
                &mut self.m_b[k],
                &mut self.v_b[k],
                lr,
                bc1,
                bc2,
            );
        }
    }
}

fn adam_delta(g: f64, m: &mut f64, v: &mut f64, lr: f64, bc1: f64, bc2: f64) -> f64 {
    *m = BETA1 * *m + (1.0 - BETA1) * g;
    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
    lr * (*m / bc1) / ((*v / bc2).sqrt() + ADAM_EPS)
}

fn update_tensor(
    p: &mut Array2<f64>,
    g: &Array2<f64>,
    m: &mut Array2<f64>,
    v: &mut Array2<f64>,
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    Zip::from(p).and(g).and(m).and(v).for_each(|p, g, m, v| {
        *p -= adam_delta(*g, m, v, lr, bc1, bc2);
    });
}

fn update_vector(
    p: &mut Array1<f64>,
    g: &Array1<f64>,
    m: &mut Array1<f64>,
    v: &mut Array1<f64>,
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    Zip::from(p).and(g).and(m).and(v).for_each(|p, g, m, v| {
        *p -= adam_delta(*g, m, v, lr, bc1, bc2);
    });
}

impl MlpModel {
    /// Train on `(x, y)` with MSE loss plus the [`crate::nnet::MlpSpec`] L1/L2 weight
    /// penalties, returning the updated model. Given identical data, spec,
    /// and config the result is bitwise reproducible.
    pub fn train_mse(
        &self,
        x: &Array2<f64>,
        y: &Array1<f64>,
        cfg: &TrainConfig,
    ) -> Result<MlpModel> {
        cfg.validate()?;
        self.check_training_data(x, y)?;

        let mut model = self.clone();
        let mut adam = AdamState::new(&model);
        let n = x.nrows();
        let batch = cfg.batch_size.unwrap_or(n).min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut indices: Vec<usize> = (0..n).collect();

        for epoch in 0..cfg.epochs {
            if batch == n {
                let (loss, grads) = model.loss_and_grads(x, y);
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch });
                }
                adam.apply(&mut model, &grads, cfg.learning_rate);
            } else {
                indices.shuffle(&mut rng);
                for chunk in indices.chunks(batch) {
                    let xb = x.select(Axis(0), chunk);
                    let yb = y.select(Axis(0), chunk);
                    let (loss, grads) = model.loss_and_grads(&xb, &yb);
                    if !loss.is_finite() {
                        return Err(Error::Divergence { epoch });
                    }
                    adam.apply(&mut model, &grads, cfg.learning_rate);
                }
            }
        }
        Ok(model)
    }

    /// Training objective at the current parameters: mean squared error plus
    /// weight penalties. This is exactly the function whose gradient
    /// [`MlpModel::loss_gradient`] returns.
    pub fn loss(&self, x: &Array2<f64>, y: &Array1<f64>) -> Result<f64> {
        self.check_training_data(x, y)?;
        let out = self.forward(x)?;
        let mse = (&out - y).mapv(|d| d * d).sum() / y.len() as f64;
        Ok(mse + self.penalty())
    }

    /// Analytic gradient of [`MlpModel::loss`] as a flat vector aligned with
    /// [`MlpModel::parameters`], plus the loss value.
    pub fn loss_gradient(&self, x: &Array2<f64>, y: &Array1<f64>) -> Result<(f64, Vec<f64>)> {
        self.check_training_data(x, y)?;
        let (loss, grads) = self.loss_and_grads(x, y);
        let mut flat = Vec::with_capacity(self.parameter_count());
        for (w, b) in grads.w.iter().zip(&grads.b) {
            flat.extend(w.iter());
            flat.extend(b.iter());
        }
        Ok((loss, flat))
    }

    fn check_training_data(&self, x: &Array2<f64>, y: &Array1<f64>) -> Result<()> {
        self.check_input(x)?;
        if x.nrows() == 0 {
            return Err(Error::Data("training data is empty".into()));
        }
        if x.nrows() != y.len() {
            return Err(Error::Shape {
                what: "training targets".into(),
                expected: format!("{} rows", x.nrows()),
                got: format!("{}", y.len()),
            });
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("training data contains NaN or Inf".into()));
        }
        Ok(())
    }

    fn penalty(&self) -> f64 {
        let l1 = self.spec.l1;
        let l2 = self.spec.l2;
        if l1 == 0.0 && l2 == 0.0 {
            return 0.0;
        }
        let mut p = 0.0;
        for w in &self.weights {
            for v in w.iter() {
                p += l1 * v.abs() + l2 * v * v;
            }
        }
        p
    }

    /// Backpropagation through the dense/ReLU stack. The subgradient of the
    /// output `|z|` at `z = 0` is taken as 0, as is the ReLU subgradient.
    fn loss_and_grads(&self, x: &Array2<f64>, y: &Array1<f64>) -> (f64, Grads) {
        let n_layers = self.weights.len();
        let n_hidden = n_layers - 1;
        let batch = x.nrows() as f64;
        let fp = self.forward_full(x);

        let diff = &fp.out - y;
        let mse = diff.mapv(|d| d * d).sum() / batch;
        let loss = mse + self.penalty();

        // d(loss)/d(out_pre), folding in the |z| transform when present
        let mut dz_out = diff.mapv(|d| 2.0 * d / batch);
        if self.spec.output_positivity {
            Zip::from(&mut dz_out).and(&fp.out_pre).for_each(|d, z| {
                *d *= if *z > 0.0 {
                    1.0
                } else if *z < 0.0 {
                    -1.0
                } else {
                    0.0
                };
            });
        }
        let dz_out = dz_out.insert_axis(Axis(1));

        let mut gw: Vec<Array2<f64>> = Vec::with_capacity(n_layers);
        let mut gb: Vec<Array1<f64>> = Vec::with_capacity(n_layers);

        let a_prev = &fp.hidden[n_hidden - 1];
        gw.push(dz_out.t().dot(a_prev));
        gb.push(dz_out.sum_axis(Axis(0)));
        let mut da = dz_out.dot(&self.weights[n_layers - 1]);

        for k in (0..n_hidden).rev() {
            let mut dz = da;
            Zip::from(&mut dz).and(&fp.hidden[k]).for_each(|d, a| {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            });
            let below: &Array2<f64> = if k == 0 { x } else { &fp.hidden[k - 1] };
            gw.push(dz.t().dot(below));
            gb.push(dz.sum_axis(Axis(0)));
            da = dz.dot(&self.weights[k]);
        }

        gw.reverse();
        gb.reverse();

        // weight penalties
        if self.spec.l1 != 0.0 || self.spec.l2 != 0.0 {
            let (l1, l2) = (self.spec.l1, self.spec.l2);
            for (g, w) in gw.iter_mut().zip(&self.weights) {
                Zip::from(g).and(w).for_each(|g, w| {
                    *g += l1 * w.signum_or_zero() + 2.0 * l2 * w;
                });
            }
        }

        (loss, Grads { w: gw, b: gb })
    }
}

trait SignumOrZero {
    fn signum_or_zero(&self) -> f64;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(&self) -> f64 {
        if *self > 0.0 {
            1.0
        } else if *self < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::MlpSpec;
    use ndarray::{Array1, Array2};

    fn grid(n: usize, lo: f64, hi: f64) -> Array2<f64> {
        Array2::from_shape_fn((n, 1), |(r, _)| lo + (hi - lo) * r as f64 / (n - 1) as f64)
    }

    #[test]
    fn fits_constant_target() {
        let x = grid(32, 0.0, 1.0);
        let y = Array1::from_elem(32, 3.0);
        let net = MlpModel::init(MlpSpec::new(1).with_hidden(vec![16]).with_seed(5)).unwrap();
        let cfg = TrainConfig {
            epochs: 2000,
            ..Default::default()
        };
        let trained = net.train_mse(&x, &y, &cfg).unwrap();
        let mse = trained.loss(&x, &y).unwrap();
        assert!(mse < 1e-3, "mse = {mse}");
        for p in trained.forward(&x).unwrap() {
            assert!((p - 3.0).abs() < 0.05, "prediction {p}");
        }
    }

    #[test]
    fn fits_linear_target_on_holdout() {
        let x = grid(64, 0.0, 1.0);
        let y = x.column(0).mapv(|v| 2.0 * v);
        let net = MlpModel::init(MlpSpec::new(1).with_hidden(vec![100]).with_seed(3)).unwrap();
        let cfg = TrainConfig {
            epochs: 800,
            ..Default::default()
        };
        let trained = net.train_mse(&x, &y, &cfg).unwrap();

        // hold-out oracle: fresh grid, closed-form targets
        let xt = grid(33, 0.01, 0.99);
        let yt = xt.column(0).mapv(|v| 2.0 * v);
        let pred = trained.forward(&xt).unwrap();
        let mse = (&pred - &yt).mapv(|d| d * d).sum() / 33.0;
        assert!(mse < 1e-2, "holdout mse = {mse}");
    }

    #[test]
    fn training_reduces_loss() {
        let x = grid(64, -1.0, 1.0);
        let y = x.column(0).mapv(|v| v * v);
        let net = MlpModel::init(MlpSpec::new(1).with_hidden(vec![20]).with_seed(7)).unwrap();
        let before = net.loss(&x, &y).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            ..Default::default()
        };
        let after = net.train_mse(&x, &y, &cfg).unwrap().loss(&x, &y).unwrap();
        assert!(after <= before, "{after} > {before}");
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let spec = MlpSpec::new(2)
            .with_hidden(vec![3])
            .with_positivity(true)
            .with_penalties(0.01, 0.01)
            .with_seed(11);
        let net = MlpModel::init(spec).unwrap();
        let x = Array2::from_shape_vec((3, 2), vec![0.4, -0.2, 1.1, 0.5, -0.7, 0.9]).unwrap();
        let y = Array1::from_vec(vec![0.3, 1.2, 0.8]);

        let (_, grad) = net.loss_gradient(&x, &y).unwrap();
        let params = net.parameters();
        let h = 1e-5;
        for i in 0..params.len() {
            let mut plus = net.clone();
            let mut minus = net.clone();
            let mut pp = params.clone();
            pp[i] += h;
            plus.set_parameters(&pp).unwrap();
            pp[i] -= 2.0 * h;
            minus.set_parameters(&pp).unwrap();
            let fd = (plus.loss(&x, &y).unwrap() - minus.loss(&x, &y).unwrap()) / (2.0 * h);
            let denom = fd.abs().max(grad[i].abs()).max(1e-8);
            assert!(
                (fd - grad[i]).abs() / denom < 1e-4,
                "param {i}: analytic {} vs fd {fd}",
                grad[i]
            );
        }
    }

    #[test]
    fn rejects_non_finite_training_data() {
        let net = MlpModel::init(MlpSpec::new(1).with_hidden(vec![2])).unwrap();
        let x = Array2::from_shape_vec((2, 1), vec![0.0, f64::NAN]).unwrap();
        let y = Array1::from_vec(vec![0.0, 1.0]);
        assert!(matches!(
            net.train_mse(&x, &y, &TrainConfig::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn divergence_names_the_epoch() {
        let x = grid(8, 0.0, 1.0);
        let y = x.column(0).mapv(|v| v * 1e150);
        let net = MlpModel::init(MlpSpec::new(1).with_hidden(vec![4]).with_seed(2)).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e300,
            epochs: 50,
            ..Default::default()
        };
        match net.train_mse(&x, &y, &cfg) {
            Err(Error::Divergence { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn training_is_bitwise_reproducible() {
        let x = grid(40, -2.0, 2.0);
        let y = x.column(0).mapv(|v| v.powi(3));
        let cfg = TrainConfig {
            epochs: 60,
            batch_size: Some(8),
            seed: 21,
            ..Default::default()
        };
        let spec = MlpSpec::new(1).with_hidden(vec![10]).with_seed(9);
        let a = MlpModel::init(spec.clone())
            .unwrap()
            .train_mse(&x, &y, &cfg)
            .unwrap();
        let b = MlpModel::init(spec)
            .unwrap()
            .train_mse(&x, &y, &cfg)
            .unwrap();
        assert_eq!(a.parameters(), b.parameters());
        assert_eq!(a.parameter_hash(), b.parameter_hash());
    }

    #[test]
    fn l2_penalty_shrinks_weight_norms() {
        let x = grid(32, -1.0, 1.0);
        let y = x.column(0).mapv(|v| 3.0 * v + 1.0);
        let cfg = TrainConfig {
            epochs: 300,
            ..Default::default()
        };
        let norm = |m: &MlpModel| m.parameters().iter().map(|v| v * v).sum::<f64>().sqrt();

        let plain = MlpModel::init(MlpSpec::new(1).with_hidden(vec![12]).with_seed(4))
            .unwrap()
            .train_mse(&x, &y, &cfg)
            .unwrap();
        let penalized = MlpModel::init(
            MlpSpec::new(1)
                .with_hidden(vec![12])
                .with_penalties(0.0, 0.05)
                .with_seed(4),
        )
        .unwrap()
        .train_mse(&x, &y, &cfg)
        .unwrap();
        assert!(norm(&penalized) < norm(&plain));
    }
}
