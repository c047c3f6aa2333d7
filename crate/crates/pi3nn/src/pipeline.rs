//! The four-step interval pipeline: fit a mean network, shift it to the
//! median, fit one-sided residual-magnitude networks, then solve discrete
//! root problems for the per-confidence-level scale coefficients. Multiple
//! confidence levels reuse the same trained networks; solving never updates
//! parameters.

use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, NormStats};
use crate::error::{Error, Result};
use crate::nnet::{MlpModel, MlpSpec, TrainConfig};
use crate::rootfind::{solve_exceedance, solve_median_shift, ExceedanceProblem};

/// Seed offsets so the three networks (and their shuffles) draw distinct
/// deterministic streams from one user seed.
const UPPER_SEED_OFFSET: u64 = 1;
const LOWER_SEED_OFFSET: u64 = 2;

/// Out-of-distribution-aware initialization of the residual networks:
/// pretrain with default initialization, then restart training from an
/// output bias set to `factor` times the pretrained mean output. Large
/// initial outputs decay only where training data pulls them down, so
/// interval widths stay wide away from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodConfig {
    pub enabled: bool,
    /// Multiple of the pretrained mean output used as the fresh output bias.
    pub factor: f64,
    /// Epoch budget of the pretraining phase; the retraining phase reuses it.
    pub pretrain_epochs: usize,
}

impl OodConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            factor: 10.0,
            pretrain_epochs: 1,
        }
    }

    pub fn enabled(factor: f64, pretrain_epochs: usize) -> Self {
        Self {
            enabled: true,
            factor,
            pretrain_epochs,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        if !(self.factor.is_finite() && self.factor > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ood factor must be positive, got {}",
                self.factor
            )));
        }
        if self.pretrain_epochs == 0 {
            return Err(Error::InvalidArgument(
                "pretrain_epochs must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Everything needed to form intervals: the three trained networks, the
/// median shift, the normalization statistics, and the index split of the
/// training samples. Immutable after fitting; safe to share across threads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedTriplet {
    f: MlpModel,
    nu: f64,
    u: MlpModel,
    l: MlpModel,
    norm: NormStats,
    d_upper_idx: Vec<usize>,
    d_lower_idx: Vec<usize>,
}

/// One solved confidence level with its scale coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSolution {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Per-sample interval bounds in original target units for one confidence
/// level.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBand {
    pub gamma: f64,
    pub lower: Array1<f64>,
    pub upper: Array1<f64>,
    /// Mean-network prediction.
    pub point_mean: Array1<f64>,
    /// Median prediction (mean network plus shift); always inside the band.
    pub point_median: Array1<f64>,
    pub width: Array1<f64>,
}

impl IntervalBand {
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }
}

/// Exceedance target `ceil(N * (1 - gamma) / 2)` computed exactly for the
/// rationals that drift just above an integer in floating point.
pub fn target_exceedance_count(n: usize, gamma: f64) -> Result<usize> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be in (0, 1), got {gamma}"
        )));
    }
    let raw = n as f64 * (1.0 - gamma) / 2.0;
    let nearest = raw.round();
    let ceiled = if (raw - nearest).abs() < 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        raw.ceil()
    };
    Ok((ceiled as usize).max(1))
}

/// Train the three networks and the median shift.
///
/// Inputs and targets are standardized internally with statistics from
/// `train`; the returned triplet carries them so later calls map back to
/// original units. The three networks draw from seeds `spec.seed`,
/// `spec.seed + 1`, `spec.seed + 2` (and likewise for `cfg.seed`), so one
/// seed pair determines the whole fit.
pub fn fit(
    train: &Dataset,
    spec: &MlpSpec,
    cfg: &TrainConfig,
    ood: &OodConfig,
) -> Result<TrainedTriplet> {
    spec.validate()?;
    cfg.validate()?;
    ood.validate()?;
    if train.len() < 4 {
        return Err(Error::Data(format!(
            "need at least 4 training samples, got {}",
            train.len()
        )));
    }
    if spec.input_dim != train.dim() {
        return Err(Error::Shape {
            what: "fit".into(),
            expected: format!("input_dim {}", train.dim()),
            got: format!("{}", spec.input_dim),
        });
    }

    let (norm_ds, norm) = train.normalize()?;
    let xn = norm_ds.x();
    let yn = norm_ds.y();

    // mean network
    let spec_f = spec.clone().with_positivity(false);
    let f = MlpModel::init(spec_f)?.train_mse(xn, yn, cfg)?;

    // median shift over the residuals
    let f_out = f.forward(xn)?;
    let residuals = (yn - &f_out).to_vec();
    let nu = solve_median_shift(&residuals)?;

    // split into one-sided residual sets; boundary samples go upward
    let mut d_upper_idx = Vec::new();
    let mut d_lower_idx = Vec::new();
    for (i, r) in residuals.iter().enumerate() {
        if *r >= nu {
            d_upper_idx.push(i);
        } else {
            d_lower_idx.push(i);
        }
    }
    if d_upper_idx.is_empty() || d_lower_idx.is_empty() {
        return Err(Error::Data(
            "degenerate split: one residual set is empty".into(),
        ));
    }

    let x_upper = xn.select(Axis(0), &d_upper_idx);
    let t_upper = Array1::from_iter(d_upper_idx.iter().map(|i| residuals[*i] - nu));
    let x_lower = xn.select(Axis(0), &d_lower_idx);
    let t_lower = Array1::from_iter(d_lower_idx.iter().map(|i| nu - residuals[*i]));

    let spec_u = spec
        .clone()
        .with_positivity(true)
        .with_seed(spec.seed.wrapping_add(UPPER_SEED_OFFSET));
    let spec_l = spec
        .clone()
        .with_positivity(true)
        .with_seed(spec.seed.wrapping_add(LOWER_SEED_OFFSET));
    let cfg_u = TrainConfig {
        seed: cfg.seed.wrapping_add(UPPER_SEED_OFFSET),
        ..cfg.clone()
    };
    let cfg_l = TrainConfig {
        seed: cfg.seed.wrapping_add(LOWER_SEED_OFFSET),
        ..cfg.clone()
    };

    let (u, l) = if ood.enabled {
        let u = fit_residual_net_ood(spec_u, &cfg_u, &x_upper, &t_upper, xn, ood)?;
        let l = fit_residual_net_ood(spec_l, &cfg_l, &x_lower, &t_lower, xn, ood)?;
        (u, l)
    } else {
        let u = MlpModel::init(spec_u)?.train_mse(&x_upper, &t_upper, &cfg_u)?;
        let l = MlpModel::init(spec_l)?.train_mse(&x_lower, &t_lower, &cfg_l)?;
        (u, l)
    };

    Ok(TrainedTriplet {
        f,
        nu,
        u,
        l,
        norm,
        d_upper_idx,
        d_lower_idx,
    })
}

/// Pretrain from the default initialization, measure the mean output over
/// the full training inputs, then retrain a fresh network whose output bias
/// starts at `factor` times that mean. Both phases share the epoch budget.
fn fit_residual_net_ood(
    spec: MlpSpec,
    cfg: &TrainConfig,
    x: &Array2<f64>,
    t: &Array1<f64>,
    x_all: &Array2<f64>,
    ood: &OodConfig,
) -> Result<MlpModel> {
    let phase_cfg = TrainConfig {
        epochs: ood.pretrain_epochs,
        ..cfg.clone()
    };
    let pretrained = MlpModel::init(spec.clone())?.train_mse(x, t, &phase_cfg)?;
    let mu = pretrained.mean_output(x_all)?;
    MlpModel::init(spec)?
        .with_output_bias(ood.factor * mu)
        .train_mse(x, t, &phase_cfg)
}

impl TrainedTriplet {
    pub fn mean_net(&self) -> &MlpModel {
        &self.f
    }

    pub fn median_shift(&self) -> f64 {
        self.nu
    }

    pub fn upper_net(&self) -> &MlpModel {
        &self.u
    }

    pub fn lower_net(&self) -> &MlpModel {
        &self.l
    }

    pub fn norm(&self) -> &NormStats {
        &self.norm
    }

    pub fn d_upper_idx(&self) -> &[usize] {
        &self.d_upper_idx
    }

    pub fn d_lower_idx(&self) -> &[usize] {
        &self.d_lower_idx
    }

    /// Combined content hash of the three networks' parameters.
    pub fn parameter_hash(&self) -> u64 {
        self.f
            .parameter_hash()
            .wrapping_mul(31)
            .wrapping_add(self.u.parameter_hash())
            .wrapping_mul(31)
            .wrapping_add(self.l.parameter_hash())
    }

    /// Solve the scale coefficients for each confidence level against the
    /// training set the triplet was fitted on. Pure read-only access to the
    /// networks: the exceedance ratios are computed once and each level is a
    /// sort-based root find.
    ///
    /// The exceedance target is `ceil(N (1 - gamma) / 2)` with `N` the full
    /// training-set size, while counting runs over each half split.
    pub fn solve_gammas(&self, train: &Dataset, gammas: &[f64]) -> Result<Vec<GammaSolution>> {
        let n = train.len();
        let (upper_ratios, lower_ratios) = self.exceedance_ratios(train)?;

        let mut solutions = Vec::with_capacity(gammas.len());
        for &gamma in gammas {
            let k = target_exceedance_count(n, gamma)?;
            let available = upper_ratios.len().min(lower_ratios.len());
            if k > available {
                return Err(Error::InfeasibleGamma {
                    gamma,
                    needed: k,
                    available,
                });
            }
            let alpha = solve_exceedance(&ExceedanceProblem::new(upper_ratios.clone(), k)?)?;
            let beta = solve_exceedance(&ExceedanceProblem::new(lower_ratios.clone(), k)?)?;
            solutions.push(GammaSolution {
                gamma,
                alpha: alpha.value,
                beta: beta.value,
            });
        }
        Ok(solutions)
    }

    /// Residual-to-scale ratios over the two half splits, in normalized
    /// space. Fails if `train` is not the fitting set (ratios must be
    /// positive and finite).
    fn exceedance_ratios(&self, train: &Dataset) -> Result<(Vec<f64>, Vec<f64>)> {
        let xn = self.norm.normalize_x(train.x())?;
        let yn = self.norm.normalize_y(train.y());
        if self
            .d_upper_idx
            .iter()
            .chain(&self.d_lower_idx)
            .any(|i| *i >= train.len())
        {
            return Err(Error::Data(
                "triplet index split does not match this dataset".into(),
            ));
        }
        let f_out = self.f.forward(&xn)?;

        let build = |idx: &[usize], net: &MlpModel, upper: bool| -> Result<Vec<f64>> {
            let xs = xn.select(Axis(0), idx);
            let scale = net.forward(&xs)?;
            let mut ratios = Vec::with_capacity(idx.len());
            for (j, &i) in idx.iter().enumerate() {
                let residual = if upper {
                    yn[i] - f_out[i] - self.nu
                } else {
                    f_out[i] + self.nu - yn[i]
                };
                let ratio = residual / scale[j];
                if !(ratio.is_finite() && ratio > 0.0) {
                    return Err(Error::Data(format!(
                        "exceedance ratio {ratio} at sample {i} is not positive; \
                         solve_gammas must be called with the fitting training set"
                    )));
                }
                ratios.push(ratio);
            }
            Ok(ratios)
        };

        Ok((
            build(&self.d_upper_idx, &self.u, true)?,
            build(&self.d_lower_idx, &self.l, false)?,
        ))
    }

    /// Interval bands for an input batch, one per solution, in original
    /// target units: `upper = f + nu + alpha * u`, `lower = f + nu - beta * l`
    /// evaluated in normalized space and mapped back.
    pub fn predict_intervals(
        &self,
        sols: &[GammaSolution],
        x: &Array2<f64>,
    ) -> Result<Vec<IntervalBand>> {
        let xn = self.norm.normalize_x(x)?;
        let f_out = self.f.forward(&xn)?;
        let u_out = self.u.forward(&xn)?;
        let l_out = self.l.forward(&xn)?;
        let median_n = &f_out + self.nu;

        let point_mean = self.norm.denormalize_y(&f_out);
        let point_median = self.norm.denormalize_y(&median_n);

        let mut bands = Vec::with_capacity(sols.len());
        for sol in sols {
            let upper_n = &median_n + &(u_out.mapv(|v| sol.alpha * v));
            let lower_n = &median_n - &(l_out.mapv(|v| sol.beta * v));
            let upper = self.norm.denormalize_y(&upper_n);
            let lower = self.norm.denormalize_y(&lower_n);
            let width = &upper - &lower;
            bands.push(IntervalBand {
                gamma: sol.gamma,
                lower,
                upper,
                point_mean: point_mean.clone(),
                point_median: point_median.clone(),
                width,
            });
        }
        Ok(bands)
    }

    /// Confidence scores `min(mean training width / width(x), 1)` for an
    /// input batch. Near 1 in distribution; decays as widths grow away from
    /// the training data. Zero-width points are capped at 1.
    pub fn confidence_scores(
        &self,
        sol: &GammaSolution,
        train: &Dataset,
        x: &Array2<f64>,
    ) -> Result<Array1<f64>> {
        let sols = [*sol];
        let train_band = &self.predict_intervals(&sols, train.x())?[0];
        let mpiw_train = train_band.width.sum() / train_band.len() as f64;
        let band = &self.predict_intervals(&sols, x)?[0];
        Ok(band.width.mapv(|w| {
            if w > 0.0 {
                (mpiw_train / w).min(1.0)
            } else {
                1.0
            }
        }))
    }

    pub fn save_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load_json<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

/// Write a band as plot-ready CSV: input columns, then
/// `lower,upper,point,width` where `point` is the mean-network prediction.
pub fn write_band_csv<P: AsRef<Path>>(
    path: P,
    x: &Array2<f64>,
    feature_names: Option<&[String]>,
    band: &IntervalBand,
) -> Result<()> {
    if x.nrows() != band.len() {
        return Err(Error::Shape {
            what: "band csv".into(),
            expected: format!("{} rows", band.len()),
            got: format!("{}", x.nrows()),
        });
    }
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = match feature_names {
        Some(names) => names.to_vec(),
        None => (0..x.ncols()).map(|c| format!("x{c}")).collect(),
    };
    header.extend(["lower", "upper", "point", "width"].map(String::from));
    writer.write_record(&header)?;
    for (i, row) in x.rows().into_iter().enumerate() {
        let mut record: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        record.push(format!("{}", band.lower[i]));
        record.push(format!("{}", band.upper[i]));
        record.push(format!("{}", band.point_mean[i]));
        record.push(format!("{}", band.width[i]));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}
