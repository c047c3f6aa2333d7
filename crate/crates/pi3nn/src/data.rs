//! Dataset handling: CSV ingestion, normalization, splitting, and the
//! synthetic cubic generators used by the benchmark commands.

use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A regression dataset: inputs `x` (N x d), targets `y` (N), optional
/// feature names. Rows of `x` pair with entries of `y`. All values are
/// validated to be finite on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Array2<f64>,
    y: Array1<f64>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::Data(
                "dataset must have at least one row and one column".into(),
            ));
        }
        if x.nrows() != y.len() {
            return Err(Error::Shape {
                what: "dataset targets".into(),
                expected: format!("{} rows", x.nrows()),
                got: format!("{} targets", y.len()),
            });
        }
        for ((r, c), v) in x.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite input at row {r}, column {c}"
                )));
            }
        }
        for (r, v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Data(format!("non-finite target at row {r}")));
            }
        }
        Ok(Self {
            x,
            y,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim() {
            return Err(Error::Shape {
                what: "feature names".into(),
                expected: format!("{}", self.dim()),
                got: format!("{}", names.len()),
            });
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    /// Number of samples N.
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Input dimensionality d.
    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    fn column_name(&self, c: usize) -> String {
        match &self.feature_names {
            Some(names) => names[c].clone(),
            None => format!("x{c}"),
        }
    }

    /// Load a comma-separated file with a header row. Every cell must be
    /// numeric. `target` selects the target column by header name, or by
    /// zero-based index when it is all digits and no header matches.
    pub fn load_csv<P: AsRef<Path>>(path: P, target: &str) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::Data(format!("file not found: {}", path.display())));
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)?;
        let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();

        let target_idx = match headers.iter().position(|h| h == target) {
            Some(i) => i,
            None => match target.parse::<usize>() {
                Ok(i) if i < headers.len() => i,
                _ => return Err(Error::MissingTargetColumn(target.to_owned())),
            },
        };
        if headers.len() < 2 {
            return Err(Error::Data(
                "csv needs a target column and at least one feature".into(),
            ));
        }

        let d = headers.len() - 1;
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for (r, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != headers.len() {
                return Err(Error::Data(format!(
                    "row {r} has {} cells, header has {}",
                    record.len(),
                    headers.len()
                )));
            }
            for (c, cell) in record.iter().enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| Error::NonNumericCell {
                    row: r,
                    column: c,
                    value: cell.to_owned(),
                })?;
                if c == target_idx {
                    ys.push(v);
                } else {
                    xs.push(v);
                }
            }
        }
        let n = ys.len();
        if n == 0 {
            return Err(Error::Data("csv contains no data rows".into()));
        }
        let x = Array2::from_shape_vec((n, d), xs)
            .map_err(|e| Error::Data(format!("csv shape: {e}")))?;
        let names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != target_idx)
            .map(|(_, h)| h.clone())
            .collect();
        Dataset::new(x, Array1::from_vec(ys))?.with_feature_names(names)
    }

    /// Write the dataset as CSV: feature columns (named or `x0..`) then `y`.
    /// Floats use the shortest round-trip representation, so save followed by
    /// load reproduces the dataset exactly.
    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..self.dim()).map(|c| self.column_name(c)).collect();
        header.push("y".into());
        writer.write_record(&header)?;
        for (row, &yv) in self.x.rows().into_iter().zip(self.y.iter()) {
            let mut record: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            record.push(format!("{yv}"));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Deterministic shuffled split into disjoint train/test parts.
    /// The test part gets `round(N * test_fraction)` rows, clamped to
    /// `[1, N-1]`.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "test_fraction must be in (0, 1), got {test_fraction}"
            )));
        }
        let n = self.len();
        if n < 2 {
            return Err(Error::Data("need at least 2 rows to split".into()));
        }
        let mut indices: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        indices.shuffle(&mut rng);
        let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
        let (test_idx, train_idx) = indices.split_at(n_test);
        Ok((self.select_rows(train_idx), self.select_rows(test_idx)))
    }

    fn select_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), indices),
            y: self.y.select(Axis(0), indices),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Column-wise standardization of inputs and target to mean 0, population
    /// std 1, computed from this dataset. Constant columns are an error.
    pub fn normalize(&self) -> Result<(Dataset, NormStats)> {
        let n = self.len() as f64;
        let mut x_mean = Vec::with_capacity(self.dim());
        let mut x_std = Vec::with_capacity(self.dim());
        for (c, col) in self.x.columns().into_iter().enumerate() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            if std <= 1e-12 * mean.abs().max(1.0) {
                return Err(Error::ConstantColumn(self.column_name(c)));
            }
            x_mean.push(mean);
            x_std.push(std);
        }
        let y_mean = self.y.sum() / n;
        let y_var = self.y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n;
        let y_std = y_var.sqrt();
        if y_std <= 1e-12 * y_mean.abs().max(1.0) {
            return Err(Error::ConstantColumn("y".into()));
        }
        let stats = NormStats {
            x_mean,
            x_std,
            y_mean,
            y_std,
        };
        Ok((stats.apply(self)?, stats))
    }
}

/// Normalization statistics computed on a training split. Test data is
/// transformed with the same statistics. Std is the population convention
/// (divide by N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub x_mean: Vec<f64>,
    pub x_std: Vec<f64>,
    pub y_mean: f64,
    pub y_std: f64,
}

impl NormStats {
    /// Transform a dataset into normalized coordinates.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let x = self.normalize_x(ds.x())?;
        let y = self.normalize_y(ds.y());
        Ok(Dataset {
            x,
            y,
            feature_names: ds.feature_names.clone(),
        })
    }

    /// Inverse of [`NormStats::apply`].
    pub fn invert(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.dim() != self.x_mean.len() {
            return Err(self.dim_error(ds.dim()));
        }
        let mut x = ds.x().clone();
        for (c, mut col) in x.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| v * self.x_std[c] + self.x_mean[c]);
        }
        let y = self.denormalize_y(ds.y());
        Ok(Dataset {
            x,
            y,
            feature_names: ds.feature_names.clone(),
        })
    }

    pub fn normalize_x(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.x_mean.len() {
            return Err(self.dim_error(x.ncols()));
        }
        let mut out = x.clone();
        for (c, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| (v - self.x_mean[c]) / self.x_std[c]);
        }
        Ok(out)
    }

    pub fn normalize_y(&self, y: &Array1<f64>) -> Array1<f64> {
        y.mapv(|v| (v - self.y_mean) / self.y_std)
    }

    pub fn denormalize_y(&self, y: &Array1<f64>) -> Array1<f64> {
        y.mapv(|v| v * self.y_std + self.y_mean)
    }

    fn dim_error(&self, got: usize) -> Error {
        Error::Shape {
            what: "normalization".into(),
            expected: format!("{} columns", self.x_mean.len()),
            got: format!("{got}"),
        }
    }
}

/// Additive noise model for the synthetic generators.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    /// `epsilon = sigma * zeta`, `zeta ~ N(0, 1)`.
    Gaussian { sigma: f64 },
    /// `epsilon = s(zeta) * zeta` with `s(zeta) = pos_scale` for `zeta >= 0`
    /// and `neg_scale` for `zeta < 0`.
    AsymmetricGaussian { pos_scale: f64, neg_scale: f64 },
}

impl NoiseSpec {
    /// The skewed-noise setting of the 1D cubic benchmark: scales (30, 10).
    pub fn cubic_default() -> Self {
        NoiseSpec::AsymmetricGaussian {
            pos_scale: 30.0,
            neg_scale: 10.0,
        }
    }

    pub fn none() -> Self {
        NoiseSpec::Gaussian { sigma: 0.0 }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            NoiseSpec::Gaussian { sigma } => sigma.is_finite() && *sigma >= 0.0,
            NoiseSpec::AsymmetricGaussian {
                pos_scale,
                neg_scale,
            } => {
                pos_scale.is_finite()
                    && neg_scale.is_finite()
                    && *pos_scale >= 0.0
                    && *neg_scale >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid noise scales: {self:?}"
            )))
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let zeta: f64 = rng.sample(StandardNormal);
        match self {
            NoiseSpec::Gaussian { sigma } => sigma * zeta,
            NoiseSpec::AsymmetricGaussian {
                pos_scale,
                neg_scale,
            } => {
                if zeta >= 0.0 {
                    pos_scale * zeta
                } else {
                    neg_scale * zeta
                }
            }
        }
    }
}

/// 1D cubic benchmark: `y = x^3 + epsilon` with x uniform on `train_range`
/// for the training set and `test_range` for the test set.
pub fn gen_cubic_1d(
    n_train: usize,
    n_test: usize,
    train_range: (f64, f64),
    test_range: (f64, f64),
    noise: &NoiseSpec,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    noise.validate()?;
    if n_train == 0 || n_test == 0 {
        return Err(Error::InvalidArgument(
            "sample counts must be at least 1".into(),
        ));
    }
    for (lo, hi) in [train_range, test_range] {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "invalid range [{lo}, {hi}]"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gen = |n: usize, range: (f64, f64)| -> Result<Dataset> {
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(range.0..range.1)).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| x.powi(3) + noise.sample(&mut rng))
            .collect();
        let x = Array2::from_shape_vec((n, 1), xs).expect("shape n x 1");
        Dataset::new(x, Array1::from_vec(ys))?.with_feature_names(vec!["x".into()])
    };
    let train = gen(n_train, train_range)?;
    let test = gen(n_test, test_range)?;
    Ok((train, test))
}

/// Noise-free part of the 10D cubic benchmark target.
pub fn cubic_10d_mean(x: &[f64]) -> f64 {
    x.iter().map(|v| v.powi(3)).sum::<f64>() / 10.0
}

/// 10D cubic benchmark: inputs i.i.d. `N(input_mean, 1)` per coordinate,
/// `y = (x_1^3 + ... + x_10^3)/10 + epsilon`, `epsilon ~ N(0, noise_sigma^2)`.
/// `input_mean = 0` gives the in-distribution set, `input_mean = 2` the
/// shifted out-of-distribution set.
pub fn gen_cubic_10d(n: usize, input_mean: f64, noise_sigma: f64, seed: u64) -> Result<Dataset> {
    const D: usize = 10;
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample count must be at least 1".into(),
        ));
    }
    if !input_mean.is_finite() || !noise_sigma.is_finite() || noise_sigma < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "invalid generator parameters: mean {input_mean}, sigma {noise_sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n * D);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..D)
            .map(|_| input_mean + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let eps: f64 = noise_sigma * rng.sample::<f64, _>(StandardNormal);
        ys.push(cubic_10d_mean(&row) + eps);
        xs.extend(row);
    }
    let x = Array2::from_shape_vec((n, D), xs).expect("shape n x 10");
    let names = (1..=D).map(|i| format!("x{i}")).collect();
    Dataset::new(x, Array1::from_vec(ys))?.with_feature_names(names)
}
