//! Prediction intervals for regression from three independently MSE-trained
//! feedforward networks.
//!
//! One network fits the conditional mean, a scalar shift moves it to the
//! median, and two positive-output networks fit the one-sided residual
//! magnitudes above and below it. For any confidence level, scale
//! coefficients for the two sides come from exact root-finding on discrete
//! exceedance counts, so a single fit serves every level without retraining
//! and the resulting bands never cross. An optional bias-initialization mode
//! keeps interval widths large away from the training data, which makes
//! width a usable out-of-distribution signal; the crate also ships the
//! matching confidence score and coverage/width metrics.
//!
//! ```no_run
//! use pi3nn::{fit, gen_cubic_1d, MlpSpec, NoiseSpec, OodConfig, TrainConfig};
//!
//! # fn main() -> Result<(), pi3nn::Error> {
//! let (train, test) = gen_cubic_1d(
//!     2000, 500, (-4.0, 4.0), (-7.0, 7.0), &NoiseSpec::cubic_default(), 7,
//! )?;
//! let spec = MlpSpec::new(train.dim()).with_seed(7);
//! let triplet = fit(&train, &spec, &TrainConfig::default(), &OodConfig::disabled())?;
//! let sols = triplet.solve_gammas(&train, &[0.9, 0.95, 0.99])?;
//! let bands = triplet.predict_intervals(&sols, test.x())?;
//! # let _ = bands;
//! # Ok(())
//! # }
//! ```

pub mod data;
pub mod error;
pub mod metrics;
pub mod nnet;
pub mod pipeline;
pub mod rootfind;

pub use data::{cubic_10d_mean, gen_cubic_10d, gen_cubic_1d, Dataset, NoiseSpec, NormStats};
pub use error::{Error, Result};
pub use metrics::{
    coverage_report, mpiw, picp, separation_report, width_distribution, CoverageReport,
    SeparationReport, WidthDistribution, DEFAULT_SEPARATION_THRESHOLD,
};
pub use nnet::{MlpModel, MlpSpec, TrainConfig};
pub use pipeline::{
    fit, target_exceedance_count, write_band_csv, GammaSolution, IntervalBand, OodConfig,
    TrainedTriplet,
};
pub use rootfind::{
    bisect_exceedance, solve_exceedance, solve_median_shift, ExceedanceProblem, RootSolution,
};
