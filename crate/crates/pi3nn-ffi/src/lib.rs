//! C ABI for the prediction-interval library: opaque handles for datasets
//! and trained triplets, status codes mirroring the library's error
//! categories, and a thread-local message for the last failure.
//!
//! The generated header lives at `include/pi3nn.h`. Every function returning
//! [`pi3nn_status`] stores a message retrievable via [`pi3nn_last_error`] on
//! failure. Handles are freed with their matching `_free` function; output
//! buffers are caller-allocated with the documented lengths.

#![allow(non_camel_case_types)]
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ndarray::{Array1, Array2};
use pi3nn::nnet::{MlpSpec, TrainConfig};
use pi3nn::pipeline::{fit, GammaSolution, OodConfig, TrainedTriplet};
use pi3nn::{Dataset, Error};

/// Outcome of an FFI call. Anything other than `PI3NN_OK` leaves a
/// description in [`pi3nn_last_error`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum pi3nn_status {
    PI3NN_OK = 0,
    /// A required pointer argument was null.
    PI3NN_NULL_ARGUMENT = 1,
    /// A string argument was not valid UTF-8.
    PI3NN_INVALID_UTF8 = 2,
    /// Invalid configuration or argument values.
    PI3NN_CONFIG_ERROR = 3,
    /// Input data problems: files, parsing, non-finite values.
    PI3NN_DATA_ERROR = 4,
    /// A constant column made normalization impossible.
    PI3NN_NORMALIZATION_ERROR = 5,
    /// Training produced a non-finite loss.
    PI3NN_DIVERGENCE = 6,
    /// Duplicated ratios made an exceedance count unreachable.
    PI3NN_TIE_ERROR = 7,
    /// The confidence level asks for more exceedances than samples exist.
    PI3NN_INFEASIBLE_GAMMA = 8,
    /// A panic was caught at the FFI boundary.
    PI3NN_PANIC = 9,
}

/// Opaque dataset handle.
pub struct pi3nn_dataset {
    inner: Dataset,
}

/// Opaque handle for a fitted triplet.
pub struct pi3nn_triplet {
    inner: TrainedTriplet,
}

/// One solved confidence level.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct pi3nn_gamma_solution {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Network architecture and training settings for [`pi3nn_fit`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct pi3nn_fit_config {
    /// Hidden layer widths; null uses a single layer of 100.
    pub hidden_widths: *const usize,
    pub n_hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// 0 trains full-batch.
    pub batch_size: usize,
    pub l1: f64,
    pub l2: f64,
    pub seed: u64,
    /// Enable the OOD-aware bias initialization.
    pub ood_enabled: bool,
    pub ood_factor: f64,
    /// Pretraining epoch budget; 0 reuses `epochs`.
    pub ood_pretrain_epochs: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_for(err: &Error) -> pi3nn_status {
    match err.category() {
        "config-error" => pi3nn_status::PI3NN_CONFIG_ERROR,
        "normalization-error" => pi3nn_status::PI3NN_NORMALIZATION_ERROR,
        "divergence" => pi3nn_status::PI3NN_DIVERGENCE,
        "tie-error" => pi3nn_status::PI3NN_TIE_ERROR,
        "infeasible-gamma" => pi3nn_status::PI3NN_INFEASIBLE_GAMMA,
        _ => pi3nn_status::PI3NN_DATA_ERROR,
    }
}

fn fail(err: Error) -> pi3nn_status {
    let status = status_for(&err);
    set_last_error(&err.to_string());
    status
}

fn null_arg(what: &str) -> pi3nn_status {
    set_last_error(&format!("null pointer argument: {what}"));
    pi3nn_status::PI3NN_NULL_ARGUMENT
}

/// Run a closure, converting panics into `PI3NN_PANIC`.
fn guarded<F: FnOnce() -> pi3nn_status>(body: F) -> pi3nn_status {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic caught at the FFI boundary");
            pi3nn_status::PI3NN_PANIC
        }
    }
}

unsafe fn parse_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, pi3nn_status> {
    if ptr.is_null() {
        return Err(null_arg(what));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error(&format!("{what} is not valid UTF-8"));
        pi3nn_status::PI3NN_INVALID_UTF8
    })
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn pi3nn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn pi3nn_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Build a dataset from a row-major `n x d` input matrix and `n` targets.
#[no_mangle]
pub unsafe extern "C" fn pi3nn_dataset_new(
    x: *const f64,
    n: usize,
    d: usize,
    y: *const f64,
    out: *mut *mut pi3nn_dataset,
) -> pi3nn_status {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        if x.is_null() || y.is_null() {
            return null_arg("x/y");
        }
        if n == 0 || d == 0 {
            return fail(Error::InvalidArgument("n and d must be positive".into()));
        }
        let xs = std::slice::from_raw_parts(x, n * d).to_vec();
        let ys = std::slice::from_raw_parts(y, n).to_vec();
        let x = match Array2::from_shape_vec((n, d), xs) {
            Ok(m) => m,
            Err(e) => return fail(Error::Data(format!("input shape: {e}"))),
        };
        match Dataset::new(x, Array1::from_vec(ys)) {
            Ok(ds) => {
                *out = Box::into_raw(Box::new(pi3nn_dataset { inner: ds }));
                pi3nn_status::PI3NN_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Load a dataset from a headed CSV file; `target` selects the target column
/// by name or zero-based index.
#[no_mangle]
pub unsafe extern "C" fn pi3nn_dataset_from_csv(
    path: *const c_char,
    target: *const c_char,
    out: *mut *mut pi3nn_dataset,
) -> pi3nn_status {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let path = match parse_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let target = match parse_str(target, "target") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match Dataset::load_csv(path, target) {
            Ok(ds) => {
                *out = Box::into_raw(Box::new(pi3nn_dataset { inner: ds }));
                pi3nn_status::PI3NN_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Sample count and input dimensionality of a dataset.
#[no_mangle]
pub unsafe extern "C" fn pi3nn_dataset_shape(
    ds: *const pi3nn_dataset,
    n: *mut usize,
    d: *mut usize,
) -> pi3nn_status {
    guarded(|| {
        if ds.is_null() {
            return null_arg("ds");
        }
        let inner = &(*ds).inner;
        if !n.is_null() {
            *n = inner.len();
        }
        if !d.is_null() {
            *d = inner.dim();
        }
        pi3nn_status::PI3NN_OK
    })
}

#[no_mangle]
pub unsafe extern "C" fn pi3nn_dataset_free(ds: *mut pi3nn_dataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Defaults: one hidden layer of 100, learning rate 0.01, 1000 full-batch
/// epochs, no penalties, OOD initialization off with factor 10.
#[no_mangle]
pub extern "C" fn pi3nn_fit_config_default() -> pi3nn_fit_config {
    pi3nn_fit_config {
        hidden_widths: ptr::null(),
        n_hidden: 0,
        learning_rate: 0.01,
        epochs: 1000,
        batch_size: 0,
        l1: 0.0,
        l2: 0.0,
        seed: 0,
        ood_enabled: false,
        ood_factor: 10.0,
        ood_pretrain_epochs: 0,
    }
}

/// Train the three networks and the median shift on `train`.
#[no_mangle]
pub unsafe extern "C" fn pi3nn_fit(
    train: *const pi3nn_dataset,
    config: *const pi3nn_fit_config,
    out: *mut *mut pi3nn_triplet,
) -> pi3nn_status {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        if train.is_null() || config.is_null() {
            return null_arg("train/config");
        }
        let ds = &(*train).inner;
        let c = &*config;

        let mut spec = MlpSpec::new(ds.dim())
            .with_penalties(c.l1, c.l2)
            .with_seed(c.seed);
        if !c.hidden_widths.is_null() && c.n_hidden > 0 {
            spec =
                spec.with_hidden(std::slice::from_raw_parts(c.hidden_widths, c.n_hidden).to_vec());
        }
        let cfg = TrainConfig {
            learning_rate: c.learning_rate,
            epochs: c.epochs,
            batch_size: if c.batch_size == 0 {
                None
            } else {
                Some(c.batch_size)
            },
            seed: c.seed,
        };
        let ood = if c.ood_enabled {
            let pretrain = if c.ood_pretrain_epochs == 0 {
                c.epochs
            } else {
                c.ood_pretrain_epochs
            };
            OodConfig::enabled(c.ood_factor, pretrain)
        } else {
            OodConfig::disabled()
        };

        match fit(ds, &spec, &cfg, &ood) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(pi3nn_triplet { inner: t }));
                pi3nn_status::PI3NN_OK
            }
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn pi3nn_triplet_free(t: *mut pi3nn_triplet) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// The shift added to the mean network to reach the median.
#[no_mangle]
pub unsafe extern "C" fn pi3nn_triplet_median_shift(t: *const pi3nn_triplet) -> f64 {
    if t.is_null() {
        return f64::NAN;
    }
    (*t).inner.median_shift()
}

#[no_mangle]
pub unsafe extern "C" fn pi3nn_triplet_save_json(
    t: *const pi3nn_triplet,
    path: *const c_char,
) -> pi3nn_status {
    guarded(|| {
        if t.is_null() {
            return null_arg("t");
        }
        let path = match parse_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match (*t).inner.save_json(path) {
            Ok(()) => pi3nn_status::PI3NN_OK,
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn pi3nn_triplet_load_json(
    path: *const c_char,
    out: *mut *mut pi3nn_triplet,
) -> pi3nn_status {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let path = match parse_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match TrainedTriplet::load_json(path) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(pi3nn_triplet { inner: t }));
                pi3nn_status::PI3NN_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Solve the scale coefficients for one confidence level against the
/// training set the triplet was fitted on. Never updates parameters.
#[no_mangle]
pub unsafe extern "C" fn pi3nn_solve_gamma(
    t: *const pi3nn_triplet,
    train: *const pi3nn_dataset,
    gamma: f64,
    out: *mut pi3nn_gamma_solution,
) -> pi3nn_status {
    guarded(|| {
        if t.is_null() || train.is_null() || out.is_null() {
            return null_arg("t/train/out");
        }
        match (*t).inner.solve_gammas(&(*train).inner, &[gamma]) {
            Ok(sols) => {
                let s = sols[0];
                *out = pi3nn_gamma_solution {
                    gamma: s.gamma,
                    alpha: s.alpha,
                    beta: s.beta,
                };
                pi3nn_status::PI3NN_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Interval band for a row-major `n x d` input batch in original target
/// units. Each output buffer must hold `n` doubles; pass null to skip one.
#[no_mangle]
pub unsafe extern "C" fn pi3nn_predict_interval(
    t: *const pi3nn_triplet,
    sol: pi3nn_gamma_solution,
    x: *const f64,
    n: usize,
    d: usize,
    lower: *mut f64,
    upper: *mut f64,
    point_mean: *mut f64,
    point_median: *mut f64,
    width: *mut f64,
) -> pi3nn_status {
    guarded(|| {
        if t.is_null() || x.is_null() {
            return null_arg("t/x");
        }
        if n == 0 || d == 0 {
            return fail(Error::InvalidArgument("n and d must be positive".into()));
        }
        let xs = std::slice::from_raw_parts(x, n * d).to_vec();
        let x = match Array2::from_shape_vec((n, d), xs) {
            Ok(m) => m,
            Err(e) => return fail(Error::Data(format!("input shape: {e}"))),
        };
        let sols = [GammaSolution {
            gamma: sol.gamma,
            alpha: sol.alpha,
            beta: sol.beta,
        }];
        let band = match (*t).inner.predict_intervals(&sols, &x) {
            Ok(mut bands) => bands.remove(0),
            Err(e) => return fail(e),
        };
        let copy_out = |dst: *mut f64, src: &Array1<f64>| {
            if !dst.is_null() {
                ptr::copy_nonoverlapping(src.as_ptr(), dst, n);
            }
        };
        copy_out(lower, &band.lower);
        copy_out(upper, &band.upper);
        copy_out(point_mean, &band.point_mean);
        copy_out(point_median, &band.point_median);
        copy_out(width, &band.width);
        pi3nn_status::PI3NN_OK
    })
}

/// Confidence scores `min(mean training width / width(x), 1)` for a
/// row-major `n x d` batch; `scores` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn pi3nn_confidence_scores(
    t: *const pi3nn_triplet,
    sol: pi3nn_gamma_solution,
    train: *const pi3nn_dataset,
    x: *const f64,
    n: usize,
    d: usize,
    scores: *mut f64,
) -> pi3nn_status {
    guarded(|| {
        if t.is_null() || train.is_null() || x.is_null() || scores.is_null() {
            return null_arg("t/train/x/scores");
        }
        if n == 0 || d == 0 {
            return fail(Error::InvalidArgument("n and d must be positive".into()));
        }
        let xs = std::slice::from_raw_parts(x, n * d).to_vec();
        let x = match Array2::from_shape_vec((n, d), xs) {
            Ok(m) => m,
            Err(e) => return fail(Error::Data(format!("input shape: {e}"))),
        };
        let s = GammaSolution {
            gamma: sol.gamma,
            alpha: sol.alpha,
            beta: sol.beta,
        };
        match (*t).inner.confidence_scores(&s, &(*train).inner, &x) {
            Ok(v) => {
                ptr::copy_nonoverlapping(v.as_ptr(), scores, n);
                pi3nn_status::PI3NN_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Coverage: fraction of targets with `lower[i] <= y[i] <= upper[i]`.
#[no_mangle]
pub unsafe extern "C" fn pi3nn_picp(
    lower: *const f64,
    upper: *const f64,
    y: *const f64,
    n: usize,
    out: *mut f64,
) -> pi3nn_status {
    guarded(|| {
        if lower.is_null() || upper.is_null() || y.is_null() || out.is_null() {
            return null_arg("lower/upper/y/out");
        }
        if n == 0 {
            return fail(Error::InvalidArgument("n must be positive".into()));
        }
        let lo = std::slice::from_raw_parts(lower, n);
        let hi = std::slice::from_raw_parts(upper, n);
        let ys = std::slice::from_raw_parts(y, n);
        let inside = ys
            .iter()
            .enumerate()
            .filter(|(i, v)| lo[*i] <= **v && **v <= hi[*i])
            .count();
        *out = inside as f64 / n as f64;
        pi3nn_status::PI3NN_OK
    })
}

/// Mean interval width of `upper - lower`.
#[no_mangle]
pub unsafe extern "C" fn pi3nn_mpiw(
    lower: *const f64,
    upper: *const f64,
    n: usize,
    out: *mut f64,
) -> pi3nn_status {
    guarded(|| {
        if lower.is_null() || upper.is_null() || out.is_null() {
            return null_arg("lower/upper/out");
        }
        if n == 0 {
            return fail(Error::InvalidArgument("n must be positive".into()));
        }
        let lo = std::slice::from_raw_parts(lower, n);
        let hi = std::slice::from_raw_parts(upper, n);
        *out = lo.iter().zip(hi).map(|(l, u)| u - l).sum::<f64>() / n as f64;
        pi3nn_status::PI3NN_OK
    })
}
