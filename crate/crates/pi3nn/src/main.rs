//! Command-line front end: train a triplet, solve interval bands for a list
//! of confidence levels, and reproduce the 10D out-of-distribution
//! benchmark. Every command is a pure function of its flags and seed:
//! rerunning a config writes byte-identical artifacts.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array1;
use serde::Serialize;

use pi3nn::data::{gen_cubic_10d, gen_cubic_1d, Dataset, NoiseSpec};
use pi3nn::error::{Error, Result};
use pi3nn::metrics::{
    coverage_report, separation_report, width_distribution, write_histogram_csv, CoverageReport,
    SeparationReport, DEFAULT_SEPARATION_THRESHOLD,
};
use pi3nn::nnet::{MlpSpec, TrainConfig};
use pi3nn::pipeline::{fit, write_band_csv, OodConfig};

/// Seed offset separating test-set generation from training-set generation.
const TEST_SEED_OFFSET: u64 = 1_000_003;

#[derive(Parser)]
#[command(
    name = "pi3nn",
    version,
    about = "Prediction intervals from three MSE-trained networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a CSV file or a synthetic generator, solve the requested
    /// confidence levels, and write triplet, band, and report artifacts.
    Run(RunArgs),
    /// 10D cubic benchmark: fit with the OOD initialization on and off and
    /// report width separation and confidence scores for both modes.
    OodBench(OodBenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Cubic1d,
    Cubic10d,
}

#[derive(Args)]
struct NetArgs {
    /// Comma-separated hidden layer widths
    #[arg(long, value_delimiter = ',', default_value = "100")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Mini-batch size; omit for full-batch training
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    l1: f64,
    #[arg(long, default_value_t = 0.0)]
    l2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl NetArgs {
    fn spec(&self, input_dim: usize) -> MlpSpec {
        MlpSpec::new(input_dim)
            .with_hidden(self.hidden.clone())
            .with_penalties(self.l1, self.l2)
            .with_seed(self.seed)
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// CSV file with a header row; every cell numeric
    #[arg(long, conflicts_with = "gen")]
    csv: Option<PathBuf>,
    /// Target column of the CSV, by name or zero-based index
    #[arg(long, requires = "csv")]
    target: Option<String>,
    /// Held-out fraction when splitting CSV data
    #[arg(long, default_value_t = 0.1)]
    test_fraction: f64,
    /// Synthetic generator instead of a CSV
    #[arg(long, value_enum)]
    gen: Option<Generator>,
    #[arg(long, default_value_t = 2000)]
    n_train: usize,
    #[arg(long, default_value_t = 1000)]
    n_test: usize,
    /// cubic1d noise: `asym:POS,NEG`, `gauss:SIGMA`, or `none`
    #[arg(long, default_value = "asym:30,10")]
    noise: String,
    /// cubic10d input-coordinate mean
    #[arg(long, default_value_t = 0.0)]
    input_mean: f64,
    /// cubic10d noise standard deviation
    #[arg(long, default_value_t = 1.0)]
    noise_sigma: f64,
    /// Comma-separated confidence levels in (0, 1)
    #[arg(long, value_delimiter = ',', default_value = "0.9,0.95,0.99")]
    gammas: Vec<f64>,
    #[command(flatten)]
    net: NetArgs,
    /// Enable the OOD-aware bias initialization
    #[arg(long)]
    ood: bool,
    /// Output-bias multiple used by the OOD initialization
    #[arg(long, default_value_t = 10.0)]
    ood_factor: f64,
    /// Pretraining epoch budget of the OOD initialization; defaults to --epochs
    #[arg(long)]
    pretrain_epochs: Option<usize>,
    /// Directory for artifacts (created if missing)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OodBenchArgs {
    #[arg(long, default_value_t = 5000)]
    n_train: usize,
    #[arg(long, default_value_t = 1000)]
    n_ood: usize,
    /// Confidence level used for widths and scores
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value_t = 10.0)]
    ood_factor: f64,
    /// Pretraining epoch budget of the OOD initialization; defaults to --epochs
    #[arg(long)]
    pretrain_epochs: Option<usize>,
    /// Histogram bins for the width distributions
    #[arg(long, default_value_t = 30)]
    bins: usize,
    #[command(flatten)]
    net: NetArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct RunReport {
    seed: u64,
    gammas: Vec<f64>,
    n_train: usize,
    n_test: usize,
    median_shift: f64,
    train: Vec<CoverageReport>,
    test: Vec<CoverageReport>,
}

#[derive(Serialize)]
struct ModeReport {
    ood_initialization: bool,
    ind_confidence_mean: f64,
    ind_confidence_std: f64,
    ood_confidence_mean: f64,
    ood_confidence_std: f64,
    ind_mpiw: f64,
    ood_mpiw: f64,
    alpha: f64,
    beta: f64,
    separation: SeparationReport,
}

#[derive(Serialize)]
struct OodBenchReport {
    seed: u64,
    gamma: f64,
    n_train: usize,
    n_ood: usize,
    ood_factor: f64,
    with_ood: ModeReport,
    without_ood: ModeReport,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::OodBench(args) => cmd_ood_bench(&args),
    };
    if let Err(err) = result {
        eprintln!("{}: {err}", err.category());
        std::process::exit(err.exit_code());
    }
}

/// Validate, sort ascending, and deduplicate the confidence levels.
fn normalize_gammas(gammas: &[f64]) -> Result<Vec<f64>> {
    if gammas.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one gamma is required".into(),
        ));
    }
    for g in gammas {
        if !(g.is_finite() && *g > 0.0 && *g < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be in (0, 1), got {g}"
            )));
        }
    }
    let mut sorted = gammas.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite gammas"));
    sorted.dedup();
    Ok(sorted)
}

fn parse_noise(text: &str) -> Result<NoiseSpec> {
    let bad = || Error::InvalidArgument(format!("cannot parse noise spec {text:?}"));
    if text == "none" {
        return Ok(NoiseSpec::none());
    }
    if let Some(rest) = text.strip_prefix("gauss:") {
        let sigma: f64 = rest.parse().map_err(|_| bad())?;
        return Ok(NoiseSpec::Gaussian { sigma });
    }
    if let Some(rest) = text.strip_prefix("asym:") {
        let (pos, neg) = rest.split_once(',').ok_or_else(bad)?;
        return Ok(NoiseSpec::AsymmetricGaussian {
            pos_scale: pos.parse().map_err(|_| bad())?,
            neg_scale: neg.parse().map_err(|_| bad())?,
        });
    }
    Err(bad())
}

fn load_run_data(args: &RunArgs) -> Result<(Dataset, Dataset)> {
    match (&args.csv, args.gen) {
        (Some(path), None) => {
            let target = args
                .target
                .as_deref()
                .ok_or_else(|| Error::InvalidArgument("--target is required with --csv".into()))?;
            let ds = Dataset::load_csv(path, target)?;
            ds.split(args.test_fraction, args.net.seed)
        }
        (None, Some(Generator::Cubic1d)) => gen_cubic_1d(
            args.n_train,
            args.n_test,
            (-4.0, 4.0),
            (-7.0, 7.0),
            &parse_noise(&args.noise)?,
            args.net.seed,
        ),
        (None, Some(Generator::Cubic10d)) => {
            let train = gen_cubic_10d(
                args.n_train,
                args.input_mean,
                args.noise_sigma,
                args.net.seed,
            )?;
            let test = gen_cubic_10d(
                args.n_test,
                args.input_mean,
                args.noise_sigma,
                args.net.seed.wrapping_add(TEST_SEED_OFFSET),
            )?;
            Ok((train, test))
        }
        _ => Err(Error::InvalidArgument(
            "exactly one of --csv or --gen is required".into(),
        )),
    }
}

fn write_json<P: AsRef<Path>, T: Serialize>(path: P, value: &T) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), value)?;
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let gammas = normalize_gammas(&args.gammas)?;
    let (train, test) = load_run_data(args)?;
    std::fs::create_dir_all(&args.out)?;

    let spec = args.net.spec(train.dim());
    let cfg = args.net.train_config();
    let ood = if args.ood {
        OodConfig::enabled(
            args.ood_factor,
            args.pretrain_epochs.unwrap_or(args.net.epochs),
        )
    } else {
        OodConfig::disabled()
    };

    let triplet = fit(&train, &spec, &cfg, &ood)?;
    let solutions = triplet.solve_gammas(&train, &gammas)?;
    let train_bands = triplet.predict_intervals(&solutions, train.x())?;
    let test_bands = triplet.predict_intervals(&solutions, test.x())?;

    triplet.save_json(args.out.join("triplet.json"))?;
    for band in &test_bands {
        let name = format!("band_gamma_{}.csv", band.gamma);
        write_band_csv(args.out.join(name), test.x(), test.feature_names(), band)?;
    }

    let report = RunReport {
        seed: args.net.seed,
        gammas: gammas.clone(),
        n_train: train.len(),
        n_test: test.len(),
        median_shift: triplet.median_shift(),
        train: train_bands
            .iter()
            .map(|b| coverage_report(b, train.y()))
            .collect::<Result<_>>()?,
        test: test_bands
            .iter()
            .map(|b| coverage_report(b, test.y()))
            .collect::<Result<_>>()?,
    };
    write_json(args.out.join("report.json"), &report)?;

    for (tr, te) in report.train.iter().zip(&report.test) {
        println!(
            "gamma {:.3}: train picp {:.4} mpiw {:.4} | test picp {:.4} mpiw {:.4}",
            tr.gamma, tr.picp, tr.mpiw, te.picp, te.mpiw
        );
    }
    Ok(())
}

fn mean_std(values: &Array1<f64>) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.sum() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn cmd_ood_bench(args: &OodBenchArgs) -> Result<()> {
    let gammas = normalize_gammas(&[args.gamma])?;
    std::fs::create_dir_all(&args.out)?;

    let train = gen_cubic_10d(args.n_train, 0.0, 1.0, args.net.seed)?;
    let ood_set = gen_cubic_10d(
        args.n_ood,
        2.0,
        1.0,
        args.net.seed.wrapping_add(TEST_SEED_OFFSET),
    )?;

    let spec = args.net.spec(train.dim());
    let cfg = args.net.train_config();

    let mut reports = Vec::new();
    for enabled in [true, false] {
        let ood_cfg = if enabled {
            OodConfig::enabled(
                args.ood_factor,
                args.pretrain_epochs.unwrap_or(args.net.epochs),
            )
        } else {
            OodConfig::disabled()
        };
        let triplet = fit(&train, &spec, &cfg, &ood_cfg)?;
        let solutions = triplet.solve_gammas(&train, &gammas)?;
        let sol = solutions[0];

        let ind_band = &triplet.predict_intervals(&solutions, train.x())?[0];
        let ood_band = &triplet.predict_intervals(&solutions, ood_set.x())?[0];
        let ind_dist = width_distribution(ind_band, args.bins)?;
        let ood_dist = width_distribution(ood_band, args.bins)?;

        let mode = if enabled { "on" } else { "off" };
        write_histogram_csv(
            args.out.join(format!("widths_ind_ood_{mode}.csv")),
            &ind_dist,
        )?;
        write_histogram_csv(
            args.out.join(format!("widths_ood_ood_{mode}.csv")),
            &ood_dist,
        )?;

        let (ind_mean, ind_std) = mean_std(&triplet.confidence_scores(&sol, &train, train.x())?);
        let (ood_mean, ood_std) =
            mean_std(&triplet.confidence_scores(&sol, &train, ood_set.x())?);

        reports.push(ModeReport {
            ood_initialization: enabled,
            ind_confidence_mean: ind_mean,
            ind_confidence_std: ind_std,
            ood_confidence_mean: ood_mean,
            ood_confidence_std: ood_std,
            ind_mpiw: ind_dist.mean,
            ood_mpiw: ood_dist.mean,
            alpha: sol.alpha,
            beta: sol.beta,
            separation: separation_report(&ind_dist, &ood_dist, DEFAULT_SEPARATION_THRESHOLD),
        });
    }

    let without_ood = reports.pop().expect("two modes");
    let with_ood = reports.pop().expect("two modes");
    let report = OodBenchReport {
        seed: args.net.seed,
        gamma: args.gamma,
        n_train: args.n_train,
        n_ood: args.n_ood,
        ood_factor: args.ood_factor,
        with_ood,
        without_ood,
    };
    write_json(args.out.join("ood_report.json"), &report)?;

    for mode in [&report.with_ood, &report.without_ood] {
        println!(
            "ood init {}: InD score {:.3} +- {:.3}, OOD score {:.3} +- {:.3}, width ratio {:.3}, separated {}",
            if mode.ood_initialization { "on " } else { "off" },
            mode.ind_confidence_mean,
            mode.ind_confidence_std,
            mode.ood_confidence_mean,
            mode.ood_confidence_std,
            mode.separation.mean_width_ratio,
            mode.separation.separated,
        );
    }
    Ok(())
}
