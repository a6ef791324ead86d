//! `shapekit` command line: Monte Carlo experiments, data generation and
//! one-off estimation.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use shapekit::ces_sampling::{toeplitz_scatter, CesModel, ModularLaw, RngStream};
use shapekit::estimators::ROptions;
use shapekit::harness::{emit_csv, read_bound_csv, run_experiment, EstimatorSpec, ExperimentConfig, Preset};
use shapekit::{Complex64, Dataset, Error};

#[derive(Parser)]
#[command(name = "shapekit", version, about = "Robust shape-matrix estimation for complex elliptical data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo MSE-index experiment and write a CSV curve.
    Run(RunArgs),
    /// Draw a complex t or generalized Gaussian dataset and save it.
    Sample(SampleArgs),
    /// Estimate the shape matrix of a saved dataset.
    Estimate(EstimateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// fig1..fig5 or custom.
    #[arg(long, default_value = "custom")]
    preset: String,
    /// Start from a TOML config (as printed by --dump-config) instead of a preset.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parameter override `key=value`; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Comma-separated estimator labels, e.g. scm,tyler,r:tyler:vdw.
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<String>>,
    /// Comma-separated sweep values replacing the preset's.
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<f64>>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Record wall time per row (makes the CSV nondeterministic).
    #[arg(long)]
    timing: bool,
    /// CSV of `sweep,bound` pairs appended as bound rows.
    #[arg(long)]
    bound: Option<PathBuf>,
    /// Print the resolved config as TOML and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum LawKind {
    T,
    Gg,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, value_enum, default_value = "t")]
    law: LawKind,
    #[arg(short = 'n', long = "dim", default_value_t = 8)]
    dim: usize,
    #[arg(short = 'l', long = "len", default_value_t = 40)]
    len: usize,
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    s: f64,
    #[arg(long, default_value_t = 4.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 0.8)]
    rho_mod: f64,
    #[arg(long, default_value_t = 2.0 * std::f64::consts::PI / 5.0)]
    rho_arg: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    input: PathBuf,
    /// scm, tyler or r:<scm|tyler>:<score>.
    #[arg(long, default_value = "r:tyler:vdw")]
    estimator: String,
    #[arg(long, default_value_t = 5.0)]
    nu: f64,
    #[arg(long, default_value_t = shapekit::estimators::DEFAULT_UPSILON)]
    upsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print the trace-N renormalized matrix instead of the pinned shape.
    #[arg(long)]
    renormalized: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Sample(a) => sample(a),
        Command::Estimate(a) => estimate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::Domain(_)) => 2,
        Some(Error::ExperimentFailed { .. }) => 3,
        _ => 1,
    }
}

fn resolve_config(a: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.clone(), source })?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::preset(a.preset.parse::<Preset>()?),
    };
    for kv in &a.params {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("expected key=value, got '{kv}'")))?;
        cfg.set_param(k.trim(), v.trim())?;
    }
    if let Some(list) = &a.estimators {
        cfg.estimators = list.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    }
    if let Some(sweep) = &a.sweep {
        cfg.sweep = sweep.clone();
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    cfg.timing |= a.timing;
    cfg.validate()?;
    Ok(cfg)
}

fn run(a: RunArgs) -> anyhow::Result<()> {
    let cfg = resolve_config(&a)?;
    if a.dump_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let bound = a.bound.as_ref().map(read_bound_csv).transpose()?;
    let mut curve = run_experiment(&cfg)?;
    if let Some(b) = bound {
        curve.merge_bound(&b);
    }
    match &a.out {
        Some(path) => emit_csv(&curve, path)?,
        None => std::io::stdout().write_all(curve.to_csv().as_bytes()).context("writing to stdout")?,
    }
    Ok(())
}

fn sample(a: SampleArgs) -> anyhow::Result<()> {
    let scatter = toeplitz_scatter(Complex64::from_polar(a.rho_mod, a.rho_arg), a.dim)?;
    let law = match a.law {
        LawKind::T => ModularLaw::complex_t_with_power(a.dim, a.lambda, a.sigma2)?,
        LawKind::Gg => ModularLaw::generalized_gaussian_with_power(a.dim, a.s, a.sigma2)?,
    };
    let data = CesModel::new(scatter, law)?.sample_dataset(a.len, &mut RngStream::new(a.seed, 0))?;
    data.save(&a.out)?;
    Ok(())
}

fn estimate(a: EstimateArgs) -> anyhow::Result<()> {
    let data = Dataset::load(&a.input)?;
    let spec: EstimatorSpec = a.estimator.parse()?;
    let out = spec.estimate(&data, a.nu, ROptions { upsilon: a.upsilon }, &mut RngStream::new(a.seed, 0))?;
    let m = if a.renormalized { &out.renormalized } else { out.shape.as_matrix() };
    let mut stdout = std::io::stdout().lock();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:+.6e}{:+.6e}i", m[(i, j)].re, m[(i, j)].im)).collect();
        writeln!(stdout, "{}", row.join(" "))?;
    }
    if let Some(alpha) = out.diagnostics.alpha {
        writeln!(stdout, "# alpha = {alpha:.6e}")?;
    }
    if !out.diagnostics.positive_definite {
        writeln!(stdout, "# warning: estimate is not positive definite")?;
    }
    Ok(())
}
