//! Monte Carlo runner for MSE-index curves.
//!
//! Each trial draws a fresh dataset from its own [`RngStream`] (stream id =
//! trial index), runs every configured estimator on it, and stores the
//! vectorized error of the trace-normalized estimate. Trials are evaluated
//! in parallel but reduced in trial order, so the output does not depend
//! on the number of worker threads.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ces_sampling::{
    build_outlier_dataset, sample_contaminated, toeplitz_scatter, CesModel, ContaminationConfig, ModularLaw, RngStream,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{r_estimate, r_estimate_weighted, score_weights, scm, tyler, EstimatorOutput, ROptions, TylerOptions};
use crate::matrix_core::{vec, CMatrix, HermitianPd};
use crate::scores::ScoreFunction;

/// Largest tolerated fraction of failed trials per (sweep value, estimator).
pub const MAX_FAILURE_RATE: f64 = 0.05;

pub const CSV_HEADER: &str = "sweep,estimator,mse_index,trials,nonpd_rate,seconds";

/// Label used for externally supplied bound rows.
pub const BOUND_LABEL: &str = "cscrb";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Custom,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Preset::Fig1),
            "fig2" => Ok(Preset::Fig2),
            "fig3" => Ok(Preset::Fig3),
            "fig4" => Ok(Preset::Fig4),
            "fig5" => Ok(Preset::Fig5),
            "custom" => Ok(Preset::Custom),
            other => Err(Error::Config(format!("unknown preset '{other}'"))),
        }
    }
}

/// Which parameter the sweep values replace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Number of observations L.
    SampleSize,
    /// Complex t shape λ.
    Lambda,
    /// Fraction `L_o / L` of unit-sphere outliers.
    OutlierFraction,
    /// Mixture weight ε of the generalized Gaussian contaminant.
    Epsilon,
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L" | "sample_size" => Ok(SweepKind::SampleSize),
            "lambda" => Ok(SweepKind::Lambda),
            "outlier_frac" | "outlier_fraction" => Ok(SweepKind::OutlierFraction),
            "epsilon" => Ok(SweepKind::Epsilon),
            other => Err(Error::Config(format!("unknown sweep kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contamination {
    None,
    /// `L_o` observations uniform on the complex unit sphere.
    SphereOutliers,
    /// ε-mixture with a generalized Gaussian of scatter `σ² I`.
    GeneralizedGaussian,
}

impl FromStr for Contamination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Contamination::None),
            "sphere" | "sphere_outliers" => Ok(Contamination::SphereOutliers),
            "gg" | "generalized_gaussian" => Ok(Contamination::GeneralizedGaussian),
            other => Err(Error::Config(format!("unknown contamination kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preliminary {
    Scm,
    Tyler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreChoice {
    VanDerWaerden,
    /// `None` takes ν from the experiment config.
    TNu(Option<f64>),
    Power(f64),
}

impl ScoreChoice {
    fn build(self, n: u32, default_nu: f64) -> Result<ScoreFunction> {
        match self {
            ScoreChoice::VanDerWaerden => Ok(ScoreFunction::van_der_waerden(n)),
            ScoreChoice::TNu(nu) => ScoreFunction::t_nu(n, nu.unwrap_or(default_nu)),
            ScoreChoice::Power(a) => ScoreFunction::power(n, a),
        }
    }
}

/// One estimator of an experiment, written `scm`, `tyler` or
/// `r:<scm|tyler>:<vdw|t|t<ν>|wilcoxon|spearman|power<a>>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum EstimatorSpec {
    Scm,
    Tyler,
    R { prelim: Preliminary, score: ScoreChoice },
}

impl EstimatorSpec {
    pub fn preliminary(&self) -> Preliminary {
        match *self {
            EstimatorSpec::Scm => Preliminary::Scm,
            EstimatorSpec::Tyler => Preliminary::Tyler,
            EstimatorSpec::R { prelim, .. } => prelim,
        }
    }

    /// Runs the estimator on one dataset; `nu` is used by a bare `t` score.
    pub fn estimate<R: rand::Rng + ?Sized>(&self, data: &Dataset, nu: f64, opts: ROptions, rng: &mut R) -> Result<EstimatorOutput> {
        let prelim = match self.preliminary() {
            Preliminary::Scm => scm(data)?,
            Preliminary::Tyler => tyler(data, TylerOptions::default())?,
        };
        match *self {
            EstimatorSpec::Scm | EstimatorSpec::Tyler => Ok(prelim),
            EstimatorSpec::R { score, .. } => {
                let n = u32::try_from(data.dim()).map_err(|_| Error::Config("N too large".into()))?;
                r_estimate(data, &prelim, &score.build(n, nu)?, opts, rng)
            }
        }
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            EstimatorSpec::Scm => write!(f, "scm"),
            EstimatorSpec::Tyler => write!(f, "tyler"),
            EstimatorSpec::R { prelim, score } => {
                let p = match prelim {
                    Preliminary::Scm => "scm",
                    Preliminary::Tyler => "tyler",
                };
                match score {
                    ScoreChoice::VanDerWaerden => write!(f, "r:{p}:vdw"),
                    ScoreChoice::TNu(None) => write!(f, "r:{p}:t"),
                    ScoreChoice::TNu(Some(nu)) => write!(f, "r:{p}:t{nu}"),
                    ScoreChoice::Power(a) if a == 1.0 => write!(f, "r:{p}:wilcoxon"),
                    ScoreChoice::Power(a) if a == 2.0 => write!(f, "r:{p}:spearman"),
                    ScoreChoice::Power(a) => write!(f, "r:{p}:power{a}"),
                }
            }
        }
    }
}

impl FromStr for EstimatorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown estimator '{s}'"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["scm"] => Ok(EstimatorSpec::Scm),
            ["tyler"] => Ok(EstimatorSpec::Tyler),
            ["r", prelim, score] => {
                let prelim = match *prelim {
                    "scm" => Preliminary::Scm,
                    "tyler" => Preliminary::Tyler,
                    _ => return Err(bad()),
                };
                let score = match *score {
                    "vdw" => ScoreChoice::VanDerWaerden,
                    "wilcoxon" => ScoreChoice::Power(1.0),
                    "spearman" => ScoreChoice::Power(2.0),
                    "t" => ScoreChoice::TNu(None),
                    other => {
                        if let Some(nu) = other.strip_prefix('t') {
                            ScoreChoice::TNu(Some(nu.parse().map_err(|_| bad())?))
                        } else if let Some(a) = other.strip_prefix("power") {
                            ScoreChoice::Power(a.parse().map_err(|_| bad())?)
                        } else {
                            return Err(bad());
                        }
                    }
                };
                Ok(EstimatorSpec::R { prelim, score })
            }
            _ => Err(bad()),
        }
    }
}

impl From<EstimatorSpec> for String {
    fn from(e: EstimatorSpec) -> String {
        e.to_string()
    }
}

impl TryFrom<String> for EstimatorSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub preset: Preset,
    #[serde(rename = "N")]
    pub n: usize,
    pub rho_mod: f64,
    pub rho_arg: f64,
    pub sigma2: f64,
    pub sweep_kind: SweepKind,
    pub sweep: Vec<f64>,
    pub lambda: f64,
    #[serde(rename = "L")]
    pub len: usize,
    pub nu: f64,
    pub upsilon: f64,
    pub epsilon: f64,
    pub outlier_frac: f64,
    pub s: f64,
    pub contamination: Contamination,
    pub estimators: Vec<EstimatorSpec>,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
    /// Record wall-clock seconds per row. Off by default because timings
    /// make the CSV nondeterministic.
    pub timing: bool,
}

const DESK_TRIALS: usize = 10_000;

impl ExperimentConfig {
    /// Defaults for a preset: N = 8, ρ = 0.8 e^{j2π/5}, σ² = 4, ν = 5,
    /// υ = 0.01, s = 0.1, 10⁴ trials.
    pub fn preset(preset: Preset) -> Self {
        let n = 8;
        let base = ExperimentConfig {
            preset,
            n,
            rho_mod: 0.8,
            rho_arg: 2.0 * std::f64::consts::PI / 5.0,
            sigma2: 4.0,
            sweep_kind: SweepKind::Lambda,
            sweep: vec![],
            lambda: 2.0,
            len: 5 * n,
            nu: 5.0,
            upsilon: crate::estimators::DEFAULT_UPSILON,
            epsilon: 0.0,
            outlier_frac: 0.0,
            s: 0.1,
            contamination: Contamination::None,
            estimators: vec![],
            trials: DESK_TRIALS,
            seed: 0,
            workers: 0,
            timing: false,
        };
        let est = |labels: &[&str]| labels.iter().map(|l| l.parse().unwrap()).collect::<Vec<EstimatorSpec>>();
        let lambda_sweep = vec![1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 15.0, 20.0];
        match preset {
            Preset::Fig1 => ExperimentConfig {
                sweep_kind: SweepKind::SampleSize,
                sweep: [2, 4, 8, 16, 32, 64].iter().map(|&m| (m * n) as f64).collect(),
                estimators: est(&["scm", "r:scm:vdw"]),
                ..base
            },
            Preset::Fig2 => ExperimentConfig {
                sweep: lambda_sweep,
                estimators: est(&["scm", "tyler", "r:scm:vdw", "r:tyler:vdw"]),
                ..base
            },
            Preset::Fig3 => ExperimentConfig {
                sweep: lambda_sweep,
                estimators: est(&["r:tyler:vdw", "r:tyler:t5", "r:tyler:wilcoxon", "r:tyler:spearman"]),
                ..base
            },
            Preset::Fig4 => ExperimentConfig {
                len: 100 * n,
                sweep_kind: SweepKind::OutlierFraction,
                sweep: vec![0.0, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2],
                contamination: Contamination::SphereOutliers,
                estimators: est(&["tyler", "r:tyler:vdw"]),
                ..base
            },
            Preset::Fig5 => ExperimentConfig {
                len: 100 * n,
                sweep_kind: SweepKind::Epsilon,
                sweep: vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3],
                contamination: Contamination::GeneralizedGaussian,
                estimators: est(&["tyler", "r:tyler:vdw"]),
                ..base
            },
            Preset::Custom => ExperimentConfig {
                sweep: vec![2.0],
                estimators: est(&["tyler", "r:tyler:vdw"]),
                ..base
            },
        }
    }

    /// Applies one `key=value` override.
    pub fn set_param(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
        }
        match key {
            "lambda" => self.lambda = num(key, value)?,
            "L" => self.len = num(key, value)?,
            "nu" => self.nu = num(key, value)?,
            "upsilon" => self.upsilon = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "outlier_frac" => self.outlier_frac = num(key, value)?,
            "s" => self.s = num(key, value)?,
            "sigma2" => self.sigma2 = num(key, value)?,
            "rho_mod" => self.rho_mod = num(key, value)?,
            "rho_arg" => self.rho_arg = num(key, value)?,
            "N" => self.n = num(key, value)?,
            "contamination" => self.contamination = value.trim().parse()?,
            "sweep_kind" => self.sweep_kind = value.trim().parse()?,
            other => return Err(Error::Config(format!("unknown parameter '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n < 2 {
            return fail(format!("N must be >= 2, got {}", self.n));
        }
        if self.sweep.is_empty() {
            return fail("sweep must be nonempty".into());
        }
        if self.sweep.iter().any(|v| !v.is_finite()) {
            return fail("sweep values must be finite".into());
        }
        if self.trials == 0 {
            return fail("trials must be >= 1".into());
        }
        if self.estimators.is_empty() {
            return fail("no estimators selected".into());
        }
        if !(self.rho_mod >= 0.0 && self.rho_mod < 1.0) {
            return fail(format!("rho_mod must lie in [0, 1), got {}", self.rho_mod));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return fail(format!("sigma2 must be > 0, got {}", self.sigma2));
        }
        if !(self.upsilon > 0.0 && self.upsilon.is_finite()) {
            return fail(format!("upsilon must be > 0, got {}", self.upsilon));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return fail(format!("nu must be > 0, got {}", self.nu));
        }
        for &v in &self.sweep {
            let point = self.at(v);
            if !(point.lambda > 1.0) {
                return fail(format!("lambda must be > 1, got {}", point.lambda));
            }
            if point.len < 1 {
                return fail("L must be >= 1".into());
            }
            if self.sweep_kind == SweepKind::SampleSize && (v.fract() != 0.0 || v < 1.0) {
                return fail(format!("sample-size sweep values must be positive integers, got {v}"));
            }
            if !(0.0..=1.0).contains(&point.epsilon) || !(0.0..=1.0).contains(&point.outlier_frac) {
                return fail("epsilon and outlier_frac must lie in [0, 1]".into());
            }
        }
        if self.contamination == Contamination::GeneralizedGaussian && !(self.s > 0.0) {
            return fail(format!("s must be > 0, got {}", self.s));
        }
        Ok(())
    }

    pub fn rho(&self) -> Complex64 {
        Complex64::from_polar(self.rho_mod, self.rho_arg)
    }

    fn at(&self, value: f64) -> SweepPoint {
        let mut p = SweepPoint {
            lambda: self.lambda,
            len: self.len,
            epsilon: self.epsilon,
            outlier_frac: self.outlier_frac,
        };
        match self.sweep_kind {
            SweepKind::SampleSize => p.len = value as usize,
            SweepKind::Lambda => p.lambda = value,
            SweepKind::OutlierFraction => p.outlier_frac = value,
            SweepKind::Epsilon => p.epsilon = value,
        }
        p
    }

    /// TOML rendering of the resolved config.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy)]
struct SweepPoint {
    lambda: f64,
    len: usize,
    epsilon: f64,
    outlier_frac: f64,
}

/// One `(sweep value, estimator)` entry of a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub sweep: f64,
    pub estimator: String,
    pub mse_index: f64,
    /// Successful trials that entered the MSE index.
    pub trials: usize,
    /// Fraction of successful trials whose shape was not positive definite.
    pub nonpd_rate: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MseCurve {
    pub rows: Vec<MseRow>,
}

impl MseCurve {
    pub fn get(&self, sweep: f64, estimator: &str) -> Option<&MseRow> {
        self.rows.iter().find(|r| r.sweep == sweep && r.estimator == estimator)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                sig17(r.sweep),
                r.estimator,
                sig17(r.mse_index),
                r.trials,
                sig17(r.nonpd_rate),
                sig17(r.seconds)
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            other => return Err(format!("expected header '{CSV_HEADER}', got {other:?}")),
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(format!("line {}: expected 6 fields, got {}", i + 2, fields.len()));
            }
            let f = |k: usize| fields[k].trim().parse::<f64>().map_err(|e| format!("line {}: {e}", i + 2));
            rows.push(MseRow {
                sweep: f(0)?,
                estimator: fields[1].trim().to_string(),
                mse_index: f(2)?,
                trials: fields[3].trim().parse().map_err(|e| format!("line {}: {e}", i + 2))?,
                nonpd_rate: f(4)?,
                seconds: f(5)?,
            });
        }
        Ok(MseCurve { rows })
    }

    /// Adds `(sweep, bound)` rows labelled [`BOUND_LABEL`], keeping rows
    /// sorted by sweep value.
    pub fn merge_bound(&mut self, bound: &[(f64, f64)]) {
        for &(sweep, value) in bound {
            self.rows.push(MseRow {
                sweep,
                estimator: BOUND_LABEL.to_string(),
                mse_index: value,
                trials: 0,
                nonpd_rate: 0.0,
                seconds: 0.0,
            });
        }
        self.rows.sort_by(|a, b| a.sweep.total_cmp(&b.sweep));
    }
}

fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn emit_csv(curve: &MseCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, curve.to_csv()).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<MseCurve> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    MseCurve::from_csv(&text).map_err(|msg| Error::Parse { path: path.to_path_buf(), msg })
}

/// Reads a `sweep,bound` CSV (header optional).
pub fn read_bound_csv(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let parse_err = |msg: String| Error::Parse { path: path.to_path_buf(), msg };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.chars().next().is_some_and(|c| c.is_alphabetic())) {
            continue;
        }
        let mut it = line.split(',');
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_err(format!("line {}: expected 'sweep,bound'", i + 1)));
        };
        let a = a.trim().parse().map_err(|e| parse_err(format!("line {}: {e}", i + 1)))?;
        let b = b.trim().parse().map_err(|e| parse_err(format!("line {}: {e}", i + 1)))?;
        out.push((a, b));
    }
    Ok(out)
}

/// `‖(1/T) Σ_t vec(E_t) vec(E_t)ᴴ‖_F` over error matrices.
pub fn mse_index(errors: &[CMatrix]) -> f64 {
    let vecs: Vec<Vec<Complex64>> = errors.iter().map(|e| vec(e).as_slice().to_vec()).collect();
    MseAccumulator::from_vectors(&vecs).index()
}

/// Empirical second-moment matrix of vectorized errors.
struct MseAccumulator {
    dim: usize,
    count: usize,
    /// Column-major `dim × dim` sum of outer products.
    sum: Vec<Complex64>,
}

impl MseAccumulator {
    fn new(dim: usize) -> Self {
        MseAccumulator { dim, count: 0, sum: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    fn from_vectors(vs: &[Vec<Complex64>]) -> Self {
        let mut acc = MseAccumulator::new(vs.first().map_or(0, |v| v.len()));
        for v in vs {
            acc.push(v);
        }
        acc
    }

    fn push(&mut self, e: &[Complex64]) {
        debug_assert_eq!(e.len(), self.dim);
        for (j, ej) in e.iter().enumerate() {
            let cj = ej.conj();
            let col = &mut self.sum[j * self.dim..(j + 1) * self.dim];
            for (s, ei) in col.iter_mut().zip(e) {
                *s += ei * cj;
            }
        }
        self.count += 1;
    }

    fn index(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.sum.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / self.count as f64
    }

    /// Delta-method standard error of [`Self::index`]: the per-trial
    /// linearization is `Re(eᴴ C e) / ‖C‖_F` with `C` the mean outer product.
    fn stderr(&self, vs: &[Vec<Complex64>]) -> f64 {
        let t = self.count as f64;
        let sigma = self.index();
        if self.count < 2 || !(sigma > 0.0) {
            return 0.0;
        }
        let scale = 1.0 / (t * sigma);
        let contrib: Vec<f64> = vs
            .iter()
            .map(|e| {
                let mut acc = 0.0;
                for (j, ej) in e.iter().enumerate() {
                    let col = &self.sum[j * self.dim..(j + 1) * self.dim];
                    let ce: Complex64 = col.iter().zip(e).map(|(c, ei)| ei.conj() * c).sum();
                    acc += (ce * ej).re;
                }
                acc * scale
            })
            .collect();
        let mean = contrib.iter().sum::<f64>() / t;
        let var = contrib.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (t - 1.0);
        (var / t).sqrt()
    }
}

/// Experiment output with Monte Carlo uncertainty alongside the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub curve: MseCurve,
    /// Standard error of each row's MSE index, aligned with `curve.rows`.
    pub stderr: Vec<f64>,
    /// Failed trials per row.
    pub failures: Vec<usize>,
    /// Per-trial vectorized errors, aligned with `curve.rows`; kept only when
    /// requested through [`run_experiment_with_errors`].
    pub errors: Option<Vec<Vec<Vec<Complex64>>>>,
}

impl ExperimentReport {
    pub fn row_index(&self, sweep: f64, estimator: &str) -> Option<usize> {
        self.curve.rows.iter().position(|r| r.sweep == sweep && r.estimator == estimator)
    }

    /// Standard error of the difference of two rows' MSE indices, computed
    /// as if the rows were independent.
    pub fn diff_stderr(&self, a: usize, b: usize) -> f64 {
        self.stderr[a].hypot(self.stderr[b])
    }
}

struct PointModels {
    nominal: CesModel,
    contaminant: Option<ContaminationConfig>,
    point: SweepPoint,
    /// Score tabulated by rank, per estimator (R estimators only).
    weights: Vec<Option<Vec<f64>>>,
}

impl PointModels {
    fn new(cfg: &ExperimentConfig, scatter: &HermitianPd, value: f64) -> Result<Self> {
        let point = cfg.at(value);
        let law = ModularLaw::complex_t_with_power(cfg.n, point.lambda, cfg.sigma2)?;
        let nominal = CesModel::new(scatter.clone(), law)?;
        let contaminant = match cfg.contamination {
            Contamination::GeneralizedGaussian => {
                // Scatter σ² I with a unit-power law: E[z zᴴ] = σ² I.
                let xi = HermitianPd::new(CMatrix::identity(cfg.n, cfg.n).scale(cfg.sigma2))?;
                let gg = ModularLaw::generalized_gaussian_with_power(cfg.n, cfg.s, 1.0)?;
                Some(ContaminationConfig::new(point.epsilon, nominal.clone(), CesModel::new(xi, gg)?)?)
            }
            _ => None,
        };
        let n = u32::try_from(cfg.n).map_err(|_| Error::Config("N too large".into()))?;
        let weights = cfg
            .estimators
            .iter()
            .map(|e| match e {
                EstimatorSpec::R { score, .. } => score_weights(&score.build(n, cfg.nu)?, point.len).map(Some),
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PointModels { nominal, contaminant, point, weights })
    }

    fn dataset(&self, cfg: &ExperimentConfig, rng: &mut RngStream) -> Result<Dataset> {
        let len = self.point.len;
        match cfg.contamination {
            Contamination::None => self.nominal.sample_dataset(len, rng),
            Contamination::SphereOutliers => {
                let outliers = (self.point.outlier_frac * len as f64).round() as usize;
                build_outlier_dataset(len - outliers.min(len), outliers.min(len), &self.nominal, rng)
            }
            Contamination::GeneralizedGaussian => {
                sample_contaminated(self.contaminant.as_ref().expect("built for GG contamination"), len, rng)
            }
        }
    }
}

/// What one trial produced for one estimator.
struct TrialOutcome {
    error: Option<Vec<Complex64>>,
    nonpd: bool,
    elapsed: Duration,
}

fn run_trial(cfg: &ExperimentConfig, models: &PointModels, v0: &CMatrix, trial: usize) -> Vec<TrialOutcome> {
    let mut rng = RngStream::new(cfg.seed, trial as u64);
    let failed = |elapsed| TrialOutcome { error: None, nonpd: false, elapsed };
    let data = match models.dataset(cfg, &mut rng) {
        Ok(d) => d,
        Err(_) => return cfg.estimators.iter().map(|_| failed(Duration::ZERO)).collect(),
    };

    let needs = |p: Preliminary| cfg.estimators.iter().any(|e| e.preliminary() == p);
    let clock = || cfg.timing.then(Instant::now);
    let since = |start: Option<Instant>| start.map_or(Duration::ZERO, |s| s.elapsed());
    let timed = |f: &dyn Fn() -> Result<EstimatorOutput>| {
        let start = clock();
        let out = f();
        (out, since(start))
    };
    let scm_out = needs(Preliminary::Scm).then(|| timed(&|| scm(&data)));
    let tyler_out = needs(Preliminary::Tyler).then(|| timed(&|| tyler(&data, TylerOptions::default())));

    let outcome = |out: &Result<EstimatorOutput>, elapsed: Duration| match out {
        Ok(o) => TrialOutcome {
            error: Some(vec(&(&o.renormalized - v0)).as_slice().to_vec()),
            nonpd: !o.diagnostics.positive_definite,
            elapsed,
        },
        Err(_) => failed(elapsed),
    };

    // R estimators draw their perturbations from the trial stream in
    // configuration order.
    let mut results = Vec::with_capacity(cfg.estimators.len());
    for (spec, weights) in cfg.estimators.iter().zip(&models.weights) {
        let (prelim, prelim_time) = match spec.preliminary() {
            Preliminary::Scm => scm_out.as_ref().expect("computed when needed"),
            Preliminary::Tyler => tyler_out.as_ref().expect("computed when needed"),
        };
        results.push(match (spec, prelim) {
            (EstimatorSpec::Scm | EstimatorSpec::Tyler, _) => outcome(prelim, *prelim_time),
            (EstimatorSpec::R { .. }, Err(_)) => failed(*prelim_time),
            (EstimatorSpec::R { .. }, Ok(p)) => {
                let weights = weights.as_deref().expect("weights built for R estimators");
                let start = clock();
                let out = r_estimate_weighted(&data, p, weights, ROptions { upsilon: cfg.upsilon }, &mut rng);
                outcome(&out, *prelim_time + since(start))
            }
        });
    }
    results
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MseCurve> {
    Ok(run_experiment_detailed(cfg)?.curve)
}

pub fn run_experiment_detailed(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_inner(cfg, false)
}

/// Like [`run_experiment_detailed`] but keeps every per-trial error vector.
pub fn run_experiment_with_errors(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_inner(cfg, true)
}

fn run_inner(cfg: &ExperimentConfig, keep_errors: bool) -> Result<ExperimentReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_on_pool(cfg, keep_errors))
}

fn run_on_pool(cfg: &ExperimentConfig, keep_errors: bool) -> Result<ExperimentReport> {
    let scatter = toeplitz_scatter(cfg.rho(), cfg.n)?;
    let v0 = scatter.as_matrix().scale(cfg.n as f64 / scatter.trace());

    let mut sweep = cfg.sweep.clone();
    sweep.sort_by(f64::total_cmp);

    let mut report = ExperimentReport {
        curve: MseCurve::default(),
        stderr: vec![],
        failures: vec![],
        errors: keep_errors.then(Vec::new),
    };
    for &value in &sweep {
        let models = PointModels::new(cfg, &scatter, value)?;
        let outcomes: Vec<Vec<TrialOutcome>> =
            (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, &models, &v0, t)).collect();

        for (e, spec) in cfg.estimators.iter().enumerate() {
            let mut errors = Vec::with_capacity(cfg.trials);
            let mut nonpd = 0usize;
            let mut failures = 0usize;
            let mut elapsed = Duration::ZERO;
            for trial in &outcomes {
                let o = &trial[e];
                elapsed += o.elapsed;
                match &o.error {
                    Some(err) => {
                        errors.push(err.clone());
                        nonpd += usize::from(o.nonpd);
                    }
                    None => failures += 1,
                }
            }
            let label = spec.to_string();
            if failures as f64 > MAX_FAILURE_RATE * cfg.trials as f64 || errors.is_empty() {
                return Err(Error::ExperimentFailed { label, sweep: value, failed: failures, attempted: cfg.trials });
            }
            let acc = MseAccumulator::from_vectors(&errors);
            report.curve.rows.push(MseRow {
                sweep: value,
                estimator: label,
                mse_index: acc.index(),
                trials: errors.len(),
                nonpd_rate: nonpd as f64 / errors.len() as f64,
                seconds: if cfg.timing { elapsed.as_secs_f64() } else { 0.0 },
            });
            report.stderr.push(acc.stderr(&errors));
            report.failures.push(failures);
            if let Some(all) = report.errors.as_mut() {
                all.push(errors);
            }
        }
    }
    Ok(report)
}
