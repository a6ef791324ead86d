//! Samplers for complex elliptically symmetric (CES) data.
//!
//! Every CES vector is drawn through its stochastic representation
//! `z = √Q · Σ^{1/2} · u`, with `u` uniform on the complex unit sphere and
//! `Q` the modular variate of the law. Complex normals are circular with
//! `E|g|² = 1`.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix_core::{CMatrix, CVector, HermitianPd};
use crate::special_fn::ln_gamma;

/// Deterministic random stream keyed by `(seed, stream)`.
///
/// Streams with the same seed and different ids are independent ChaCha
/// streams. A stream must not be shared between threads.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Anything that can produce a nonnegative modular variate.
pub trait RadialLaw {
    fn dim(&self) -> usize;
    fn sample_q<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModularKind {
    /// Complex t: `h(t) ∝ (λ/η + t)^{-(λ+N)}`.
    ComplexT { lambda: f64, eta: f64 },
    /// Generalized Gaussian: `h(t) ∝ exp(-t^s / b)`.
    GeneralizedGaussian { s: f64, b: f64 },
}

/// Distribution of `Q = zᴴ Σ⁻¹ z`, with density proportional to
/// `t^{N-1} h(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModularLaw {
    pub dim: usize,
    pub kind: ModularKind,
}

impl ModularLaw {
    pub fn complex_t(dim: usize, lambda: f64, eta: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(lambda.is_finite() && lambda > 1.0) {
            return Err(Error::domain(format!("complex t shape must be finite and > 1, got {lambda}")));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::domain(format!("complex t scale must be finite and > 0, got {eta}")));
        }
        Ok(ModularLaw { dim, kind: ModularKind::ComplexT { lambda, eta } })
    }

    /// Complex t with `η` chosen so that `σ² = λ / (η (λ - 1))`.
    pub fn complex_t_with_power(dim: usize, lambda: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::domain(format!("power must be finite and > 0, got {sigma2}")));
        }
        ModularLaw::complex_t(dim, lambda, lambda / (sigma2 * (lambda - 1.0)))
    }

    pub fn generalized_gaussian(dim: usize, s: f64, b: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(s.is_finite() && s > 0.0 && b.is_finite() && b > 0.0) {
            return Err(Error::domain(format!("GG parameters must be finite and > 0, got s={s}, b={b}")));
        }
        Ok(ModularLaw { dim, kind: ModularKind::GeneralizedGaussian { s, b } })
    }

    /// Generalized Gaussian with `b` from [`gg_scale_for_power`].
    pub fn generalized_gaussian_with_power(dim: usize, s: f64, sigma2: f64) -> Result<Self> {
        let b = gg_scale_for_power(sigma2, s, dim)?;
        ModularLaw::generalized_gaussian(dim, s, b)
    }

    /// Complex normal with covariance `σ² Σ` (GG with `s = 1`, `b = σ²`).
    pub fn gaussian(dim: usize, sigma2: f64) -> Result<Self> {
        ModularLaw::generalized_gaussian(dim, 1.0, sigma2)
    }

    /// `E[Q]`, infinite when it does not exist.
    pub fn mean(&self) -> f64 {
        let n = self.dim as f64;
        match self.kind {
            ModularKind::ComplexT { lambda, eta } => n * lambda / (eta * (lambda - 1.0)),
            ModularKind::GeneralizedGaussian { s, b } => {
                (ln_gamma((n + 1.0) / s).unwrap() - ln_gamma(n / s).unwrap() + b.ln() / s).exp()
            }
        }
    }

    /// Per-component power `E[Q] / N`.
    pub fn power(&self) -> f64 {
        self.mean() / self.dim as f64
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::domain("dimension must be >= 1"));
    }
    Ok(())
}

impl RadialLaw for ModularLaw {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample_q<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_modular(self, rng)
    }
}

/// Draws `Q` from its law.
///
/// Complex t: `Q = (λ/η) G_N / G_λ` with independent unit-scale Gamma
/// variates, i.e. `(N/η)` times a Fisher(2N, 2λ) variate.
/// Generalized Gaussian: `Q = (b G)^{1/s}` with `G ~ Gamma(N/s, 1)`.
pub fn sample_modular<R: Rng + ?Sized>(law: &ModularLaw, rng: &mut R) -> f64 {
    let n = law.dim as f64;
    match law.kind {
        ModularKind::ComplexT { lambda, eta } => {
            let num = Gamma::new(n, 1.0).expect("validated shape").sample(rng);
            let den = Gamma::new(lambda, 1.0).expect("validated shape").sample(rng);
            (lambda / eta) * num / den
        }
        ModularKind::GeneralizedGaussian { s, b } => {
            let g: f64 = Gamma::new(n / s, 1.0).expect("validated shape").sample(rng);
            if s == 1.0 {
                b * g
            } else {
                (b * g).powf(1.0 / s)
            }
        }
    }
}

/// `b` such that the GG law has `E[Q] / N = σ²`:
/// `b = (N σ² Γ(N/s) / Γ((N+1)/s))^s`.
pub fn gg_scale_for_power(sigma2: f64, s: f64, dim: usize) -> Result<f64> {
    if !(sigma2.is_finite() && sigma2 > 0.0 && s.is_finite() && s > 0.0) || dim == 0 {
        return Err(Error::domain(format!("invalid GG power inputs: sigma2={sigma2}, s={s}, N={dim}")));
    }
    let n = dim as f64;
    let ln_b = s * ((n * sigma2).ln() + ln_gamma(n / s)? - ln_gamma((n + 1.0) / s)?);
    Ok(ln_b.exp())
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// Uniform draw on the complex unit sphere of `C^N`.
pub fn sample_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    loop {
        let g = CVector::from_fn(n, |_, _| complex_normal(rng));
        let norm = g.norm();
        if norm > 0.0 {
            return g.unscale(norm);
        }
    }
}

/// Hermitian Toeplitz scatter with first column `[1, ρ, …, ρ^{N-1}]`.
pub fn toeplitz_scatter(rho: Complex64, n: usize) -> Result<HermitianPd> {
    if !(rho.norm() < 1.0) {
        return Err(Error::domain(format!("Toeplitz correlation must satisfy |rho| < 1, got {rho}")));
    }
    check_dim(n)?;
    let m = CMatrix::from_fn(n, n, |i, j| {
        if i >= j {
            rho.powu((i - j) as u32)
        } else {
            rho.conj().powu((j - i) as u32)
        }
    });
    HermitianPd::new(m)
}

/// A scatter matrix together with a modular law.
#[derive(Debug, Clone)]
pub struct CesModel<L = ModularLaw> {
    scatter: HermitianPd,
    sqrt: CMatrix,
    law: L,
}

impl<L: RadialLaw> CesModel<L> {
    pub fn new(scatter: HermitianPd, law: L) -> Result<Self> {
        if scatter.dim() != law.dim() {
            return Err(Error::Shape(format!(
                "scatter dimension {} does not match law dimension {}",
                scatter.dim(),
                law.dim()
            )));
        }
        let sqrt = scatter.sqrt();
        Ok(CesModel { scatter, sqrt, law })
    }

    pub fn dim(&self) -> usize {
        self.scatter.dim()
    }

    pub fn scatter(&self) -> &HermitianPd {
        &self.scatter
    }

    pub fn law(&self) -> &L {
        &self.law
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        sample_ces(&self.sqrt, &self.law, rng)
    }

    pub fn sample_dataset<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Result<Dataset> {
        let columns: Vec<CVector> = (0..len).map(|_| self.sample(rng)).collect();
        Dataset::from_columns(&columns)
    }
}

/// One CES draw `√Q · factor · u`.
pub fn sample_ces<L: RadialLaw, R: Rng + ?Sized>(scatter_sqrt: &CMatrix, law: &L, rng: &mut R) -> CVector {
    let q = law.sample_q(rng);
    let u = sample_sphere(law.dim(), rng);
    (scatter_sqrt * u).scale(q.sqrt())
}

/// Mixture `(1-ε)·nominal + ε·contaminating`.
#[derive(Debug, Clone)]
pub struct ContaminationConfig {
    pub epsilon: f64,
    pub nominal: CesModel,
    pub contaminating: CesModel,
}

impl ContaminationConfig {
    pub fn new(epsilon: f64, nominal: CesModel, contaminating: CesModel) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::domain(format!("contamination fraction must lie in [0, 1], got {epsilon}")));
        }
        if nominal.dim() != contaminating.dim() {
            return Err(Error::Shape("nominal and contaminating dimensions differ".into()));
        }
        Ok(ContaminationConfig { epsilon, nominal, contaminating })
    }
}

/// Draws `len` i.i.d. observations from the mixture; the second return
/// value marks which came from the contaminating component.
pub fn sample_contaminated_labeled<R: Rng + ?Sized>(
    cfg: &ContaminationConfig,
    len: usize,
    rng: &mut R,
) -> Result<(Dataset, Vec<bool>)> {
    let mut labels = Vec::with_capacity(len);
    let columns: Vec<CVector> = (0..len)
        .map(|_| {
            let contaminated = rng.random::<f64>() < cfg.epsilon;
            labels.push(contaminated);
            if contaminated {
                cfg.contaminating.sample(rng)
            } else {
                cfg.nominal.sample(rng)
            }
        })
        .collect();
    Ok((Dataset::from_columns(&columns)?, labels))
}

pub fn sample_contaminated<R: Rng + ?Sized>(cfg: &ContaminationConfig, len: usize, rng: &mut R) -> Result<Dataset> {
    sample_contaminated_labeled(cfg, len, rng).map(|(d, _)| d)
}

/// `proper` CES draws plus `outliers` unit-sphere draws, in random order.
pub fn build_outlier_dataset<L: RadialLaw, R: Rng + ?Sized>(
    proper: usize,
    outliers: usize,
    nominal: &CesModel<L>,
    rng: &mut R,
) -> Result<Dataset> {
    if proper + outliers == 0 {
        return Err(Error::domain("outlier dataset needs at least one observation"));
    }
    let mut columns: Vec<CVector> = (0..proper).map(|_| nominal.sample(rng)).collect();
    columns.extend((0..outliers).map(|_| sample_sphere(nominal.dim(), rng)));
    columns.shuffle(rng);
    Dataset::from_columns(&columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toeplitz_identity_and_entries() {
        let s = toeplitz_scatter(Complex64::new(0.0, 0.0), 4).unwrap();
        assert_eq!(s.as_matrix(), &CMatrix::identity(4, 4));

        let rho = Complex64::from_polar(0.8, 2.0 * std::f64::consts::PI / 5.0);
        let s = toeplitz_scatter(rho, 8).unwrap();
        let m = s.as_matrix();
        assert!((m[(0, 1)] - rho.conj()).norm() < 1e-15);
        assert!((m[(1, 0)] - rho).norm() < 1e-15);
        assert_eq!(m[(0, 0)], Complex64::new(1.0, 0.0));
        assert!(toeplitz_scatter(Complex64::new(1.0, 0.0), 3).is_err());
    }

    #[test]
    fn gg_scale_is_power_for_exponential_generator() {
        for n in [1, 2, 8, 17] {
            assert!((gg_scale_for_power(4.0, 1.0, n).unwrap() - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn law_validation() {
        assert!(ModularLaw::complex_t(8, 1.0, 1.0).is_err());
        assert!(ModularLaw::complex_t(8, 2.0, 0.0).is_err());
        assert!(ModularLaw::generalized_gaussian(8, 0.0, 1.0).is_err());
        assert!(ModularLaw::complex_t(0, 2.0, 1.0).is_err());
        let law = ModularLaw::complex_t_with_power(8, 2.0, 4.0).unwrap();
        assert!(matches!(law.kind, ModularKind::ComplexT { eta, .. } if (eta - 0.5).abs() < 1e-15));
        assert!((law.mean() - 32.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_draws_have_unit_norm() {
        let mut rng = RngStream::new(1, 0);
        for n in [1, 3, 8] {
            for _ in 0..100 {
                assert!((sample_sphere(n, &mut rng).norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |seed, stream| {
            let mut r = RngStream::new(seed, stream);
            (0..4).map(|_| r.next_u64()).collect::<Vec<_>>()
        };
        assert_eq!(draw(7, 3), draw(7, 3));
        assert_ne!(draw(7, 3), draw(7, 4));
        assert_ne!(draw(7, 3), draw(8, 3));
    }

    #[test]
    fn contamination_extremes() {
        let n = 3;
        let nominal = CesModel::new(
            HermitianPd::new(CMatrix::identity(n, n)).unwrap(),
            ModularLaw::gaussian(n, 1.0).unwrap(),
        )
        .unwrap();
        let cont = nominal.clone();
        let mut rng = RngStream::new(5, 0);
        let cfg = ContaminationConfig::new(0.0, nominal.clone(), cont.clone()).unwrap();
        let (_, labels) = sample_contaminated_labeled(&cfg, 200, &mut rng).unwrap();
        assert!(labels.iter().all(|&c| !c));
        let cfg = ContaminationConfig::new(1.0, nominal.clone(), cont.clone()).unwrap();
        let (_, labels) = sample_contaminated_labeled(&cfg, 200, &mut rng).unwrap();
        assert!(labels.iter().all(|&c| c));
        assert!(ContaminationConfig::new(1.5, nominal, cont).is_err());
    }

    #[test]
    fn outlier_dataset_counts() {
        let n = 4;
        let nominal = CesModel::new(
            HermitianPd::new(CMatrix::identity(n, n).scale(9.0)).unwrap(),
            ModularLaw::complex_t_with_power(n, 3.0, 4.0).unwrap(),
        )
        .unwrap();
        let mut rng = RngStream::new(11, 2);
        let d = build_outlier_dataset(50, 50, &nominal, &mut rng).unwrap();
        let unit = (0..d.len()).filter(|&l| (d.sample(l).norm() - 1.0).abs() < 1e-12).count();
        assert_eq!(unit, 50);
        assert!(build_outlier_dataset(0, 0, &nominal, &mut rng).is_err());
    }
}
