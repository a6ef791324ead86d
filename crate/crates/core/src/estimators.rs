//! Shape-matrix estimators: the sample covariance matrix, Tyler's fixed
//! point, and the one-step R-estimator built on either of them.
//!
//! Every estimator returns the shape with its top-left entry pinned to one
//! together with the trace-`N` renormalized version used for error metrics.

use nalgebra::Cholesky;
use num_complex::Complex64;
use rand::Rng;

use crate::ces_sampling::complex_normal;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix_core::{
    apply_l, apply_l_gram, herm_inv_sqrt, hermitian_part, l_gram_condition, l_gram_condition_bound, ovec, solve_l_gram, unovec, vec,
    CMatrix, CVector, ShapeMatrix, StructuralOperators,
};
use crate::scores::{ranks, ScoreFunction};

/// Default perturbation scale for `H0`.
pub const DEFAULT_UPSILON: f64 = 0.01;
/// Attempts at drawing a perturbation that keeps the shape positive definite.
pub const PERTURBATION_ATTEMPTS: usize = 11;
/// Largest accepted condition number of `Υ̂`.
pub const MAX_UPSILON_CONDITION: f64 = 1e12;
/// Smallest accepted `‖L Lᴴ ovec(H0)‖`.
pub const MIN_PERTURBATION_NORM: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TylerOptions {
    /// Relative Frobenius change between iterates.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TylerOptions {
    fn default() -> Self {
        TylerOptions { tol: 1e-9, max_iter: 200 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Fixed-point iterations (Tyler only).
    pub iterations: usize,
    /// Final relative fixed-point residual (Tyler only).
    pub residual: f64,
    /// `α̂` of the one-step correction.
    pub alpha: Option<f64>,
    /// `‖Δ̃‖` at the preliminary estimate.
    pub delta_norm: Option<f64>,
    /// Extra perturbation draws needed to stay positive definite.
    pub perturbation_redraws: usize,
    pub positive_definite: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOutput {
    pub shape: ShapeMatrix,
    /// `N · shape / trace(shape)`.
    pub renormalized: CMatrix,
    pub diagnostics: Diagnostics,
}

impl EstimatorOutput {
    fn new(shape: ShapeMatrix, mut diagnostics: Diagnostics) -> Result<Self> {
        let renormalized = renormalize(&shape)?;
        diagnostics.positive_definite = shape.is_positive_definite();
        Ok(EstimatorOutput { shape, renormalized, diagnostics })
    }
}

/// `N · V / trace(V)`.
pub fn renormalize(shape: &ShapeMatrix) -> Result<CMatrix> {
    let m = shape.as_matrix();
    let trace = m.trace().re;
    if !(trace > 0.0) || !trace.is_finite() {
        return Err(Error::Degenerate(format!("cannot renormalize a shape with trace {trace}")));
    }
    Ok(m.scale(m.nrows() as f64 / trace))
}

/// Sample covariance `(1/L) Σ z zᴴ`, divided by its top-left entry.
pub fn scm(data: &Dataset) -> Result<EstimatorOutput> {
    if data.is_empty() {
        return Err(Error::Degenerate("SCM of an empty dataset".into()));
    }
    let z = data.samples();
    let sigma = (z * z.adjoint()).unscale(data.len() as f64);
    if sigma[(0, 0)].re <= 0.0 {
        return Err(Error::Degenerate("first coordinate of every observation is zero".into()));
    }
    EstimatorOutput::new(ShapeMatrix::from_scatter(&sigma)?, Diagnostics::default())
}

fn check_no_zero_columns(data: &Dataset) -> Result<()> {
    for (l, col) in data.samples().column_iter().enumerate() {
        if col.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            return Err(Error::Data(format!("observation {l} is the zero vector")));
        }
    }
    Ok(())
}

/// `(N/L) Σ z zᴴ / (zᴴ V⁻¹ z)`, or `None` when `V` is not positive definite.
fn tyler_map(z: &CMatrix, v: &CMatrix) -> Option<CMatrix> {
    let (n, len) = z.shape();
    let v_inv = Cholesky::new(v.clone())?.inverse();
    let mut weights = Vec::with_capacity(len);
    for col in z.column_iter() {
        let q = quadratic_form(&v_inv, col.as_slice());
        if !(q > 0.0) || !q.is_finite() {
            return None;
        }
        weights.push(1.0 / q);
    }
    let mut out = weighted_outer_sum(z, &weights);
    out.scale_mut(n as f64 / len as f64);
    Some(out)
}

/// `xᴴ A x` for Hermitian `A`, real by construction.
fn quadratic_form(a: &CMatrix, x: &[Complex64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for (j, xj) in x.iter().enumerate() {
        let col = &a.as_slice()[j * n..(j + 1) * n];
        let mut ax = Complex64::new(0.0, 0.0);
        for (aij, xi) in col.iter().zip(x) {
            ax += xi.conj() * aij;
        }
        acc += (ax * xj).re;
    }
    acc
}

/// `Σ_l w_l z_l z_lᴴ` over the columns of `z`, exactly Hermitian.
fn weighted_outer_sum(z: &CMatrix, weights: &[f64]) -> CMatrix {
    let n = z.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (col, &w) in z.column_iter().zip(weights) {
        let x = col.as_slice();
        for j in 0..n {
            let cj = x[j].conj();
            let dst = &mut out.as_mut_slice()[j * n..(j + 1) * n];
            for i in j..n {
                dst[i] += x[i] * cj * w;
            }
        }
    }
    for j in 0..n {
        out[(j, j)].im = 0.0;
        for i in (j + 1)..n {
            out[(j, i)] = out[(i, j)].conj();
        }
    }
    out
}

fn relative_change(next: &CMatrix, prev: &CMatrix) -> f64 {
    (next - prev).norm() / next.norm()
}

/// Tyler's fixed point started from the identity, normalized to a unit
/// top-left entry once converged.
pub fn tyler(data: &Dataset, opts: TylerOptions) -> Result<EstimatorOutput> {
    let n = data.dim();
    if data.len() <= n {
        return Err(Error::domain(format!("Tyler's estimator needs L > N (L = {}, N = {n})", data.len())));
    }
    check_no_zero_columns(data)?;
    let z = data.samples();
    let mut v = CMatrix::identity(n, n);
    let mut residual = f64::INFINITY;
    for iteration in 1..=opts.max_iter {
        let next = tyler_map(z, &v).ok_or(Error::RankDeficient { iteration })?;
        residual = relative_change(&next, &v);
        v = next;
        if residual <= opts.tol {
            let shape = ShapeMatrix::from_scatter(&v)?;
            let residual = tyler_residual(data, &shape).unwrap_or(residual);
            return EstimatorOutput::new(shape, Diagnostics { iterations: iteration, residual, ..Default::default() });
        }
    }
    Err(Error::TylerNoConvergence { iterations: opts.max_iter, residual })
}

/// Relative Frobenius distance between `V` and the right-hand side of
/// Tyler's fixed-point equation evaluated at `V`.
///
/// The map is homogeneous of degree one, so the residual is the same for
/// any positive rescaling of `V`.
pub fn tyler_residual(data: &Dataset, shape: &ShapeMatrix) -> Result<f64> {
    let v = shape.as_matrix();
    let image = tyler_map(data.samples(), v).ok_or(Error::RankDeficient { iteration: 0 })?;
    Ok((image - v).norm() / v.norm())
}

/// Ingredients of the rank-based statistic at a given shape.
#[derive(Debug, Clone, PartialEq)]
pub struct RStatistics {
    /// `Q̂_l = z_lᴴ V⁻¹ z_l`.
    pub q: Vec<f64>,
    /// Columns are `û_l = Q̂_l^{-1/2} V^{-1/2} z_l`.
    pub u: CMatrix,
    /// Ranks of the `Q̂_l`, in `1..=L`.
    pub ranks: Vec<usize>,
}

pub fn r_statistics(data: &Dataset, v: &ShapeMatrix) -> Result<RStatistics> {
    let w = herm_inv_sqrt(v.as_matrix())?;
    r_statistics_with(data, &w)
}

fn r_statistics_with(data: &Dataset, w: &CMatrix) -> Result<RStatistics> {
    check_no_zero_columns(data)?;
    let mut u = w * data.samples();
    let mut q = Vec::with_capacity(data.len());
    for mut col in u.column_iter_mut() {
        let ql = col.norm_squared();
        col.unscale_mut(ql.sqrt());
        q.push(ql);
    }
    let ranks = ranks(&q)?;
    Ok(RStatistics { q, u, ranks })
}

/// `K(r/(L+1))` for `r = 1..=L`.
pub fn score_weights(k: &ScoreFunction, len: usize) -> Result<Vec<f64>> {
    let denom = len as f64 + 1.0;
    (1..=len).map(|r| k.evaluate(r as f64 / denom)).collect()
}

/// `Δ̃ = L^{-1/2} L_V Σ_l K(r_l/(L+1)) vec(û_l û_lᴴ)`.
pub fn delta_tilde(stats: &RStatistics, lmat: &CMatrix, k: &ScoreFunction, len: usize) -> Result<CVector> {
    let weights = score_weights(k, len)?;
    delta_tilde_weighted(stats, lmat, &weights)
}

/// [`delta_tilde`] with the score already tabulated by rank.
pub fn delta_tilde_weighted(stats: &RStatistics, lmat: &CMatrix, weights: &[f64]) -> Result<CVector> {
    let n = stats.u.nrows();
    if lmat.ncols() != n * n {
        return Err(Error::Shape(format!("L_V has {} columns, expected {}", lmat.ncols(), n * n)));
    }
    let m = weighted_scatter(stats, weights)?;
    Ok((lmat * vec(&m)).unscale((stats.u.ncols() as f64).sqrt()))
}

/// `Σ_l K(r_l/(L+1)) û_l û_lᴴ`.
fn weighted_scatter(stats: &RStatistics, weights: &[f64]) -> Result<CMatrix> {
    let len = stats.u.ncols();
    if weights.len() != len || stats.ranks.len() != len {
        return Err(Error::Shape(format!("{} weights and {} ranks for {len} observations", weights.len(), stats.ranks.len())));
    }
    let by_obs: Vec<f64> = stats.ranks.iter().map(|&r| weights[r - 1]).collect();
    Ok(weighted_outer_sum(&stats.u, &by_obs))
}

/// `H0 = (G + Gᴴ)/2` with `G_ij ~ CN(0, υ²)` and `G_11 = 0`.
pub fn draw_perturbation<R: Rng + ?Sized>(n: usize, upsilon: f64, rng: &mut R) -> CMatrix {
    let mut g = CMatrix::from_fn(n, n, |_, _| complex_normal(rng) * upsilon);
    g[(0, 0)] = Complex64::new(0.0, 0.0);
    let mut h = (&g + g.adjoint()).scale(0.5);
    // (G + Gᴴ)/2 is Hermitian in exact arithmetic; make it so bitwise.
    for j in 0..n {
        h[(j, j)].im = 0.0;
        for i in (j + 1)..n {
            h[(j, i)] = h[(i, j)].conj();
        }
    }
    h
}

/// Everything evaluated at the preliminary shape, reused by `α̂` and the
/// update.
struct Anchor {
    w: CMatrix,
    v_inv: CMatrix,
    delta: CVector,
}

impl Anchor {
    fn new(data: &Dataset, v: &ShapeMatrix, weights: &[f64]) -> Result<Self> {
        let w = herm_inv_sqrt(v.as_matrix())?;
        let stats = r_statistics_with(data, &w)?;
        let delta = weighted_scatter(&stats, weights).map(|m| apply_l(&w, &m).unscale((data.len() as f64).sqrt()))?;
        Ok(Anchor { v_inv: hermitian_part(&(&w * &w)), w, delta })
    }
}

fn perturbed(v: &ShapeMatrix, h0: &CMatrix, len: usize) -> Result<ShapeMatrix> {
    if h0.shape() != (v.dim(), v.dim()) {
        return Err(Error::Shape("perturbation and shape dimensions differ".into()));
    }
    if h0[(0, 0)] != Complex64::new(0.0, 0.0) {
        return Err(Error::domain("perturbation must have a zero top-left entry"));
    }
    ShapeMatrix::from_scatter(&(v.as_matrix() + h0.unscale((len as f64).sqrt())))
}

/// `α̂ = ‖Δ̃(V + L^{-1/2} H0) - Δ̃(V)‖ / ‖L_V L_Vᴴ ovec(H0)‖`.
pub fn alpha_hat(data: &Dataset, v: &ShapeMatrix, k: &ScoreFunction, h0: &CMatrix, lmat: &CMatrix) -> Result<f64> {
    let weights = score_weights(k, data.len())?;
    let anchor = Anchor::new(data, v, &weights)?;
    if lmat.nrows() + 1 != v.dim() * v.dim() {
        return Err(Error::Shape(format!("L_V has {} rows, expected {}", lmat.nrows(), v.dim() * v.dim() - 1)));
    }
    let denom = (lmat * (lmat.adjoint() * ovec(h0)?)).norm();
    alpha_with_denominator(data, v, &weights, h0, &anchor.delta, denom)
}

fn alpha_from_anchor(
    data: &Dataset,
    v: &ShapeMatrix,
    weights: &[f64],
    h0: &CMatrix,
    anchor: &Anchor,
) -> Result<f64> {
    if h0.shape() != (v.dim(), v.dim()) {
        return Err(Error::Shape("perturbation and shape dimensions differ".into()));
    }
    let denom = apply_l_gram(&anchor.v_inv, h0).norm();
    alpha_with_denominator(data, v, weights, h0, &anchor.delta, denom)
}

fn alpha_with_denominator(
    data: &Dataset,
    v: &ShapeMatrix,
    weights: &[f64],
    h0: &CMatrix,
    delta: &CVector,
    denom: f64,
) -> Result<f64> {
    if !(denom >= MIN_PERTURBATION_NORM) {
        return Err(Error::DegeneratePerturbation(denom));
    }
    let vp = perturbed(v, h0, data.len())?;
    let shifted = Anchor::new(data, &vp, weights)?;
    Ok((shifted.delta - delta).norm() / denom)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ROptions {
    pub upsilon: f64,
}

impl Default for ROptions {
    fn default() -> Self {
        ROptions { upsilon: DEFAULT_UPSILON }
    }
}

/// One-step R-estimator:
/// `ovec(V_R) = ovec(V*) + L^{-1/2} Υ̂⁻¹ Δ̃` with `Υ̂ = α̂ L_V L_Vᴴ`.
///
/// A result outside the positive-definite cone is returned as is, with
/// `diagnostics.positive_definite == false`.
pub fn r_estimate<R: Rng + ?Sized>(
    data: &Dataset,
    prelim: &EstimatorOutput,
    k: &ScoreFunction,
    opts: ROptions,
    rng: &mut R,
) -> Result<EstimatorOutput> {
    let v = &prelim.shape;
    let n = v.dim();
    if data.dim() != n {
        return Err(Error::Shape(format!("data dimension {} does not match shape dimension {n}", data.dim())));
    }
    if k.dim() as usize != n {
        return Err(Error::Shape(format!("score built for N = {} used with N = {n}", k.dim())));
    }
    r_estimate_weighted(data, prelim, &score_weights(k, data.len())?, opts, rng)
}

/// [`r_estimate`] with the score tabulated by rank, as returned by
/// [`score_weights`].
pub fn r_estimate_weighted<R: Rng + ?Sized>(
    data: &Dataset,
    prelim: &EstimatorOutput,
    weights: &[f64],
    opts: ROptions,
    rng: &mut R,
) -> Result<EstimatorOutput> {
    let v = &prelim.shape;
    let n = v.dim();
    if data.dim() != n {
        return Err(Error::Shape(format!("data dimension {} does not match shape dimension {n}", data.dim())));
    }
    let len = data.len();
    let anchor = Anchor::new(data, v, weights)?;

    let mut redraws = 0;
    let alpha = loop {
        let h0 = draw_perturbation(n, opts.upsilon, rng);
        match alpha_from_anchor(data, v, weights, &h0, &anchor) {
            Ok(a) => break a,
            Err(Error::Singular { .. } | Error::Degenerate(_)) if redraws + 1 < PERTURBATION_ATTEMPTS => redraws += 1,
            Err(e) => return Err(e),
        }
    };
    if anchor.delta.iter().all(|d| *d == Complex64::new(0.0, 0.0)) {
        // Nothing to correct; α̂ is 0/denominator here and carries no information.
        return EstimatorOutput::new(
            v.clone(),
            Diagnostics { alpha: None, delta_norm: Some(0.0), perturbation_redraws: redraws, ..Default::default() },
        );
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::IllConditioned(f64::INFINITY));
    }

    check_condition(v.as_matrix(), &anchor.w)?;
    let correction = solve_l_gram(v.as_matrix(), &anchor.delta).unscale(alpha);
    let mut coords = ovec(v.as_matrix())?;
    coords += correction.unscale((len as f64).sqrt());
    let shape = unovec(&coords)?;
    EstimatorOutput::new(
        shape,
        Diagnostics {
            alpha: Some(alpha),
            delta_norm: Some(anchor.delta.norm()),
            perturbation_redraws: redraws,
            ..Default::default()
        },
    )
}

/// Rejects `Υ̂ = α̂ L_V L_Vᴴ` whose condition number exceeds
/// [`MAX_UPSILON_CONDITION`]; `α̂` does not affect the ratio. The exact
/// eigenvalue computation runs only when the cheap bound is inconclusive.
fn check_condition(v: &CMatrix, w: &CMatrix) -> Result<()> {
    if l_gram_condition_bound(v) <= MAX_UPSILON_CONDITION {
        return Ok(());
    }
    let cond = l_gram_condition(w);
    if !(cond <= MAX_UPSILON_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    Ok(())
}

/// Full `L_V` for a shape, for callers that hold [`StructuralOperators`].
pub fn l_matrix(v: &ShapeMatrix, ops: &StructuralOperators) -> Result<CMatrix> {
    crate::matrix_core::build_l(v, ops)
}
