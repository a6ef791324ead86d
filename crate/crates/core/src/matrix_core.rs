//! Dense complex Hermitian primitives and the structural operators used by
//! the R-estimator: `vec`/`ovec`, Kronecker products, the selection matrix
//! `P` that drops the first coordinate of a vectorized matrix, the projector
//! `Π⊥` orthogonal to `vec(I)`, and the matrix `L_V`.
//!
//! `vec` is column-major throughout.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative eigenvalue floor for positive-definiteness: `1e-12 * λ_max`.
pub const PD_RELATIVE_EPS: f64 = 1e-12;
/// Entrywise tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Hermitian positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianPd(CMatrix);

impl HermitianPd {
    /// Validates Hermitian symmetry (entrywise, `1e-12`) and positive
    /// definiteness, then stores the exactly symmetrized matrix.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::Shape(format!("expected a non-empty square matrix, got {}x{}", m.nrows(), m.ncols())));
        }
        if let Some(dev) = hermitian_deviation(&m) {
            if dev > HERMITIAN_TOL {
                return Err(Error::domain(format!("matrix is not Hermitian (deviation {dev:e})")));
            }
        }
        let m = hermitian_part(&m);
        let eig = m.clone().symmetric_eigenvalues();
        let (min, max) = eig.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        let threshold = PD_RELATIVE_EPS * max.max(0.0);
        if !(min > threshold) {
            return Err(Error::Singular { eigenvalue: min, threshold });
        }
        Ok(HermitianPd(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    /// Hermitian square root `V^{1/2}`.
    pub fn sqrt(&self) -> CMatrix {
        let eig = self.0.clone().symmetric_eigen();
        spectral_map(&eig, |l| l.sqrt())
    }

    pub fn inv_sqrt(&self) -> Result<CMatrix> {
        herm_inv_sqrt(&self.0)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }
}

/// Hermitian matrix whose top-left entry is exactly one.
///
/// Positive definiteness is not part of the type: the one-step update can
/// leave the cone, and callers that need it go through
/// [`ShapeMatrix::is_positive_definite`] or [`herm_inv_sqrt`].
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeMatrix(CMatrix);

impl ShapeMatrix {
    /// Divides a Hermitian scatter by its top-left entry.
    pub fn from_scatter(scatter: &CMatrix) -> Result<Self> {
        if !scatter.is_square() || scatter.nrows() == 0 {
            return Err(Error::Shape(format!(
                "expected a non-empty square matrix, got {}x{}",
                scatter.nrows(),
                scatter.ncols()
            )));
        }
        let top = scatter[(0, 0)].re;
        if !(top > 0.0) || !top.is_finite() {
            return Err(Error::Degenerate(format!("top-left entry {top} is not positive")));
        }
        let mut m = hermitian_part(scatter).unscale(top);
        m[(0, 0)] = Complex64::new(1.0, 0.0);
        Ok(ShapeMatrix(m))
    }

    pub fn identity(n: usize) -> Self {
        ShapeMatrix(CMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn is_positive_definite(&self) -> bool {
        let eig = self.0.clone().symmetric_eigenvalues();
        let max = eig.max();
        eig.min() > PD_RELATIVE_EPS * max.max(0.0)
    }

    pub fn to_hermitian_pd(&self) -> Result<HermitianPd> {
        HermitianPd::new(self.0.clone())
    }
}

/// `P` and `Π⊥` for a given dimension, materialized as dense real matrices.
#[derive(Debug, Clone)]
pub struct StructuralOperators {
    n: usize,
    /// `(N²-1) × N²`; rows are `e_2ᵀ, …, e_{N²}ᵀ`.
    pub p: DMatrix<f64>,
    /// `I_{N²} - N⁻¹ vec(I) vec(I)ᵀ`.
    pub pi_perp: DMatrix<f64>,
}

impl StructuralOperators {
    pub fn new(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::domain("dimension must be >= 1"));
        }
        let n2 = n * n;
        let p = DMatrix::from_fn(n2 - 1, n2, |i, j| if j == i + 1 { 1.0 } else { 0.0 });
        let vec_i = DVector::from_fn(n2, |k, _| if k % (n + 1) == 0 { 1.0 } else { 0.0 });
        let pi_perp = DMatrix::identity(n2, n2) - (&vec_i * vec_i.transpose()) / n as f64;
        Ok(StructuralOperators { n, p, pi_perp })
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

pub fn vec(a: &CMatrix) -> CVector {
    CVector::from_column_slice(a.as_slice())
}

pub fn unvec(v: &CVector, rows: usize, cols: usize) -> Result<CMatrix> {
    if v.len() != rows * cols {
        return Err(Error::Shape(format!("cannot reshape {} entries into {rows}x{cols}", v.len())));
    }
    Ok(CMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// `vec(A)` without its first entry.
pub fn ovec(a: &CMatrix) -> Result<CVector> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::Shape(format!("ovec needs a non-empty square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    Ok(CVector::from_column_slice(&a.as_slice()[1..]))
}

/// Inverse of [`ovec`] with the top-left entry set to one, followed by
/// Hermitian symmetrization `(M + Mᴴ)/2`.
pub fn unovec(v: &CVector) -> Result<ShapeMatrix> {
    let n = square_dim(v.len() + 1)
        .ok_or_else(|| Error::Shape(format!("{} is not N²-1 for any N", v.len())))?;
    let mut entries = Vec::with_capacity(n * n);
    entries.push(Complex64::new(1.0, 0.0));
    entries.extend_from_slice(v.as_slice());
    let m = CMatrix::from_vec(n, n, entries);
    let mut m = hermitian_part(&m);
    m[(0, 0)] = Complex64::new(1.0, 0.0);
    Ok(ShapeMatrix(m))
}

fn square_dim(len: usize) -> Option<usize> {
    let n = (len as f64).sqrt().round() as usize;
    (n >= 1 && n * n == len).then_some(n)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `(A + Aᴴ)/2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Largest entrywise `|A - Aᴴ|`, or `None` if `a` is not square.
pub fn hermitian_deviation(a: &CMatrix) -> Option<f64> {
    if !a.is_square() {
        return None;
    }
    let n = a.nrows();
    let mut dev: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    Some(dev)
}

fn spectral_map(eig: &nalgebra::SymmetricEigen<Complex64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> CMatrix {
    let u = &eig.eigenvectors;
    let mut scaled = u.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let s = f(l);
        scaled.column_mut(j).scale_mut(s);
    }
    hermitian_part(&(scaled * u.adjoint()))
}

/// Hermitian inverse square root `V^{-1/2}` via eigendecomposition.
///
/// Fails when the smallest eigenvalue is at or below
/// `PD_RELATIVE_EPS * λ_max`.
pub fn herm_inv_sqrt(v: &CMatrix) -> Result<CMatrix> {
    let eig = herm_eigen_checked(v)?;
    Ok(spectral_map(&eig, |l| 1.0 / l.sqrt()))
}

/// Hermitian inverse via eigendecomposition, with the same singularity rule
/// as [`herm_inv_sqrt`].
pub fn herm_inverse(v: &CMatrix) -> Result<CMatrix> {
    let eig = herm_eigen_checked(v)?;
    Ok(spectral_map(&eig, |l| 1.0 / l))
}

fn herm_eigen_checked(v: &CMatrix) -> Result<nalgebra::SymmetricEigen<Complex64, nalgebra::Dyn>> {
    if !v.is_square() || v.nrows() == 0 {
        return Err(Error::Shape(format!("expected a non-empty square matrix, got {}x{}", v.nrows(), v.ncols())));
    }
    let eig = v.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let threshold = PD_RELATIVE_EPS * max.max(0.0);
    if !(min > threshold) || !min.is_finite() {
        return Err(Error::Singular { eigenvalue: min, threshold });
    }
    Ok(eig)
}

/// `L_V = P (V^{-T/2} ⊗ V^{-1/2}) Π⊥`, an `(N²-1) × N²` complex matrix.
///
/// Built from `V^{-1/2}` directly using
/// `(Wᵀ ⊗ W) Π⊥ = Wᵀ ⊗ W - N⁻¹ vec(W W) vec(I)ᵀ`.
pub fn build_l(v: &ShapeMatrix, ops: &StructuralOperators) -> Result<CMatrix> {
    let n = v.dim();
    if n != ops.dim() {
        return Err(Error::Shape(format!("matrix dimension {n} does not match operators for N = {}", ops.dim())));
    }
    let w = herm_inv_sqrt(v.as_matrix())?;
    Ok(build_l_from_inv_sqrt(&w))
}

pub(crate) fn build_l_from_inv_sqrt(w: &CMatrix) -> CMatrix {
    let n = w.nrows();
    let n2 = n * n;
    let v_inv = w * w;
    let inv_n = 1.0 / n as f64;
    // Row r of Wᵀ⊗W: r = a*N + b with a the block row (Wᵀ index), b the inner.
    // Column c = c1*N + c2. Entry = W[c1, a] * W[b, c2]. Columns with c1 == c2
    // are the support of vec(I).
    let mut l = CMatrix::zeros(n2 - 1, n2);
    for c in 0..n2 {
        let (c1, c2) = (c / n, c % n);
        for r in 1..n2 {
            let (a, b) = (r / n, r % n);
            let mut entry = w[(c1, a)] * w[(b, c2)];
            if c1 == c2 {
                entry -= v_inv[(b, a)] * inv_n;
            }
            l[(r - 1, c)] = entry;
        }
    }
    l
}

/// `L_V L_Vᴴ` for a shape, in closed form.
pub fn l_gram(v: &ShapeMatrix) -> Result<CMatrix> {
    Ok(l_gram_from_inv_sqrt(&herm_inv_sqrt(v.as_matrix())?))
}

/// `L_V L_Vᴴ`, using
/// `P [conj(V⁻¹) ⊗ V⁻¹ - N⁻¹ vec(V⁻¹) vec(V⁻¹)ᴴ] Pᵀ`.
pub(crate) fn l_gram_from_inv_sqrt(w: &CMatrix) -> CMatrix {
    let n = w.nrows();
    let n2 = n * n;
    let v_inv = hermitian_part(&(w * w));
    let inv_n = 1.0 / n as f64;
    let vec_vi = vec(&v_inv);
    CMatrix::from_fn(n2 - 1, n2 - 1, |i, j| {
        let (r, c) = (i + 1, j + 1);
        let (a, b) = (r / n, r % n);
        let (c1, c2) = (c / n, c % n);
        v_inv[(a, c1)].conj() * v_inv[(b, c2)] - vec_vi[r] * vec_vi[c].conj() * inv_n
    })
}

/// `L_V vec(M) = ovec(W (M - tr(M)/N · I) W)` with `W = V^{-1/2}`.
pub(crate) fn apply_l(w: &CMatrix, m: &CMatrix) -> CVector {
    let n = w.nrows();
    let mut centered = m.clone();
    let shift = m.trace() / n as f64;
    for i in 0..n {
        centered[(i, i)] -= shift;
    }
    CVector::from_column_slice(&(w * centered * w).as_slice()[1..])
}

/// `L_V L_Vᴴ ovec(H)` for `H` with a zero top-left entry:
/// `ovec(V⁻¹ H V⁻¹ - tr(V⁻¹ H)/N · V⁻¹)`.
pub(crate) fn apply_l_gram(v_inv: &CMatrix, h: &CMatrix) -> CVector {
    let n = v_inv.nrows();
    let vh = v_inv * h;
    let shift = vh.trace() / n as f64;
    let out = &vh * v_inv - v_inv * shift;
    CVector::from_column_slice(&out.as_slice()[1..])
}

/// Solves `L_V L_Vᴴ x = δ` exactly.
///
/// With `A = conj(V⁻¹) ⊗ V⁻¹` and `a = vec(V⁻¹)`, the full operator
/// `M = A - a aᴴ/N` has null vector `vec(V)`. Padding `δ` with
/// `c = -vec(V)ᴴ Pᵀδ / conj(V₁₁)` puts it in the range of `M`, where
/// `A⁻¹ = conj(V) ⊗ V` inverts `M`; the null direction then zeroes the
/// first entry.
pub(crate) fn solve_l_gram(v: &CMatrix, delta: &CVector) -> CVector {
    let n = v.nrows();
    let mut b = CMatrix::zeros(n, n);
    b.as_mut_slice()[1..].copy_from_slice(delta.as_slice());
    let vv = v.as_slice();
    let dot: Complex64 = vv[1..].iter().zip(delta.iter()).map(|(x, d)| x.conj() * d).sum();
    b[(0, 0)] = -dot / vv[0].conj();
    let y = v * b * v;
    let t = y[(0, 0)] / v[(0, 0)];
    let x = y - v * t;
    CVector::from_column_slice(&x.as_slice()[1..])
}

/// Upper bound on the condition number of `L_V L_Vᴴ`:
/// `κ(V)² (1 + ‖vec(V)₂:‖² / |V₁₁|²)`.
///
/// `λ_max(L Lᴴ) ≤ λ_max(conj(V⁻¹) ⊗ V⁻¹)` by interlacing, and the inverse
/// from [`solve_l_gram`] is `Bᴴ (conj(V) ⊗ V) B` with `B` the embedding
/// `x ↦ (-vec(V)₂:ᴴ x / conj(V₁₁), x)`.
pub(crate) fn l_gram_condition_bound(v: &CMatrix) -> f64 {
    let eig = v.clone().symmetric_eigenvalues();
    let (max, min) = (eig.max(), eig.min());
    if !(min > 0.0) {
        return f64::INFINITY;
    }
    let tail: f64 = v.as_slice()[1..].iter().map(|z| z.norm_sqr()).sum();
    (max / min).powi(2) * (1.0 + tail / v[(0, 0)].norm_sqr())
}

/// Exact condition number of `L_V L_Vᴴ` from its eigenvalues.
pub(crate) fn l_gram_condition(w: &CMatrix) -> f64 {
    let eig = l_gram_from_inv_sqrt(w).symmetric_eigenvalues();
    let (max, min) = (eig.max(), eig.min());
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}
