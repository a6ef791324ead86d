//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the library's numerical kernels: matrices are
//! plain `Vec`s, inverses come from Gauss-Jordan elimination, square roots
//! from the Denman-Beavers iteration, and integrals from adaptive Simpson.

#![allow(dead_code)]

use shapekit::{CMatrix, Complex64};

pub type Mat = Vec<Vec<Complex64>>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn to_mat(m: &CMatrix) -> Mat {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn from_mat(m: &Mat) -> CMatrix {
    CMatrix::from_fn(m.len(), m[0].len(), |i, j| m[i][j])
}

pub fn zeros(r: usize, cols: usize) -> Mat {
    vec![vec![c(0.0, 0.0); cols]; r]
}

pub fn eye(n: usize) -> Mat {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = c(1.0, 0.0);
    }
    m
}

pub fn mul(a: &Mat, b: &Mat) -> Mat {
    let (r, k, cols) = (a.len(), b.len(), b[0].len());
    let mut out = zeros(r, cols);
    for i in 0..r {
        for j in 0..cols {
            let mut s = c(0.0, 0.0);
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn add(a: &Mat, b: &Mat, beta: f64) -> Mat {
    a.iter().zip(b).map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y * beta).collect()).collect()
}

pub fn adjoint(a: &Mat) -> Mat {
    (0..a[0].len()).map(|j| (0..a.len()).map(|i| a[i][j].conj()).collect()).collect()
}

pub fn transpose(a: &Mat) -> Mat {
    (0..a[0].len()).map(|j| (0..a.len()).map(|i| a[i][j]).collect()).collect()
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn fro(a: &Mat) -> f64 {
    a.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(a: &Mat) -> Mat {
    let n = a.len();
    let mut m = a.clone();
    let mut inv = eye(n);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].norm().total_cmp(&m[j][col].norm())).unwrap();
        m.swap(col, piv);
        inv.swap(col, piv);
        let p = m[col][col];
        for j in 0..n {
            m[col][j] /= p;
            inv[col][j] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = m[i][col];
                for j in 0..n {
                    let (mc, ic) = (m[col][j], inv[col][j]);
                    m[i][j] -= f * mc;
                    inv[i][j] -= f * ic;
                }
            }
        }
    }
    inv
}

/// `(A^{1/2}, A^{-1/2})` of a Hermitian positive-definite matrix by the
/// Denman-Beavers iteration.
pub fn sqrt_pair(a: &Mat) -> (Mat, Mat) {
    let n = a.len();
    let mut y = a.clone();
    let mut z = eye(n);
    for _ in 0..100 {
        let yi = inverse(&y);
        let zi = inverse(&z);
        let ny: Mat = add(&y, &zi, 1.0).iter().map(|r| r.iter().map(|x| x * 0.5).collect()).collect();
        let nz: Mat = add(&z, &yi, 1.0).iter().map(|r| r.iter().map(|x| x * 0.5).collect()).collect();
        let done = max_abs_diff(&ny, &y) < 1e-16 * fro(&ny).max(1.0);
        y = ny;
        z = nz;
        if done {
            break;
        }
    }
    (y, z)
}

pub fn naive_kron(a: &Mat, b: &Mat) -> Mat {
    let (ra, ca, rb, cb) = (a.len(), a[0].len(), b.len(), b[0].len());
    let mut out = zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            for k in 0..rb {
                for l in 0..cb {
                    out[i * rb + k][j * cb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

/// Column-major `vec`.
pub fn vec_of(a: &Mat) -> Vec<Complex64> {
    let (r, cols) = (a.len(), a[0].len());
    (0..r * cols).map(|k| a[k % r][k / r]).collect()
}

pub fn matvec(a: &Mat, x: &[Complex64]) -> Vec<Complex64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// `P`: drops the first coordinate.
pub fn p_matrix(n: usize) -> Mat {
    let n2 = n * n;
    let mut p = zeros(n2 - 1, n2);
    for i in 0..n2 - 1 {
        p[i][i + 1] = c(1.0, 0.0);
    }
    p
}

/// `Π⊥ = I - vec(I) vec(I)ᵀ / N`.
pub fn pi_perp(n: usize) -> Mat {
    let v = vec_of(&eye(n));
    let n2 = n * n;
    let mut m = eye(n2);
    for i in 0..n2 {
        for j in 0..n2 {
            m[i][j] -= v[i] * v[j] / n as f64;
        }
    }
    m
}

/// `L_V = P (V^{-T/2} ⊗ V^{-1/2}) Π⊥` as a literal triple product.
pub fn naive_l(v: &Mat) -> Mat {
    let n = v.len();
    let (_, w) = sqrt_pair(v);
    mul(&mul(&p_matrix(n), &naive_kron(&transpose(&w), &w)), &pi_perp(n))
}

/// `Δ̃ = L^{-1/2} L_V Σ_l K(r_l/(L+1)) vec(û_l û_lᴴ)` with everything
/// recomputed from scratch; `k` maps rank to score.
pub fn naive_delta(data: &[Vec<Complex64>], v: &Mat, k: impl Fn(usize, usize) -> f64) -> Vec<Complex64> {
    let n = v.len();
    let len = data.len();
    let v_inv = inverse(v);
    let (_, w) = sqrt_pair(v);
    let q: Vec<f64> = data
        .iter()
        .map(|z| {
            let vz = matvec(&v_inv, z);
            z.iter().zip(&vz).map(|(a, b)| a.conj() * b).sum::<Complex64>().re
        })
        .collect();
    let mut sum = vec![c(0.0, 0.0); n * n];
    for (l, z) in data.iter().enumerate() {
        let rank = 1 + q.iter().enumerate().filter(|&(j, &qj)| qj < q[l] || (qj == q[l] && j < l)).count();
        let u: Vec<Complex64> = matvec(&w, z).iter().map(|x| x / q[l].sqrt()).collect();
        let score = k(rank, len);
        for col in 0..n {
            for row in 0..n {
                sum[col * n + row] += u[row] * u[col].conj() * score;
            }
        }
    }
    matvec(&naive_l(v), &sum).iter().map(|x| x / (len as f64).sqrt()).collect()
}

const TOL_FLOOR: f64 = 1e-17;

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        // Halving stops at a floor so rounding noise cannot force refinement
        // to full depth.
        let tol = (tol / 2.0).max(TOL_FLOOR);
        recurse(f, a, fa, m, fm, lm, flm, left, tol, depth - 1) + recurse(f, m, fm, b, fb, rm, frm, right, tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 40)
}

/// `∫_0^x` of an unnormalized density on `(0, ∞)` divided by its total
/// mass; the tail is handled by the substitution `t = s / (1 - s)`.
pub struct QuadratureCdf {
    density: Box<dyn Fn(f64) -> f64>,
    total: f64,
}

impl QuadratureCdf {
    pub fn new(density: impl Fn(f64) -> f64 + 'static) -> Self {
        // Rescale by the peak on a grid so absolute tolerances make sense.
        let peak = (1..4000)
            .map(|i| {
                let s = i as f64 / 4000.0;
                density(s / (1.0 - s)) / ((1.0 - s) * (1.0 - s))
            })
            .fold(0.0f64, f64::max);
        assert!(peak > 0.0 && peak.is_finite(), "degenerate density");
        let density: Box<dyn Fn(f64) -> f64> = Box::new(move |t| density(t) / peak);
        let total = Self::mass(&*density, 1.0);
        QuadratureCdf { density, total }
    }

    fn mass(f: &dyn Fn(f64) -> f64, s_max: f64) -> f64 {
        let g = |s: f64| {
            if s <= 0.0 || s >= 1.0 {
                return 0.0;
            }
            let t = s / (1.0 - s);
            f(t) / ((1.0 - s) * (1.0 - s))
        };
        integrate(&g, 0.0, s_max, 1e-13)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        (Self::mass(&*self.density, x / (1.0 + x)) / self.total).clamp(0.0, 1.0)
    }

    /// `∫ t^p f(t) dt / ∫ f(t) dt`.
    pub fn moment(&self, p: f64) -> f64 {
        let f = &self.density;
        let g = |t: f64| t.powf(p) * f(t);
        Self::mass(&g, 1.0) / self.total
    }
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

impl QuadratureCdf {
    /// Two-sided KS statistic of `samples`; the cdf is accumulated by
    /// integrating the density between consecutive order statistics.
    pub fn ks(&self, samples: &mut [f64]) -> f64 {
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        let f = &self.density;
        let g = |s: f64| {
            if s <= 0.0 || s >= 1.0 {
                return 0.0;
            }
            let t = s / (1.0 - s);
            f(t) / ((1.0 - s) * (1.0 - s))
        };
        let mut cdf = 0.0;
        let mut prev = 0.0;
        let mut d: f64 = 0.0;
        for (i, &x) in samples.iter().enumerate() {
            let s = x / (1.0 + x);
            cdf += integrate(&g, prev, s, 1e-13) / self.total;
            prev = s;
            d = d.max((i as f64 + 1.0) / n - cdf).max(cdf - i as f64 / n);
        }
        d
    }
}

/// Asymptotic two-sided KS critical value at level 1%.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Deterministic Hermitian positive-definite test matrix with unit
/// top-left entry.
pub fn shape_fixture(n: usize, seed: u64) -> CMatrix {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let g = CMatrix::from_fn(n, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let m = &g * g.adjoint() + CMatrix::identity(n, n).scale(0.5);
    let top = m[(0, 0)].re;
    let mut m = m.unscale(top);
    for j in 0..n {
        m[(j, j)].im = 0.0;
        for i in (j + 1)..n {
            m[(j, i)] = m[(i, j)].conj();
        }
    }
    m[(0, 0)] = c(1.0, 0.0);
    m
}
