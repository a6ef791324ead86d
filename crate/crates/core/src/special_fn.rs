//! Scalar special functions: log-gamma, regularized incomplete gamma and
//! beta, and quantiles of the Gamma and Fisher distributions.
//!
//! Everything here is pure and reentrant.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Iteration cap of the quantile solver.
pub const QUANTILE_MAX_ITER: usize = 200;
/// Largest accepted `|cdf(x) - u|` for a returned quantile.
pub const QUANTILE_RESIDUAL: f64 = 1e-12;

const EPS: f64 = f64::EPSILON;
const FPMIN: f64 = f64::MIN_POSITIVE / EPS;
const SERIES_MAX_ITER: usize = 100_000;

/// A solved quantile together with solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileResult {
    pub value: f64,
    pub iterations: usize,
    /// `|cdf(value) - u|`.
    pub residual: f64,
}

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(format!("ln_gamma requires finite x > 0, got {x}")));
    }
    Ok(ln_gamma_unchecked(x))
}

fn ln_gamma_unchecked(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx)
        return (PI / (PI * x).sin()).ln() - ln_gamma_unchecked(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma_unchecked(a) + ln_gamma_unchecked(b) - ln_gamma_unchecked(a + b)
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_cdf(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    Ok(gamma_pq(a, x)?.0)
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_sf(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    Ok(gamma_pq(a, x)?.1)
}

/// Density of Gamma(a, 1) at `x`.
pub fn gamma_pdf(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    Ok(gamma_pdf_unchecked(a, x))
}

fn gamma_pdf_unchecked(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return match a.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => 1.0,
            _ => 0.0,
        };
    }
    ((a - 1.0) * x.ln() - x - ln_gamma_unchecked(a)).exp()
}

fn check_gamma_args(a: f64, x: f64) -> Result<()> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::domain(format!("gamma shape must be finite and > 0, got {a}")));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("gamma argument must be >= 0, got {x}")));
    }
    Ok(())
}

/// Series for x < a + 1, Lentz continued fraction otherwise.
fn gamma_pq(a: f64, x: f64) -> Result<(f64, f64)> {
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x == f64::INFINITY {
        return Ok((1.0, 0.0));
    }
    let ln_prefactor = -x + a * x.ln() - ln_gamma_unchecked(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..SERIES_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                let p = (sum.ln() + ln_prefactor).exp().min(1.0);
                return Ok((p, 1.0 - p));
            }
        }
        Err(Error::NoConvergence {
            iterations: SERIES_MAX_ITER,
            best: sum,
            residual: term,
        })
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..SERIES_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = b + an / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                let q = (h.ln() + ln_prefactor).exp().min(1.0);
                return Ok((1.0 - q, q));
            }
        }
        Err(Error::NoConvergence {
            iterations: SERIES_MAX_ITER,
            best: h,
            residual: f64::NAN,
        })
    }
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn beta_cdf(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
        return Err(Error::domain(format!("beta parameters must be finite and > 0, got ({a}, {b})")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("beta argument must lie in [0, 1], got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    // I_x(a,b) = 1 - I_{1-x}(b,a); the fraction converges fast below the mean.
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok((ln_front.exp() * beta_cf(a, b, x)? / a).clamp(0.0, 1.0))
    } else {
        Ok((1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x)? / b).clamp(0.0, 1.0))
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..SERIES_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::NoConvergence {
        iterations: SERIES_MAX_ITER,
        best: h,
        residual: f64::NAN,
    })
}

/// Cdf of the Fisher distribution with `d1` and `d2` degrees of freedom.
pub fn fisher_cdf(d1: f64, d2: f64, x: f64) -> Result<f64> {
    check_fisher_dof(d1, d2)?;
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("Fisher argument must be >= 0, got {x}")));
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    beta_cdf(0.5 * d1, 0.5 * d2, d1 * x / (d1 * x + d2))
}

/// Density of the Fisher distribution.
pub fn fisher_pdf(d1: f64, d2: f64, x: f64) -> Result<f64> {
    check_fisher_dof(d1, d2)?;
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("Fisher argument must be >= 0, got {x}")));
    }
    Ok(fisher_pdf_unchecked(d1, d2, x))
}

fn fisher_pdf_unchecked(d1: f64, d2: f64, x: f64) -> f64 {
    if x == 0.0 {
        return match d1.partial_cmp(&2.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => 1.0,
            _ => 0.0,
        };
    }
    let (h1, h2) = (0.5 * d1, 0.5 * d2);
    (h1 * d1.ln() + h2 * d2.ln() + (h1 - 1.0) * x.ln() - (h1 + h2) * (d1 * x + d2).ln() - ln_beta(h1, h2)).exp()
}

fn check_fisher_dof(d1: f64, d2: f64) -> Result<()> {
    if !(d1.is_finite() && d1 > 0.0 && d2.is_finite() && d2 > 0.0) {
        return Err(Error::domain(format!("Fisher degrees of freedom must be finite and > 0, got ({d1}, {d2})")));
    }
    Ok(())
}

fn check_probability(u: f64) -> Result<()> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::domain(format!("probability must lie in (0, 1), got {u}")));
    }
    Ok(())
}

/// Quantile of Gamma(a, 1).
pub fn gamma_quantile(a: f64, u: f64) -> Result<QuantileResult> {
    check_gamma_args(a, 0.0)?;
    check_probability(u)?;
    invert_cdf(u, a, |x| gamma_pq(a, x).map(|(p, _)| p), |x| gamma_pdf_unchecked(a, x))
}

/// Quantile of the Fisher distribution F(d1, d2).
pub fn fisher_quantile(d1: u32, d2: f64, u: f64) -> Result<QuantileResult> {
    if d1 == 0 {
        return Err(Error::domain("Fisher numerator degrees of freedom must be >= 1"));
    }
    let d1 = f64::from(d1);
    check_fisher_dof(d1, d2)?;
    check_probability(u)?;
    let start = if d2 > 2.0 { d2 / (d2 - 2.0) } else { 1.0 };
    invert_cdf(
        u,
        start,
        |x| beta_cdf(0.5 * d1, 0.5 * d2, d1 * x / (d1 * x + d2)),
        |x| fisher_pdf_unchecked(d1, d2, x),
    )
}

/// Safeguarded Newton on a continuous cdf supported on `[0, inf)`.
///
/// The bracket `[lo, hi]` starts at `[0, start]` and `hi` doubles until it
/// covers `u`; any Newton step leaving the bracket is replaced by bisection.
fn invert_cdf<C, D>(u: f64, start: f64, cdf: C, pdf: D) -> Result<QuantileResult>
where
    C: Fn(f64) -> Result<f64>,
    D: Fn(f64) -> f64,
{
    let mut lo = 0.0;
    let mut hi = start.max(f64::MIN_POSITIVE);
    let mut iterations = 0;
    let mut p_hi = cdf(hi)?;
    while p_hi < u {
        iterations += 1;
        if iterations > QUANTILE_MAX_ITER || !hi.is_finite() {
            return Err(Error::NoConvergence {
                iterations,
                best: hi,
                residual: (p_hi - u).abs(),
            });
        }
        lo = hi;
        hi *= 2.0;
        p_hi = cdf(hi)?;
    }

    let mut x = if lo == 0.0 { 0.5 * hi } else { 0.5 * (lo + hi) };
    if start > lo && start < hi {
        x = start;
    }
    let mut best = (f64::INFINITY, x);
    while iterations < QUANTILE_MAX_ITER {
        iterations += 1;
        let p = cdf(x)?;
        let r = p - u;
        if r.abs() < best.0 {
            best = (r.abs(), x);
        }
        if r == 0.0 {
            break;
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let density = pdf(x);
        let mut next = if density > 0.0 && density.is_finite() { x - r / density } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - x).abs();
        x = next;
        if step <= 4.0 * EPS * x || hi - lo <= 4.0 * EPS * hi {
            let r = (cdf(x)? - u).abs();
            if r < best.0 {
                best = (r, x);
            }
            break;
        }
    }
    let (residual, value) = best;
    if residual <= QUANTILE_RESIDUAL {
        Ok(QuantileResult {
            value,
            iterations,
            residual,
        })
    } else {
        Err(Error::NoConvergence {
            iterations,
            best: value,
            residual,
        })
    }
}
