//! Score functions for the rank-based correction, and ranks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special_fn::{fisher_quantile, gamma_quantile};

/// Score `K: (0,1) → [0, ∞)`.
///
/// All families here are monotone nondecreasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ScoreFunction {
    /// Gamma(N, 1) quantile.
    VanDerWaerden { n: u32 },
    /// `N(2N+ν) q / (ν + 2N q)` with `q` the Fisher(2N, ν) quantile.
    TNu { n: u32, nu: f64 },
    /// `N(a+1) u^a`; `a = 1` is Wilcoxon, `a = 2` Spearman.
    Power { n: u32, a: f64 },
}

impl ScoreFunction {
    pub fn van_der_waerden(n: u32) -> Self {
        ScoreFunction::VanDerWaerden { n }
    }

    pub fn t_nu(n: u32, nu: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::domain(format!("t score needs finite nu > 0, got {nu}")));
        }
        Ok(ScoreFunction::TNu { n, nu })
    }

    pub fn power(n: u32, a: f64) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::domain(format!("power score needs finite a >= 0, got {a}")));
        }
        Ok(ScoreFunction::Power { n, a })
    }

    pub fn wilcoxon(n: u32) -> Self {
        ScoreFunction::Power { n, a: 1.0 }
    }

    pub fn spearman(n: u32) -> Self {
        ScoreFunction::Power { n, a: 2.0 }
    }

    pub fn dim(&self) -> u32 {
        match *self {
            ScoreFunction::VanDerWaerden { n } | ScoreFunction::TNu { n, .. } | ScoreFunction::Power { n, .. } => n,
        }
    }

    /// `sup K`, infinite for van der Waerden.
    pub fn upper_bound(&self) -> f64 {
        match *self {
            ScoreFunction::VanDerWaerden { .. } => f64::INFINITY,
            ScoreFunction::TNu { n, nu } => f64::from(n) + 0.5 * nu,
            ScoreFunction::Power { n, a } => f64::from(n) * (a + 1.0),
        }
    }

    pub fn evaluate(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(format!("score argument must lie in (0, 1), got {u}")));
        }
        match *self {
            ScoreFunction::VanDerWaerden { n } => Ok(gamma_quantile(f64::from(n), u)?.value),
            ScoreFunction::TNu { n, nu } => {
                let n = f64::from(n);
                let q = fisher_quantile((2.0 * n) as u32, nu, u)?.value;
                Ok(n * (2.0 * n + nu) * q / (nu + 2.0 * n * q))
            }
            ScoreFunction::Power { n, a } => Ok(f64::from(n) * (a + 1.0) * u.powf(a)),
        }
    }
}

impl fmt::Display for ScoreFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ScoreFunction::VanDerWaerden { .. } => write!(f, "vdw"),
            ScoreFunction::TNu { nu, .. } => write!(f, "t{nu}"),
            ScoreFunction::Power { a, .. } if a == 1.0 => write!(f, "wilcoxon"),
            ScoreFunction::Power { a, .. } if a == 2.0 => write!(f, "spearman"),
            ScoreFunction::Power { a, .. } => write!(f, "power{a}"),
        }
    }
}

/// Ranks in `1..=L`: one plus the number of strictly smaller values, with
/// ties ordered by index.
pub fn ranks(values: &[f64]) -> Result<Vec<usize>> {
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Data(format!("cannot rank non-finite value {bad}")));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    // Stable sort keeps index order among equal values.
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut r = vec![0; values.len()];
    for (pos, &idx) in order.iter().enumerate() {
        r[idx] = pos + 1;
    }
    Ok(r)
}
