mod common;

use common::{integrate, QuadratureCdf};
use proptest::prelude::*;
use shapekit::special_fn::*;
use shapekit::Error;

// lnΓ(n) = ln((n-1)!) accumulated in f64 from exact integer products.
fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

#[test]
fn ln_gamma_known_values() {
    assert_eq!(ln_gamma(1.0).unwrap(), 0.0);
    assert!((ln_gamma(8.0).unwrap() - 5040f64.ln()).abs() < 1e-13 * 5040f64.ln());
    assert!((ln_gamma(0.5).unwrap() - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-13);
    for n in 1..60u32 {
        let expect = ln_factorial(n - 1);
        let got = ln_gamma(n as f64).unwrap();
        assert!((got - expect).abs() <= 1e-13 * expect.abs().max(1.0), "n = {n}: {got} vs {expect}");
    }
}

#[test]
fn ln_gamma_recurrence() {
    let mut x = 0.1;
    while x <= 50.0 {
        let d = ln_gamma(x + 1.0).unwrap() - ln_gamma(x).unwrap();
        assert!((d - x.ln()).abs() <= 1e-12, "x = {x}: {d} vs {}", x.ln());
        x += 0.0737;
    }
}

#[test]
fn ln_gamma_domain() {
    for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(matches!(ln_gamma(bad), Err(Error::Domain(_))), "{bad}");
    }
}

#[test]
fn gamma_cdf_examples() {
    assert!((gamma_cdf(1.0, 2f64.ln()).unwrap() - 0.5).abs() < 1e-15);
    for a in [0.3, 1.0, 8.0, 80.0] {
        assert_eq!(gamma_cdf(a, 0.0).unwrap(), 0.0);
    }
    // Quadrature oracle for Gamma(8): the median sits at 7.669249442500...,
    // so 7.66915 itself lies just below one half.
    let pdf = |t: f64| t.powi(7) * (-t).exp() / 5040.0;
    let oracle = integrate(&pdf, 0.0, 7.66915, 1e-15);
    assert!((oracle - 0.49998562192594).abs() < 1e-11);
    assert!((gamma_cdf(8.0, 7.66915).unwrap() - oracle).abs() < 1e-13);
}

#[test]
fn gamma_cdf_matches_quadrature() {
    for a in [0.5, 1.0, 2.5, 8.0, 30.0, 80.0] {
        let ln_norm = ln_gamma(a).unwrap();
        let pdf = move |t: f64| if t <= 0.0 { 0.0 } else { ((a - 1.0) * t.ln() - t - ln_norm).exp() };
        for x in [0.1, 1.0, a * 0.5, a, a + 2.0 * a.sqrt(), 3.0 * a + 5.0] {
            let oracle = if a < 1.0 {
                // Integrable singularity at 0: substitute t = s^{1/a}.
                let g = move |s: f64| if s <= 0.0 { 0.0 } else { (-(s.powf(1.0 / a)) - ln_norm).exp() / a };
                integrate(&g, 0.0, x.powf(a), 1e-15)
            } else {
                integrate(&pdf, 0.0, x, 1e-15)
            };
            let got = gamma_cdf(a, x).unwrap();
            assert!((got - oracle).abs() < 1e-12, "a = {a}, x = {x}: {got} vs {oracle}");
        }
    }
}

#[test]
fn gamma_sf_complements_cdf() {
    for (a, x) in [(1.0, 0.3), (8.0, 7.0), (8.0, 30.0), (80.0, 60.0)] {
        let s = gamma_cdf(a, x).unwrap() + gamma_sf(a, x).unwrap();
        assert!((s - 1.0).abs() < 1e-14);
    }
}

#[test]
fn gamma_quantile_examples() {
    let q = gamma_quantile(1.0, 0.5).unwrap();
    assert!((q.value - 2f64.ln()).abs() < 1e-12);
    assert!(q.residual <= QUANTILE_RESIDUAL);
    let q = gamma_quantile(1.0, 1.0 - (-1f64).exp()).unwrap();
    assert!((q.value - 1.0).abs() < 1e-12);
    let q = gamma_quantile(8.0, 0.5).unwrap();
    assert!((q.value - 7.6692494425008).abs() < 1e-9, "{}", q.value);
    for bad in [0.0, 1.0, -0.1, f64::NAN] {
        assert!(gamma_quantile(8.0, bad).is_err());
    }
    assert!(gamma_quantile(0.0, 0.5).is_err());
}

#[test]
fn beta_cdf_examples() {
    assert_eq!(beta_cdf(2.0, 3.0, 0.0).unwrap(), 0.0);
    assert!((beta_cdf(1.0, 1.0, 0.3).unwrap() - 0.3).abs() < 1e-15);
    assert!((beta_cdf(2.0, 3.0, 0.5).unwrap() - 0.6875).abs() < 1e-14);
    assert!(beta_cdf(2.0, 3.0, 1.5).is_err());
    assert!(beta_cdf(-1.0, 3.0, 0.5).is_err());
}

#[test]
fn beta_cdf_matches_quadrature() {
    for (a, b) in [(2.0, 3.0), (8.0, 2.5), (0.5 + 8.0, 40.0), (3.5, 1.0)] {
        let ln_b = ln_gamma(a).unwrap() + ln_gamma(b).unwrap() - ln_gamma(a + b).unwrap();
        let pdf = move |t: f64| {
            if t <= 0.0 || t >= 1.0 {
                0.0
            } else {
                ((a - 1.0) * t.ln() + (b - 1.0) * (1.0 - t).ln() - ln_b).exp()
            }
        };
        for x in [0.05, 0.3, 0.5, 0.77, 0.95] {
            let oracle = integrate(&pdf, 0.0, x, 1e-15);
            let got = beta_cdf(a, b, x).unwrap();
            assert!((got - oracle).abs() < 1e-12, "a = {a}, b = {b}, x = {x}: {got} vs {oracle}");
        }
    }
}

#[test]
fn fisher_quantile_examples() {
    assert!((fisher_quantile(2, 2.0, 0.5).unwrap().value - 1.0).abs() < 1e-12);
    let tiny = fisher_quantile(16, 5.0, 1e-12).unwrap().value;
    assert!((0.0..0.01).contains(&tiny), "{tiny}");

    // Bisection on beta_cdf as oracle.
    let target = |x: f64| beta_cdf(8.0, 2.5, 16.0 * x / (16.0 * x + 5.0)).unwrap() - 0.9;
    let (mut lo, mut hi) = (0.0, 100.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if target(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let got = fisher_quantile(16, 5.0, 0.9).unwrap().value;
    assert!((got - lo).abs() < 1e-10 * lo, "{got} vs {lo}");
    assert!((got - 3.23027955905777).abs() < 1e-9);
    assert!(target(got).abs() < 1e-10);
    assert!(fisher_quantile(0, 5.0, 0.5).is_err());
    assert!(fisher_quantile(16, 0.0, 0.5).is_err());
}

#[test]
fn fisher_cdf_is_beta_transform() {
    for x in [0.1, 1.0, 3.0] {
        let f = fisher_cdf(16.0, 5.0, x).unwrap();
        let b = beta_cdf(8.0, 2.5, 16.0 * x / (16.0 * x + 5.0)).unwrap();
        assert!((f - b).abs() < 1e-15);
    }
    assert!((fisher_cdf(2.0, 2.0, 3.0).unwrap() - 0.75).abs() < 1e-14);
}

#[test]
fn densities_integrate_to_cdfs() {
    let g = QuadratureCdf::new(|t| gamma_pdf(8.0, t).unwrap());
    assert!((g.cdf(7.0) - gamma_cdf(8.0, 7.0).unwrap()).abs() < 1e-10);
    let f = QuadratureCdf::new(|t| fisher_pdf(16.0, 5.0, t).unwrap());
    assert!((f.cdf(2.0) - fisher_cdf(16.0, 5.0, 2.0).unwrap()).abs() < 1e-10);
}

#[test]
fn quantiles_strictly_increase_on_grid() {
    for a in [1.0, 8.0] {
        let mut prev = 0.0;
        for i in 1..1000 {
            let v = gamma_quantile(a, i as f64 / 1000.0).unwrap().value;
            assert!(v > prev, "a = {a}, i = {i}");
            prev = v;
        }
    }
    let mut prev = 0.0;
    for i in 1..1000 {
        let v = fisher_quantile(16, 5.0, i as f64 / 1000.0).unwrap().value;
        assert!(v > prev, "i = {i}");
        prev = v;
    }
}

#[test]
fn quantile_extreme_tails_converge() {
    for u in [1e-10, 1e-6, 1.0 - 1e-8, 1.0 - 1e-12] {
        let q = gamma_quantile(8.0, u).unwrap();
        assert!(q.residual <= QUANTILE_RESIDUAL && q.value.is_finite());
        let q = fisher_quantile(16, 5.0, u).unwrap();
        assert!(q.residual <= QUANTILE_RESIDUAL && q.value.is_finite());
    }
}

proptest! {
    #[test]
    fn gamma_round_trip(a in 0.2f64..100.0, u in 1e-6f64..(1.0 - 1e-6)) {
        let q = gamma_quantile(a, u).unwrap();
        prop_assert!(q.value >= 0.0 && q.value.is_finite());
        prop_assert!((gamma_cdf(a, q.value).unwrap() - u).abs() <= 1e-10);
    }

    #[test]
    fn fisher_round_trip(d1 in 1u32..40, d2 in 0.5f64..50.0, u in 1e-6f64..(1.0 - 1e-6)) {
        let q = fisher_quantile(d1, d2, u).unwrap();
        prop_assert!(q.value >= 0.0 && q.value.is_finite());
        prop_assert!((fisher_cdf(d1 as f64, d2, q.value).unwrap() - u).abs() <= 1e-10);
    }

    #[test]
    fn gamma_cdf_monotone(a in 0.2f64..50.0, x in 0.0f64..100.0, dx in 0.0f64..5.0) {
        prop_assert!(gamma_cdf(a, x + dx).unwrap() >= gamma_cdf(a, x).unwrap());
    }

    #[test]
    fn beta_cdf_symmetry(a in 0.2f64..30.0, b in 0.2f64..30.0, x in 0.0f64..=1.0) {
        let s = beta_cdf(a, b, x).unwrap() + beta_cdf(b, a, 1.0 - x).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-13);
    }
}
