//! Oracle tests for the copula families: quadrature-based checks of the
//! Kendall tau parameterization, density normalization, h-functions, and
//! tau derivatives, all computed independently of the library code paths.

mod common;

use common::{integrate_1d, integrate_2d};
use covine::families::{FamilySpec, Rotation, Side};
use covine::stats::{norm_cdf, norm_pdf, norm_quantile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn all_specs() -> Vec<FamilySpec> {
    vec![
        FamilySpec::gaussian(),
        FamilySpec::student_t(4.0).unwrap(),
        FamilySpec::student_t(7.5).unwrap(),
        FamilySpec::clayton(Rotation::R0),
        FamilySpec::clayton(Rotation::R90),
        FamilySpec::clayton(Rotation::R180),
        FamilySpec::clayton(Rotation::R270),
        FamilySpec::gumbel(Rotation::R0),
        FamilySpec::gumbel(Rotation::R90),
        FamilySpec::gumbel(Rotation::R180),
        FamilySpec::gumbel(Rotation::R270),
    ]
}

/// Representative taus within the admissible range of `spec`.
fn test_taus(spec: &FamilySpec) -> Vec<f64> {
    let (lo, hi) = spec.tau_bounds();
    [-0.75, -0.4, -0.15, 0.15, 0.4, 0.75]
        .into_iter()
        .filter(|t| *t > lo + 0.01 && *t < hi - 0.01)
        .collect()
}

/// Kendall's tau from the copula alone: tau = 1 - 4 int h1 * h2 du dv.
fn tau_by_quadrature(spec: &FamilySpec, tau: f64) -> f64 {
    let integral = integrate_2d(
        |u, v| spec.hfunc(Side::First, u, v, tau) * spec.hfunc(Side::Second, u, v, tau),
        0.0,
        1.0,
        0.0,
        1.0,
        8,
        16,
    );
    1.0 - 4.0 * integral
}

#[test]
fn kendall_tau_matches_quadrature_oracle() {
    for spec in all_specs() {
        for tau in test_taus(&spec) {
            let num = tau_by_quadrature(&spec, tau);
            assert!(
                (num - tau).abs() < 2e-4,
                "{}: tau {tau} but quadrature gives {num}",
                spec.id()
            );
        }
    }
}

/// Copula mass on [0,u] x [0,v] via Gaussian-margin change of variables;
/// the transform tames the corner behavior of the Archimedean densities.
fn cdf_by_quadrature(spec: &FamilySpec, tau: f64, u: f64, v: f64) -> f64 {
    integrate_2d(
        |x, y| spec.logpdf(norm_cdf(x), norm_cdf(y), tau).exp() * norm_pdf(x) * norm_pdf(y),
        -8.5,
        norm_quantile(u),
        -8.5,
        norm_quantile(v),
        10,
        20,
    )
}

#[test]
fn density_normalizes_to_one() {
    for spec in all_specs() {
        for tau in test_taus(&spec) {
            let mass = integrate_2d(
                |x, y| spec.logpdf(norm_cdf(x), norm_cdf(y), tau).exp() * norm_pdf(x) * norm_pdf(y),
                -8.5,
                8.5,
                -8.5,
                8.5,
                12,
                20,
            );
            assert!(
                (mass - 1.0).abs() < 1e-4,
                "{} tau={tau}: total mass {mass}",
                spec.id()
            );
        }
    }
}

#[test]
fn hfunc_matches_cdf_finite_difference() {
    let cases = [
        (FamilySpec::gaussian(), 0.5),
        (FamilySpec::student_t(4.0).unwrap(), 0.5),
        (FamilySpec::clayton(Rotation::R0), 0.4),
        (FamilySpec::gumbel(Rotation::R0), 0.45),
        (FamilySpec::clayton(Rotation::R90), -0.4),
        (FamilySpec::gumbel(Rotation::R270), -0.45),
        (FamilySpec::clayton(Rotation::R180), 0.4),
        (FamilySpec::gumbel(Rotation::R90), -0.45),
    ];
    let delta = 1e-4;
    for (spec, tau) in cases {
        for &(u, v) in &[(0.3, 0.6), (0.7, 0.2), (0.5, 0.5)] {
            let fd1 = (cdf_by_quadrature(&spec, tau, u, v + delta)
                - cdf_by_quadrature(&spec, tau, u, v - delta))
                / (2.0 * delta);
            let h1 = spec.hfunc(Side::First, u, v, tau);
            assert!(
                (h1 - fd1).abs() < 1e-5,
                "{} tau={tau} h1({u}|{v}) = {h1} vs FD {fd1}",
                spec.id()
            );
            let fd2 = (cdf_by_quadrature(&spec, tau, u + delta, v)
                - cdf_by_quadrature(&spec, tau, u - delta, v))
                / (2.0 * delta);
            let h2 = spec.hfunc(Side::Second, u, v, tau);
            assert!(
                (h2 - fd2).abs() < 1e-5,
                "{} tau={tau} h2({v}|{u}) = {h2} vs FD {fd2}",
                spec.id()
            );
        }
    }
}

#[test]
fn tau_derivatives_match_finite_differences() {
    let specs = all_specs();
    let mut rng = ChaCha12Rng::seed_from_u64(90210);
    let h = 1e-5;
    let mut checked = 0usize;
    while checked < 200 {
        let spec = specs[rng.gen_range(0..specs.len())];
        let (lo, hi) = spec.tau_bounds();
        let tau = rng.gen_range(lo + 0.02..hi - 0.02);
        let u: f64 = rng.gen_range(0.02..0.98);
        let v: f64 = rng.gen_range(0.02..0.98);
        let d1 = spec.dlogpdf_dtau(u, v, tau);
        let fd1 = (spec.logpdf(u, v, tau + h) - spec.logpdf(u, v, tau - h)) / (2.0 * h);
        assert!(
            (d1 - fd1).abs() <= 1e-5 * d1.abs().max(1.0),
            "{} u={u} v={v} tau={tau}: d1 {d1} vs FD {fd1}",
            spec.id()
        );
        let d2 = spec.d2logpdf_dtau2(u, v, tau);
        let fd2 = (spec.dlogpdf_dtau(u, v, tau + h) - spec.dlogpdf_dtau(u, v, tau - h)) / (2.0 * h);
        assert!(
            (d2 - fd2).abs() <= 1e-5 * d2.abs().max(1.0),
            "{} u={u} v={v} tau={tau}: d2 {d2} vs FD {fd2}",
            spec.id()
        );
        checked += 1;
    }
}

#[test]
fn hinv_round_trips_through_hfunc() {
    let grid = [0.05, 0.25, 0.5, 0.75, 0.95];
    for spec in all_specs() {
        for tau in test_taus(&spec) {
            for &p in &grid {
                for &given in &grid {
                    for side in [Side::First, Side::Second] {
                        let x = spec.hinv(side, p, given, tau);
                        let back = match side {
                            Side::First => spec.hfunc(side, x, given, tau),
                            Side::Second => spec.hfunc(side, given, x, tau),
                        };
                        assert!(
                            (back - p).abs() < 1e-8,
                            "{} tau={tau} side={side:?} p={p} given={given}: back {back}",
                            spec.id()
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn gaussian_and_t_hinv_match_bisection() {
    for spec in [FamilySpec::gaussian(), FamilySpec::student_t(4.0).unwrap()] {
        for &(p, v, tau) in &[(0.2, 0.7, 0.6), (0.9, 0.15, -0.5), (0.45, 0.5, 0.05)] {
            let closed = spec.hinv(Side::First, p, v, tau);
            let (mut lo, mut hi) = (1e-12, 1.0 - 1e-12);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if spec.hfunc(Side::First, mid, v, tau) < p {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let bisected = 0.5 * (lo + hi);
            assert!(
                (closed - bisected).abs() < 1e-9,
                "{}: closed {closed} vs bisection {bisected}",
                spec.id()
            );
        }
    }
}

#[test]
fn conditional_density_integrates_to_hfunc() {
    // h1(u|v) must equal the integral of c(s, v) ds over s in [0, u]; this
    // ties the h-functions to the density without any CDF quadrature.
    let cases = [
        (FamilySpec::gumbel(Rotation::R180), 0.55),
        (FamilySpec::clayton(Rotation::R270), -0.35),
        (FamilySpec::student_t(7.5).unwrap(), -0.6),
    ];
    for (spec, tau) in cases {
        for &(u, v) in &[(0.35, 0.75), (0.8, 0.4)] {
            let integral = integrate_1d(
                |s| spec.logpdf(s, v, tau).exp(),
                1e-9,
                u,
                12,
                20,
            );
            let h1 = spec.hfunc(Side::First, u, v, tau);
            assert!(
                (h1 - integral).abs() < 1e-6,
                "{} tau={tau} h1({u}|{v})={h1} vs integral {integral}",
                spec.id()
            );
        }
    }
}

#[test]
fn inputs_on_the_boundary_stay_finite() {
    for spec in all_specs() {
        for tau in test_taus(&spec) {
            for &(u, v) in &[(0.0, 0.5), (1.0, 0.5), (0.0, 1.0), (1e-300, 1.0 - 1e-16)] {
                assert!(spec.logpdf(u, v, tau).is_finite());
                assert!(spec.dlogpdf_dtau(u, v, tau).is_finite());
                let h = spec.hfunc(Side::First, u, v, tau);
                assert!(h > 0.0 && h < 1.0);
            }
            // Tau far outside the admissible interval is clipped, not fatal.
            assert!(spec.logpdf(0.4, 0.6, 5.0).is_finite());
            assert!(spec.logpdf(0.4, 0.6, -5.0).is_finite());
        }
    }
}
