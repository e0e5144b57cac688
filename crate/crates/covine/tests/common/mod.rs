//! Shared quadrature and reference helpers for integration tests.
//!
//! Everything here is deliberately independent of the library's internals:
//! Gauss-Legendre rules are generated from the Legendre recurrence, and
//! integrals are evaluated by composite tensor quadrature.

#![allow(dead_code)]

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1],
/// from Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, 0.0f64);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss-Legendre integral of `f` over [a, b] with `panels`
/// equal subintervals and an `order`-point rule on each.
pub fn integrate_1d<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (xs, ws) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let half = 0.5 * h;
        for (&x, &w) in xs.iter().zip(&ws) {
            total += w * half * f(mid + half * x);
        }
    }
    total
}

/// Composite tensor-product Gauss-Legendre integral of `f` over
/// [ax, bx] x [ay, by].
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    ax: f64,
    bx: f64,
    ay: f64,
    by: f64,
    panels: usize,
    order: usize,
) -> f64 {
    let (xs, ws) = gauss_legendre(order);
    let hx = (bx - ax) / panels as f64;
    let hy = (by - ay) / panels as f64;
    let mut total = 0.0;
    for px in 0..panels {
        let cx = ax + (px as f64 + 0.5) * hx;
        for py in 0..panels {
            let cy = ay + (py as f64 + 0.5) * hy;
            for (&xi, &wi) in xs.iter().zip(&ws) {
                let x = cx + 0.5 * hx * xi;
                for (&yj, &wj) in xs.iter().zip(&ws) {
                    total += wi * wj * 0.25 * hx * hy * f(x, cy + 0.5 * hy * yj);
                }
            }
        }
    }
    total
}

#[cfg(test)]
mod selfcheck {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // A rule with n points is exact through degree 2n - 1.
        let (x, w) = gauss_legendre(5);
        let integral: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(8)).sum();
        assert!((integral - 2.0 / 9.0).abs() < 1e-14);
        let sum_w: f64 = w.iter().sum();
        assert!((sum_w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn composite_rules_hit_known_integrals() {
        let v = integrate_1d(|x| x.exp(), 0.0, 1.0, 4, 8);
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-13);
        let v2 = integrate_2d(|x, y| (x * y).exp(), 0.0, 1.0, 0.0, 1.0, 3, 10);
        // Reference from the series sum_k 1/(k! (k+1)^2): 1.3179021514544...
        assert!((v2 - 1.3179021514544038).abs() < 1e-12);
    }
}
