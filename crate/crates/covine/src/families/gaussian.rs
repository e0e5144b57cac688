//! Gaussian copula in the correlation parameterization.

use crate::stats::{norm_cdf, norm_quantile};

pub fn par_from_tau(tau: f64) -> f64 {
    (std::f64::consts::FRAC_PI_2 * tau).sin()
}

#[cfg(test)]
pub fn tau_from_par(rho: f64) -> f64 {
    2.0 / std::f64::consts::PI * rho.asin()
}

pub fn dpar_dtau(tau: f64) -> f64 {
    let h = std::f64::consts::FRAC_PI_2;
    h * (h * tau).cos()
}

pub fn d2par_dtau2(tau: f64) -> f64 {
    let h = std::f64::consts::FRAC_PI_2;
    -h * h * (h * tau).sin()
}

pub fn logpdf(u: f64, v: f64, rho: f64) -> f64 {
    let x = norm_quantile(u);
    let y = norm_quantile(v);
    let r = 1.0 - rho * rho;
    -0.5 * r.ln() + (2.0 * rho * x * y - rho * rho * (x * x + y * y)) / (2.0 * r)
}

pub fn dlogpdf_dpar(u: f64, v: f64, rho: f64) -> f64 {
    let x = norm_quantile(u);
    let y = norm_quantile(v);
    let r = 1.0 - rho * rho;
    (x * y * (1.0 + rho * rho) - rho * (x * x + y * y) + rho * r) / (r * r)
}

pub fn d2logpdf_dpar2(u: f64, v: f64, rho: f64) -> f64 {
    let x = norm_quantile(u);
    let y = norm_quantile(v);
    let r = 1.0 - rho * rho;
    let num = rho.powi(4) - 2.0 * rho.powi(3) * x * y + 3.0 * rho * rho * (x * x + y * y)
        - 6.0 * rho * x * y
        + x * x
        + y * y
        - 1.0;
    -num / (r * r * r)
}

/// Conditional CDF of the first argument given the second.
pub fn hfunc(u: f64, v: f64, rho: f64) -> f64 {
    let x = norm_quantile(u);
    let y = norm_quantile(v);
    norm_cdf((x - rho * y) / (1.0 - rho * rho).sqrt())
}

/// Inverse of `hfunc` in its first argument (closed form).
pub fn hinv(p: f64, v: f64, rho: f64) -> f64 {
    let y = norm_quantile(v);
    norm_cdf((1.0 - rho * rho).sqrt() * norm_quantile(p) + rho * y)
}
