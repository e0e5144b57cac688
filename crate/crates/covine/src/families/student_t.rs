//! Student-t copula with fixed degrees of freedom, correlation parameterized.
//!
//! The Kendall tau map is the same as the Gaussian one; nu is a fixed
//! auxiliary parameter chosen at family-selection time.

use statrs::function::gamma::ln_gamma;

use crate::stats::{t_cdf, t_quantile};

pub fn logpdf(u: f64, v: f64, rho: f64, nu: f64) -> f64 {
    let x = t_quantile(u, nu);
    let y = t_quantile(v, nu);
    let r = 1.0 - rho * rho;
    let c = ln_gamma((nu + 2.0) / 2.0) + ln_gamma(nu / 2.0) - 2.0 * ln_gamma((nu + 1.0) / 2.0);
    c - 0.5 * r.ln() - (nu + 2.0) / 2.0 * (1.0 + (x * x - 2.0 * rho * x * y + y * y) / (nu * r)).ln()
        + (nu + 1.0) / 2.0 * ((1.0 + x * x / nu).ln() + (1.0 + y * y / nu).ln())
}

pub fn dlogpdf_dpar(u: f64, v: f64, rho: f64, nu: f64) -> f64 {
    let x = t_quantile(u, nu);
    let y = t_quantile(v, nu);
    let r = 1.0 - rho * rho;
    let d = nu * r + x * x - 2.0 * rho * x * y + y * y;
    -(nu + 1.0) * rho / r + (nu + 2.0) * (nu * rho + x * y) / d
}

pub fn d2logpdf_dpar2(u: f64, v: f64, rho: f64, nu: f64) -> f64 {
    let x = t_quantile(u, nu);
    let y = t_quantile(v, nu);
    let r = 1.0 - rho * rho;
    let d = nu * r + x * x - 2.0 * rho * x * y + y * y;
    let s = nu * rho + x * y;
    -(nu + 1.0) * (1.0 + rho * rho) / (r * r) + (nu + 2.0) * (nu * d + 2.0 * s * s) / (d * d)
}

/// Conditional CDF of the first argument given the second.
pub fn hfunc(u: f64, v: f64, rho: f64, nu: f64) -> f64 {
    let x = t_quantile(u, nu);
    let y = t_quantile(v, nu);
    let scale = ((1.0 - rho * rho) * (nu + y * y) / (nu + 1.0)).sqrt();
    t_cdf((x - rho * y) / scale, nu + 1.0)
}

/// Inverse of `hfunc` in its first argument (closed form via t quantiles).
pub fn hinv(p: f64, v: f64, rho: f64, nu: f64) -> f64 {
    let y = t_quantile(v, nu);
    let scale = ((1.0 - rho * rho) * (nu + y * y) / (nu + 1.0)).sqrt();
    let x = t_quantile(p, nu + 1.0) * scale + rho * y;
    t_cdf(x, nu)
}
