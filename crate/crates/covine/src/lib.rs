//! Vine copulas whose pair-copula dependence parameters are generalized
//! additive functions of exogenous covariates.
//!
//! The crate is organized along the pipeline: `spline` provides penalized
//! natural-cubic-spline bases, `families` the bivariate copula families in
//! the Kendall-tau parameterization, `gam` the penalized Fisher-scoring
//! fitter for a single pair copula, `select` covariate and family selection,
//! `vine` the pair-copula construction (fitting, density, simulation), and
//! `simstudy` the reproducible simulation-study harness.

pub mod data;
pub mod error;
pub mod families;
pub mod gam;
pub mod numeric;
pub mod select;
pub mod simstudy;
pub mod spline;
pub mod vine;
pub mod stats;

pub use error::{CovineError, ErrorKind, Result};
