//! Penalized generalized additive models for the Kendall tau of a pair
//! copula.
//!
//! The dependence parameter of a single pair copula is modeled as
//! tau(w) = g(beta0 + sum_j beta_j z_j + sum_k s_k(t_k)) with g the scaled
//! tanh link, linear effects z and natural cubic spline smooths s_k. The
//! smooths carry curvature penalties whose weights are chosen by
//! generalized cross validation; coefficients maximize the penalized log
//! likelihood by Fisher scoring.

mod design;
mod fit;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Covariates;
use crate::error::{CovineError, Result};
use crate::families::FamilySpec;
use crate::spline::{KnotSequence, KnotStrategy, SplineBasis};
use crate::stats::{chi2_sf, norm_cdf, norm_quantile};

pub(crate) use design::ModelDesign;
pub(crate) use fit::{link_inverse, link_tau};

/// One model term: a raw linear effect or a penalized spline smooth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TermSpec {
    Linear { name: String },
    Smooth { name: String, basis_size: usize, strategy: KnotStrategy },
}

impl TermSpec {
    pub fn name(&self) -> &str {
        match self {
            TermSpec::Linear { name } => name,
            TermSpec::Smooth { name, .. } => name,
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self, TermSpec::Smooth { .. })
    }
}

/// Ordered collection of terms; the intercept is always present and not
/// listed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GamFormula {
    pub terms: Vec<TermSpec>,
}

impl GamFormula {
    pub fn new() -> Self {
        GamFormula::default()
    }

    pub fn linear(mut self, name: impl Into<String>) -> Self {
        self.terms.push(TermSpec::Linear { name: name.into() });
        self
    }

    pub fn smooth(
        mut self,
        name: impl Into<String>,
        basis_size: usize,
        strategy: KnotStrategy,
    ) -> Self {
        self.terms.push(TermSpec::Smooth { name: name.into(), basis_size, strategy });
        self
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GamConfig {
    /// Scoring iteration cap per fit.
    pub max_iter: usize,
    /// Convergence threshold on the coefficient update infinity norm.
    pub tol: f64,
    /// Coordinate sweeps over the smoothing parameters.
    pub gamma_sweeps: usize,
    /// Search range for log10 of each smoothing parameter.
    pub gamma_log10_range: (f64, f64),
    /// Bracketing scan resolution inside the search range.
    pub gamma_scan_points: usize,
    /// Skip GCV and fit at these smoothing parameters (one per smooth).
    pub fixed_gammas: Option<Vec<f64>>,
}

impl Default for GamConfig {
    fn default() -> Self {
        GamConfig {
            max_iter: 100,
            tol: 1e-6,
            gamma_sweeps: 2,
            gamma_log10_range: (-8.0, 8.0),
            gamma_scan_points: 17,
            fixed_gammas: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    Intercept,
    Linear,
    Smooth,
}

/// Wald test summary for one model term.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermTest {
    pub term: String,
    pub kind: TermKind,
    pub statistic: f64,
    /// Reference degrees of freedom (1 for scalar terms, the rounded EDF
    /// for smooths).
    pub dof: f64,
    pub p_value: f64,
    pub estimate: Option<f64>,
    pub std_error: Option<f64>,
}

/// A fitted smooth: cardinal spline coefficients plus everything needed to
/// reconstruct pointwise standard errors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FittedSmooth {
    pub name: String,
    pub knots: KnotSequence,
    /// Fitted spline values at the knots, length m.
    pub coefs: Vec<f64>,
    /// Orthonormal transform (m x (m-1)) from reduced coefficients to the
    /// knot scale; its columns span the sum-to-zero constraint null space.
    pub z: DMatrix<f64>,
    /// Selected curvature penalty weight; the penalty on the reduced
    /// coefficients beta is gamma * beta' (z' S z) beta with S the raw
    /// spline curvature penalty.
    pub gamma: f64,
    pub edf: f64,
    /// First reduced-coefficient index in the covariance matrix.
    pub offset: usize,
}

/// A fitted tau regression for a single pair copula.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GamTauModel {
    pub family: FamilySpec,
    pub formula: GamFormula,
    pub intercept: f64,
    pub linear: Vec<(String, f64)>,
    pub smooths: Vec<FittedSmooth>,
    /// Covariance of all reduced coefficients, (X'AX + n P)^-1.
    pub covariance: DMatrix<f64>,
    pub edf: f64,
    pub term_edf: Vec<(String, f64)>,
    /// Total (summed) log likelihood at the fit.
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub gcv: f64,
    pub n: usize,
    pub converged: bool,
    pub tests: Vec<TermTest>,
}

/// Fits the tau regression by penalized Fisher scoring with GCV-selected
/// smoothing parameters.
pub fn fit_gam_tau(
    family: &FamilySpec,
    u: &[f64],
    v: &[f64],
    data: &Covariates,
    formula: &GamFormula,
    config: &GamConfig,
) -> Result<GamTauModel> {
    if u.len() != v.len() {
        return Err(CovineError::invalid(format!(
            "u has {} rows but v has {}",
            u.len(),
            v.len()
        )));
    }
    if data.width() > 0 && data.len() != u.len() {
        return Err(CovineError::invalid(format!(
            "covariates have {} rows but observations {}",
            data.len(),
            u.len()
        )));
    }
    for (i, (&a, &b)) in u.iter().zip(v).enumerate() {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
            return Err(CovineError::invalid(format!(
                "observation {i} is outside the unit square: ({a}, {b})"
            )));
        }
    }
    let storage;
    let effective = if data.width() == 0 {
        storage = Covariates::empty(u.len());
        &storage
    } else {
        data
    };
    let design = ModelDesign::build(formula, effective)?;
    if u.len() <= design.p {
        return Err(CovineError::invalid(format!(
            "{} observations cannot identify {} coefficients",
            u.len(),
            design.p
        )));
    }

    let (gammas, core) = fit::select_gammas(family, u, v, &design, config)?;
    let covariance = fit::cholesky_with_ridge(&core.penalized_info)?.inverse();

    let ranges = design.term_ranges();
    let term_edf: Vec<(String, f64)> = ranges
        .iter()
        .map(|(name, r)| (name.clone(), r.clone().map(|j| core.edf_by_coef[j]).sum()))
        .collect();

    let theta = &core.theta;
    let intercept = theta[0];
    let linear: Vec<(String, f64)> = design
        .linear_names
        .iter()
        .enumerate()
        .map(|(j, name)| (name.clone(), theta[1 + j]))
        .collect();

    let mut smooths = Vec::with_capacity(design.smooths.len());
    for (k, block) in design.smooths.iter().enumerate() {
        let w = block.penalty.nrows();
        let beta = theta.rows(block.offset, w).into_owned();
        let coefs = (&block.z * &beta).iter().cloned().collect::<Vec<f64>>();
        let edf = (block.offset..block.offset + w).map(|j| core.edf_by_coef[j]).sum();
        smooths.push(FittedSmooth {
            name: block.name.clone(),
            knots: block.basis.knot_sequence().clone(),
            coefs,
            z: block.z.clone(),
            gamma: gammas[k] / block.penalty_scale,
            edf,
            offset: block.offset,
        });
    }

    let tests = wald_tests(&design, theta, &covariance, &term_edf);
    let n = u.len();
    let aic = -2.0 * core.loglik_sum + 2.0 * core.edf_total;
    let bic = -2.0 * core.loglik_sum + (n as f64).ln() * core.edf_total;

    Ok(GamTauModel {
        family: *family,
        formula: formula.clone(),
        intercept,
        linear,
        smooths,
        covariance,
        edf: core.edf_total,
        term_edf,
        loglik: core.loglik_sum,
        aic,
        bic,
        gcv: core.gcv,
        n,
        converged: core.converged,
        tests,
    })
}

fn wald_tests(
    design: &ModelDesign,
    theta: &DVector<f64>,
    covariance: &DMatrix<f64>,
    term_edf: &[(String, f64)],
) -> Vec<TermTest> {
    let mut out = Vec::new();
    let n_linear = design.linear_names.len();
    for (idx, (name, range)) in design.term_ranges().into_iter().enumerate() {
        let kind = if idx == 0 {
            TermKind::Intercept
        } else if idx <= n_linear {
            TermKind::Linear
        } else {
            TermKind::Smooth
        };
        match kind {
            TermKind::Intercept | TermKind::Linear => {
                let j = range.start;
                let est = theta[j];
                let se = covariance[(j, j)].max(0.0).sqrt();
                let z = if se > 0.0 { est / se } else { f64::INFINITY };
                out.push(TermTest {
                    term: name,
                    kind,
                    statistic: z * z,
                    dof: 1.0,
                    p_value: 2.0 * norm_cdf(-z.abs()),
                    estimate: Some(est),
                    std_error: Some(se),
                });
            }
            TermKind::Smooth => {
                let w = range.len();
                let beta = theta.rows(range.start, w).into_owned();
                let vkk = covariance.view((range.start, range.start), (w, w)).into_owned();
                let edf = term_edf[idx].1;
                let rank = (edf.round() as usize).clamp(1, w);
                // Rank-truncated pseudo-inverse of the block covariance.
                let eig = nalgebra::SymmetricEigen::new(vkk);
                let mut order: Vec<usize> = (0..w).collect();
                order.sort_by(|&a, &b| {
                    eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap()
                });
                let lmax = eig.eigenvalues[order[0]].max(0.0);
                let mut stat = 0.0;
                let mut used = 0usize;
                for &i in order.iter().take(rank) {
                    let lam = eig.eigenvalues[i];
                    if lam <= 1e-12 * lmax {
                        break;
                    }
                    let proj = eig.eigenvectors.column(i).dot(&beta);
                    stat += proj * proj / lam;
                    used += 1;
                }
                let dof = used.max(1) as f64;
                out.push(TermTest {
                    term: name,
                    kind,
                    statistic: stat,
                    dof,
                    p_value: chi2_sf(stat, dof),
                    estimate: None,
                    std_error: None,
                });
            }
        }
    }
    out
}

impl GamTauModel {
    /// A degenerate model that holds tau constant with no covariate
    /// effects, clipped into the family's feasible range.
    ///
    /// This is a construction helper, not a fit: the likelihood and
    /// criterion fields are zeroed and the covariance is empty. It exists
    /// for independence edges, truncated vine trees, and hand-built models.
    pub fn constant(family: FamilySpec, tau: f64, n: usize) -> GamTauModel {
        let intercept = tau_to_eta(family.clip_tau(tau));
        GamTauModel {
            family,
            formula: GamFormula::new(),
            intercept,
            linear: Vec::new(),
            smooths: Vec::new(),
            covariance: DMatrix::zeros(0, 0),
            edf: 0.0,
            term_edf: Vec::new(),
            loglik: 0.0,
            aic: 0.0,
            bic: 0.0,
            gcv: 0.0,
            n,
            converged: true,
            tests: Vec::new(),
        }
    }

    /// Linear predictor on new covariate rows.
    pub fn predict_eta(&self, data: &Covariates) -> Result<Vec<f64>> {
        let mut eta = vec![self.intercept; data.len()];
        for (name, coef) in &self.linear {
            let col = data.column(name)?;
            for (e, &x) in eta.iter_mut().zip(col) {
                *e += coef * x;
            }
        }
        for smooth in &self.smooths {
            let basis = SplineBasis::new(smooth.knots.clone())?;
            let col = data.column(&smooth.name)?;
            let coefs = DVector::from_column_slice(&smooth.coefs);
            for (e, &t) in eta.iter_mut().zip(col) {
                *e += basis.eval_row(t).dot(&coefs);
            }
        }
        Ok(eta)
    }

    /// Fitted tau on new covariate rows.
    pub fn predict_tau(&self, data: &Covariates) -> Result<Vec<f64>> {
        Ok(self.predict_eta(data)?.into_iter().map(link_tau).collect())
    }

    /// Fitted tau with pointwise Wald bands at the given coverage level,
    /// formed on the linear predictor scale and mapped through the link.
    pub fn predict_tau_with_bands(
        &self,
        data: &Covariates,
        level: f64,
    ) -> Result<Vec<(f64, f64, f64)>> {
        if !(0.0 < level && level < 1.0) {
            return Err(CovineError::invalid(format!("band level {level} must be in (0,1)")));
        }
        let crit = norm_quantile(0.5 + 0.5 * level);
        let eta = self.predict_eta(data)?;
        let se = self.eta_std_errors(data)?;
        Ok(eta
            .into_iter()
            .zip(se)
            .map(|(e, s)| (link_tau(e), link_tau(e - crit * s), link_tau(e + crit * s)))
            .collect())
    }

    /// Standard error of the linear predictor on new covariate rows.
    pub fn eta_std_errors(&self, data: &Covariates) -> Result<Vec<f64>> {
        let n = data.len();
        let p = self.covariance.nrows();
        if p == 0 {
            // Degenerate model with no estimated coefficients (independence).
            return Ok(vec![0.0; n]);
        }
        let mut bases = Vec::new();
        for smooth in &self.smooths {
            bases.push(SplineBasis::new(smooth.knots.clone())?);
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = DVector::zeros(p);
            row[0] = 1.0;
            for (j, (name, _)) in self.linear.iter().enumerate() {
                row[1 + j] = data.column(name)?[i];
            }
            for (smooth, basis) in self.smooths.iter().zip(&bases) {
                let full = basis.eval_row(data.column(&smooth.name)?[i]);
                let reduced = smooth.z.transpose() * full;
                for (j, val) in reduced.iter().enumerate() {
                    row[smooth.offset + j] = *val;
                }
            }
            let var = (row.transpose() * &self.covariance * &row)[(0, 0)];
            out.push(var.max(0.0).sqrt());
        }
        Ok(out)
    }

    /// The centered contribution of one smooth on a grid, with pointwise
    /// standard errors.
    pub fn smooth_contribution(&self, name: &str, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
        let smooth = self
            .smooths
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| CovineError::invalid(format!("no smooth term named '{name}'")))?;
        let basis = SplineBasis::new(smooth.knots.clone())?;
        let coefs = DVector::from_column_slice(&smooth.coefs);
        let w = smooth.z.ncols();
        let vkk = self.covariance.view((smooth.offset, smooth.offset), (w, w)).into_owned();
        Ok(grid
            .iter()
            .map(|&t| {
                let full = basis.eval_row(t);
                let value = full.dot(&coefs);
                let reduced = smooth.z.transpose() * &full;
                let var = (reduced.transpose() * &vkk * &reduced)[(0, 0)];
                (value, var.max(0.0).sqrt())
            })
            .collect())
    }

    /// EDF of a named term; the intercept is listed as "(intercept)".
    pub fn edf_of(&self, name: &str) -> Option<f64> {
        self.term_edf.iter().find(|(n, _)| n == name).map(|(_, e)| *e)
    }

    /// Wald test of a named term.
    pub fn term_test(&self, name: &str) -> Option<&TermTest> {
        self.tests.iter().find(|t| t.term == name)
    }

    /// Fitted tau when the model has no covariate terms.
    pub fn constant_tau(&self) -> f64 {
        link_tau(self.intercept)
    }
}

/// Maps tau through the inverse link, exposed for initialization and tests.
pub fn tau_to_eta(tau: f64) -> f64 {
    link_inverse(tau)
}

/// The scaled tanh link used for all tau regressions.
pub fn eta_to_tau(eta: f64) -> f64 {
    link_tau(eta)
}
