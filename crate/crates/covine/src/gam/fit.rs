//! Penalized Fisher scoring for tau regressions and GCV-based selection of
//! the smoothing parameters.
//!
//! The objective is the mean log copula likelihood minus a quadratic
//! curvature penalty, F(theta) = n^-1 sum_i log c(u_i, v_i; g(eta_i))
//! - 1/2 theta' P(gamma) theta with g the scaled tanh link. Scoring solves
//! (X'AX + n P) theta+ = X'(A eta + s) with per-observation weights from the
//! negative curvature of the log likelihood in eta, floored for stability;
//! the floor does not move the fixed point, which satisfies the exact
//! stationarity condition n^-1 X's = P theta.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{CovineError, Result};
use crate::families::FamilySpec;
use crate::gam::design::ModelDesign;
use crate::gam::GamConfig;
use crate::numeric::golden_section_min;

/// Absolute weight floor keeping the scoring system positive definite when
/// the link derivative itself vanishes.
const WEIGHT_FLOOR: f64 = 1e-10;
/// Gradient infinity-norm targeted by the post-convergence polish steps.
const GRAD_TOL: f64 = 1e-9;

pub(crate) struct WorkingState {
    pub eta: DVector<f64>,
    /// d log c / d eta per observation.
    pub score: DVector<f64>,
    /// Floored negative second derivative of log c in eta.
    pub weight: DVector<f64>,
    /// The same curvature without the floor; may be negative.
    pub raw_weight: DVector<f64>,
    pub mean_loglik: f64,
}

pub(crate) fn link_tau(eta: f64) -> f64 {
    (0.5 * eta).tanh()
}

pub(crate) fn link_inverse(tau: f64) -> f64 {
    2.0 * tau.atanh()
}

fn working_state(
    family: &FamilySpec,
    u: &[f64],
    v: &[f64],
    design: &ModelDesign,
    theta: &DVector<f64>,
) -> WorkingState {
    let n = design.n();
    let eta = &design.x * theta;
    let mut score = DVector::zeros(n);
    let mut weight = DVector::zeros(n);
    let mut raw_weight = DVector::zeros(n);
    let mut total = 0.0;
    for i in 0..n {
        let tau = link_tau(eta[i]);
        let gp = 0.5 * (1.0 - tau * tau);
        let gpp = -tau * gp;
        let d1 = family.dlogpdf_dtau(u[i], v[i], tau);
        let d2 = family.d2logpdf_dtau2(u[i], v[i], tau);
        total += family.logpdf(u[i], v[i], tau);
        score[i] = d1 * gp;
        raw_weight[i] = -(d2 * gp * gp + d1 * gpp);
        // Observations where the observed curvature flips convex fall back
        // to the unit Fisher information on the tau scale, g'(eta)^2. An
        // absolute floor of 1e-6 would leave the ridge step intact (weights
        // never move the fixed point) but blow up the working residuals
        // s^2 / a by six orders, and that constant couples to the GCV
        // denominator so strongly that the score would always prefer the
        // smallest EDF on offer.
        weight[i] = raw_weight[i].max(gp * gp).max(WEIGHT_FLOOR);
    }
    WorkingState { eta, score, weight, raw_weight, mean_loglik: total / n as f64 }
}

fn penalty_quad(pen: &DMatrix<f64>, theta: &DVector<f64>) -> f64 {
    (theta.transpose() * pen * theta)[(0, 0)]
}

/// X' diag(w) X and X' (w .* eta + s).
fn normal_equations(design: &ModelDesign, state: &WorkingState) -> (DMatrix<f64>, DVector<f64>) {
    let x = &design.x;
    let (n, p) = x.shape();
    let mut g = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    for i in 0..n {
        let wi = state.weight[i];
        let yi = wi * state.eta[i] + state.score[i];
        let row = x.row(i);
        for a in 0..p {
            let xa = row[a];
            rhs[a] += yi * xa;
            let wxa = wi * xa;
            for b in a..p {
                g[(a, b)] += wxa * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    (g, rhs)
}

/// Cholesky factorization with an escalating diagonal ridge fallback for
/// systems that are only just positive semidefinite.
pub(crate) fn cholesky_with_ridge(m: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    let scale = m.diagonal().mean().abs().max(1e-300);
    let mut ridge = 1e-10 * scale;
    for _ in 0..9 {
        let mut r = m.clone();
        for i in 0..r.nrows() {
            r[(i, i)] += ridge;
        }
        if let Some(c) = Cholesky::new(r) {
            return Ok(c);
        }
        ridge *= 100.0;
    }
    Err(CovineError::numerical("scoring system is not positive definite"))
}

pub(crate) struct FitCore {
    pub theta: DVector<f64>,
    pub converged: bool,
    /// X'AX + n P(gamma); its inverse is the coefficient covariance.
    pub penalized_info: DMatrix<f64>,
    pub loglik_sum: f64,
    pub edf_total: f64,
    /// EDF split by coefficient index.
    pub edf_by_coef: DVector<f64>,
    pub gcv: f64,
}

/// Fit at fixed smoothing parameters, starting from `theta0`.
pub(crate) fn fit_with_gammas(
    family: &FamilySpec,
    u: &[f64],
    v: &[f64],
    design: &ModelDesign,
    gammas: &[f64],
    theta0: DVector<f64>,
    config: &GamConfig,
    polish: bool,
) -> Result<FitCore> {
    let n = design.n() as f64;
    let pen = design.penalty(gammas);
    let mut theta = theta0;
    let mut state = working_state(family, u, v, design, &theta);
    let mut f_cur = state.mean_loglik - 0.5 * penalty_quad(&pen, &theta);
    let mut best = (f_cur, theta.clone());
    let mut converged = false;

    for _ in 0..config.max_iter {
        let (g, rhs) = normal_equations(design, &state);
        let m = &g + &pen * n;
        let chol = cholesky_with_ridge(&m)?;
        let target = chol.solve(&rhs);
        let direction = &target - &theta;
        // The proposed update, not the possibly halved one, measures how
        // close we are to the scoring fixed point.
        let proposed = direction.amax();

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &theta + &direction * step;
            let cand_state = working_state(family, u, v, design, &cand);
            let f_new = cand_state.mean_loglik - 0.5 * penalty_quad(&pen, &cand);
            if f_new.is_finite() && f_new >= f_cur - 1e-12 {
                theta = cand;
                state = cand_state;
                f_cur = f_new;
                if f_cur > best.0 {
                    best = (f_cur, theta.clone());
                }
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if accepted && proposed < config.tol {
            converged = true;
        }
        if !accepted || converged {
            break;
        }
    }

    if !converged && best.0 > f_cur {
        theta = best.1;
        state = working_state(family, u, v, design, &theta);
    }

    if polish {
        // Drive the penalized gradient itself to zero. Each pass proposes a
        // scoring step and backtracks on the gradient norm, so the polish
        // can only improve stationarity.
        let mut grad_norm = grad_inf_norm(design, &pen, &state, &theta, n);
        'polish: for _ in 0..40 {
            if grad_norm <= GRAD_TOL {
                break;
            }
            // Scoring direction first; when its floored weights leave the
            // gradient norm flat, a Newton step on the stationarity system
            // with the observed curvature takes over.
            let (g, rhs) = normal_equations(design, &state);
            let m = &g + &pen * n;
            let chol = cholesky_with_ridge(&m)?;
            let scoring = chol.solve(&rhs) - &theta;
            let gradient = grad_vec(design, &pen, &state, &theta, n);
            let newton = observed_info(design, &pen, &state).lu().solve(&gradient);
            for direction in std::iter::once(&scoring).chain(newton.as_ref()) {
                let mut step = 1.0;
                for _ in 0..12 {
                    let cand = &theta + direction * step;
                    let cand_state = working_state(family, u, v, design, &cand);
                    let cand_norm = grad_inf_norm(design, &pen, &cand_state, &cand, n);
                    if cand_norm.is_finite() && cand_norm < grad_norm {
                        theta = cand;
                        state = cand_state;
                        grad_norm = cand_norm;
                        continue 'polish;
                    }
                    step *= 0.5;
                }
            }
            break;
        }
        // A near-zero penalized gradient is convergence regardless of how
        // the scoring iterations behaved on the way there.
        if grad_norm <= 1e-7 {
            converged = true;
        }
    }

    let (g, _) = normal_equations(design, &state);
    let m = &g + &pen * n;
    let chol = cholesky_with_ridge(&m)?;
    let hat = chol.solve(&g);
    let edf_by_coef = hat.diagonal();
    let edf_total: f64 = edf_by_coef.sum();
    let rss: f64 = (0..design.n())
        .map(|i| state.score[i] * state.score[i] / state.weight[i])
        .sum();
    let denom = 1.0 - edf_total / n;
    let gcv = if denom > 0.0 { (rss / n) / (denom * denom) } else { f64::INFINITY };

    Ok(FitCore {
        theta,
        converged,
        penalized_info: m,
        loglik_sum: state.mean_loglik * n,
        edf_total,
        edf_by_coef,
        gcv,
    })
}

fn grad_vec(
    design: &ModelDesign,
    pen: &DMatrix<f64>,
    state: &WorkingState,
    theta: &DVector<f64>,
    n: f64,
) -> DVector<f64> {
    design.x.transpose() * &state.score / n - pen * theta
}

pub(crate) fn grad_inf_norm(
    design: &ModelDesign,
    pen: &DMatrix<f64>,
    state: &WorkingState,
    theta: &DVector<f64>,
    n: f64,
) -> f64 {
    grad_vec(design, pen, state, theta, n).amax()
}

/// Negative penalized Hessian X' diag(raw) X / n + P using the unfloored
/// observed curvature; symmetric but possibly indefinite.
fn observed_info(design: &ModelDesign, pen: &DMatrix<f64>, state: &WorkingState) -> DMatrix<f64> {
    let x = &design.x;
    let (n, p) = x.shape();
    let mut j = DMatrix::<f64>::zeros(p, p);
    for i in 0..n {
        let wi = state.raw_weight[i];
        let row = x.row(i);
        for a in 0..p {
            let wxa = wi * row[a];
            for b in a..p {
                j[(a, b)] += wxa * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            j[(a, b)] = j[(b, a)];
        }
    }
    j / n as f64 + pen
}

/// GCV score of the linearized ridge problem defined by the current working
/// quantities: the weighted residual sum of the one-step fit against the
/// working response y_i = eta_i + s_i / a_i, over (1 - EDF / n)^2. Because
/// the working quantities are held fixed while gamma varies, weight-floored
/// observations only add a gamma-independent constant.
fn linearized_gcv(
    design: &ModelDesign,
    state: &WorkingState,
    g0: &DMatrix<f64>,
    rhs: &DVector<f64>,
    pen: &DMatrix<f64>,
) -> f64 {
    let n = design.n() as f64;
    let m = g0 + pen * n;
    let Ok(chol) = cholesky_with_ridge(&m) else {
        return f64::INFINITY;
    };
    let theta_plus = chol.solve(rhs);
    let eta_plus = &design.x * &theta_plus;
    let mut rss = 0.0;
    for i in 0..design.n() {
        let y = state.eta[i] + state.score[i] / state.weight[i];
        let r = y - eta_plus[i];
        rss += state.weight[i] * r * r;
    }
    let edf: f64 = chol.solve(g0).diagonal().sum();
    let denom = 1.0 - edf / n;
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        (rss / n) / (denom * denom)
    }
}

/// Alternates (i) coordinate-wise GCV minimization of the smoothing
/// parameters on the linearized problem with (ii) a ridge step, freezing
/// gamma once two consecutive selections barely move it, then hands off to
/// a polished fixed-gamma fit.
pub(crate) fn select_gammas(
    family: &FamilySpec,
    u: &[f64],
    v: &[f64],
    design: &ModelDesign,
    config: &GamConfig,
) -> Result<(Vec<f64>, FitCore)> {
    let k = design.smooths.len();
    if let Some(fixed) = &config.fixed_gammas {
        if fixed.len() != k {
            return Err(CovineError::invalid(format!(
                "{} smoothing parameters supplied for {k} smooth terms",
                fixed.len()
            )));
        }
        let core = fit_with_gammas(
            family,
            u,
            v,
            design,
            fixed,
            DVector::zeros(design.p),
            config,
            true,
        )?;
        return Ok((fixed.clone(), core));
    }
    if k == 0 {
        let core =
            fit_with_gammas(family, u, v, design, &[], DVector::zeros(design.p), config, true)?;
        return Ok((Vec::new(), core));
    }

    let n = design.n() as f64;
    let (lo, hi) = config.gamma_log10_range;
    let mut log_gammas = vec![0.0f64; k];
    let mut theta = DVector::<f64>::zeros(design.p);
    let mut state = working_state(family, u, v, design, &theta);
    let mut streak = 0u32;
    let mut frozen = false;

    for _ in 0..config.max_iter {
        if frozen {
            break;
        }
        // (i) re-select gamma against the current linearization.
        let (g0, rhs) = normal_equations(design, &state);
        let previous = log_gammas.clone();
        for _ in 0..config.gamma_sweeps {
            let mut moved = false;
            for j in 0..k {
                let objective = |lg: f64| -> f64 {
                    let mut lgs = log_gammas.clone();
                    lgs[j] = lg;
                    let gams: Vec<f64> = lgs.iter().map(|g| 10f64.powf(*g)).collect();
                    let pen = design.penalty(&gams);
                    linearized_gcv(design, &state, &g0, &rhs, &pen)
                };
                let (best, _) =
                    golden_section_min(objective, lo, hi, config.gamma_scan_points, 0.01);
                if (best - log_gammas[j]).abs() > 1e-12 {
                    moved = true;
                }
                log_gammas[j] = best;
            }
            if !moved {
                break;
            }
        }
        let change = log_gammas
            .iter()
            .zip(&previous)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if change < 0.01 * (hi - lo) {
            streak += 1;
            if streak >= 2 {
                frozen = true;
            }
        } else {
            streak = 0;
        }

        // (ii) one ridge step at the selected gamma, halved until the
        // penalized objective stops getting worse.
        let gammas: Vec<f64> = log_gammas.iter().map(|g| 10f64.powf(*g)).collect();
        let pen = design.penalty(&gammas);
        let f_cur = state.mean_loglik - 0.5 * penalty_quad(&pen, &theta);
        let m = &g0 + &pen * n;
        let chol = cholesky_with_ridge(&m)?;
        let target = chol.solve(&rhs);
        let direction = &target - &theta;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &theta + &direction * step;
            let cand_state = working_state(family, u, v, design, &cand);
            let f_new = cand_state.mean_loglik - 0.5 * penalty_quad(&pen, &cand);
            if f_new.is_finite() && f_new >= f_cur - 1e-12 {
                theta = cand;
                state = cand_state;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    // Final fit at the frozen gamma, started from the better of the reached
    // iterate and the zero vector so the handed-off objective never loses to
    // the trivial start.
    let gammas: Vec<f64> = log_gammas.iter().map(|g| 10f64.powf(*g)).collect();
    let pen = design.penalty(&gammas);
    let f_theta = state.mean_loglik - 0.5 * penalty_quad(&pen, &theta);
    let zero_loglik =
        working_state(family, u, v, design, &DVector::zeros(design.p)).mean_loglik;
    let start = if f_theta.is_finite() && f_theta >= zero_loglik {
        theta
    } else {
        DVector::zeros(design.p)
    };
    let core = fit_with_gammas(family, u, v, design, &gammas, start, config, true)?;
    Ok((gammas, core))
}
