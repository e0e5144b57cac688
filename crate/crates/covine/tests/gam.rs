//! Oracle tests for the penalized tau regression: maximum-likelihood
//! agreement for the intercept-only model, exact stationarity of the
//! penalized score, an independent hat-matrix EDF computation, and
//! recovery of known effects.

mod common;

use covine::data::Covariates;
use covine::families::{FamilySpec, Rotation, Side};
use covine::gam::{eta_to_tau, fit_gam_tau, GamConfig, GamFormula, GamTauModel};
use covine::spline::{KnotStrategy, SplineBasis};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Draws one pair from the copula by conditional inversion.
fn sample_pair(spec: &FamilySpec, tau: f64, rng: &mut ChaCha12Rng) -> (f64, f64) {
    let w: f64 = rng.gen();
    let p: f64 = rng.gen();
    (spec.hinv(Side::First, p, w, tau), w)
}

fn sample_many(spec: &FamilySpec, taus: &[f64], rng: &mut ChaCha12Rng) -> (Vec<f64>, Vec<f64>) {
    let mut u = Vec::with_capacity(taus.len());
    let mut v = Vec::with_capacity(taus.len());
    for &t in taus {
        let (a, b) = sample_pair(spec, t, rng);
        u.push(a);
        v.push(b);
    }
    (u, v)
}

/// Test-side golden-section maximizer of the total log likelihood in tau.
fn golden_mle(spec: &FamilySpec, u: &[f64], v: &[f64]) -> f64 {
    let (blo, bhi) = spec.tau_bounds();
    let negll = |tau: f64| -> f64 {
        -u.iter().zip(v).map(|(&a, &b)| spec.logpdf(a, b, tau)).sum::<f64>()
    };
    // Coarse scan for a bracket, then golden-section refinement.
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    let grid: Vec<f64> = (0..101).map(|i| blo + (bhi - blo) * i as f64 / 100.0).collect();
    for (i, &t) in grid.iter().enumerate() {
        let val = negll(t);
        if val < best_v {
            best_v = val;
            best_i = i;
        }
    }
    let (mut a, mut b) = (grid[best_i.saturating_sub(1)], grid[(best_i + 1).min(100)]);
    let phi = 0.618_033_988_749_894_8;
    let (mut c, mut d) = (b - (b - a) * phi, a + (b - a) * phi);
    let (mut fc, mut fd) = (negll(c), negll(d));
    while b - a > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * phi;
            fc = negll(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * phi;
            fd = negll(d);
        }
    }
    0.5 * (a + b)
}

#[test]
fn intercept_only_fit_matches_golden_section_mle() {
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    let cases = [
        (FamilySpec::gaussian(), -0.5),
        (FamilySpec::gaussian(), 0.2),
        (FamilySpec::gaussian(), 0.7),
        (FamilySpec::gumbel(Rotation::R0), 0.55),
        (FamilySpec::clayton(Rotation::R90), -0.35),
    ];
    for (spec, tau) in cases {
        let taus = vec![tau; 2000];
        let (u, v) = sample_many(&spec, &taus, &mut rng);
        let model = fit_gam_tau(
            &spec,
            &u,
            &v,
            &Covariates::empty(u.len()),
            &GamFormula::new(),
            &GamConfig::default(),
        )
        .unwrap();
        assert!(model.converged);
        let mle = golden_mle(&spec, &u, &v);
        let fitted = model.constant_tau();
        assert!(
            (fitted - mle).abs() < 1e-4,
            "{} tau={tau}: fit {fitted} vs golden mle {mle}",
            spec.id()
        );
    }
}

/// Rebuilds the design, weights and penalty from the public model pieces.
struct Rebuilt {
    x: DMatrix<f64>,
    penalty: DMatrix<f64>,
    theta: DVector<f64>,
}

fn rebuild(model: &GamTauModel, data: &Covariates, n: usize) -> Rebuilt {
    let n_lin = model.linear.len();
    let p = model.covariance.nrows();
    let mut x = DMatrix::<f64>::zeros(n, p);
    let mut penalty = DMatrix::<f64>::zeros(p, p);
    let mut theta = DVector::<f64>::zeros(p);
    theta[0] = model.intercept;
    for i in 0..n {
        x[(i, 0)] = 1.0;
    }
    for (j, (name, coef)) in model.linear.iter().enumerate() {
        let col = data.column(name).unwrap();
        for i in 0..n {
            x[(i, 1 + j)] = col[i];
        }
        theta[1 + j] = *coef;
    }
    let mut offset = 1 + n_lin;
    for smooth in &model.smooths {
        assert_eq!(smooth.offset, offset, "offset bookkeeping");
        let basis = SplineBasis::new(smooth.knots.clone()).unwrap();
        let col = data.column(&smooth.name).unwrap();
        let b = basis.design(col);
        let bz = &b * &smooth.z;
        let w = smooth.z.ncols();
        x.view_mut((0, offset), (n, w)).copy_from(&bz);
        let s_red = smooth.z.transpose() * basis.penalty() * &smooth.z;
        penalty
            .view_mut((offset, offset), (w, w))
            .copy_from(&(smooth.gamma * 0.5 * (&s_red + s_red.transpose())));
        // coefs = Z beta with orthonormal Z, so beta = Z' coefs.
        let beta = smooth.z.transpose() * DVector::from_column_slice(&smooth.coefs);
        theta.rows_mut(offset, w).copy_from(&beta);
        offset += w;
    }
    Rebuilt { x, penalty, theta }
}

/// Per-observation score in eta and the floored curvature weights, computed
/// from the tau derivatives exactly as the fitter defines them.
fn working_quantities(
    spec: &FamilySpec,
    u: &[f64],
    v: &[f64],
    eta: &[f64],
) -> (Vec<f64>, Vec<f64>, f64) {
    let mut score = Vec::with_capacity(u.len());
    let mut weight = Vec::with_capacity(u.len());
    let mut loglik = 0.0;
    for i in 0..u.len() {
        let tau = eta_to_tau(eta[i]);
        let gp = 0.5 * (1.0 - tau * tau);
        let gpp = -tau * gp;
        let d1 = spec.dlogpdf_dtau(u[i], v[i], tau);
        let d2 = spec.d2logpdf_dtau2(u[i], v[i], tau);
        loglik += spec.logpdf(u[i], v[i], tau);
        score.push(d1 * gp);
        weight.push((-(d2 * gp * gp + d1 * gpp)).max(gp * gp).max(1e-10));
    }
    (score, weight, loglik)
}

#[test]
fn penalized_score_vanishes_at_the_fit() {
    let mut rng = ChaCha12Rng::seed_from_u64(4242);
    let specs = [
        FamilySpec::gaussian(),
        FamilySpec::student_t(4.0).unwrap(),
        FamilySpec::clayton(Rotation::R0),
        FamilySpec::gumbel(Rotation::R0),
    ];
    for problem in 0..20 {
        let spec = specs[problem % specs.len()];
        let n = 300 + 25 * problem;
        let positive_only = spec.is_archimedean();
        let b0: f64 = if positive_only { rng.gen_range(0.8..1.4) } else { rng.gen_range(-0.4..0.4) };
        let b1: f64 = rng.gen_range(-0.5..0.5);
        let amp: f64 = rng.gen_range(0.4..1.0);
        let z: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
        let t: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let taus: Vec<f64> = (0..n)
            .map(|i| eta_to_tau(b0 + b1 * z[i] + amp * (2.0 * std::f64::consts::PI * t[i]).sin()))
            .collect();
        let (u, v) = sample_many(&spec, &taus, &mut rng);
        let data = Covariates::new(vec![("z", z), ("t", t)]).unwrap();
        let formula = GamFormula::new().linear("z").smooth("t", 8, KnotStrategy::Quantile);
        let model =
            fit_gam_tau(&spec, &u, &v, &data, &formula, &GamConfig::default()).unwrap();

        let rebuilt = rebuild(&model, &data, n);
        let eta_vec = (&rebuilt.x * &rebuilt.theta).iter().cloned().collect::<Vec<f64>>();
        let eta_public = model.predict_eta(&data).unwrap();
        for (a, b) in eta_vec.iter().zip(&eta_public) {
            assert!((a - b).abs() < 1e-10, "eta mismatch {a} vs {b}");
        }
        let (score, _, loglik) = working_quantities(&spec, &u, &v, &eta_vec);
        let grad = rebuilt.x.transpose() * DVector::from_column_slice(&score) / n as f64
            - &rebuilt.penalty * &rebuilt.theta;
        assert!(
            grad.amax() < 1e-5,
            "problem {problem} ({}): penalized score norm {}",
            spec.id(),
            grad.amax()
        );

        // The fit cannot be worse than the zero start it shares.
        let pen_at = |theta: &DVector<f64>, ll: f64| {
            ll / n as f64 - 0.5 * (theta.transpose() * &rebuilt.penalty * theta)[(0, 0)]
        };
        let zero_eta = vec![0.0; n];
        let (_, _, ll0) = working_quantities(&spec, &u, &v, &zero_eta);
        let f_fit = pen_at(&rebuilt.theta, loglik);
        let f_zero = pen_at(&DVector::zeros(rebuilt.theta.len()), ll0);
        assert!(
            f_fit >= f_zero - 1e-10,
            "problem {problem}: objective fell from {f_zero} to {f_fit}"
        );
    }
}

#[test]
fn edf_matches_dense_hat_matrix_trace() {
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let n = 400;
    let spec = FamilySpec::gaussian();
    let t: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    let taus: Vec<f64> =
        t.iter().map(|&x| eta_to_tau(0.3 + (2.0 * std::f64::consts::PI * x).sin())).collect();
    let (u, v) = sample_many(&spec, &taus, &mut rng);
    let data = Covariates::new(vec![("t", t)]).unwrap();
    let formula = GamFormula::new().smooth("t", 9, KnotStrategy::Quantile);
    let gamma = 3.7;
    let config = GamConfig { fixed_gammas: Some(vec![gamma]), ..GamConfig::default() };
    let model = fit_gam_tau(&spec, &u, &v, &data, &formula, &config).unwrap();

    let rebuilt = rebuild(&model, &data, n);
    let eta = (&rebuilt.x * &rebuilt.theta).iter().cloned().collect::<Vec<f64>>();
    let (_, weight, _) = working_quantities(&spec, &u, &v, &eta);
    // H = A^(1/2) X (X'AX + nP)^-1 X' A^(1/2); EDF is its trace.
    let mut xa = rebuilt.x.clone();
    for i in 0..n {
        let s = weight[i].sqrt();
        for j in 0..xa.ncols() {
            xa[(i, j)] *= s;
        }
    }
    let m = xa.transpose() * &xa + &rebuilt.penalty * n as f64;
    let minv = m.try_inverse().unwrap();
    let hat = &xa * minv * xa.transpose();
    let trace: f64 = (0..n).map(|i| hat[(i, i)]).sum();
    assert!(
        (trace - model.edf).abs() < 1e-8,
        "dense trace {trace} vs reported EDF {}",
        model.edf
    );
    // One smooth plus intercept: the term split must add back up.
    let sum_terms: f64 = model.term_edf.iter().map(|(_, e)| e).sum();
    assert!((sum_terms - model.edf).abs() < 1e-10);
}

#[test]
fn recovers_sinusoidal_tau_curve() {
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    let n = 2000;
    let spec = FamilySpec::gaussian();
    let t: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    let truth =
        |x: f64| eta_to_tau(1.2 * (2.0 * std::f64::consts::PI * x).sin());
    let taus: Vec<f64> = t.iter().map(|&x| truth(x)).collect();
    let (u, v) = sample_many(&spec, &taus, &mut rng);
    let data = Covariates::new(vec![("t", t)]).unwrap();
    let formula = GamFormula::new().smooth("t", 10, KnotStrategy::Quantile);
    let model =
        fit_gam_tau(&spec, &u, &v, &data, &formula, &GamConfig::default()).unwrap();
    assert!(model.converged);

    let grid: Vec<f64> = (0..101).map(|i| 0.02 + 0.96 * i as f64 / 100.0).collect();
    let grid_data = Covariates::new(vec![("t", grid.clone())]).unwrap();
    let fitted = model.predict_tau(&grid_data).unwrap();
    let ok = grid
        .iter()
        .zip(&fitted)
        .filter(|(&g, &f)| (f - truth(g)).abs() <= 0.1)
        .count();
    assert!(
        ok >= 96,
        "only {ok} of 101 grid points within 0.1 of the true curve"
    );
    // The smooth must be clearly nonlinear.
    let edf = model.edf_of("t").unwrap();
    assert!(edf > 3.0, "sinusoid fitted with EDF {edf}");
}

#[test]
fn straight_line_truth_gets_shrunk_to_linear_edf() {
    let mut rng = ChaCha12Rng::seed_from_u64(1234);
    let n = 1500;
    let spec = FamilySpec::gaussian();
    let t: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    let taus: Vec<f64> = t.iter().map(|&x| eta_to_tau(-0.5 + 1.0 * x)).collect();
    let (u, v) = sample_many(&spec, &taus, &mut rng);
    let data = Covariates::new(vec![("t", t)]).unwrap();
    let formula = GamFormula::new().smooth("t", 10, KnotStrategy::Quantile);
    let model =
        fit_gam_tau(&spec, &u, &v, &data, &formula, &GamConfig::default()).unwrap();
    let edf = model.edf_of("t").unwrap();
    assert!(
        edf < 2.0,
        "linear truth should be shrunk towards one EDF, got {edf}"
    );
}

#[test]
fn wald_tests_separate_strong_and_null_effects() {
    let mut rng = ChaCha12Rng::seed_from_u64(31415);
    let n = 1200;
    let spec = FamilySpec::gaussian();
    let z_strong: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
    let z_null: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let taus: Vec<f64> = z_strong.iter().map(|&z| eta_to_tau(0.2 + 0.8 * z)).collect();
    let (u, v) = sample_many(&spec, &taus, &mut rng);
    let data = Covariates::new(vec![("a", z_strong), ("b", z_null)]).unwrap();
    let formula = GamFormula::new().linear("a").linear("b");
    let model =
        fit_gam_tau(&spec, &u, &v, &data, &formula, &GamConfig::default()).unwrap();

    let strong = model.term_test("a").unwrap();
    let null = model.term_test("b").unwrap();
    assert!(strong.p_value < 1e-6, "strong effect p = {}", strong.p_value);
    assert!(null.p_value > 0.01, "null effect p = {}", null.p_value);
    let est = strong.estimate.unwrap();
    let se = strong.std_error.unwrap();
    assert!((est - 0.8).abs() < 4.0 * se, "estimate {est} too far from 0.8 (se {se})");
    assert!(se > 0.0 && se < 0.5);
}

#[test]
fn model_serialization_round_trips_predictions() {
    let mut rng = ChaCha12Rng::seed_from_u64(5150);
    let n = 500;
    let spec = FamilySpec::student_t(4.0).unwrap();
    let z: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
    let t: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    let taus: Vec<f64> = z
        .iter()
        .zip(&t)
        .map(|(&a, &b)| eta_to_tau(0.4 * a + (2.0 * std::f64::consts::PI * b).sin() * 0.6))
        .collect();
    let (u, v) = sample_many(&spec, &taus, &mut rng);
    let data = Covariates::new(vec![("z", z), ("t", t)]).unwrap();
    let formula = GamFormula::new().linear("z").smooth("t", 7, KnotStrategy::Quantile);
    let model =
        fit_gam_tau(&spec, &u, &v, &data, &formula, &GamConfig::default()).unwrap();

    let json = serde_json::to_string(&model).unwrap();
    let loaded: GamTauModel = serde_json::from_str(&json).unwrap();
    let before = model.predict_tau(&data).unwrap();
    let after = loaded.predict_tau(&data).unwrap();
    assert_eq!(before, after, "predictions must round trip bit for bit");
    let bands = loaded.predict_tau_with_bands(&data, 0.95).unwrap();
    for ((tau, lo, hi), point) in bands.iter().zip(&before) {
        assert!(lo <= tau && tau <= hi);
        assert!((tau - point).abs() < 1e-15);
    }
}

#[test]
fn input_validation_rejects_bad_shapes() {
    let spec = FamilySpec::gaussian();
    let data = Covariates::new(vec![("t", vec![0.1, 0.5, 0.9])]).unwrap();
    let formula = GamFormula::new().linear("t");
    let config = GamConfig::default();
    // Mismatched lengths.
    assert!(fit_gam_tau(&spec, &[0.2, 0.4], &[0.3, 0.5, 0.7], &data, &formula, &config).is_err());
    // Out-of-range observations.
    assert!(fit_gam_tau(&spec, &[0.2, 1.4, 0.5], &[0.3, 0.5, 0.7], &data, &formula, &config)
        .is_err());
    // Duplicate terms.
    let dup = GamFormula::new().linear("t").smooth("t", 6, KnotStrategy::Quantile);
    let u = vec![0.2, 0.4, 0.6];
    assert!(fit_gam_tau(&spec, &u, &u, &data, &dup, &config).is_err());
    // More coefficients than observations.
    let wide = GamFormula::new().smooth("t", 12, KnotStrategy::Equidistant);
    assert!(fit_gam_tau(&spec, &u, &u, &data, &wide, &config).is_err());
}
