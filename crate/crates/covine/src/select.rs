//! Automatic model selection for a single pair copula.
//!
//! Two layers: [`select_gam_structure`] decides, for a fixed family, which
//! covariates enter the tau regression and whether each enters linearly or
//! through a spline smooth (backward elimination on Wald p-values, near-one
//! effective degrees of freedom demoting a smooth to linear, and basis
//! growth while a smooth presses against its capacity). [`select_family`]
//! runs that procedure over a list of candidate families and keeps the one
//! with the smallest information criterion.

use serde::{Deserialize, Serialize};

use crate::data::Covariates;
use crate::error::{CovineError, ErrorKind, Result};
use crate::families::{FamilyKind, FamilySpec, Rotation};
use crate::gam::{fit_gam_tau, GamConfig, GamFormula, GamTauModel};
use crate::spline::{place_knots, KnotStrategy};
use crate::stats::kendall_tau;

/// Smallest spline basis worth carrying; anything tighter is served just as
/// well by a linear column.
const MIN_SMOOTH_BASIS: usize = 4;

/// Empirical-tau window inside which both dependence signs stay plausible,
/// so one-sign families of either orientation remain candidates.
const TAU_SIGN_GATE: f64 = 0.05;

/// Criterion values closer than this are treated as tied and resolved by
/// effective parameter count, then by family id.
const CRIT_TIE: f64 = 1e-9;

/// Information criterion used to rank candidate families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Aic,
    Bic,
}

impl Criterion {
    pub fn of(self, model: &GamTauModel) -> f64 {
        match self {
            Criterion::Aic => model.aic,
            Criterion::Bic => model.bic,
        }
    }

    /// Criterion cost of one additional effective parameter.
    pub fn per_parameter(self, n: usize) -> f64 {
        match self {
            Criterion::Aic => 2.0,
            Criterion::Bic => (n as f64).ln(),
        }
    }
}

/// Whether the covariate structure is re-selected for every candidate
/// family or selected once (with the first usable family) and reused. The
/// reuse mode trades a little fidelity for a large speedup.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureReuse {
    PerFamily,
    FirstFamilyOnly,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Significance level for keeping a covariate.
    pub alpha: f64,
    /// Families competing for the edge.
    pub candidate_families: Vec<FamilySpec>,
    pub criterion: Criterion,
    /// A smooth whose effective degrees of freedom fall at or below this is
    /// reclassified as a linear term.
    pub edf_linear_threshold: f64,
    /// A smooth using more than this fraction of its basis triggers growth.
    pub edf_growth_fraction: f64,
    /// Basis sizes may not exceed this fraction of the sample size.
    pub max_basis_fraction_n: f64,
    /// Basis sizes must stay strictly below this fraction of the number of
    /// unique covariate values.
    pub max_basis_fraction_unique: f64,
    /// Starting basis size for smooth terms.
    pub initial_basis: usize,
    pub structure_reuse: StructureReuse,
    /// Grow a basis only when the doubled size already satisfies every cap,
    /// instead of clamping the doubled size to the caps.
    pub literal_growth_rule: bool,
    /// Filter one-sign families whose orientation contradicts the sign of
    /// the empirical Kendall tau.
    pub sign_gate: bool,
    pub knot_strategy: KnotStrategy,
    /// Degrees-of-freedom grid profiled for the Student t family; grids with
    /// more than one value charge the choice as one extra parameter.
    pub nu_grid: Vec<f64>,
    pub gam: GamConfig,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            alpha: 0.05,
            candidate_families: default_candidate_families(),
            criterion: Criterion::Aic,
            edf_linear_threshold: 1.5,
            edf_growth_fraction: 0.8,
            max_basis_fraction_n: 1.0 / 30.0,
            max_basis_fraction_unique: 0.5,
            initial_basis: 10,
            structure_reuse: StructureReuse::PerFamily,
            literal_growth_rule: false,
            sign_gate: true,
            knot_strategy: KnotStrategy::Quantile,
            nu_grid: vec![3.0, 4.0, 5.0, 7.0, 10.0, 15.0, 30.0],
            gam: GamConfig::default(),
        }
    }
}

/// The stock candidate set: independence, the two elliptical families and
/// the one-sign Clayton/Gumbel pair in the orientations that cover both
/// dependence signs.
pub fn default_candidate_families() -> Vec<FamilySpec> {
    vec![
        FamilySpec::indep(),
        FamilySpec::gaussian(),
        FamilySpec::student_t(4.0).expect("4 > 2"),
        FamilySpec::clayton(Rotation::R0),
        FamilySpec::clayton(Rotation::R90),
        FamilySpec::clayton(Rotation::R270),
        FamilySpec::gumbel(Rotation::R0),
        FamilySpec::gumbel(Rotation::R90),
        FamilySpec::gumbel(Rotation::R270),
    ]
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CovineError::invalid(format!(
                "alpha {} must lie strictly between 0 and 1",
                self.alpha
            )));
        }
        if self.candidate_families.is_empty() {
            return Err(CovineError::invalid("candidate family list is empty"));
        }
        if !(self.edf_linear_threshold > 0.0) {
            return Err(CovineError::invalid("edf_linear_threshold must be positive"));
        }
        if !(self.edf_growth_fraction > 0.0 && self.edf_growth_fraction <= 1.0) {
            return Err(CovineError::invalid("edf_growth_fraction must lie in (0, 1]"));
        }
        if !(self.max_basis_fraction_n > 0.0) || !(self.max_basis_fraction_unique > 0.0) {
            return Err(CovineError::invalid("basis cap fractions must be positive"));
        }
        if self.initial_basis < MIN_SMOOTH_BASIS {
            return Err(CovineError::invalid(format!(
                "initial basis {} is below the minimum {}",
                self.initial_basis, MIN_SMOOTH_BASIS
            )));
        }
        if self.nu_grid.is_empty() {
            return Err(CovineError::invalid("nu grid is empty"));
        }
        for &nu in &self.nu_grid {
            if !nu.is_finite() || nu <= 2.0 {
                return Err(CovineError::invalid(format!(
                    "nu grid value {nu} must be finite and greater than 2"
                )));
            }
        }
        Ok(())
    }
}

/// One audit-trail entry; the full trace reconstructs every decision the
/// selection made.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    /// A term was removed: its p-value reached alpha, or the fit it came
    /// from was unusable.
    Drop { family: String, term: String, p_value: f64, note: Option<String> },
    /// A smooth term was reclassified as linear.
    Linearize { family: String, term: String, edf: f64 },
    /// A smooth basis was enlarged.
    Grow { family: String, term: String, from: usize, to: usize },
    /// Final score of an evaluated candidate family.
    Candidate { family: String, criterion: f64, edf: f64, converged: bool },
    /// A candidate family was set aside without a score.
    Skip { family: String, reason: String },
    /// No candidate produced a usable fit; independence was returned.
    Fallback { reason: String },
}

/// Output of the structure search for one fixed family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StructureSelection {
    pub formula: GamFormula,
    pub model: GamTauModel,
    pub trace: Vec<TraceEvent>,
}

/// Output of the full family selection for one edge.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeSelection {
    pub family: FamilySpec,
    pub formula: GamFormula,
    pub model: GamTauModel,
    pub trace: Vec<TraceEvent>,
}

/// Chooses which covariates enter the tau regression for a fixed family and
/// how.
///
/// Every covariate starts as a spline smooth with `initial_basis` knots
/// (clamped to the capacity caps; covariates that cannot carry at least
/// [`MIN_SMOOTH_BASIS`] knots start linear). Backward elimination then
/// alternates with refitting: terms whose Wald p-value reaches `alpha` are
/// dropped, smooths whose effective degrees of freedom fall at or below
/// `edf_linear_threshold` become linear terms, until a pass changes
/// nothing. Finally any smooth consuming more than `edf_growth_fraction` of
/// its basis has the basis doubled, subject to the caps, and the model is
/// refitted until no smooth wants to grow.
///
/// An intercept-only outcome is valid: it means no covariate survived.
pub fn select_gam_structure(
    family: &FamilySpec,
    u: &[f64],
    v: &[f64],
    data: &Covariates,
    candidates: &[String],
    cfg: &SelectionConfig,
) -> Result<StructureSelection> {
    cfg.validate()?;
    check_inputs(u, v, data, candidates)?;
    let mut trace = Vec::new();
    let (formula, model) = run_structure(family, u, v, data, candidates, cfg, &mut trace)?;
    Ok(StructureSelection { formula, model, trace })
}

/// Chooses the family and covariate structure for one edge jointly.
///
/// One-sign families whose orientation contradicts the empirical Kendall
/// tau are filtered first (when `sign_gate` is on). Each surviving family
/// gets a covariate structure, either its own or one shared from the first
/// usable family, and the candidate with the smallest information criterion
/// wins; ties go to fewer effective parameters, then to the
/// lexicographically smaller id. The Student t family is profiled over
/// `nu_grid` on its fixed structure. If no candidate yields a converged
/// fit, the independence copula is returned with a diagnostic in the trace.
pub fn select_family(
    u: &[f64],
    v: &[f64],
    data: &Covariates,
    candidates: &[String],
    cfg: &SelectionConfig,
) -> Result<EdgeSelection> {
    cfg.validate()?;
    check_inputs(u, v, data, candidates)?;
    let n = u.len();
    let tau_emp = kendall_tau(u, v);
    let mut trace = Vec::new();

    let mut gated: Vec<FamilySpec> = Vec::new();
    for fam in &cfg.candidate_families {
        if cfg.sign_gate && fam.is_archimedean() {
            let (lo, hi) = fam.tau_bounds();
            if lo >= 0.0 && tau_emp < -TAU_SIGN_GATE {
                trace.push(TraceEvent::Skip {
                    family: fam.id(),
                    reason: format!("empirical tau {tau_emp:.4} is below -{TAU_SIGN_GATE}"),
                });
                continue;
            }
            if hi <= 0.0 && tau_emp > TAU_SIGN_GATE {
                trace.push(TraceEvent::Skip {
                    family: fam.id(),
                    reason: format!("empirical tau {tau_emp:.4} is above {TAU_SIGN_GATE}"),
                });
                continue;
            }
        }
        gated.push(*fam);
    }

    // With shared structure, the first family that gets through the search
    // donates its formula (and its own fit comes along for free).
    let shared: Option<(String, GamFormula, GamTauModel)> = match cfg.structure_reuse {
        StructureReuse::PerFamily => None,
        StructureReuse::FirstFamilyOnly => {
            let mut found = None;
            for fam in gated.iter().filter(|f| f.kind() != FamilyKind::Indep) {
                match run_structure(fam, u, v, data, candidates, cfg, &mut trace) {
                    Ok((formula, model)) => {
                        found = Some((fam.id(), formula, model));
                        break;
                    }
                    Err(e) if e.kind() == ErrorKind::Validation => return Err(e),
                    Err(e) => trace.push(TraceEvent::Skip {
                        family: fam.id(),
                        reason: format!("structure selection failed: {e}"),
                    }),
                }
            }
            found
        }
    };

    let mut best: Option<Scored> = None;
    for fam in &gated {
        if fam.kind() == FamilyKind::Indep {
            let cand = independence_candidate(n);
            trace.push(TraceEvent::Candidate {
                family: cand.family.id(),
                criterion: cand.criterion,
                edf: cand.effective_edf,
                converged: true,
            });
            consider(&mut best, cand);
            continue;
        }
        match evaluate_candidate(fam, u, v, data, candidates, cfg, shared.as_ref(), &mut trace) {
            Ok(Some(cand)) => consider(&mut best, cand),
            Ok(None) => {}
            Err(e) if e.kind() == ErrorKind::Validation => return Err(e),
            Err(e) => {
                trace.push(TraceEvent::Skip { family: fam.id(), reason: e.to_string() })
            }
        }
    }

    let chosen = match best {
        Some(b) => b,
        None => {
            let reason = if gated.is_empty() {
                "every candidate family was filtered out".to_string()
            } else {
                "no candidate family produced a converged fit".to_string()
            };
            trace.push(TraceEvent::Fallback { reason });
            independence_candidate(n)
        }
    };
    Ok(EdgeSelection {
        family: chosen.family,
        formula: chosen.formula,
        model: chosen.model,
        trace,
    })
}

/// The degenerate fitted model the independence copula induces: no
/// coefficients, zero log likelihood, tau identically zero.
pub fn independence_model(n: usize) -> GamTauModel {
    GamTauModel::constant(FamilySpec::indep(), 0.0, n)
}

struct Scored {
    family: FamilySpec,
    formula: GamFormula,
    model: GamTauModel,
    criterion: f64,
    effective_edf: f64,
}

fn independence_candidate(n: usize) -> Scored {
    Scored {
        family: FamilySpec::indep(),
        formula: GamFormula::new(),
        model: independence_model(n),
        criterion: 0.0,
        effective_edf: 0.0,
    }
}

fn consider(best: &mut Option<Scored>, cand: Scored) {
    if best.as_ref().map_or(true, |b| prefers(&cand, b)) {
        *best = Some(cand);
    }
}

/// Strict preference of `a` over `b`: smaller criterion, with near-ties
/// resolved by fewer effective parameters and then by id.
fn prefers(a: &Scored, b: &Scored) -> bool {
    if a.criterion < b.criterion - CRIT_TIE {
        return true;
    }
    if a.criterion > b.criterion + CRIT_TIE {
        return false;
    }
    if a.effective_edf < b.effective_edf - CRIT_TIE {
        return true;
    }
    if a.effective_edf > b.effective_edf + CRIT_TIE {
        return false;
    }
    a.family.id() < b.family.id()
}

fn evaluate_candidate(
    fam: &FamilySpec,
    u: &[f64],
    v: &[f64],
    data: &Covariates,
    candidates: &[String],
    cfg: &SelectionConfig,
    shared: Option<&(String, GamFormula, GamTauModel)>,
    trace: &mut Vec<TraceEvent>,
) -> Result<Option<Scored>> {
    let (formula, base) = match shared {
        Some((sid, formula, model)) if *sid == fam.id() => {
            (formula.clone(), Some(model.clone()))
        }
        Some((_, formula, _)) => (formula.clone(), None),
        None => {
            let (formula, model) = run_structure(fam, u, v, data, candidates, cfg, trace)?;
            (formula, Some(model))
        }
    };

    if fam.kind() != FamilyKind::StudentT {
        let model = match base {
            Some(m) => m,
            None => fit_gam_tau(fam, u, v, data, &formula, &cfg.gam)?,
        };
        let criterion = cfg.criterion.of(&model);
        let effective_edf = model.edf;
        trace.push(TraceEvent::Candidate {
            family: fam.id(),
            criterion,
            edf: effective_edf,
            converged: model.converged,
        });
        if !model.converged {
            return Ok(None);
        }
        return Ok(Some(Scored { family: *fam, formula, model, criterion, effective_edf }));
    }

    // Student t: profile the degrees of freedom over the grid on the fixed
    // structure. A multi-valued grid makes nu an estimated quantity, charged
    // as one extra effective parameter.
    let extra = if cfg.nu_grid.len() > 1 { 1.0 } else { 0.0 };
    let surcharge = extra * cfg.criterion.per_parameter(u.len());
    let own_nu = fam.nu().expect("student t always carries nu");
    let mut best: Option<Scored> = None;
    for &nu in &cfg.nu_grid {
        let spec = fam.with_nu(nu)?;
        let model = match &base {
            Some(m) if nu == own_nu => m.clone(),
            _ => fit_gam_tau(&spec, u, v, data, &formula, &cfg.gam)?,
        };
        let criterion = cfg.criterion.of(&model) + surcharge;
        let effective_edf = model.edf + extra;
        trace.push(TraceEvent::Candidate {
            family: spec.id(),
            criterion,
            edf: effective_edf,
            converged: model.converged,
        });
        if model.converged {
            consider(
                &mut best,
                Scored { family: spec, formula: formula.clone(), model, criterion, effective_edf },
            );
        }
    }
    Ok(best)
}

fn check_inputs(u: &[f64], v: &[f64], data: &Covariates, candidates: &[String]) -> Result<()> {
    if u.len() != v.len() {
        return Err(CovineError::invalid(format!(
            "u has {} rows but v has {}",
            u.len(),
            v.len()
        )));
    }
    if u.len() < 2 {
        return Err(CovineError::invalid("selection needs at least 2 observations"));
    }
    for name in candidates {
        data.column(name)?;
    }
    Ok(())
}

/// Splits the candidates into initial linear terms and initial smooths with
/// their (possibly clamped) starting basis sizes.
fn initial_partition(
    n: usize,
    data: &Covariates,
    candidates: &[String],
    cfg: &SelectionConfig,
) -> Result<(Vec<String>, Vec<(String, usize)>)> {
    let mut linears = Vec::new();
    let mut smooths = Vec::new();
    for name in candidates {
        let unique = data.unique_count(name)?;
        let basis = cfg.initial_basis.min(basis_cap(n, unique, cfg));
        if basis >= MIN_SMOOTH_BASIS
            && place_knots(data.column(name)?, basis, cfg.knot_strategy).is_ok()
        {
            smooths.push((name.clone(), basis));
        } else {
            linears.push(name.clone());
        }
    }
    Ok((linears, smooths))
}

/// Largest admissible basis size for a covariate: at most the configured
/// fraction of the sample size, and strictly below the configured fraction
/// of the number of unique values.
fn basis_cap(n: usize, unique: usize, cfg: &SelectionConfig) -> usize {
    let by_n = (n as f64 * cfg.max_basis_fraction_n).floor() as usize;
    let bound = unique as f64 * cfg.max_basis_fraction_unique;
    let by_unique = if bound <= 1.0 {
        0
    } else if bound.fract() == 0.0 {
        bound as usize - 1
    } else {
        bound.floor() as usize
    };
    by_n.min(by_unique)
}

fn build_formula(
    linears: &[String],
    smooths: &[(String, usize)],
    cfg: &SelectionConfig,
) -> GamFormula {
    let mut formula = GamFormula::new();
    for name in linears {
        formula = formula.linear(name.clone());
    }
    for (name, basis) in smooths {
        formula = formula.smooth(name.clone(), *basis, cfg.knot_strategy);
    }
    formula
}

/// Wald p-value of a term, degraded to 1 when it cannot be trusted.
fn usable_p(model: &GamTauModel, name: &str) -> f64 {
    if !model.converged {
        return 1.0;
    }
    match model.term_test(name) {
        Some(test) if test.p_value.is_finite() => test.p_value,
        _ => 1.0,
    }
}

fn run_structure(
    family: &FamilySpec,
    u: &[f64],
    v: &[f64],
    data: &Covariates,
    candidates: &[String],
    cfg: &SelectionConfig,
    trace: &mut Vec<TraceEvent>,
) -> Result<(GamFormula, GamTauModel)> {
    let n = u.len();
    let fid = family.id();
    let (mut linears, mut smooths) = initial_partition(n, data, candidates, cfg)?;

    // Elimination and growth are iterated to a joint fixed point: enlarging
    // a basis refits the model and can push a marginal term past alpha, so
    // after any growth the eliminations are re-checked. Terms only ever get
    // dropped or demoted and bases only ever grow toward hard caps, so the
    // loop terminates.
    let mut cached: Option<(GamFormula, GamTauModel)> = None;
    let (formula, model) = loop {
        // Backward elimination: drop weak terms, demote near-linear
        // smooths, refit, until a pass leaves the model unchanged.
        let (formula, model) = match cached.take() {
            Some(pair) => pair,
            None => {
                let formula = build_formula(&linears, &smooths, cfg);
                let model = fit_gam_tau(family, u, v, data, &formula, &cfg.gam)?;
                (formula, model)
            }
        };
        let note = (!model.converged).then(|| "fit did not converge".to_string());
        let mut changed = false;

        let mut kept_smooths = Vec::with_capacity(smooths.len());
        let mut demoted = Vec::new();
        for (name, basis) in &smooths {
            let p = usable_p(&model, name);
            if p >= cfg.alpha {
                trace.push(TraceEvent::Drop {
                    family: fid.clone(),
                    term: name.clone(),
                    p_value: p,
                    note: note.clone(),
                });
                changed = true;
            } else {
                let edf = model.edf_of(name).unwrap_or(1.0);
                if edf <= cfg.edf_linear_threshold {
                    trace.push(TraceEvent::Linearize {
                        family: fid.clone(),
                        term: name.clone(),
                        edf,
                    });
                    demoted.push(name.clone());
                    changed = true;
                } else {
                    kept_smooths.push((name.clone(), *basis));
                }
            }
        }

        let mut kept_linears = Vec::with_capacity(linears.len());
        for name in &linears {
            let p = usable_p(&model, name);
            if p >= cfg.alpha {
                trace.push(TraceEvent::Drop {
                    family: fid.clone(),
                    term: name.clone(),
                    p_value: p,
                    note: note.clone(),
                });
                changed = true;
            } else {
                kept_linears.push(name.clone());
            }
        }
        kept_linears.extend(demoted);

        linears = kept_linears;
        smooths = kept_smooths;
        if changed {
            continue;
        }

        // Capacity growth: a smooth consuming most of its basis gets a
        // doubled basis, within the caps, until every smooth has headroom.
        let mut formula = formula;
        let mut model = model;
        let mut grew_any = false;
        loop {
            let mut grew = false;
            for (name, basis) in smooths.iter_mut() {
                let edf = model.edf_of(name).unwrap_or(0.0);
                if edf <= cfg.edf_growth_fraction * (*basis as f64) {
                    continue;
                }
                let unique = data.unique_count(name)?;
                let cap = basis_cap(n, unique, cfg);
                let doubled = basis.saturating_mul(2);
                let target = if cfg.literal_growth_rule {
                    // All-or-nothing doubling: no partial growth to the cap.
                    if doubled <= cap {
                        doubled
                    } else {
                        *basis
                    }
                } else {
                    doubled.min(cap)
                };
                if target > *basis
                    && place_knots(data.column(name)?, target, cfg.knot_strategy).is_ok()
                {
                    trace.push(TraceEvent::Grow {
                        family: fid.clone(),
                        term: name.clone(),
                        from: *basis,
                        to: target,
                    });
                    *basis = target;
                    grew = true;
                }
            }
            if !grew {
                break;
            }
            grew_any = true;
            formula = build_formula(&linears, &smooths, cfg);
            model = fit_gam_tau(family, u, v, data, &formula, &cfg.gam)?;
        }

        if !grew_any {
            break (formula, model);
        }
        // The grown fit must survive elimination before it is final.
        cached = Some((formula, model));
    };

    Ok((formula, model))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SelectionConfig {
        SelectionConfig::default()
    }

    #[test]
    fn basis_caps_respect_both_bounds() {
        // Sample-size bound: floor of n/30.
        assert_eq!(basis_cap(300, 10_000, &cfg()), 10);
        assert_eq!(basis_cap(500, 10_000, &cfg()), 16);
        assert_eq!(basis_cap(5000, 10_000, &cfg()), 166);
        // Unique-value bound is strict: 20 unique values admit at most 9.
        assert_eq!(basis_cap(10_000, 20, &cfg()), 9);
        assert_eq!(basis_cap(10_000, 21, &cfg()), 10);
        assert_eq!(basis_cap(10_000, 2, &cfg()), 0);
        // The tighter bound wins.
        assert_eq!(basis_cap(240, 21, &cfg()), 8);
    }

    #[test]
    fn config_validation_rejects_bad_fields() {
        let mut c = cfg();
        c.alpha = 0.0;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.candidate_families.clear();
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.nu_grid = vec![2.0];
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.initial_basis = 2;
        assert!(c.validate().is_err());
        assert!(cfg().validate().is_ok());
    }

    #[test]
    fn initial_partition_clamps_and_demotes() {
        let n = 600;
        let bern: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let coarse: Vec<f64> = (0..n).map(|i| (i % 12) as f64).collect();
        let smooth: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let data = Covariates::new(vec![
            ("z", bern),
            ("c", coarse),
            ("t", smooth),
        ])
        .unwrap();
        let names: Vec<String> = ["z", "c", "t"].iter().map(|s| s.to_string()).collect();
        let (linears, smooths) = initial_partition(n, &data, &names, &cfg()).unwrap();
        // Two unique values cannot carry a spline; twelve support a clamped
        // basis of five; a continuous covariate keeps the full ten.
        assert_eq!(linears, vec!["z".to_string()]);
        assert_eq!(smooths, vec![("c".to_string(), 5), ("t".to_string(), 10)]);
    }

    #[test]
    fn tie_breaking_prefers_fewer_parameters_then_id() {
        let mk = |id: FamilySpec, criterion: f64, edf: f64| Scored {
            family: id,
            formula: GamFormula::new(),
            model: independence_model(10),
            criterion,
            effective_edf: edf,
        };
        let gauss = FamilySpec::gaussian();
        let gumbel = FamilySpec::gumbel(Rotation::R0);
        // Lower criterion wins outright.
        assert!(prefers(&mk(gumbel, 1.0, 5.0), &mk(gauss, 2.0, 1.0)));
        // Tie on criterion: fewer effective parameters win.
        assert!(prefers(&mk(gumbel, 1.0, 2.0), &mk(gauss, 1.0, 3.0)));
        // Tie on both: lexicographically smaller id wins.
        assert!(prefers(&mk(gauss, 1.0, 2.0), &mk(gumbel, 1.0, 2.0)));
        assert!(!prefers(&mk(gumbel, 1.0, 2.0), &mk(gauss, 1.0, 2.0)));
    }

    #[test]
    fn independence_model_is_flat_and_free() {
        let model = independence_model(25);
        let data = Covariates::new(vec![("x", vec![0.3, -1.2, 4.5])]).unwrap();
        let tau = model.predict_tau(&data).unwrap();
        assert_eq!(tau, vec![0.0, 0.0, 0.0]);
        let bands = model.predict_tau_with_bands(&data, 0.9).unwrap();
        for (mid, lo, hi) in bands {
            assert_eq!((mid, lo, hi), (0.0, 0.0, 0.0));
        }
        assert_eq!(model.aic, 0.0);
        assert_eq!(model.edf, 0.0);
        assert!(model.converged);
    }
}
