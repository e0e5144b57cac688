//! Five-dimensional benchmark experiment: draws samples from a known
//! GAM-vine, refits them with an oracle and/or a fully automatic selection
//! estimator, and aggregates accuracy summaries across replicates.
//!
//! The scenario is fixed: a five-variable vine over ten pair copulas whose
//! Kendall's tau follows the same partially linear predictor on every edge,
//! built from fifteen covariates (five Bernoulli, five standard normal, five
//! uniform). Families are drawn per edge from a four-family pool, with the
//! one-sign families in their sign-switching extended form so that tau may
//! change sign across observations. Scale (sample size, replicate count) and
//! the estimator roster are configurable.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Covariates;
use crate::error::{CovineError, Result};
use crate::families::{FamilyKind, FamilySpec};
use crate::gam::{FittedSmooth, GamFormula, GamTauModel};
use crate::select::{Criterion, SelectionConfig};
use crate::spline::{KnotSequence, KnotStrategy, SplineBasis};
use crate::stats::norm_quantile;
use crate::vine::{
    fit_sequential, EdgeModel, RawEdge, VineFitConfig, VineFitMode, VineModel, VineStructure,
};

/// Linear coefficients of the true tau predictor, applied to z1..z10.
pub const TRUE_BETA: [f64; 10] = [0.25, 0.25, -0.25, 0.0, 0.0, 0.25, -0.25, -0.25, 0.0, 0.0];

/// Knot count of the cubic spline basis carrying the true smooth effects.
const TRUTH_BASIS: usize = 10;

/// Evaluation grid resolution for function-recovery curves.
const CURVE_GRID: usize = 101;

/// Analytic smooth effects of t1..t5 before their spline representation:
/// a linear trend, one slow and one fast sine wave, and two null effects.
pub fn smooth_truth(k: usize, t: f64) -> f64 {
    match k {
        1 => -0.25 + 0.5 * t,
        2 => (2.0 * PI * t).sin() / 4.0,
        3 => (6.0 * PI * t).sin() / 4.0,
        4 | 5 => 0.0,
        _ => panic!("smooth index {k} must be between 1 and 5"),
    }
}

/// Which estimators a study run should exercise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorChoice {
    Oracle,
    Selection,
    Both,
}

impl EstimatorChoice {
    pub fn wants_oracle(self) -> bool {
        matches!(self, EstimatorChoice::Oracle | EstimatorChoice::Both)
    }

    pub fn wants_selection(self) -> bool {
        matches!(self, EstimatorChoice::Selection | EstimatorChoice::Both)
    }
}

/// Scale and estimator configuration for one study run. The data-generating
/// process itself (structure, coefficients, smooth shapes, family pool) is
/// fixed; only sample size, replicate count, seeding, estimator roster,
/// ranking criterion, and fit depth vary.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub estimator: EstimatorChoice,
    pub criterion: Criterion,
    /// Fit only the first `q` trees of each replicate; deeper edges become
    /// independence and are excluded from the summary tables.
    pub truncation: Option<usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n: 500,
            replications: 50,
            seed: 42,
            estimator: EstimatorChoice::Both,
            criterion: Criterion::Aic,
            truncation: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        // The oracle design has 34 coefficients; anything close to that is
        // unidentifiable and anything below 100 is not worth summarizing.
        if self.n < 100 {
            return Err(CovineError::invalid(format!(
                "sample size {} is too small for the benchmark fits (need at least 100)",
                self.n
            )));
        }
        if self.replications == 0 {
            return Err(CovineError::invalid("replication count must be positive"));
        }
        if let Some(q) = self.truncation {
            if q == 0 {
                return Err(CovineError::invalid("truncation level must be at least 1"));
            }
        }
        Ok(())
    }
}

/// The fixed five-variable tree sequence used by every replicate.
pub fn scenario_structure() -> VineStructure {
    let raw = vec![
        vec![
            RawEdge::new(1, 2, &[]),
            RawEdge::new(1, 3, &[]),
            RawEdge::new(3, 4, &[]),
            RawEdge::new(3, 5, &[]),
        ],
        vec![
            RawEdge::new(2, 3, &[1]),
            RawEdge::new(1, 4, &[3]),
            RawEdge::new(1, 5, &[3]),
        ],
        vec![RawEdge::new(2, 4, &[1, 3]), RawEdge::new(4, 5, &[1, 3])],
        vec![RawEdge::new(2, 5, &[1, 3, 4])],
    ];
    crate::vine::validate_structure(&raw).expect("the benchmark tree sequence is valid")
}

/// Covariate column names in generation order.
pub fn covariate_names() -> Vec<String> {
    let mut names: Vec<String> = (1..=10).map(|j| format!("z{j}")).collect();
    names.extend((1..=5).map(|k| format!("t{k}")));
    names
}

fn truth_knots() -> KnotSequence {
    let knots: Vec<f64> = (0..TRUTH_BASIS)
        .map(|j| j as f64 / (TRUTH_BASIS - 1) as f64)
        .collect();
    KnotSequence::from_knots(knots).expect("equidistant unit-interval knots are valid")
}

/// The true smooth effects as the model sees them: natural cubic splines
/// through the analytic functions at the truth knots. The linear effect is
/// reproduced exactly; the sines are carried by their interpolants, which is
/// what makes consistent estimation possible in the first place.
fn truth_smooth_coefs(k: usize) -> Vec<f64> {
    truth_knots().knots().iter().map(|&t| smooth_truth(k, t)).collect()
}

/// True tau model of one edge as a regular fitted-model object, so the
/// standard prediction and simulation paths apply unchanged. Uncertainty
/// fields are zeroed: the truth has no sampling error.
fn truth_edge_model(family: FamilySpec, n: usize) -> GamTauModel {
    let mut formula = GamFormula::new();
    for j in 1..=10 {
        formula = formula.linear(format!("z{j}"));
    }
    let mut smooths = Vec::with_capacity(3);
    for k in 1..=3 {
        let name = format!("t{k}");
        formula = formula.smooth(&name, TRUTH_BASIS, KnotStrategy::Equidistant);
        smooths.push(FittedSmooth {
            name,
            knots: truth_knots(),
            coefs: truth_smooth_coefs(k),
            z: DMatrix::zeros(TRUTH_BASIS, 0),
            gamma: 0.0,
            edf: 0.0,
            offset: 0,
        });
    }
    GamTauModel {
        family,
        formula,
        intercept: 0.0,
        linear: (1..=10).map(|j| (format!("z{j}"), TRUE_BETA[j - 1])).collect(),
        smooths,
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

fn family_pool() -> Vec<FamilySpec> {
    vec![
        FamilySpec::gaussian(),
        FamilySpec::student_t(4.0).expect("4 > 2"),
        FamilySpec::extended(FamilyKind::Clayton).expect("clayton extends"),
        FamilySpec::extended(FamilyKind::Gumbel).expect("gumbel extends"),
    ]
}

/// One generated dataset: the true vine it came from, the covariate frame,
/// and the sample in row-major layout (one row per observation).
pub struct Replicate {
    pub truth: VineModel,
    pub data: Covariates,
    pub u: Vec<Vec<f64>>,
}

/// Draws covariates, edge families, and a sample for replicate `rep`.
/// Deterministic per `(cfg.seed, rep)`: the family draws use an RNG stream
/// separate from the sample path, so studies that differ only in estimator
/// roster see identical data.
pub fn generate_replicate(cfg: &ScenarioConfig, rep: usize) -> Result<Replicate> {
    cfg.validate()?;
    let n = cfg.n;
    let mut path_rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    path_rng.set_stream(2 * rep as u64 + 1);
    let mut fam_rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    fam_rng.set_stream(2 * rep as u64 + 2);

    let structure = scenario_structure();
    let pool = family_pool();
    let edges: Vec<Vec<EdgeModel>> = structure
        .to_raw()
        .iter()
        .map(|tree| {
            tree.iter()
                .map(|e| EdgeModel {
                    conditioned: e.pair,
                    conditioning: e.given.clone(),
                    model: truth_edge_model(pool[fam_rng.gen_range(0..pool.len())], n),
                    trace: None,
                })
                .collect()
        })
        .collect();
    let truth = VineModel {
        schema_version: 1,
        structure,
        covariates: covariate_names(),
        edges,
    };

    let mut columns: Vec<(String, Vec<f64>)> = Vec::with_capacity(15);
    let names = covariate_names();
    for (j, name) in names.into_iter().enumerate() {
        let col: Vec<f64> = match j {
            0..=4 => (0..n)
                .map(|_| if path_rng.gen::<f64>() < 0.5 { 1.0 } else { 0.0 })
                .collect(),
            5..=9 => (0..n)
                .map(|_| norm_quantile(path_rng.gen::<f64>().clamp(1e-12, 1.0 - 1e-12)))
                .collect(),
            _ => (0..n).map(|_| path_rng.gen::<f64>()).collect(),
        };
        columns.push((name, col));
    }
    let data = Covariates::new(columns)?;
    let u = truth.simulate(&data, &mut path_rng)?;
    Ok(Replicate { truth, data, u })
}

/// Covariate specification handed to the oracle: exactly the active terms,
/// with the smooth basis the truth lives in.
fn oracle_formula() -> GamFormula {
    let mut f = GamFormula::new();
    for j in [1, 2, 3, 6, 7, 8] {
        f = f.linear(format!("z{j}"));
    }
    for k in 1..=3 {
        f = f.smooth(format!("t{k}"), TRUTH_BASIS, KnotStrategy::Equidistant);
    }
    f
}

fn study_selection_config(cfg: &ScenarioConfig) -> SelectionConfig {
    SelectionConfig {
        criterion: cfg.criterion,
        candidate_families: vec![
            FamilySpec::indep(),
            FamilySpec::gaussian(),
            FamilySpec::student_t(4.0).expect("4 > 2"),
            FamilySpec::extended(FamilyKind::Clayton).expect("clayton extends"),
            FamilySpec::extended(FamilyKind::Gumbel).expect("gumbel extends"),
        ],
        knot_strategy: KnotStrategy::Equidistant,
        ..SelectionConfig::default()
    }
}

/// Everything retained from one fitted edge for aggregation.
struct EdgeRecord {
    tree: usize,
    true_kind: FamilyKind,
    fitted_kind: FamilyKind,
    beta: [f64; 10],
    z_included: [bool; 10],
    t_included: [bool; 5],
    t_linear: [bool; 5],
    /// Centered contribution of each t-covariate on the curve grid.
    curves: [Vec<f64>; 5],
}

struct FitRecord {
    seconds: f64,
    edges: Vec<EdgeRecord>,
}

struct ReplicateOutcome {
    oracle: Option<FitRecord>,
    selection: Option<FitRecord>,
}

fn curve_grid() -> Vec<f64> {
    (0..CURVE_GRID).map(|i| i as f64 / (CURVE_GRID - 1) as f64).collect()
}

fn center(mut values: Vec<f64>) -> Vec<f64> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    for v in &mut values {
        *v -= mean;
    }
    values
}

/// Centered contribution of covariate `name` on the grid: the fitted smooth
/// when one is present, the centered linear trend when the term was kept as
/// linear, and zero when it was dropped.
fn term_curve(model: &GamTauModel, name: &str, grid: &[f64]) -> Vec<f64> {
    if model.smooths.iter().any(|s| s.name == name) {
        let values = model
            .smooth_contribution(name, grid)
            .expect("smooth term present")
            .into_iter()
            .map(|(v, _)| v)
            .collect();
        return center(values);
    }
    if let Some((_, coef)) = model.linear.iter().find(|(n, _)| n == name) {
        return center(grid.iter().map(|&t| coef * t).collect());
    }
    vec![0.0; grid.len()]
}

fn summarize_fit(truth: &VineModel, fitted: &VineModel, seconds: f64, grid: &[f64]) -> FitRecord {
    let mut edges = Vec::new();
    for (m, (true_tree, fit_tree)) in truth.edges.iter().zip(&fitted.edges).enumerate() {
        for (true_edge, fit_edge) in true_tree.iter().zip(fit_tree) {
            let model = &fit_edge.model;
            let mut beta = [0.0; 10];
            let mut z_included = [false; 10];
            for (j, b) in beta.iter_mut().enumerate() {
                let name = format!("z{}", j + 1);
                if let Some((_, coef)) = model.linear.iter().find(|(n, _)| *n == name) {
                    *b = *coef;
                    z_included[j] = true;
                } else if model.smooths.iter().any(|s| s.name == name) {
                    z_included[j] = true;
                }
            }
            let mut t_included = [false; 5];
            let mut t_linear = [false; 5];
            let mut curves: [Vec<f64>; 5] = Default::default();
            for k in 0..5 {
                let name = format!("t{}", k + 1);
                let linear = model.linear.iter().any(|(n, _)| *n == name);
                let smooth = model.smooths.iter().any(|s| s.name == name);
                t_included[k] = linear || smooth;
                t_linear[k] = linear;
                curves[k] = term_curve(model, &name, grid);
            }
            edges.push(EdgeRecord {
                tree: m + 1,
                true_kind: true_edge.model.family.kind(),
                fitted_kind: model.family.kind(),
                beta,
                z_included,
                t_included,
                t_linear,
                curves,
            });
        }
    }
    FitRecord { seconds, edges }
}

fn run_replicate(cfg: &ScenarioConfig, rep: usize) -> Result<ReplicateOutcome> {
    let replicate = generate_replicate(cfg, rep)?;
    let n = cfg.n;
    let d = replicate.truth.structure.dim();
    let mut u_cols = vec![vec![0.0; n]; d];
    for (r, row) in replicate.u.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            u_cols[j][r] = x;
        }
    }
    let grid = curve_grid();
    let structure = &replicate.truth.structure;

    let oracle = if cfg.estimator.wants_oracle() {
        let plan: Vec<Vec<(FamilySpec, GamFormula)>> = replicate
            .truth
            .edges
            .iter()
            .map(|tree| tree.iter().map(|e| (e.model.family, oracle_formula())).collect())
            .collect();
        let fit_cfg = VineFitConfig {
            selection: SelectionConfig::default(),
            truncation: cfg.truncation,
            mode: VineFitMode::Fixed(plan),
        };
        let started = Instant::now();
        let fitted = fit_sequential(&u_cols, &replicate.data, structure, &fit_cfg)?;
        let seconds = started.elapsed().as_secs_f64();
        Some(summarize_fit(&replicate.truth, &fitted, seconds, &grid))
    } else {
        None
    };

    let selection = if cfg.estimator.wants_selection() {
        let fit_cfg = VineFitConfig {
            selection: study_selection_config(cfg),
            truncation: cfg.truncation,
            mode: VineFitMode::Select,
        };
        let started = Instant::now();
        let fitted = fit_sequential(&u_cols, &replicate.data, structure, &fit_cfg)?;
        let seconds = started.elapsed().as_secs_f64();
        Some(summarize_fit(&replicate.truth, &fitted, seconds, &grid))
    } else {
        None
    };

    Ok(ReplicateOutcome { oracle, selection })
}

/// A percentage with its binomial standard error and the number of
/// decisions it aggregates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateStat {
    pub percent: f64,
    pub se: f64,
    pub count: usize,
}

impl RateStat {
    fn from_counts(hits: usize, total: usize) -> RateStat {
        if total == 0 {
            return RateStat { percent: f64::NAN, se: f64::NAN, count: 0 };
        }
        let p = hits as f64 / total as f64;
        RateStat {
            percent: 100.0 * p,
            se: 100.0 * (p * (1.0 - p) / total as f64).sqrt(),
            count: total,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TreeFamilyStat {
    pub tree: usize,
    pub accuracy: RateStat,
}

/// Selected-versus-true family percentages for one tree level; cells sum
/// to 100 over the whole table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub tree: usize,
    pub true_labels: Vec<String>,
    pub selected_labels: Vec<String>,
    pub percent: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CovariateChoiceStat {
    pub tree: usize,
    pub linear: RateStat,
    pub smooth: RateStat,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct T1LinearStat {
    pub tree: usize,
    pub rate: RateStat,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoefStat {
    pub estimator: String,
    pub tree: usize,
    pub coefficient: String,
    pub truth: f64,
    pub mean: f64,
    pub mean_abs: f64,
    pub q05: f64,
    pub q95: f64,
    pub rmse: f64,
    pub rmse_se: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveStat {
    pub estimator: String,
    pub tree: usize,
    pub smooth: String,
    pub t: f64,
    pub truth: f64,
    pub mean: f64,
    pub q05: f64,
    pub q95: f64,
}

/// Aggregated study results plus enough context to interpret them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: ScenarioConfig,
    pub replications_done: usize,
    pub failures: usize,
    pub failure_messages: Vec<String>,
    /// How often the selection estimator recovered the true family, per tree.
    pub family_accuracy: Vec<TreeFamilyStat>,
    /// Selected-versus-true family tables for the first and deepest fitted
    /// tree (selection estimator).
    pub contingency: Vec<ContingencyTable>,
    /// How often covariates were correctly kept or dropped, split by the
    /// component they belong to (selection estimator).
    pub covariate_choice: Vec<CovariateChoiceStat>,
    /// How often t1, whose true effect is a straight line, was classified
    /// as a linear term.
    pub t1_linear: Vec<T1LinearStat>,
    pub coefficients: Vec<CoefStat>,
    pub curves: Vec<CurveStat>,
    /// Mean wall-clock seconds per whole-vine fit, per estimator.
    pub seconds_per_fit: Vec<(String, f64)>,
}

fn kind_label(kind: FamilyKind) -> &'static str {
    match kind {
        FamilyKind::Indep => "indep",
        FamilyKind::Gaussian => "gaussian",
        FamilyKind::StudentT => "t",
        FamilyKind::Clayton => "clayton",
        FamilyKind::Gumbel => "gumbel",
    }
}

/// Type-7 quantile of a sorted sample.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Runs the full study: replicates in parallel (each on its own RNG
/// streams), aggregation single-threaded in replicate order. Individual
/// replicate failures are recorded in the report instead of aborting.
pub fn run_study(cfg: &ScenarioConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let outcomes: Vec<Result<ReplicateOutcome>> =
        (0..cfg.replications).into_par_iter().map(|rep| run_replicate(cfg, rep)).collect();

    let mut failures = 0;
    let mut failure_messages = Vec::new();
    let mut done = Vec::new();
    for (rep, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(o) => done.push(o),
            Err(e) => {
                failures += 1;
                if failure_messages.len() < 10 {
                    failure_messages.push(format!("replicate {rep}: {e}"));
                }
            }
        }
    }

    let structure = scenario_structure();
    let tree_count = structure.tree_count();
    let fitted_trees = cfg.truncation.map_or(tree_count, |q| q.min(tree_count));
    let grid = curve_grid();
    let truth_curves: Vec<Vec<f64>> =
        (1..=5).map(|k| center(grid.iter().map(|&t| truth_smooth_value(k, t)).collect())).collect();

    // Family and covariate accounting, selection estimator only.
    let selection_records: Vec<&FitRecord> =
        done.iter().filter_map(|o| o.selection.as_ref()).collect();
    let mut family_accuracy = Vec::new();
    let mut covariate_choice = Vec::new();
    let mut t1_linear = Vec::new();
    for m in 1..=fitted_trees {
        let mut fam_hits = 0;
        let mut fam_total = 0;
        let mut lin_hits = 0;
        let mut lin_total = 0;
        let mut smo_hits = 0;
        let mut smo_total = 0;
        let mut t1_hits = 0;
        for rec in &selection_records {
            for edge in rec.edges.iter().filter(|e| e.tree == m) {
                fam_total += 1;
                if edge.fitted_kind == edge.true_kind {
                    fam_hits += 1;
                }
                for (included, truth) in edge.z_included.iter().zip(&TRUE_BETA) {
                    lin_total += 1;
                    if *included == (*truth != 0.0) {
                        lin_hits += 1;
                    }
                }
                for k in 0..5 {
                    smo_total += 1;
                    if edge.t_included[k] == (k < 3) {
                        smo_hits += 1;
                    }
                }
                if edge.t_included[0] && edge.t_linear[0] {
                    t1_hits += 1;
                }
            }
        }
        family_accuracy
            .push(TreeFamilyStat { tree: m, accuracy: RateStat::from_counts(fam_hits, fam_total) });
        covariate_choice.push(CovariateChoiceStat {
            tree: m,
            linear: RateStat::from_counts(lin_hits, lin_total),
            smooth: RateStat::from_counts(smo_hits, smo_total),
        });
        t1_linear.push(T1LinearStat { tree: m, rate: RateStat::from_counts(t1_hits, fam_total) });
    }

    let true_kinds =
        [FamilyKind::Gaussian, FamilyKind::StudentT, FamilyKind::Clayton, FamilyKind::Gumbel];
    let selected_kinds = [
        FamilyKind::Gaussian,
        FamilyKind::StudentT,
        FamilyKind::Clayton,
        FamilyKind::Gumbel,
        FamilyKind::Indep,
    ];
    let mut contingency = Vec::new();
    let mut contingency_trees = vec![1];
    if fitted_trees > 1 {
        contingency_trees.push(fitted_trees);
    }
    for &m in &contingency_trees {
        let mut counts = vec![vec![0usize; true_kinds.len()]; selected_kinds.len()];
        let mut total = 0usize;
        for rec in &selection_records {
            for edge in rec.edges.iter().filter(|e| e.tree == m) {
                let row = selected_kinds.iter().position(|&k| k == edge.fitted_kind);
                let col = true_kinds.iter().position(|&k| k == edge.true_kind);
                if let (Some(r), Some(c)) = (row, col) {
                    counts[r][c] += 1;
                    total += 1;
                }
            }
        }
        let percent = counts
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&c| if total == 0 { f64::NAN } else { 100.0 * c as f64 / total as f64 })
                    .collect()
            })
            .collect();
        contingency.push(ContingencyTable {
            tree: m,
            true_labels: true_kinds.iter().map(|&k| kind_label(k).to_string()).collect(),
            selected_labels: selected_kinds.iter().map(|&k| kind_label(k).to_string()).collect(),
            percent,
        });
    }

    // Coefficient and curve accuracy for every estimator that ran.
    let mut coefficients = Vec::new();
    let mut curves = Vec::new();
    type Picker = fn(&ReplicateOutcome) -> Option<&FitRecord>;
    fn pick_oracle(o: &ReplicateOutcome) -> Option<&FitRecord> {
        o.oracle.as_ref()
    }
    fn pick_selection(o: &ReplicateOutcome) -> Option<&FitRecord> {
        o.selection.as_ref()
    }
    let estimators: [(&str, Picker); 2] = [("oracle", pick_oracle), ("selection", pick_selection)];
    for (label, pick) in &estimators {
        let records: Vec<&FitRecord> = done.iter().filter_map(pick).collect();
        if records.is_empty() {
            continue;
        }
        for m in 1..=fitted_trees {
            for (j, &truth) in TRUE_BETA.iter().enumerate() {
                let mut values: Vec<f64> = Vec::new();
                for rec in &records {
                    for edge in rec.edges.iter().filter(|e| e.tree == m) {
                        values.push(edge.beta[j]);
                    }
                }
                if values.is_empty() {
                    continue;
                }
                let n_vals = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n_vals;
                let mean_abs = values.iter().map(|v| v.abs()).sum::<f64>() / n_vals;
                let sq_errs: Vec<f64> = values.iter().map(|v| (v - truth) * (v - truth)).collect();
                let mse = sq_errs.iter().sum::<f64>() / n_vals;
                let rmse = mse.sqrt();
                let mse_var =
                    sq_errs.iter().map(|e| (e - mse) * (e - mse)).sum::<f64>() / n_vals.max(2.0);
                let rmse_se =
                    if rmse > 0.0 { (mse_var / n_vals).sqrt() / (2.0 * rmse) } else { 0.0 };
                let mut sorted = values;
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                coefficients.push(CoefStat {
                    estimator: label.to_string(),
                    tree: m,
                    coefficient: format!("beta{}", j + 1),
                    truth,
                    mean,
                    mean_abs,
                    q05: quantile(&sorted, 0.05),
                    q95: quantile(&sorted, 0.95),
                    rmse,
                    rmse_se,
                });
            }
            for k in 0..5 {
                let mut instances: Vec<&Vec<f64>> = Vec::new();
                for rec in &records {
                    for edge in rec.edges.iter().filter(|e| e.tree == m) {
                        instances.push(&edge.curves[k]);
                    }
                }
                if instances.is_empty() {
                    continue;
                }
                for (i, &t) in grid.iter().enumerate() {
                    let mut point: Vec<f64> = instances.iter().map(|c| c[i]).collect();
                    point.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let mean = point.iter().sum::<f64>() / point.len() as f64;
                    curves.push(CurveStat {
                        estimator: label.to_string(),
                        tree: m,
                        smooth: format!("t{}", k + 1),
                        t,
                        truth: truth_curves[k][i],
                        mean,
                        q05: quantile(&point, 0.05),
                        q95: quantile(&point, 0.95),
                    });
                }
            }
        }
    }

    let mut seconds_per_fit = Vec::new();
    for (label, pick) in &estimators {
        let times: Vec<f64> = done.iter().filter_map(|o| pick(o).map(|r| r.seconds)).collect();
        if !times.is_empty() {
            seconds_per_fit
                .push((label.to_string(), times.iter().sum::<f64>() / times.len() as f64));
        }
    }

    Ok(StudyReport {
        config: cfg.clone(),
        replications_done: done.len(),
        failures,
        failure_messages,
        family_accuracy,
        contingency,
        covariate_choice,
        t1_linear,
        coefficients,
        curves,
        seconds_per_fit,
    })
}

/// True centered smooth effect on the curve grid, evaluated through the same
/// spline representation the generator uses.
fn truth_smooth_value(k: usize, t: f64) -> f64 {
    if k > 3 {
        return 0.0;
    }
    let basis = SplineBasis::new(truth_knots()).expect("truth knots are valid");
    let coefs = nalgebra::DVector::from_vec(truth_smooth_coefs(k));
    basis.eval_row(t).dot(&coefs)
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

impl StudyReport {
    /// Renders the summary tables as `(file name, contents)` pairs. The
    /// output is byte-identical across runs with the same configuration;
    /// timing lives only in the JSON report.
    pub fn render_csvs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();

        let mut t1 = String::from("tree,selected_true_pct,se_pct,count\n");
        for row in &self.family_accuracy {
            t1.push_str(&format!(
                "{},{},{},{}\n",
                row.tree,
                fmt(row.accuracy.percent),
                fmt(row.accuracy.se),
                row.accuracy.count
            ));
        }
        out.push(("table1.csv".to_string(), t1));

        for (idx, table) in self.contingency.iter().take(2).enumerate() {
            let mut s = format!("selected\\true,{},row_total\n", table.true_labels.join(","));
            for (r, label) in table.selected_labels.iter().enumerate() {
                let row = &table.percent[r];
                let total: f64 = row.iter().sum();
                s.push_str(label);
                for cell in row {
                    s.push(',');
                    s.push_str(&fmt(*cell));
                }
                s.push(',');
                s.push_str(&fmt(total));
                s.push('\n');
            }
            s.push_str("col_total");
            for c in 0..table.true_labels.len() {
                let total: f64 = table.percent.iter().map(|row| row[c]).sum();
                s.push(',');
                s.push_str(&fmt(total));
            }
            s.push(',');
            s.push_str(&fmt(table.percent.iter().flatten().sum::<f64>()));
            s.push('\n');
            out.push((format!("table{}.csv", idx + 2), s));
        }

        let mut t4 = String::from("tree,linear_correct_pct,linear_se,smooth_correct_pct,smooth_se\n");
        for row in &self.covariate_choice {
            t4.push_str(&format!(
                "{},{},{},{},{}\n",
                row.tree,
                fmt(row.linear.percent),
                fmt(row.linear.se),
                fmt(row.smooth.percent),
                fmt(row.smooth.se)
            ));
        }
        out.push(("table4.csv".to_string(), t4));

        let mut t5 = String::from("tree,t1_linear_pct,se_pct\n");
        for row in &self.t1_linear {
            t5.push_str(&format!("{},{},{}\n", row.tree, fmt(row.rate.percent), fmt(row.rate.se)));
        }
        out.push(("table5.csv".to_string(), t5));

        let mut coefs = String::from(
            "estimator,tree,coefficient,truth,mean,mean_abs,q05,q95,rmse,rmse_se\n",
        );
        for row in &self.coefficients {
            coefs.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                row.estimator,
                row.tree,
                row.coefficient,
                fmt(row.truth),
                fmt(row.mean),
                fmt(row.mean_abs),
                fmt(row.q05),
                fmt(row.q95),
                fmt(row.rmse),
                fmt(row.rmse_se)
            ));
        }
        out.push(("coefs.csv".to_string(), coefs));

        let mut curves = String::from("estimator,tree,smooth,t,truth,mean,q05,q95\n");
        for row in &self.curves {
            curves.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.estimator,
                row.tree,
                row.smooth,
                fmt(row.t),
                fmt(row.truth),
                fmt(row.mean),
                fmt(row.q05),
                fmt(row.q95)
            ));
        }
        out.push(("curves.csv".to_string(), curves));

        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_truths_match_their_formulas() {
        assert_eq!(smooth_truth(1, 0.5), 0.0);
        assert!((smooth_truth(2, 0.25) - 0.25).abs() < 1e-15);
        assert!((smooth_truth(3, 0.25) + 0.25).abs() < 1e-12);
        assert_eq!(smooth_truth(4, 0.7), 0.0);
        assert_eq!(smooth_truth(5, 0.1), 0.0);
    }

    #[test]
    fn config_validation_catches_degenerate_scales() {
        assert!(ScenarioConfig { n: 50, ..Default::default() }.validate().is_err());
        assert!(ScenarioConfig { replications: 0, ..Default::default() }.validate().is_err());
        assert!(ScenarioConfig { truncation: Some(0), ..Default::default() }.validate().is_err());
        assert!(ScenarioConfig::default().validate().is_ok());
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert!((quantile(&v, 0.05) - 1.2).abs() < 1e-12);
    }

    #[test]
    fn truth_interpolant_is_antisymmetric_at_the_midpoint() {
        // Both sine effects are odd around t = 0.5 and the knots are
        // symmetric, so the interpolants vanish there like the functions.
        assert!(truth_smooth_value(2, 0.5).abs() < 1e-12);
        assert!(truth_smooth_value(3, 0.5).abs() < 1e-12);
        // The linear effect is reproduced exactly everywhere.
        for t in [0.0, 0.33, 0.71, 1.0] {
            assert!((truth_smooth_value(1, t) - smooth_truth(1, t)).abs() < 1e-12);
        }
    }
}
