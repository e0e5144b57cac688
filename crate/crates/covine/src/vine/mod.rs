//! Vine copulas built from covariate-driven pair copulas.
//!
//! A vine couples `d` uniform margins through a sequence of trees: the
//! first tree pairs raw variables, and every later tree pairs conditional
//! distributions obtained from the previous one via h-functions. Each
//! edge carries its own pair copula whose Kendall's tau may depend on
//! covariates, so the dependence structure can drift with exogenous state
//! while the decomposition itself stays fixed.
//!
//! [`VineStructure`] holds a validated tree sequence, [`fit_sequential`]
//! estimates one pair copula per edge tree by tree, and [`VineModel`]
//! evaluates the density, the Rosenblatt transform, and simulates.

mod model;
mod structure;

pub use model::{simulate_from_taus, EdgeModel, PseudoObsFrame, VineModel};
pub use structure::{validate_structure, RawEdge, VineStructure};

use serde::{Deserialize, Serialize};

use crate::data::Covariates;
use crate::error::{CovineError, ErrorKind, Result};
use crate::families::{FamilyKind, FamilySpec, Side, UV_EPS};
use crate::gam::{fit_gam_tau, GamFormula};
use crate::select::{independence_model, select_family, SelectionConfig};

use structure::PseudoSrc;

/// How each edge's pair copula is specified during a sequential fit.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VineFitMode {
    /// Family and covariate selection on every edge.
    Select,
    /// A fixed family and formula per edge, aligned with the structure's
    /// trees. No selection happens; the models are fitted as given.
    Fixed(Vec<Vec<(FamilySpec, GamFormula)>>),
}

/// Settings for [`fit_sequential`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VineFitConfig {
    pub selection: SelectionConfig,
    /// Fit only the first `q` trees; deeper edges become independence.
    /// `None` fits all `d - 1` trees.
    #[serde(default)]
    pub truncation: Option<usize>,
    #[serde(default = "default_mode")]
    pub mode: VineFitMode,
}

fn default_mode() -> VineFitMode {
    VineFitMode::Select
}

impl Default for VineFitConfig {
    fn default() -> Self {
        VineFitConfig {
            selection: SelectionConfig::default(),
            truncation: None,
            mode: VineFitMode::Select,
        }
    }
}

/// Fits a vine copula tree by tree.
///
/// `u` holds the copula-scale observations, one column per variable in
/// label order; `data` the covariate columns shared by all edges. Tree `m`
/// is fitted on the h-function outputs of tree `m - 1`, so edges are
/// estimated in tree order while edges within a tree are independent of
/// one another. With two variables this reduces to a single
/// [`select_family`] call (or plain fit in fixed mode).
///
/// Failures carry the identity of the edge they occurred on. In selection
/// mode, numerical trouble inside a candidate family is already absorbed
/// by the selection's independence fallback, so only validation problems
/// (bad configuration, unknown covariates) surface as errors.
pub fn fit_sequential(
    u: &[Vec<f64>],
    data: &Covariates,
    structure: &VineStructure,
    cfg: &VineFitConfig,
) -> Result<VineModel> {
    let d = structure.dim();
    if u.len() != d {
        return Err(CovineError::invalid(format!("expected {d} copula columns, got {}", u.len())));
    }
    let n = u[0].len();
    for (i, col) in u.iter().enumerate() {
        if col.len() != n {
            return Err(CovineError::invalid(format!(
                "copula column {} has {} rows, expected {n}",
                i + 1,
                col.len()
            )));
        }
        if let Some(bad) = col.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(CovineError::invalid(format!(
                "copula column {} contains {bad}, outside [0,1]",
                i + 1
            )));
        }
    }
    if data.width() > 0 && data.len() != n {
        return Err(CovineError::invalid(format!(
            "covariates have {} rows but observations {n}",
            data.len()
        )));
    }
    cfg.selection.validate()?;
    let trees = structure.trees();
    if let VineFitMode::Fixed(spec) = &cfg.mode {
        if spec.len() != trees.len()
            || spec.iter().zip(trees).any(|(s, t)| s.len() != t.len())
        {
            return Err(CovineError::invalid(
                "fixed fit specification does not match the structure's trees".to_string(),
            ));
        }
    }
    let q = cfg.truncation.unwrap_or(d - 1);

    let owned;
    let frame = if data.width() > 0 {
        data
    } else {
        owned = Covariates::empty(n);
        &owned
    };

    let mut edges: Vec<Vec<EdgeModel>> = Vec::with_capacity(trees.len());
    let mut h: Vec<Vec<(Vec<f64>, Vec<f64>)>> = Vec::with_capacity(trees.len());
    for (m, tree) in trees.iter().enumerate() {
        let mut tree_models = Vec::with_capacity(tree.len());
        let mut tree_h = Vec::with_capacity(tree.len());
        for se in tree {
            let x = resolve_column(u, &h, se.first_src);
            let y = resolve_column(u, &h, se.second_src);
            let in_context = |err: CovineError| edge_err(err, m, &se.label());
            let (model, trace) = if m >= q {
                (independence_model(n), None)
            } else {
                match &cfg.mode {
                    VineFitMode::Select => {
                        let sel = select_family(&x, &y, frame, frame.names(), &cfg.selection)
                            .map_err(in_context)?;
                        (sel.model, Some(sel.trace))
                    }
                    VineFitMode::Fixed(spec) => {
                        let (fam, formula) = &spec[m][tree_models.len()];
                        let model = if fam.kind() == FamilyKind::Indep {
                            independence_model(n)
                        } else {
                            fit_gam_tau(fam, &x, &y, frame, formula, &cfg.selection.gam)
                                .map_err(in_context)?
                        };
                        (model, None)
                    }
                }
            };
            if m + 1 < trees.len() {
                let taus = model.predict_tau(frame).map_err(in_context)?;
                let fam = &model.family;
                let mut h1 = vec![0.0; n];
                let mut h2 = vec![0.0; n];
                for r in 0..n {
                    h1[r] = fam.hfunc(Side::First, x[r], y[r], taus[r]);
                    h2[r] = fam.hfunc(Side::Second, x[r], y[r], taus[r]);
                }
                tree_h.push((h1, h2));
            }
            tree_models.push(EdgeModel {
                conditioned: se.conditioned,
                conditioning: se.conditioning.clone(),
                model,
                trace,
            });
        }
        edges.push(tree_models);
        h.push(tree_h);
    }

    Ok(VineModel {
        schema_version: 1,
        structure: structure.clone(),
        covariates: data.names().to_vec(),
        edges,
    })
}

fn resolve_column(
    u: &[Vec<f64>],
    h: &[Vec<(Vec<f64>, Vec<f64>)>],
    src: PseudoSrc,
) -> Vec<f64> {
    match src {
        PseudoSrc::Column(v) => {
            u[v - 1].iter().map(|x| x.clamp(UV_EPS, 1.0 - UV_EPS)).collect()
        }
        PseudoSrc::HFunc(t, e, Side::First) => h[t][e].0.clone(),
        PseudoSrc::HFunc(t, e, Side::Second) => h[t][e].1.clone(),
    }
}

/// Attaches the failing edge's identity while keeping the error's
/// validation/numerical classification.
fn edge_err(err: CovineError, tree: usize, label: &str) -> CovineError {
    let msg = format!("tree {} edge {label}: {err}", tree + 1);
    match err.kind() {
        ErrorKind::Validation => CovineError::InvalidInput(msg),
        ErrorKind::Numerical => CovineError::Numerical(msg),
    }
}
