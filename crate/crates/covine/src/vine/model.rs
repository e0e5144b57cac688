//! Fitted vine models: density evaluation, the Rosenblatt transform, and
//! simulation by inverting it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Covariates;
use crate::error::{CovineError, Result};
use crate::families::{FamilySpec, Side, UV_EPS};
use crate::gam::GamTauModel;
use crate::select::TraceEvent;

use super::structure::{PseudoSrc, StructEdge, VineStructure};

/// One fitted pair copula inside a vine, tagged with its edge identity.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeModel {
    pub conditioned: (usize, usize),
    pub conditioning: Vec<usize>,
    pub model: GamTauModel,
    /// Selection history when the edge went through family and covariate
    /// selection; absent for fixed-specification fits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEvent>>,
}

impl EdgeModel {
    /// Human-readable identity like `2,4|1,3`.
    pub fn label(&self) -> String {
        let (j, k) = self.conditioned;
        if self.conditioning.is_empty() {
            format!("{j},{k}")
        } else {
            let given: Vec<String> = self.conditioning.iter().map(|v| v.to_string()).collect();
            format!("{j},{k}|{}", given.join(","))
        }
    }
}

/// The conditional pseudo-observations feeding every pair copula: for each
/// edge, the two arguments `(u_{j|D}, u_{k|D})` as columns, clipped to the
/// open unit interval.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PseudoObsFrame {
    pub columns: Vec<Vec<(Vec<f64>, Vec<f64>)>>,
}

fn schema_version_default() -> u32 {
    1
}

/// A fitted vine copula: a validated structure plus one covariate-driven
/// pair copula per edge.
///
/// Serializes to JSON with a `schema_version` marker; the structure
/// re-validates on deserialization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VineModel {
    #[serde(default = "schema_version_default")]
    pub schema_version: u32,
    pub structure: VineStructure,
    /// Covariate columns the edge models may reference, in input order.
    pub covariates: Vec<String>,
    /// Fitted pair copulas, aligned tree by tree with the structure.
    pub edges: Vec<Vec<EdgeModel>>,
}

impl VineModel {
    pub fn dim(&self) -> usize {
        self.structure.dim()
    }

    /// Checks the copula matrix and covariate frame against the model and
    /// returns the row count.
    fn check_inputs(&self, u: &[Vec<f64>], data: &Covariates) -> Result<usize> {
        let d = self.dim();
        if u.len() != d {
            return Err(CovineError::invalid(format!(
                "expected {d} copula columns, got {}",
                u.len()
            )));
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
        self.check_frame(data, n)?;
        Ok(n)
    }

    fn check_frame(&self, data: &Covariates, n: usize) -> Result<()> {
        for name in &self.covariates {
            data.column(name)?;
        }
        if !self.covariates.is_empty() && data.len() != n {
            return Err(CovineError::invalid(format!(
                "covariates have {} rows, expected {n}",
                data.len()
            )));
        }
        Ok(())
    }

    /// Per-edge fitted tau columns over the covariate rows.
    fn edge_taus(&self, data: &Covariates, n: usize) -> Result<Vec<Vec<Vec<f64>>>> {
        let owned;
        let frame = if data.len() == n {
            data
        } else {
            // Only reachable for covariate-free models, where the frame is
            // allowed to be empty; prediction still needs the row count.
            owned = Covariates::empty(n);
            &owned
        };
        self.edges
            .iter()
            .map(|tree| tree.iter().map(|e| e.model.predict_tau(frame)).collect())
            .collect()
    }

    /// Log copula density at each row of `u` given covariate rows `data`.
    pub fn log_density(&self, u: &[Vec<f64>], data: &Covariates) -> Result<Vec<f64>> {
        let n = self.check_inputs(u, data)?;
        let taus = self.edge_taus(data, n)?;
        let trees = self.structure.trees();
        let mut h: Vec<Vec<(f64, f64)>> =
            trees.iter().map(|t| vec![(0.0, 0.0); t.len()]).collect();
        let mut out = vec![0.0; n];
        for (r, out_r) in out.iter_mut().enumerate() {
            let mut ld = 0.0;
            for (m, tree) in trees.iter().enumerate() {
                for (e, se) in tree.iter().enumerate() {
                    let x = resolve(u, &h, se.first_src, r);
                    let y = resolve(u, &h, se.second_src, r);
                    let fam = &self.edges[m][e].model.family;
                    let tau = taus[m][e][r];
                    ld += fam.logpdf(x, y, tau);
                    if m + 1 < trees.len() {
                        h[m][e] = (
                            fam.hfunc(Side::First, x, y, tau),
                            fam.hfunc(Side::Second, x, y, tau),
                        );
                    }
                }
            }
            *out_r = ld;
        }
        Ok(out)
    }

    /// Copula density, `exp` of [`VineModel::log_density`].
    pub fn density(&self, u: &[Vec<f64>], data: &Covariates) -> Result<Vec<f64>> {
        Ok(self.log_density(u, data)?.into_iter().map(f64::exp).collect())
    }

    /// The conditional pseudo-observations of every edge, the quantities the
    /// pair copulas are fitted and evaluated on.
    pub fn pseudo_obs(&self, u: &[Vec<f64>], data: &Covariates) -> Result<PseudoObsFrame> {
        let n = self.check_inputs(u, data)?;
        let taus = self.edge_taus(data, n)?;
        let trees = self.structure.trees();
        let mut cols: Vec<Vec<(Vec<f64>, Vec<f64>)>> = trees
            .iter()
            .map(|t| t.iter().map(|_| (vec![0.0; n], vec![0.0; n])).collect())
            .collect();
        let mut h: Vec<Vec<(f64, f64)>> =
            trees.iter().map(|t| vec![(0.0, 0.0); t.len()]).collect();
        for r in 0..n {
            for (m, tree) in trees.iter().enumerate() {
                for (e, se) in tree.iter().enumerate() {
                    let x = resolve(u, &h, se.first_src, r);
                    let y = resolve(u, &h, se.second_src, r);
                    cols[m][e].0[r] = x;
                    cols[m][e].1[r] = y;
                    if m + 1 < trees.len() {
                        let fam = &self.edges[m][e].model.family;
                        let tau = taus[m][e][r];
                        h[m][e] = (
                            fam.hfunc(Side::First, x, y, tau),
                            fam.hfunc(Side::Second, x, y, tau),
                        );
                    }
                }
            }
        }
        Ok(PseudoObsFrame { columns: cols })
    }

    /// The Rosenblatt transform of `u`: one column per variable which, when
    /// the model is correct, holds independent uniforms. Inverse of
    /// [`VineModel::simulate`] for the same covariate rows.
    pub fn rosenblatt(&self, u: &[Vec<f64>], data: &Covariates) -> Result<Vec<Vec<f64>>> {
        let n = self.check_inputs(u, data)?;
        let d = self.dim();
        let taus = self.edge_taus(data, n)?;
        let trees = self.structure.trees();
        let peel = self.structure.peeling()?;
        let mut h: Vec<Vec<(f64, f64)>> =
            trees.iter().map(|t| vec![(0.0, 0.0); t.len()]).collect();
        let mut z = vec![vec![0.0; n]; d];
        for r in 0..n {
            for (m, tree) in trees.iter().enumerate() {
                for (e, se) in tree.iter().enumerate() {
                    let x = resolve(u, &h, se.first_src, r);
                    let y = resolve(u, &h, se.second_src, r);
                    let fam = &self.edges[m][e].model.family;
                    let tau = taus[m][e][r];
                    h[m][e] = (
                        fam.hfunc(Side::First, x, y, tau),
                        fam.hfunc(Side::Second, x, y, tau),
                    );
                }
            }
            for (i, chain) in peel.chains.iter().enumerate() {
                let var = peel.diag[i];
                z[var - 1][r] = match chain.last() {
                    Some(link) => {
                        let (h1, h2) = h[link.tree][link.edge];
                        if link.diag_is_first {
                            h1
                        } else {
                            h2
                        }
                    }
                    None => u[var - 1][r].clamp(UV_EPS, 1.0 - UV_EPS),
                };
            }
        }
        Ok(z)
    }

    /// Draws `data.len()` rows from the vine, one per covariate row, by
    /// inverting the Rosenblatt transform. Deterministic for a given
    /// structure, model, covariate frame, and generator state.
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        data: &Covariates,
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>> {
        let n = data.len();
        self.check_frame(data, n)?;
        let taus = self.edge_taus(data, n)?;
        let families: Vec<Vec<FamilySpec>> = self
            .edges
            .iter()
            .map(|tree| tree.iter().map(|e| e.model.family.clone()).collect())
            .collect();
        simulate_from_taus(&self.structure, &families, &taus, n, rng)
    }
}

fn resolve(u: &[Vec<f64>], h: &[Vec<(f64, f64)>], src: PseudoSrc, r: usize) -> f64 {
    match src {
        PseudoSrc::Column(v) => u[v - 1][r].clamp(UV_EPS, 1.0 - UV_EPS),
        PseudoSrc::HFunc(t, e, Side::First) => h[t][e].0,
        PseudoSrc::HFunc(t, e, Side::Second) => h[t][e].1,
    }
}

/// Simulates `n` rows from a vine whose pair-copula taus are given
/// explicitly, one column per edge aligned with the structure's trees.
///
/// This is the engine behind [`VineModel::simulate`]; it is public so that
/// callers can drive a vine with taus from any source, for example exact
/// functions of covariates rather than fitted models.
pub fn simulate_from_taus<R: Rng + ?Sized>(
    structure: &VineStructure,
    families: &[Vec<FamilySpec>],
    taus: &[Vec<Vec<f64>>],
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let trees = structure.trees();
    let d = structure.dim();
    if families.len() != trees.len() || taus.len() != trees.len() {
        return Err(CovineError::invalid(
            "families and taus must have one entry per tree".to_string(),
        ));
    }
    for (m, tree) in trees.iter().enumerate() {
        if families[m].len() != tree.len() || taus[m].len() != tree.len() {
            return Err(CovineError::invalid(format!(
                "tree {}: families and taus must have one entry per edge",
                m + 1
            )));
        }
        if let Some(col) = taus[m].iter().find(|c| c.len() != n) {
            return Err(CovineError::invalid(format!(
                "tree {}: tau column has {} rows, expected {n}",
                m + 1,
                col.len()
            )));
        }
    }
    let peel = structure.peeling()?;
    let mut u = vec![vec![0.0; n]; d];
    let mut memo: Vec<Vec<[f64; 2]>> = trees.iter().map(|t| vec![[f64::NAN; 2]; t.len()]).collect();
    let mut uvals = vec![f64::NAN; d];
    for r in 0..n {
        for row in memo.iter_mut() {
            for cell in row.iter_mut() {
                *cell = [f64::NAN; 2];
            }
        }
        uvals.fill(f64::NAN);
        for i in (0..d).rev() {
            let var = peel.diag[i];
            let mut w: f64 = rng.gen::<f64>().clamp(UV_EPS, 1.0 - UV_EPS);
            for link in peel.chains[i].iter().rev() {
                let se = &trees[link.tree][link.edge];
                let tau = taus[link.tree][link.edge][r];
                let (side, given_src) = if link.diag_is_first {
                    (Side::First, se.second_src)
                } else {
                    (Side::Second, se.first_src)
                };
                let given = pseudo(trees, families, taus, r, &mut memo, &uvals, given_src);
                w = families[link.tree][link.edge].hinv(side, w, given, tau);
            }
            uvals[var - 1] = w;
        }
        for v in 0..d {
            u[v][r] = uvals[v];
        }
    }
    Ok(u)
}

/// Lazily resolves a conditional pseudo-observation during simulation. Only
/// edges over already-sampled variables are ever requested, so the raw
/// values are always available.
fn pseudo(
    trees: &[Vec<StructEdge>],
    families: &[Vec<FamilySpec>],
    taus: &[Vec<Vec<f64>>],
    r: usize,
    memo: &mut Vec<Vec<[f64; 2]>>,
    uvals: &[f64],
    src: PseudoSrc,
) -> f64 {
    match src {
        PseudoSrc::Column(v) => {
            let u = uvals[v - 1];
            debug_assert!(!u.is_nan(), "variable {v} requested before it was sampled");
            u
        }
        PseudoSrc::HFunc(t, e, side) => {
            let idx = match side {
                Side::First => 0,
                Side::Second => 1,
            };
            let cached = memo[t][e][idx];
            if !cached.is_nan() {
                return cached;
            }
            let se = &trees[t][e];
            let x = pseudo(trees, families, taus, r, memo, uvals, se.first_src);
            let y = pseudo(trees, families, taus, r, memo, uvals, se.second_src);
            let h = families[t][e].hfunc(side, x, y, taus[t][e][r]);
            memo[t][e][idx] = h;
            h
        }
    }
}
