//! Model matrix construction for tau regressions.
//!
//! The design has an intercept, raw linear columns, and one block per
//! smooth term. Each smooth block is a natural cubic spline basis reduced
//! by a sum-to-zero constraint against the observed design, which makes
//! the smooth orthogonal to the intercept and keeps the model identifiable.

use nalgebra::{DMatrix, DVector};

use crate::data::Covariates;
use crate::error::{CovineError, Result};
use crate::gam::{GamFormula, TermSpec};
use crate::spline::{place_knots, SplineBasis};

/// A smooth term bound to its basis and constraint transform.
#[derive(Clone, Debug)]
pub(crate) struct SmoothBlock {
    pub name: String,
    pub basis: SplineBasis,
    /// Orthonormal transform from internal coefficients to knot values,
    /// m x (m-1): the constraint null space rotated so the penalty is
    /// diagonal. Diagonalizing keeps the penalty products free of the
    /// cancellation that otherwise caps gradient accuracy at large gamma.
    pub z: DMatrix<f64>,
    /// Diagonal curvature penalty in internal coordinates, scaled to unit
    /// spectral norm; exact zeros on the null space.
    pub penalty: DMatrix<f64>,
    /// Largest eigenvalue of the constrained raw penalty; internal gamma
    /// times `penalty` equals (gamma / penalty_scale) times the raw form.
    pub penalty_scale: f64,
    /// First coefficient index of this block in the stacked vector.
    pub offset: usize,
}

/// Full model layout: coefficient 0 is the intercept, then one coefficient
/// per linear term, then the smooth blocks in formula order.
#[derive(Clone, Debug)]
pub(crate) struct ModelDesign {
    pub x: DMatrix<f64>,
    pub linear_names: Vec<String>,
    pub smooths: Vec<SmoothBlock>,
    pub p: usize,
}

/// Householder reflection sending `c` to a multiple of e1; returns the
/// orthonormal columns 2..m, which span the null space of c^T.
fn constraint_null_basis(c: &DVector<f64>) -> DMatrix<f64> {
    let m = c.len();
    let norm = c.norm();
    let mut v = c.clone();
    v[0] += c[0].signum() * norm;
    let vtv = v.dot(&v);
    let mut h = DMatrix::<f64>::identity(m, m);
    if vtv > 0.0 {
        for i in 0..m {
            for j in 0..m {
                h[(i, j)] -= 2.0 * v[i] * v[j] / vtv;
            }
        }
    }
    h.columns(1, m - 1).into_owned()
}

impl ModelDesign {
    pub fn build(formula: &GamFormula, data: &Covariates) -> Result<Self> {
        let n = data.len();
        if n == 0 {
            return Err(CovineError::invalid("cannot build a design with zero rows"));
        }
        let mut seen: Vec<&str> = Vec::new();
        for term in &formula.terms {
            if seen.contains(&term.name()) {
                return Err(CovineError::invalid(format!(
                    "covariate '{}' appears in more than one term",
                    term.name()
                )));
            }
            seen.push(term.name());
        }
        let mut linear_names = Vec::new();
        let mut smooth_parts: Vec<(String, SplineBasis)> = Vec::new();
        for term in &formula.terms {
            match term {
                TermSpec::Linear { name } => {
                    let col = data.column(name)?;
                    if col.iter().all(|&x| x == col[0]) {
                        return Err(CovineError::invalid(format!(
                            "linear covariate '{name}' is constant"
                        )));
                    }
                    linear_names.push(name.clone());
                }
                TermSpec::Smooth { name, basis_size, strategy } => {
                    let col = data.column(name)?;
                    let knots = place_knots(col, *basis_size, *strategy)?;
                    smooth_parts.push((name.clone(), SplineBasis::new(knots)?));
                }
            }
        }

        let p = 1 + linear_names.len() + smooth_parts.iter().map(|(_, b)| b.dim() - 1).sum::<usize>();
        let mut x = DMatrix::<f64>::zeros(n, p);
        for i in 0..n {
            x[(i, 0)] = 1.0;
        }
        let mut col_at = 1;
        for name in &linear_names {
            let col = data.column(name)?;
            for i in 0..n {
                x[(i, col_at)] = col[i];
            }
            col_at += 1;
        }
        let mut smooths = Vec::with_capacity(smooth_parts.len());
        for (name, basis) in smooth_parts {
            let col = data.column(&name)?;
            let b = basis.design(col);
            let m = basis.dim();
            let csum = DVector::from_iterator(m, (0..m).map(|j| b.column(j).sum()));
            let zc = constraint_null_basis(&csum);
            let raw = zc.transpose() * basis.penalty() * &zc;
            let sym = 0.5 * (&raw + raw.transpose());
            let width = m - 1;
            let eig = nalgebra::SymmetricEigen::new(sym);
            let mut order: Vec<usize> = (0..width).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let penalty_scale = eig.eigenvalues[order[0]].max(f64::MIN_POSITIVE);
            let mut rot = DMatrix::<f64>::zeros(width, width);
            let mut diag = DVector::<f64>::zeros(width);
            for (at, &j) in order.iter().enumerate() {
                rot.set_column(at, &eig.eigenvectors.column(j));
                let lam = eig.eigenvalues[j];
                diag[at] = if lam > penalty_scale * 1e-12 { lam / penalty_scale } else { 0.0 };
            }
            let z = zc * rot;
            let penalty = DMatrix::from_diagonal(&diag);
            let bz = &b * &z;
            x.view_mut((0, col_at), (n, width)).copy_from(&bz);
            smooths.push(SmoothBlock { name, basis, z, penalty, penalty_scale, offset: col_at });
            col_at += width;
        }
        debug_assert_eq!(col_at, p);
        Ok(ModelDesign { x, linear_names, smooths, p })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Penalty matrix at the given smoothing parameters (one per smooth),
    /// zero on the intercept and linear coefficients.
    pub fn penalty(&self, gammas: &[f64]) -> DMatrix<f64> {
        assert_eq!(gammas.len(), self.smooths.len());
        let mut p = DMatrix::<f64>::zeros(self.p, self.p);
        for (block, &g) in self.smooths.iter().zip(gammas) {
            let w = block.penalty.nrows();
            for i in 0..w {
                for j in 0..w {
                    p[(block.offset + i, block.offset + j)] = g * block.penalty[(i, j)];
                }
            }
        }
        p
    }

    /// Coefficient index ranges per term, in the order intercept, linear
    /// terms, smooth terms.
    pub fn term_ranges(&self) -> Vec<(String, std::ops::Range<usize>)> {
        let mut out = vec![("(intercept)".to_string(), 0..1)];
        for (j, name) in self.linear_names.iter().enumerate() {
            out.push((name.clone(), 1 + j..2 + j));
        }
        for block in &self.smooths {
            let w = block.penalty.nrows();
            out.push((block.name.clone(), block.offset..block.offset + w));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::KnotStrategy;

    fn toy_data() -> Covariates {
        let n = 40;
        let t: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let z: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        Covariates::new(vec![("z", z), ("t", t)]).unwrap()
    }

    #[test]
    fn null_basis_is_orthonormal_and_annihilates_constraint() {
        let c = DVector::from_vec(vec![3.0, -1.0, 2.0, 0.5, 4.0]);
        let z = constraint_null_basis(&c);
        assert_eq!(z.shape(), (5, 4));
        let ztz = z.transpose() * &z;
        assert!((ztz - DMatrix::identity(4, 4)).norm() < 1e-12);
        assert!((c.transpose() * z).norm() < 1e-12);
    }

    #[test]
    fn smooth_columns_sum_to_zero() {
        let formula = GamFormula {
            terms: vec![
                TermSpec::Linear { name: "z".into() },
                TermSpec::Smooth { name: "t".into(), basis_size: 8, strategy: KnotStrategy::Quantile },
            ],
        };
        let design = ModelDesign::build(&formula, &toy_data()).unwrap();
        assert_eq!(design.p, 1 + 1 + 7);
        let block = &design.smooths[0];
        for j in 0..7 {
            let s: f64 = design.x.column(block.offset + j).sum();
            assert!(s.abs() < 1e-10, "column {j} sums to {s}");
        }
        // Penalty block is diagonal, unit normalized, with one exact zero
        // for the within-constraint affine direction.
        assert_eq!(block.penalty.nrows(), 7);
        for i in 0..7 {
            for j in 0..7 {
                if i != j {
                    assert_eq!(block.penalty[(i, j)], 0.0);
                }
            }
        }
        assert!((block.penalty[(0, 0)] - 1.0).abs() < 1e-14);
        assert_eq!(block.penalty[(6, 6)], 0.0);
        assert!(block.penalty_scale > 0.0);
        // Scaling back recovers the raw constrained penalty.
        let raw = block.z.transpose() * block.basis.penalty() * &block.z;
        let back = block.penalty_scale * &block.penalty;
        assert!((&back - &raw).norm() < 1e-9 * block.penalty_scale);
        // z stays orthonormal after the diagonalizing rotation.
        let ztz = block.z.transpose() * &block.z;
        assert!((ztz - DMatrix::identity(7, 7)).norm() < 1e-12);
    }

    #[test]
    fn constant_linear_column_is_rejected() {
        let data = Covariates::new(vec![("z", vec![2.0; 10])]).unwrap();
        let formula = GamFormula { terms: vec![TermSpec::Linear { name: "z".into() }] };
        assert!(ModelDesign::build(&formula, &data).is_err());
    }
}
