//! Natural cubic splines in the value-at-knot (cardinal) parameterization.
//!
//! A basis on knots y_1 < ... < y_m represents the unique natural cubic
//! spline interpolating coefficient s_j at knot y_j: cubic between knots,
//! linear beyond the boundary knots. The associated penalty matrix S
//! satisfies integral s''(t)^2 dt = s' S s for every coefficient vector s,
//! has rank m - 2, and its null space is exactly the affine functions of the
//! knots.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CovineError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnotStrategy {
    Equidistant,
    Quantile,
}

/// Strictly increasing knots plus the support interval they were placed on.
/// The support endpoints bracket the knots; they only matter for validation
/// because the spline is linear beyond the boundary knots regardless.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnotSequence {
    knots: Vec<f64>,
    support: (f64, f64),
}

impl KnotSequence {
    pub fn new(knots: Vec<f64>, support: (f64, f64)) -> Result<Self> {
        if knots.len() < 3 {
            return Err(CovineError::invalid(format!(
                "a knot sequence needs at least 3 knots, got {}",
                knots.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(CovineError::invalid("knots must be finite"));
        }
        for w in knots.windows(2) {
            if w[1] <= w[0] {
                return Err(CovineError::invalid(format!(
                    "knots must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if !(support.0 <= knots[0] && support.1 >= knots[knots.len() - 1]) {
            return Err(CovineError::invalid(
                "support endpoints must bracket all knots",
            ));
        }
        Ok(KnotSequence { knots, support })
    }

    pub fn from_knots(knots: Vec<f64>) -> Result<Self> {
        let lo = *knots.first().ok_or_else(|| CovineError::invalid("empty knots"))?;
        let hi = *knots.last().unwrap();
        KnotSequence::new(knots, (lo, hi))
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }
}

/// Places m knots over observed values: equidistant spanning [min, max], or
/// at empirical quantiles i/(m+1), i = 1..m. Quantile placement fails when
/// ties collapse two knots onto the same value.
pub fn place_knots(values: &[f64], m: usize, strategy: KnotStrategy) -> Result<KnotSequence> {
    if m < 3 {
        return Err(CovineError::invalid(format!(
            "need at least 3 knots, requested {m}"
        )));
    }
    if values.is_empty() {
        return Err(CovineError::invalid("cannot place knots on empty data"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CovineError::invalid("knot placement needs finite values"));
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Err(CovineError::invalid(
            "cannot place knots: all values are identical",
        ));
    }
    let knots = match strategy {
        KnotStrategy::Equidistant => (0..m)
            .map(|i| lo + (hi - lo) * (i as f64) / ((m - 1) as f64))
            .collect::<Vec<_>>(),
        KnotStrategy::Quantile => {
            let mut sorted = values.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = sorted.len();
            let quantile = |p: f64| -> f64 {
                let h = p * ((n - 1) as f64);
                let i = h.floor() as usize;
                if i + 1 >= n {
                    sorted[n - 1]
                } else {
                    sorted[i] + (h - i as f64) * (sorted[i + 1] - sorted[i])
                }
            };
            let knots: Vec<f64> = (1..=m).map(|i| quantile(i as f64 / (m + 1) as f64)).collect();
            for (idx, w) in knots.windows(2).enumerate() {
                if w[1] <= w[0] {
                    return Err(CovineError::CoincidentQuantileKnots { index: idx + 1, m });
                }
            }
            knots
        }
    };
    KnotSequence::new(knots, (lo, hi))
}

/// Cardinal natural-cubic-spline basis: evaluation rows, the curvature
/// penalty matrix, and the linear map from coefficients to second
/// derivatives at the knots.
#[derive(Clone, Debug)]
pub struct SplineBasis {
    knots: KnotSequence,
    /// (m-2) x m map: row j gives the second derivative at interior knot
    /// j+1 as a linear functional of the coefficient vector.
    gamma_map: DMatrix<f64>,
    penalty: DMatrix<f64>,
}

impl SplineBasis {
    pub fn new(knots: KnotSequence) -> Result<Self> {
        let k = knots.knots();
        let m = k.len();
        let h: Vec<f64> = k.windows(2).map(|w| w[1] - w[0]).collect();

        // Green-Silverman construction: Q' s = R gamma links coefficients to
        // interior second derivatives; S = Q R^-1 Q'.
        let mut q = DMatrix::<f64>::zeros(m, m - 2);
        for j in 0..(m - 2) {
            q[(j, j)] = 1.0 / h[j];
            q[(j + 1, j)] = -1.0 / h[j] - 1.0 / h[j + 1];
            q[(j + 2, j)] = 1.0 / h[j + 1];
        }
        let mut r = DMatrix::<f64>::zeros(m - 2, m - 2);
        for j in 0..(m - 2) {
            r[(j, j)] = (h[j] + h[j + 1]) / 3.0;
            if j + 1 < m - 2 {
                r[(j, j + 1)] = h[j + 1] / 6.0;
                r[(j + 1, j)] = h[j + 1] / 6.0;
            }
        }
        let chol = r
            .clone()
            .cholesky()
            .ok_or_else(|| CovineError::numerical("spline penalty: R is not positive definite"))?;
        let gamma_map = chol.solve(&q.transpose());
        let mut penalty = &q * &gamma_map;
        // Symmetrize: Q R^-1 Q' is symmetric exactly, the solve is not.
        let pt = penalty.transpose();
        penalty = (penalty + pt) * 0.5;
        Ok(SplineBasis {
            knots,
            gamma_map,
            penalty,
        })
    }

    pub fn dim(&self) -> usize {
        self.knots.len()
    }

    pub fn knots(&self) -> &[f64] {
        self.knots.knots()
    }

    pub fn knot_sequence(&self) -> &KnotSequence {
        &self.knots
    }

    pub fn penalty(&self) -> &DMatrix<f64> {
        &self.penalty
    }

    /// Basis row b(t): the length-m vector with s(t) = b(t) . s for every
    /// coefficient vector s. Linear extrapolation beyond the boundary knots.
    pub fn eval_row(&self, t: f64) -> DVector<f64> {
        let k = self.knots.knots();
        let m = k.len();
        let mut row = DVector::<f64>::zeros(m);
        // gamma at knot j (0-indexed): zero at j = 0 and j = m-1, otherwise
        // row j-1 of gamma_map.
        let add_gamma = |row: &mut DVector<f64>, j: usize, w: f64, map: &DMatrix<f64>| {
            if j == 0 || j == m - 1 || w == 0.0 {
                return;
            }
            for c in 0..m {
                row[c] += w * map[(j - 1, c)];
            }
        };
        if t <= k[0] {
            let h = k[1] - k[0];
            // s(t) = s_0 + (t - k0) s'(k0), s'(k0) = (s_1 - s_0)/h - h g_1 / 6.
            let d = t - k[0];
            row[0] = 1.0 - d / h;
            row[1] = d / h;
            add_gamma(&mut row, 1, -d * h / 6.0, &self.gamma_map);
            return row;
        }
        if t >= k[m - 1] {
            let h = k[m - 1] - k[m - 2];
            let d = t - k[m - 1];
            row[m - 1] = 1.0 + d / h;
            row[m - 2] = -d / h;
            add_gamma(&mut row, m - 2, d * h / 6.0, &self.gamma_map);
            return row;
        }
        // Locate interval i with k[i] <= t < k[i+1].
        let mut i = match k.partition_point(|&x| x <= t) {
            0 => 0,
            p => p - 1,
        };
        if i >= m - 1 {
            i = m - 2;
        }
        let h = k[i + 1] - k[i];
        let a = (k[i + 1] - t) / h;
        let b = (t - k[i]) / h;
        row[i] = a;
        row[i + 1] = b;
        let ca = (a * a * a - a) * h * h / 6.0;
        let cb = (b * b * b - b) * h * h / 6.0;
        add_gamma(&mut row, i, ca, &self.gamma_map);
        add_gamma(&mut row, i + 1, cb, &self.gamma_map);
        row
    }

    /// n x m design matrix of basis rows.
    pub fn design(&self, values: &[f64]) -> DMatrix<f64> {
        let m = self.dim();
        let mut out = DMatrix::<f64>::zeros(values.len(), m);
        for (r, &t) in values.iter().enumerate() {
            let row = self.eval_row(t);
            for c in 0..m {
                out[(r, c)] = row[c];
            }
        }
        out
    }
}
