//! Named covariate columns shared by fitting, prediction and simulation.

use crate::error::{CovineError, Result};

/// A rectangular set of named covariate columns.
///
/// All columns have the same length and contain only finite values; names
/// are unique. The struct is deliberately dumb storage: model structure
/// (which columns enter linearly or through splines) lives elsewhere.
#[derive(Clone, Debug)]
pub struct Covariates {
    n: usize,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Covariates {
    pub fn new<S: Into<String>>(named_columns: Vec<(S, Vec<f64>)>) -> Result<Self> {
        let mut names = Vec::with_capacity(named_columns.len());
        let mut columns = Vec::with_capacity(named_columns.len());
        let mut n = None;
        for (name, col) in named_columns {
            let name = name.into();
            if names.contains(&name) {
                return Err(CovineError::invalid(format!("duplicate covariate '{name}'")));
            }
            match n {
                None => n = Some(col.len()),
                Some(len) if len != col.len() => {
                    return Err(CovineError::invalid(format!(
                        "covariate '{name}' has {} rows, expected {len}",
                        col.len()
                    )));
                }
                _ => {}
            }
            if let Some(bad) = col.iter().find(|x| !x.is_finite()) {
                return Err(CovineError::invalid(format!(
                    "covariate '{name}' contains a non-finite value {bad}"
                )));
            }
            names.push(name);
            columns.push(col);
        }
        Ok(Covariates { n: n.unwrap_or(0), names, columns })
    }

    /// A covariate set with rows but no columns, for models without
    /// covariate effects.
    pub fn empty(n: usize) -> Self {
        Covariates { n, names: Vec::new(), columns: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| CovineError::invalid(format!("unknown covariate '{name}'")))
    }

    /// Number of distinct values in a column.
    pub fn unique_count(&self, name: &str) -> Result<usize> {
        let mut vals: Vec<f64> = self.column(name)?.to_vec();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        Ok(vals.len())
    }

    /// Restrict to the given rows (used when splitting replicates).
    pub fn take_rows(&self, rows: &[usize]) -> Result<Self> {
        for &r in rows {
            if r >= self.n {
                return Err(CovineError::invalid(format!("row {r} out of range {}", self.n)));
            }
        }
        Ok(Covariates {
            n: rows.len(),
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
        })
    }
}
