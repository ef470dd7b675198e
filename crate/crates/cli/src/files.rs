//! State and constraint files.
//!
//! Complex matrices are stored as separate real and imaginary row arrays.
//! Writers emit the shortest decimal that reads back to the same `f64`, so a
//! state set survives a write and re-read bitwise.

use std::collections::HashSet;
use std::path::Path;

use qcompat::maxent::ExpectationConstraint;
use qcompat::qmat::c64;
use qcompat::{CMat, DensityMatrix, HermitianOperator, StateSet};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::write_atomic;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub dim: usize,
    pub states: Vec<StateEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateEntry {
    pub label: String,
    pub matrix_re: Vec<Vec<f64>>,
    pub matrix_im: Vec<Vec<f64>>,
}

/// Expectation-value constraints `Tr[Oᵢ ρ] = vᵢ`. `dim` is only needed when
/// there are no observables to infer it from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    pub observables: Vec<MatrixEntry>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixEntry {
    pub matrix_re: Vec<Vec<f64>>,
    pub matrix_im: Vec<Vec<f64>>,
}

/// Builds a `dim × dim` complex matrix, checking both arrays' shapes.
pub fn complex_matrix(dim: usize, re: &[Vec<f64>], im: &[Vec<f64>], context: &str) -> Result<CMat, CliError> {
    for (name, part) in [("matrix_re", re), ("matrix_im", im)] {
        if part.len() != dim || part.iter().any(|row| row.len() != dim) {
            let shape = part.iter().map(|r| r.len().to_string()).collect::<Vec<_>>().join(", ");
            return Err(CliError::invalid(
                context,
                format!(
                    "dimension mismatch: {name} must be {dim}x{dim}, found {} rows of lengths [{shape}]",
                    part.len()
                ),
            ));
        }
    }
    Ok(CMat::from_fn(dim, dim, |i, j| c64(re[i][j], im[i][j])))
}

fn split(m: &CMat) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let rows = |f: fn(&qcompat::qmat::Complex64) -> f64| -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
            .collect()
    };
    (rows(|z| z.re), rows(|z| z.im))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

impl StateFile {
    pub fn from_state_set(s: &StateSet) -> Self {
        let states = s
            .labels()
            .iter()
            .zip(s.states())
            .map(|(label, st)| {
                let (matrix_re, matrix_im) = split(st.matrix());
                StateEntry {
                    label: label.clone(),
                    matrix_re,
                    matrix_im,
                }
            })
            .collect();
        Self { dim: s.dim(), states }
    }

    /// Validates every entry and builds the state set. Errors name the
    /// offending label.
    pub fn into_state_set(self) -> Result<StateSet, CliError> {
        if self.dim == 0 {
            return Err(CliError::invalid("state file", "dim must be positive"));
        }
        let mut seen = HashSet::new();
        let mut labels = Vec::with_capacity(self.states.len());
        let mut states = Vec::with_capacity(self.states.len());
        for entry in self.states {
            let context = format!("state '{}'", entry.label);
            if !seen.insert(entry.label.clone()) {
                return Err(CliError::invalid(&context, "duplicate label"));
            }
            let m = complex_matrix(self.dim, &entry.matrix_re, &entry.matrix_im, &context)?;
            let rho = DensityMatrix::from_matrix(m).map_err(|e| CliError::invalid(&context, e.to_string()))?;
            labels.push(entry.label);
            states.push(rho);
        }
        StateSet::with_labels(states, labels).map_err(|e| CliError::invalid("state file", e.to_string()))
    }
}

pub fn parse_state_file(path: &Path) -> Result<StateSet, CliError> {
    read_json::<StateFile>(path)?.into_state_set()
}

pub fn write_state_file(path: &Path, s: &StateSet) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(&StateFile::from_state_set(s)).expect("state file serializes");
    write_atomic(path, &(text + "\n"))
}

impl ConstraintsFile {
    /// Validated constraints and the dimension they act on.
    pub fn into_constraints(self) -> Result<(Vec<ExpectationConstraint>, usize), CliError> {
        if self.observables.len() != self.values.len() {
            return Err(CliError::invalid(
                "constraints",
                format!(
                    "{} observables but {} values",
                    self.observables.len(),
                    self.values.len()
                ),
            ));
        }
        let dim = match (self.dim, self.observables.first()) {
            (Some(d), _) => d,
            (None, Some(o)) => o.matrix_re.len(),
            (None, None) => return Err(CliError::invalid("constraints", "no observables and no dim")),
        };
        if dim == 0 {
            return Err(CliError::invalid("constraints", "dim must be positive"));
        }
        let constraints = self
            .observables
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (o, &v))| {
                let context = format!("observable {i}");
                if !v.is_finite() {
                    return Err(CliError::invalid(&context, "value is not finite"));
                }
                let m = complex_matrix(dim, &o.matrix_re, &o.matrix_im, &context)?;
                let h = HermitianOperator::new(m).map_err(|e| CliError::invalid(&context, e.to_string()))?;
                Ok(ExpectationConstraint::new(h, v))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((constraints, dim))
    }
}

pub fn parse_constraints_file(path: &Path) -> Result<(Vec<ExpectationConstraint>, usize), CliError> {
    read_json::<ConstraintsFile>(path)?.into_constraints()
}
