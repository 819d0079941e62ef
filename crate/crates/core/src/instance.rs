//! JSON problem-instance files.
//!
//! ```json
//! { "demand": 150.0, "balance_tol": 0.0001,
//!   "units": [{"a": 0.008, "b": 7.0, "c": 200.0, "p_min": 10.0, "p_max": 85.0}],
//!   "loss": [[0.0000218]] }
//! ```
//!
//! `balance_tol` and `loss` are optional; `loss` is row-major.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::DispatchError;
use crate::model::{
    check_feasible, DispatchProblem, GeneratingUnit, LossMatrix, DEFAULT_BALANCE_TOL,
};

/// Relative eigenvalue tolerance for the loss-matrix PSD check.
const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub demand: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balance_tol: Option<f64>,
    pub units: Vec<GeneratingUnit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<Vec<Vec<f64>>>,
}

impl From<&DispatchProblem> for ProblemFile {
    fn from(problem: &DispatchProblem) -> Self {
        Self {
            demand: problem.demand(),
            balance_tol: Some(problem.balance_tol()),
            units: problem.units().to_vec(),
            loss: problem.loss().map(LossMatrix::rows),
        }
    }
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed instance {path}: {source}")]
    Syntax {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid instance {path}: {source}")]
    Invalid {
        path: PathBuf,
        source: DispatchError,
    },
    #[error("infeasible instance {path}: {source}")]
    Infeasible {
        path: PathBuf,
        source: DispatchError,
    },
}

impl ProblemFile {
    /// Validates every invariant, symmetrizes `loss`, and checks it is PSD.
    pub fn into_problem(self) -> Result<DispatchProblem, DispatchError> {
        let loss = match &self.loss {
            None => None,
            Some(rows) => {
                let b = LossMatrix::from_rows(rows)?;
                if !b.is_positive_semidefinite(PSD_TOL) {
                    return Err(DispatchError::InvalidLossMatrix(
                        "`loss` is not positive semidefinite".into(),
                    ));
                }
                Some(b)
            }
        };
        DispatchProblem::with_options(
            self.units,
            self.demand,
            loss,
            self.balance_tol.unwrap_or(DEFAULT_BALANCE_TOL),
        )
    }
}

pub fn parse_problem_str(text: &str, path: &Path) -> Result<DispatchProblem, InstanceError> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|source| InstanceError::Syntax {
        path: path.to_owned(),
        source,
    })?;
    let problem = file
        .into_problem()
        .map_err(|source| InstanceError::Invalid {
            path: path.to_owned(),
            source,
        })?;
    check_feasible(&problem).map_err(|source| InstanceError::Infeasible {
        path: path.to_owned(),
        source,
    })?;
    Ok(problem)
}

pub fn parse_problem(path: &Path) -> Result<DispatchProblem, InstanceError> {
    let text = fs::read_to_string(path).map_err(|source| InstanceError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_problem_str(&text, path)
}
