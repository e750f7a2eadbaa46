//! Least squares and weighted-lasso estimation on design matrices whose
//! columns carry (agent, lag) provenance.
//!
//! Losses are measured per time step: the mean squared error
//! `(1/T)‖y − Xβ‖²` and the lasso loss, which adds `(2/T)·Σ λ_j |β_j|`.
//! Both estimators work on raw units; nothing is standardized, because
//! market payments are defined on raw-unit coefficients.

mod lasso;
mod loss;
mod ols;

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};

use crate::agent::AgentId;
use crate::error::{Error, Result};

pub use lasso::{
    kkt_certificate, soft_threshold, weighted_lasso_fit, weighted_lasso_solve, KktReport,
    LassoSolution,
};
pub use loss::{lasso_loss, mse, LossReport};
pub use ols::ols_fit;

pub(crate) use ols::min_norm_lstsq;

/// Provenance of one design-matrix column.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Column {
    Intercept,
    Lag { agent: AgentId, lag: usize },
}

impl Column {
    pub fn lag(agent: impl Into<AgentId>, lag: usize) -> Self {
        Column::Lag {
            agent: agent.into(),
            lag,
        }
    }

    pub fn agent(&self) -> Option<&AgentId> {
        match self {
            Column::Intercept => None,
            Column::Lag { agent, .. } => Some(agent),
        }
    }
}

/// A `T × P` regressor matrix plus the provenance of each column.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    columns: Vec<Column>,
}

impl DesignMatrix {
    pub fn new(values: DMatrix<f64>, columns: Vec<Column>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::invalid("design matrix must have at least one row and one column"));
        }
        if columns.len() != values.ncols() {
            return Err(Error::DimensionMismatch {
                context: "design column map",
                expected: values.ncols(),
                found: columns.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("design matrix contains non-finite values"));
        }
        let mut seen = HashSet::new();
        for (j, col) in columns.iter().enumerate() {
            match col {
                Column::Intercept => {
                    if values.column(j).iter().any(|&v| v != 1.0) {
                        return Err(Error::invalid(format!("intercept column {j} is not all ones")));
                    }
                }
                Column::Lag { agent, lag } => {
                    if *lag == 0 {
                        return Err(Error::invalid(format!("column {j} has lag 0")));
                    }
                    if !seen.insert((agent.clone(), *lag)) {
                        return Err(Error::invalid(format!(
                            "duplicate column for agent {agent} lag {lag}"
                        )));
                    }
                }
            }
        }
        if columns.iter().filter(|c| matches!(c, Column::Intercept)).count() > 1 {
            return Err(Error::invalid("more than one intercept column"));
        }
        Ok(DesignMatrix { values, columns })
    }

    /// Builds a matrix from row-major data.
    pub fn from_rows(rows: &[Vec<f64>], columns: Vec<Column>) -> Result<Self> {
        let ncols = columns.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch {
                context: "design row",
                expected: ncols,
                found: bad.len(),
            });
        }
        let values = DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
        Self::new(values, columns)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn intercept_index(&self) -> Option<usize> {
        self.columns.iter().position(|c| matches!(c, Column::Intercept))
    }

    pub fn column_index(&self, agent: &AgentId, lag: usize) -> Option<usize> {
        self.columns.iter().position(|c| match c {
            Column::Lag { agent: a, lag: l } => a == agent && *l == lag,
            Column::Intercept => false,
        })
    }

    pub fn predict(&self, beta: &CoefficientVector) -> Result<DVector<f64>> {
        self.check_coefficients(beta)?;
        Ok(&self.values * beta.as_vector())
    }

    fn check_coefficients(&self, beta: &CoefficientVector) -> Result<()> {
        if beta.len() != self.ncols() {
            return Err(Error::DimensionMismatch {
                context: "coefficient vector",
                expected: self.ncols(),
                found: beta.len(),
            });
        }
        Ok(())
    }

    fn check_target(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.nrows() {
            return Err(Error::DimensionMismatch {
                context: "target vector",
                expected: self.nrows(),
                found: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("target contains non-finite values"));
        }
        Ok(())
    }
}

/// Coefficients aligned with the columns of a [`DesignMatrix`].
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientVector(DVector<f64>);

impl CoefficientVector {
    pub fn new(values: Vec<f64>) -> Self {
        CoefficientVector(DVector::from_vec(values))
    }

    pub fn zeros(len: usize) -> Self {
        CoefficientVector(DVector::zeros(len))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn get(&self, j: usize) -> f64 {
        self.0[j]
    }
}

impl From<DVector<f64>> for CoefficientVector {
    fn from(v: DVector<f64>) -> Self {
        CoefficientVector(v)
    }
}

/// Per-coefficient L1 penalties `λ_j ≥ 0`, applied diagonally.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyVector(DVector<f64>);

impl PenaltyVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((j, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::invalid(format!("penalty {j} must be finite and non-negative, got {v}")));
        }
        Ok(PenaltyVector(DVector::from_vec(values)))
    }

    pub fn zeros(len: usize) -> Self {
        PenaltyVector(DVector::zeros(len))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn get(&self, j: usize) -> f64 {
        self.0[j]
    }

    /// Checks alignment with `x` and that the intercept is unpenalized.
    fn check_against(&self, x: &DesignMatrix) -> Result<()> {
        if self.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                context: "penalty vector",
                expected: x.ncols(),
                found: self.len(),
            });
        }
        if let Some(j) = x.intercept_index() {
            if self.0[j] != 0.0 {
                return Err(Error::invalid(format!(
                    "intercept penalty must be 0, got {}",
                    self.0[j]
                )));
            }
        }
        Ok(())
    }
}

/// Stopping rule for coordinate descent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    /// Largest absolute coefficient change in a full sweep that counts as converged.
    pub tolerance: f64,
    /// Maximum number of full coordinate sweeps.
    pub max_iterations: usize,
}

impl SolverSettings {
    pub fn new(tolerance: f64, max_iterations: usize) -> Result<Self> {
        let settings = SolverSettings {
            tolerance,
            max_iterations,
        };
        settings.validate()?;
        Ok(settings)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::invalid(format!("solver tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("solver max_iterations must be at least 1"));
        }
        Ok(())
    }
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tolerance: 1e-8,
            max_iterations: 10_000,
        }
    }
}
