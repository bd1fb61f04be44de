//! Gate experiments, circuits, sweeps and the analytic cross-check suite.

pub mod circuit;
pub mod decompose;
pub mod gates;
pub mod record;
pub mod sweep;
pub mod verify;
pub mod wires;

use thiserror::Error;

use crate::analytic::AnalyticError;
use crate::basis::BasisError;
use crate::operators::OpError;
use crate::propagate::PropagateError;
use crate::sparse::OperatorError;
use crate::states::StateError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Propagate(#[from] PropagateError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Decompose(#[from] decompose::DecomposeError),
    #[error("1/m = {inv_m} is outside the gap regime 1/m > 2N² for N = {n}")]
    GapRegime { n: usize, inv_m: f64 },
    #[error("budget overflow: {0}")]
    BudgetOverflow(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("circuit spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
