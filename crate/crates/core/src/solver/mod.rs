//! Implicit time stepping of the transport map.

mod config;
mod newton;
mod residual;
mod state;
mod window;

use thiserror::Error;

pub use config::{SolverConfig, LAMBDA_STAR};
pub use newton::{
    damping_alpha, self_concordance_a0, solve_euler_step, solve_split_step, EulerOutcome, NewtonOutcome,
};
pub use residual::{jacobian, residual_euler, residual_split, split_functional, Scheme};
pub use state::{clamp_boundary, SolverState, SolverStats, StepReport};
pub use window::ActiveWindow;

use crate::model::ModelError;
use crate::tridiag::SingularMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("{scheme} Newton did not converge in {iterations} iterations (scaled residual {residual:e})")]
    NotConverged {
        scheme: Scheme,
        iterations: usize,
        residual: f64,
    },
    #[error("non-finite residual at node {index}")]
    NonFinite { index: usize },
    #[error("degenerate iterate at node {index}: {reason}")]
    Degenerate { index: usize, reason: String },
    #[error("{scheme} Newton step stayed infeasible after {halvings} halvings")]
    MonotonicityLost { scheme: Scheme, halvings: usize },
    #[error(transparent)]
    Singular(#[from] SingularMatrix),
    #[error("maps live on different grids")]
    GridMismatch,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<SolverError>,
    },
}
