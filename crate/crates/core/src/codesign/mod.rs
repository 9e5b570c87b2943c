//! Monotone design problems with implementations, their composition, and
//! query solving over co-design diagrams.

mod diagram;
mod mdpi;
mod solve;

use thiserror::Error;

use crate::order::{Antichain, OrderError};

pub use diagram::{Diagram, Edge, ExposedFunctionality, ExposedResource, Node, NodeKind};
pub use mdpi::{parallel, series, AnnotatedAntichain, Design, Implementation, Mdpi};
pub use solve::{validate_assignment, Assignment, Choice, QuerySolution, SolveOptions};

#[derive(Debug, Error)]
pub enum CodesignError {
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error("port error: {0}")]
    Port(String),
    #[error("invalid diagram: {0}")]
    Structure(String),
    #[error("no fixed point after {iterations} iterations")]
    Divergence { iterations: usize, last: Box<Antichain> },
    #[error("builder `{0}` failed: {1}")]
    Builder(String, String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
