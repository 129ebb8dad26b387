//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("measure is missing moment of order {index} (available up to {order})")]
    MissingMoment { index: usize, order: usize },

    #[error("moment system not closed at order {order}: coefficients read moment {needed}")]
    NotClosed { needed: usize, order: usize },

    #[error("measure outside M_b: exponential moment {exp_moment} exceeds bound {bound}")]
    OutsideBall { exp_moment: f64, bound: f64 },

    #[error("jump law has no finite {delta}-exponential moment")]
    InfiniteExpMoment { delta: f64 },

    #[error("model assumption violated: {0}")]
    Assumption(String),

    #[error("control search budget exceeded: {required} candidate sequences > budget {budget}")]
    Budget { required: u128, budget: u128 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("no convergence after {iterations} iterations; gaps {gaps:?}")]
    NoConvergence { iterations: usize, gaps: Vec<f64> },

    #[error("cost term {term} not evaluable on {backend} backend")]
    CostBackend { term: String, backend: String },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration:\n{}", violations.join("\n"))]
    Config { violations: Vec<String> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
