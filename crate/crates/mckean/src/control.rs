//! The control side: cost functionals along a flow, exhaustive value search
//! over piecewise-constant controls, the dynamic-programming residual, and
//! diagnostics against the dynamic programming equation.

mod cost;
mod dpp;
mod value;
mod viscosity;

use serde::{Deserialize, Serialize};

pub use cost::cost_functional;
pub use dpp::dpp_residual;
pub use value::{value_search, ValueResult};
pub use viscosity::{strict_max_testfn, viscosity_residual, StrictMaxTestFn};

/// Which flow representation carries the candidate evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Deterministic moment hierarchy; exact for polynomial costs.
    Moment,
    /// Interacting-particle Monte Carlo with common random numbers.
    Particle,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::Moment => write!(f, "moment"),
            Backend::Particle => write!(f, "particle"),
        }
    }
}

/// Shared knobs for cost evaluation and value search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveConfig {
    pub backend: Backend,
    /// Target integration step (subdivided exactly per control interval).
    pub dt: f64,
    /// Moment order carried by the flows.
    pub order: usize,
    /// Ensemble size for the particle backend.
    pub n_particles: usize,
    /// Seed shared by every candidate (common random numbers).
    pub seed: u64,
    /// Hard cap on the number of candidate control sequences.
    pub budget: u128,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Moment,
            dt: 0.01,
            order: 4,
            n_particles: 10_000,
            seed: 0,
            budget: 200_000,
        }
    }
}
