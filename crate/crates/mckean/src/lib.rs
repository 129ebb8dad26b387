//! Controlled McKean-Vlasov jump-diffusions on the line.
//!
//! The crate makes four things executable:
//!
//! * **Closure algebra** ([`poly`], [`closure`], [`coeff`]): exact polynomials
//!   over the jump-moment symbols, the smallest set closed under
//!   differentiation and the jump image, and the decaying coefficients built
//!   on its enumeration.
//! * **Measures and metrics** ([`measure`], [`metric`]): particle clouds and
//!   truncated moment vectors with exponential-moment geometry, and the
//!   weighted-series metrics with certified truncation tails.
//! * **Dynamics** ([`model`], [`generator`], [`dynamics`]): model
//!   specifications, the drift/diffusion/jump operator on polynomials,
//!   interacting-particle Monte Carlo, deterministic moment flows, and the
//!   freeze-the-law fixed-point iteration.
//! * **Control** ([`control`]): cost functionals, exhaustive value search over
//!   piecewise-constant controls, dynamic-programming residuals, and
//!   smooth-test-function diagnostics.

pub mod closure;
pub mod coeff;
pub mod error;
pub mod jump;
pub mod measure;
pub mod metric;
pub mod poly;
pub mod xpoly;

pub use closure::{enumerate_theta, enumerate_theta_through_degree, star_closure, ClosureSet};
pub use coeff::{coeff_table, coeff_table_through_degree, CoefficientTable};
pub use error::{Error, Result};
pub use jump::JumpLaw;
pub use measure::{
    e_delta, in_m_b, in_o_n, k_star, pairing, ExpMomentParams, MeasureState, MomentVector,
    ParticleMeasure,
};
pub use metric::{metric_d_abs, metric_d_abs_moments, metric_d_sq, metric_d_sq_moments, MetricValue};
pub use poly::{MomentMonomial, MomentPoly, Polynomial};
pub use xpoly::XPoly;

pub mod dynamics;
pub mod generator;
pub mod model;

pub use dynamics::{
    d_sup, invariance_check, moment_flow, picard_solve, read_flow_csv, simulate_particles,
    write_flow_csv, ControlPath, InvarianceReport, MeasureFlow, ParticleSimOutput,
    ParticleSimParams, PicardOutcome,
};
pub use generator::{apply_generator, expected_generator, hamiltonian, CylindricalTest};
pub use model::{
    innovation_model, CoefFn, CostIntegrand, InnovationParams, ModelBounds, ModelSpec,
    RunningCost, TerminalCost,
};

pub mod control;

pub use control::{
    cost_functional, dpp_residual, strict_max_testfn, value_search, viscosity_residual, Backend,
    SolveConfig, StrictMaxTestFn, ValueResult,
};

pub mod config;
pub mod expr;

pub use config::{InitialSpec, RunConfig};

pub mod presets;
