//! Diagnostics tied to the dynamic programming equation: the signed residual
//! of a smooth cylindrical candidate, and the strict-extremum test function
//! built from squared moment deviations.

use crate::error::Result;
use crate::generator::{hamiltonian, CylindricalTest};
use crate::measure::{MeasureState, ParticleMeasure};
use crate::model::ModelSpec;

/// Signed residual `-d/dt phi(t, mu) + H(t, mu, D_m phi)` of a smooth
/// cylindrical candidate at one point. A diagnostic on candidate functions
/// only: it does not quantify over test functions or extrema, so it cannot
/// certify the viscosity property.
pub fn viscosity_residual(
    phi: &CylindricalTest,
    t: f64,
    state: &MeasureState,
    model: &ModelSpec,
) -> Result<f64> {
    let time_derivative = phi.time_derivative(t, state)?;
    let v = phi.linear_derivative(t, state)?;
    let (h, _) = hamiltonian(t, state, &v, model)?;
    Ok(-time_derivative + h)
}

/// The separating test function centred at `(t0, mu0)`:
/// `(t - t0)^2 + sum_j <mu - mu0, x^j>^2 / ((j+1) 2^j)`,
/// evaluated truncated at `j_max` with a certified tail bound.
#[derive(Debug, Clone)]
pub struct StrictMaxTestFn {
    pub t0: f64,
    pub mu0: ParticleMeasure,
    pub j_max: usize,
}

impl StrictMaxTestFn {
    /// Truncated value and a bound on the discarded tail. The tail bound uses
    /// the support radii: for `R = max radius` the `j`-th term is at most
    /// `(R^j + R0^j)^2 / ((j+1) 2^j)`, summable when `R < sqrt(2)`; beyond
    /// that radius the series itself diverges and the bound is infinite.
    pub fn eval(&self, t: f64, mu: &ParticleMeasure) -> Result<(f64, f64)> {
        let mut value = (t - self.t0) * (t - self.t0);
        for j in 1..=self.j_max {
            let d = mu.raw_moment(j) - self.mu0.raw_moment(j);
            value += d * d / ((j as f64 + 1.0) * 2.0_f64.powi(j as i32));
        }
        let tail = self.tail_bound(mu);
        Ok((value, tail))
    }

    fn tail_bound(&self, mu: &ParticleMeasure) -> f64 {
        let geometric_tail = |r: f64| -> f64 {
            let q = r * r / 2.0;
            if q >= 1.0 {
                return f64::INFINITY;
            }
            // sum_{j > j_max} q^j = q^{j_max+1} / (1 - q)
            q.powi(self.j_max as i32 + 1) / (1.0 - q)
        };
        // (a + b)^2 <= 2 a^2 + 2 b^2 applied to the two radii
        let r_mu = mu.radius();
        let r_mu0 = self.mu0.radius();
        2.0 / (self.j_max as f64 + 2.0) * (geometric_tail(r_mu) + geometric_tail(r_mu0))
    }
}

/// Builds the strict-extremum test function centred at `(t0, mu0)`.
pub fn strict_max_testfn(t0: f64, mu0: &ParticleMeasure, j_max: usize) -> StrictMaxTestFn {
    StrictMaxTestFn {
        t0,
        mu0: mu0.clone(),
        j_max,
    }
}
