//! Deterministic moment flow: applying the generator to the monomials
//! `x, ..., x^D` yields a closed system of `D` coupled ODEs (differentiation
//! only lowers the degree), integrated here with classical fourth-order
//! Runge-Kutta on a uniform grid.

use crate::dynamics::{time_grid, ControlPath, MeasureFlow};
use crate::error::{Error, Result};
use crate::measure::MomentVector;
use crate::model::ModelSpec;

/// Integrates `d/ds <mu_s, x^k> = <mu_s, L[x^k]>` for `k = 1..=order` from
/// the initial moments along the given control path. The control is held at
/// its value from the left endpoint of each step, so piecewise-constant
/// controls aligned with the grid are treated exactly.
pub fn moment_flow(
    model: &ModelSpec,
    mu0: &MomentVector,
    path: &ControlPath,
    order: usize,
    dt: f64,
) -> Result<MeasureFlow> {
    let needed = model.required_moment_order();
    if needed > order {
        return Err(Error::NotClosed { needed, order });
    }
    if mu0.order() < order {
        return Err(Error::MissingMoment {
            index: order,
            order: mu0.order(),
        });
    }
    if order == 0 {
        return Err(Error::InvalidInput("moment flow needs order >= 1".into()));
    }
    let (n_steps, h) = time_grid(path.t0(), path.horizon(), dt)?;
    let gamma = model.jump.moment_coeffs(order);

    let mut state: Vec<f64> = mu0.moments[..order].to_vec();
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut moments = Vec::with_capacity(n_steps + 1);
    times.push(path.t0());
    moments.push(MomentVector::new(state.clone()));

    for step in 0..n_steps {
        let t = path.t0() + step as f64 * h;
        let a = path.value_at(t).to_vec();
        let rhs = |s: f64, y: &[f64]| moment_rhs(model, &gamma, s, y, &a);
        state = rk4_step(&rhs, t, &state, h);
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("moment state after step {} (t = {})", step + 1, t + h),
            });
        }
        times.push(path.t0() + (step + 1) as f64 * h);
        moments.push(MomentVector::new(state.clone()));
    }
    MeasureFlow::new(times, moments)
}

/// Right-hand side of the moment hierarchy at time `s` with state
/// `y[k-1] = <mu, x^k>`:
/// `b k m_{k-1} + 1/2 sigma^2 k (k-1) m_{k-2} + lambda sum_i k!/(k-i)! g_i m_{k-i}`.
pub(crate) fn moment_rhs(
    model: &ModelSpec,
    gamma: &[f64],
    s: f64,
    y: &[f64],
    control: &[f64],
) -> Vec<f64> {
    let view = MomentVector::new(y.to_vec());
    let (b, sigma, lambda) = model.eval_coefficients(s, &view, control);
    moment_rhs_with_coeffs(gamma, y, b, sigma, lambda)
}

pub(crate) fn moment_rhs_with_coeffs(
    gamma: &[f64],
    y: &[f64],
    b: f64,
    sigma: f64,
    lambda: f64,
) -> Vec<f64> {
    let order = y.len();
    let moment = |k: usize| -> f64 {
        if k == 0 {
            1.0
        } else {
            y[k - 1]
        }
    };
    let mut out = Vec::with_capacity(order);
    for k in 1..=order {
        let kf = k as f64;
        let mut v = b * kf * moment(k - 1);
        if k >= 2 {
            v += 0.5 * sigma * sigma * kf * (kf - 1.0) * moment(k - 2);
        }
        if lambda != 0.0 {
            // falling factorial k!/(k-i)! accumulated incrementally
            let mut fall = 1.0;
            for i in 1..=k {
                fall *= (k - i + 1) as f64;
                v += lambda * fall * gamma[i - 1] * moment(k - i);
            }
        }
        out.push(v);
    }
    out
}

pub(crate) fn rk4_step(rhs: &impl Fn(f64, &[f64]) -> Vec<f64>, t: f64, y: &[f64], h: f64) -> Vec<f64> {
    let k1 = rhs(t, y);
    let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
    let k2 = rhs(t + 0.5 * h, &y2);
    let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
    let k3 = rhs(t + 0.5 * h, &y3);
    let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
    let k4 = rhs(t + h, &y4);
    y.iter()
        .enumerate()
        .map(|(i, a)| a + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump::JumpLaw;
    use crate::model::{ModelBounds, RunningCost, TerminalCost};
    use approx::assert_relative_eq;
    use std::collections::BTreeSet;
    use std::sync::Arc;

    fn constant_model(b: f64, sigma: f64, lambda: f64, jump: JumpLaw) -> ModelSpec {
        ModelSpec {
            drift: Arc::new(move |_, _, _| b),
            diffusion: Arc::new(move |_, _, _| sigma),
            intensity: Arc::new(move |_, _, _| lambda),
            cost: RunningCost::zero(),
            terminal: TerminalCost::Zero,
            bounds: ModelBounds {
                c0: b.abs().max(sigma.abs()).max(lambda.abs()).max(1.0),
                kappa0: 1.0,
                delta: 0.5,
            },
            moment_deps: BTreeSet::new(),
            control_grid: vec![vec![0.0]],
            jump,
        }
    }

    #[test]
    fn drift_only_mean_is_linear() {
        let model = constant_model(0.7, 0.0, 0.0, JumpLaw::PointMass { value: 0.0 });
        let path = ControlPath::constant(0.0, 2.0, vec![0.0]).unwrap();
        let mu0 = MomentVector::new(vec![0.3, 0.9]);
        let flow = moment_flow(&model, &mu0, &path, 1, 0.01).unwrap();
        assert_relative_eq!(flow.terminal().moments[0], 0.3 + 0.7 * 2.0, epsilon = 1e-12);
    }

    #[test]
    fn second_moment_quadratic_closed_form() {
        // d/dt m1 = b, d/dt m2 = 2 b m1 + sigma^2
        let (b, sigma) = (0.4, 0.8);
        let model = constant_model(b, sigma, 0.0, JumpLaw::PointMass { value: 0.0 });
        let path = ControlPath::constant(0.0, 1.5, vec![0.0]).unwrap();
        let (m1_0, m2_0) = (0.2, 0.5);
        let mu0 = MomentVector::new(vec![m1_0, m2_0]);
        let flow = moment_flow(&model, &mu0, &path, 2, 0.005).unwrap();
        let t = 1.5;
        let m2_exact = m2_0 + (2.0 * b * m1_0 + sigma * sigma) * t + b * b * t * t;
        assert_relative_eq!(flow.terminal().moments[1], m2_exact, epsilon = 1e-10);
    }

    #[test]
    fn pure_jump_mean_grows_at_lambda_times_mean_jump() {
        let (lambda, c) = (0.9, 0.4);
        let model = constant_model(0.0, 0.0, lambda, JumpLaw::PointMass { value: c });
        let path = ControlPath::constant(0.0, 1.0, vec![0.0]).unwrap();
        let flow = moment_flow(&model, &MomentVector::new(vec![0.0]), &path, 1, 0.01).unwrap();
        assert_relative_eq!(flow.terminal().moments[0], lambda * c, epsilon = 1e-12);
    }

    #[test]
    fn unclosed_system_is_rejected() {
        let mut model = constant_model(0.1, 0.0, 0.0, JumpLaw::PointMass { value: 0.0 });
        model.moment_deps = BTreeSet::from([3]);
        let path = ControlPath::constant(0.0, 1.0, vec![0.0]).unwrap();
        let err = moment_flow(&model, &MomentVector::new(vec![0.0, 0.0]), &path, 2, 0.1).unwrap_err();
        assert!(matches!(err, Error::NotClosed { needed: 3, order: 2 }));
    }

    #[test]
    fn initial_moments_must_cover_order() {
        let model = constant_model(0.1, 0.0, 0.0, JumpLaw::PointMass { value: 0.0 });
        let path = ControlPath::constant(0.0, 1.0, vec![0.0]).unwrap();
        assert!(moment_flow(&model, &MomentVector::new(vec![0.0]), &path, 3, 0.1).is_err());
    }
}
