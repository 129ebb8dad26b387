//! Dynamic-programming residual: the value over the whole horizon against
//! the best two-stage split at an intermediate breakpoint. An exhaustive
//! search satisfies the recursion by construction, so the residual measures
//! implementation consistency (grid alignment, flow chaining, quadrature
//! splitting), not a modeling property.

use crate::control::cost::{cost_breakdown, moment_flow_chained};
use crate::control::value::value_search;
use crate::control::{Backend, SolveConfig};
use crate::dynamics::ControlPath;
use crate::error::{Error, Result};
use crate::measure::MeasureState;
use crate::model::ModelSpec;

/// `| V(t0, mu0) - min_{first stage} [ stage cost + V(theta, mu_theta) ] |`
/// with both sides evaluated by exhaustive search on aligned uniform grids.
/// `theta` must be one of the `n_intervals + 1` uniform breakpoints.
pub fn dpp_residual(
    model: &ModelSpec,
    t0: f64,
    horizon: f64,
    state0: &MeasureState,
    theta: f64,
    n_intervals: usize,
    cfg: &SolveConfig,
) -> Result<f64> {
    if cfg.backend != Backend::Moment {
        return Err(Error::CostBackend {
            term: "dynamic-programming residual (needs deterministic flows)".into(),
            backend: cfg.backend.to_string(),
        });
    }
    let span = horizon - t0;
    if !(span > 0.0) || n_intervals == 0 {
        return Err(Error::InvalidInput("dpp needs a positive horizon and n_intervals >= 1".into()));
    }
    let step = span / n_intervals as f64;
    let ratio = (theta - t0) / step;
    let split = ratio.round() as usize;
    if (ratio - ratio.round()).abs() > 1e-9 || !(0..=n_intervals).contains(&split) {
        return Err(Error::GridMismatch(format!(
            "theta = {theta} is not a breakpoint of the {n_intervals}-interval grid on [{t0}, {horizon}]"
        )));
    }

    let full = value_search(model, t0, horizon, state0, n_intervals, cfg)?.value;

    // degenerate splits: empty first or second stage
    if split == 0 {
        return Ok((full - value_search(model, t0, horizon, state0, n_intervals, cfg)?.value).abs());
    }
    let two_stage = if split == n_intervals {
        // second stage is the terminal cost alone
        best_first_stage(model, t0, theta, state0, split, cfg, |mu_theta| {
            model.terminal_cost(&MeasureState::Moments(mu_theta.clone()))
        })?
    } else {
        let tail = n_intervals - split;
        best_first_stage(model, t0, theta, state0, split, cfg, |mu_theta| {
            Ok(value_search(
                model,
                theta,
                horizon,
                &MeasureState::Moments(mu_theta.clone()),
                tail,
                cfg,
            )?
            .value)
        })?
    };

    Ok((full - two_stage).abs())
}

/// Minimum over first-stage sequences of `stage cost + continuation(mu_theta)`.
fn best_first_stage(
    model: &ModelSpec,
    t0: f64,
    theta: f64,
    state0: &MeasureState,
    n_first: usize,
    cfg: &SolveConfig,
    continuation: impl Fn(&crate::measure::MomentVector) -> Result<f64>,
) -> Result<f64> {
    let g = model.control_grid.len() as u128;
    let count = u32::try_from(n_first)
        .ok()
        .and_then(|n| g.checked_pow(n))
        .filter(|&c| c <= cfg.budget)
        .ok_or(Error::Budget {
            required: u128::MAX,
            budget: cfg.budget,
        })?;
    let mu0 = state0.moments(cfg.order)?;
    let mut best = f64::INFINITY;
    for c in 0..count as usize {
        let mut digits = vec![0usize; n_first];
        let mut rem = c;
        for k in (0..n_first).rev() {
            digits[k] = rem % model.control_grid.len();
            rem /= model.control_grid.len();
        }
        let values: Vec<Vec<f64>> = digits.iter().map(|&d| model.control_grid[d].clone()).collect();
        let path = ControlPath::uniform(t0, theta, values)?;
        let (intervals, _terminal_unused) = {
            // stage cost only: suppress the terminal cost by summing intervals
            cost_breakdown(model, state0, &path, cfg)?
        };
        let stage_cost: f64 = intervals.iter().sum();
        let mu_theta = moment_flow_chained(model, &mu0, &path, cfg)?;
        let total = stage_cost + continuation(&mu_theta)?;
        if total < best {
            best = total;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump::JumpLaw;
    use crate::measure::MomentVector;
    use crate::model::{ModelBounds, ModelSpec, RunningCost, TerminalCost};
    use crate::xpoly::XPoly;
    use std::collections::BTreeSet;
    use std::sync::Arc;

    fn controlled_model() -> ModelSpec {
        ModelSpec {
            drift: Arc::new(|_, m, a| 0.4 * a[0] + 0.2 * m.moment(1).unwrap_or(0.0).tanh()),
            diffusion: Arc::new(|_, _, _| 0.3),
            intensity: Arc::new(|_, _, a| 0.2 * (1.0 + a[0])),
            cost: RunningCost {
                l1: Arc::new(|_, _, a| 0.5 * a[0] * a[0]),
                l2: Arc::new(|_| 1.0),
                l3: crate::model::CostIntegrand::Poly(XPoly::x_pow(1)),
            },
            terminal: TerminalCost::Poly(XPoly::new(vec![0.0, 1.0, 0.5])),
            bounds: ModelBounds { c0: 1.0, kappa0: 1.0, delta: 0.5 },
            moment_deps: BTreeSet::from([1]),
            control_grid: vec![vec![0.0], vec![0.5], vec![1.0]],
            jump: JumpLaw::PointMass { value: 0.25 },
        }
    }

    fn state() -> MeasureState {
        MeasureState::Moments(MomentVector::new(vec![0.1, 0.4, 0.2, 0.3]))
    }

    #[test]
    fn residual_vanishes_at_interior_breakpoints() {
        let model = controlled_model();
        let cfg = SolveConfig { dt: 0.05, order: 4, ..Default::default() };
        for split in 1..4 {
            let theta = split as f64 * 0.25;
            let r = dpp_residual(&model, 0.0, 1.0, &state(), theta, 4, &cfg).unwrap();
            assert!(r <= 1e-9, "residual {r} at theta = {theta}");
        }
    }

    #[test]
    fn degenerate_splits_vanish() {
        let model = controlled_model();
        let cfg = SolveConfig { dt: 0.05, order: 4, ..Default::default() };
        let r0 = dpp_residual(&model, 0.0, 1.0, &state(), 0.0, 4, &cfg).unwrap();
        let r1 = dpp_residual(&model, 0.0, 1.0, &state(), 1.0, 4, &cfg).unwrap();
        assert!(r0 <= 1e-12, "empty first stage: {r0}");
        assert!(r1 <= 1e-9, "theta at horizon: {r1}");
    }

    #[test]
    fn misaligned_theta_is_rejected() {
        let model = controlled_model();
        let cfg = SolveConfig { dt: 0.05, order: 4, ..Default::default() };
        let err = dpp_residual(&model, 0.0, 1.0, &state(), 0.3, 4, &cfg).unwrap_err();
        assert!(matches!(err, Error::GridMismatch(_)));
    }
}
