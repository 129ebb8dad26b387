//! Exhaustive value search over piecewise-constant controls on a uniform
//! grid. The number of candidates is `|A|^n_intervals`; a hard budget makes
//! the exponential cost explicit instead of silently degrading.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::cost::cost_breakdown;
use crate::control::{Backend, SolveConfig};
use crate::dynamics::ControlPath;
use crate::error::{Error, Result};
use crate::measure::MeasureState;
use crate::model::ModelSpec;

/// Outcome of a value search. The reported value is the piecewise-constant
/// upper approximation of the value function: restricting to the control
/// grid and interval count can only increase the infimum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueResult {
    pub value: f64,
    pub control: ControlPath,
    pub backend: Backend,
    /// Running cost attributed to each control interval.
    pub interval_costs: Vec<f64>,
    pub terminal_cost: f64,
    /// Number of candidate sequences enumerated.
    pub candidates: u128,
    pub seed: u64,
}

/// Minimizes the cost functional over every control sequence of length
/// `n_intervals` with values in the model's grid. Candidates are ranked by
/// `(cost, lexicographic sequence)`, so ties break deterministically to the
/// earliest sequence; the particle backend reuses one seed across candidates
/// (common random numbers).
pub fn value_search(
    model: &ModelSpec,
    t0: f64,
    horizon: f64,
    state0: &MeasureState,
    n_intervals: usize,
    cfg: &SolveConfig,
) -> Result<ValueResult> {
    if n_intervals == 0 {
        return Err(Error::InvalidInput("value search needs n_intervals >= 1".into()));
    }
    let grid_len = model.control_grid.len() as u128;
    if grid_len == 0 {
        return Err(Error::InvalidInput("empty control grid".into()));
    }
    let raw = u32::try_from(n_intervals)
        .ok()
        .and_then(|n| grid_len.checked_pow(n));
    let count = match raw {
        Some(c) if c <= cfg.budget => c,
        _ => {
            return Err(Error::Budget {
                required: raw.unwrap_or(u128::MAX),
                budget: cfg.budget,
            })
        }
    };

    let costs: Vec<f64> = (0..count as usize)
        .into_par_iter()
        .map(|c| {
            let path = sequence_path(model, t0, horizon, n_intervals, c)?;
            let (intervals, terminal) = cost_breakdown(model, state0, &path, cfg)?;
            let total = intervals.iter().sum::<f64>() + terminal;
            if !total.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("cost of candidate sequence {c}"),
                });
            }
            Ok(total)
        })
        .collect::<Result<_>>()?;

    let best = costs
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.partial_cmp(b).expect("finite").then(i.cmp(j)))
        .map(|(i, _)| i)
        .expect("at least one candidate");

    let control = sequence_path(model, t0, horizon, n_intervals, best)?;
    let (interval_costs, terminal_cost) = cost_breakdown(model, state0, &control, cfg)?;
    Ok(ValueResult {
        value: costs[best],
        control,
        backend: cfg.backend,
        interval_costs,
        terminal_cost,
        candidates: count,
        seed: cfg.seed,
    })
}

/// Decodes candidate index `c` into its control sequence (most significant
/// digit first, so indices order sequences lexicographically).
fn sequence_path(
    model: &ModelSpec,
    t0: f64,
    horizon: f64,
    n_intervals: usize,
    c: usize,
) -> Result<ControlPath> {
    let g = model.control_grid.len();
    let mut digits = vec![0usize; n_intervals];
    let mut rem = c;
    for k in (0..n_intervals).rev() {
        digits[k] = rem % g;
        rem /= g;
    }
    let values = digits
        .iter()
        .map(|&d| model.control_grid[d].clone())
        .collect();
    ControlPath::uniform(t0, horizon, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump::JumpLaw;
    use crate::measure::ParticleMeasure;
    use crate::model::{ModelBounds, RunningCost, TerminalCost};
    use crate::xpoly::XPoly;
    use approx::assert_relative_eq;
    use std::collections::BTreeSet;
    use std::sync::Arc;

    fn base_model() -> ModelSpec {
        ModelSpec {
            drift: Arc::new(|_, _, _| 0.0),
            diffusion: Arc::new(|_, _, _| 0.0),
            intensity: Arc::new(|_, _, _| 0.0),
            cost: RunningCost::zero(),
            terminal: TerminalCost::Zero,
            bounds: ModelBounds { c0: 1.0, kappa0: 1.0, delta: 0.5 },
            moment_deps: BTreeSet::new(),
            control_grid: vec![vec![0.0]],
            jump: JumpLaw::PointMass { value: 0.0 },
        }
    }

    fn state() -> MeasureState {
        MeasureState::Particles(ParticleMeasure::uniform(vec![-0.5, 0.9]).unwrap())
    }

    #[test]
    fn control_independent_model_returns_first_sequence() {
        let mut model = base_model();
        model.control_grid = vec![vec![0.0], vec![1.0]];
        model.terminal = TerminalCost::Poly(XPoly::x_pow(1));
        let cfg = SolveConfig { dt: 0.1, order: 1, ..Default::default() };
        let out = value_search(&model, 0.0, 1.0, &state(), 3, &cfg).unwrap();
        assert_relative_eq!(out.value, 0.2, epsilon = 1e-12);
        // every control is optimal; the lexicographically-first wins
        assert!(out.control.values().iter().all(|a| a == &vec![0.0]));
        assert_eq!(out.candidates, 8);
    }

    #[test]
    fn pointwise_quadratic_cost_prefers_zero_control() {
        let mut model = base_model();
        model.control_grid = vec![vec![0.0], vec![1.0]];
        model.cost.l1 = Arc::new(|_, _, a| a[0] * a[0]);
        let cfg = SolveConfig { dt: 0.05, order: 1, ..Default::default() };
        let out = value_search(&model, 0.0, 1.0, &state(), 4, &cfg).unwrap();
        assert_relative_eq!(out.value, 0.0, epsilon = 1e-12);
        assert!(out.control.values().iter().all(|a| a == &vec![0.0]));
    }

    #[test]
    fn drift_only_minimum_mean() {
        // b(a) = a, G = <mu, x>: optimal is a = -1 throughout,
        // value <mu0, x> - (T - t)
        let mut model = base_model();
        model.drift = Arc::new(|_, _, a| a[0]);
        model.control_grid = vec![vec![-1.0], vec![0.0], vec![1.0]];
        model.terminal = TerminalCost::Poly(XPoly::x_pow(1));
        let cfg = SolveConfig { dt: 0.05, order: 1, ..Default::default() };
        let out = value_search(&model, 0.0, 1.0, &state(), 3, &cfg).unwrap();
        assert_relative_eq!(out.value, 0.2 - 1.0, epsilon = 1e-10);
        assert!(out.control.values().iter().all(|a| a == &vec![-1.0]));
        // recomputation consistency
        let recomputed: f64 = out.interval_costs.iter().sum::<f64>() + out.terminal_cost;
        assert_relative_eq!(out.value, recomputed, epsilon = 1e-10);
    }

    #[test]
    fn budget_guard_is_explicit() {
        let mut model = base_model();
        model.control_grid = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let cfg = SolveConfig { budget: 100, ..Default::default() };
        let err = value_search(&model, 0.0, 1.0, &state(), 8, &cfg).unwrap_err();
        assert!(matches!(err, Error::Budget { required: 65536, budget: 100 }));
    }

    #[test]
    fn enlarging_the_grid_never_increases_value() {
        let mut small = base_model();
        small.drift = Arc::new(|_, _, a| a[0]);
        small.control_grid = vec![vec![0.0], vec![1.0]];
        small.terminal = TerminalCost::Poly(XPoly::x_pow(1));
        let mut large = small.clone();
        large.control_grid = vec![vec![0.0], vec![1.0], vec![-1.0]];
        let cfg = SolveConfig { dt: 0.05, order: 1, ..Default::default() };
        let vs = value_search(&small, 0.0, 1.0, &state(), 3, &cfg).unwrap().value;
        let vl = value_search(&large, 0.0, 1.0, &state(), 3, &cfg).unwrap().value;
        assert!(vl <= vs + 1e-12);
    }

    #[test]
    fn refining_intervals_never_increases_value() {
        let mut model = base_model();
        model.drift = Arc::new(|_, _, a| a[0]);
        model.control_grid = vec![vec![-1.0], vec![1.0]];
        model.terminal = TerminalCost::Poly(XPoly::x_pow(1));
        model.cost.l1 = Arc::new(|t, _, a| if t < 0.5 { a[0] * a[0] } else { 0.0 });
        let cfg = SolveConfig { dt: 0.05, order: 1, ..Default::default() };
        let v2 = value_search(&model, 0.0, 1.0, &state(), 2, &cfg).unwrap().value;
        let v4 = value_search(&model, 0.0, 1.0, &state(), 4, &cfg).unwrap().value;
        assert!(v4 <= v2 + 1e-12, "refinement must not lose controls: {v4} vs {v2}");
    }
}
