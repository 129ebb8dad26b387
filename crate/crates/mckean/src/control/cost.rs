//! Cost of a fixed control: running cost integrated by the trapezoid rule on
//! the simulation grid plus the terminal cost.

use crate::control::{Backend, SolveConfig};
use crate::dynamics::{moment_flow, simulate_particles, ControlPath, ParticleSimParams};
use crate::error::{Error, Result};
use crate::measure::{MeasureState, MomentVector};
use crate::model::ModelSpec;

/// Total cost of following `path` from `state0`. Moment backend integrates
/// each control interval separately (so interval boundaries are exact grid
/// points); particle backend runs one ensemble over the whole horizon with
/// the shared seed.
pub fn cost_functional(
    model: &ModelSpec,
    state0: &MeasureState,
    path: &ControlPath,
    cfg: &SolveConfig,
) -> Result<f64> {
    let (intervals, terminal) = cost_breakdown(model, state0, path, cfg)?;
    Ok(intervals.iter().sum::<f64>() + terminal)
}

/// Per-control-interval running costs and the terminal cost.
pub(crate) fn cost_breakdown(
    model: &ModelSpec,
    state0: &MeasureState,
    path: &ControlPath,
    cfg: &SolveConfig,
) -> Result<(Vec<f64>, f64)> {
    match cfg.backend {
        Backend::Moment => moment_cost(model, state0, path, cfg),
        Backend::Particle => particle_cost(model, state0, path, cfg),
    }
}

/// Moment-backend flow across the whole path, chaining interval integrations;
/// used by the dynamic-programming split so stage flows coincide bitwise with
/// full flows.
pub(crate) fn moment_flow_chained(
    model: &ModelSpec,
    mu0: &MomentVector,
    path: &ControlPath,
    cfg: &SolveConfig,
) -> Result<MomentVector> {
    let mut state = mu0.clone();
    for k in 0..path.values().len() {
        let (a, b) = (path.breakpoints()[k], path.breakpoints()[k + 1]);
        let leg = ControlPath::new(vec![a, b], vec![path.values()[k].clone()])?;
        let flow = moment_flow(model, &state, &leg, cfg.order, cfg.dt)?;
        state = flow.terminal().clone();
    }
    Ok(state)
}

fn moment_cost(
    model: &ModelSpec,
    state0: &MeasureState,
    path: &ControlPath,
    cfg: &SolveConfig,
) -> Result<(Vec<f64>, f64)> {
    let mut state = state0.moments(cfg.order)?;
    let mut intervals = Vec::with_capacity(path.values().len());
    for k in 0..path.values().len() {
        let (a, b) = (path.breakpoints()[k], path.breakpoints()[k + 1]);
        let control = path.values()[k].clone();
        let leg = ControlPath::new(vec![a, b], vec![control.clone()])?;
        let flow = moment_flow(model, &state, &leg, cfg.order, cfg.dt)?;
        let mut integral = 0.0;
        let h = flow.times[1] - flow.times[0];
        let costs: Vec<f64> = flow
            .times
            .iter()
            .zip(&flow.moments)
            .map(|(&t, m)| model.running_cost(t, &MeasureState::Moments(m.clone()), &control))
            .collect::<Result<_>>()?;
        for w in costs.windows(2) {
            integral += 0.5 * (w[0] + w[1]) * h;
        }
        intervals.push(integral);
        state = flow.terminal().clone();
    }
    let terminal = model.terminal_cost(&MeasureState::Moments(state))?;
    Ok((intervals, terminal))
}

fn particle_cost(
    model: &ModelSpec,
    state0: &MeasureState,
    path: &ControlPath,
    cfg: &SolveConfig,
) -> Result<(Vec<f64>, f64)> {
    let mu0 = match state0 {
        MeasureState::Particles(mu) => mu.clone(),
        MeasureState::Moments(_) => {
            return Err(Error::CostBackend {
                term: "initial measure (moment vectors have no particle representation)".into(),
                backend: "particle".into(),
            })
        }
    };
    let params = ParticleSimParams {
        dt: cfg.dt,
        n_particles: cfg.n_particles,
        seed: cfg.seed,
        record_order: cfg.order.max(model.required_moment_order()),
        snapshot_every: Some(1),
    };
    let out = simulate_particles(model, &mu0, path, &params)?;
    let costs: Vec<f64> = out
        .snapshots
        .iter()
        .map(|(t, cloud)| {
            model.running_cost(*t, &MeasureState::Particles(cloud.clone()), path.value_at(*t))
        })
        .collect::<Result<_>>()?;
    let times: Vec<f64> = out.snapshots.iter().map(|(t, _)| *t).collect();

    // trapezoid per step, attributed to the control interval containing it
    let mut intervals = vec![0.0; path.values().len()];
    for i in 0..times.len() - 1 {
        let h = times[i + 1] - times[i];
        let piece = 0.5 * (costs[i] + costs[i + 1]) * h;
        let k = interval_index(path, times[i]);
        intervals[k] += piece;
    }
    let terminal = model.terminal_cost(&MeasureState::Particles(out.terminal))?;
    Ok((intervals, terminal))
}

fn interval_index(path: &ControlPath, t: f64) -> usize {
    match path.breakpoints()[1..].iter().position(|&b| t < b) {
        Some(k) => k,
        None => path.values().len() - 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump::JumpLaw;
    use crate::measure::ParticleMeasure;
    use crate::model::{CostIntegrand, ModelBounds, RunningCost, TerminalCost};
    use crate::xpoly::XPoly;
    use approx::assert_relative_eq;
    use std::collections::BTreeSet;
    use std::sync::Arc;

    fn frozen_model() -> ModelSpec {
        ModelSpec {
            drift: Arc::new(|_, _, _| 0.0),
            diffusion: Arc::new(|_, _, _| 0.0),
            intensity: Arc::new(|_, _, _| 0.0),
            cost: RunningCost::zero(),
            terminal: TerminalCost::Poly(XPoly::x_pow(1)),
            bounds: ModelBounds { c0: 1.0, kappa0: 1.0, delta: 0.5 },
            moment_deps: BTreeSet::new(),
            control_grid: vec![vec![0.0]],
            jump: JumpLaw::PointMass { value: 0.0 },
        }
    }

    #[test]
    fn frozen_dynamics_mean_terminal_cost() {
        let model = frozen_model();
        let mu0 = ParticleMeasure::uniform(vec![0.2, 0.8]).unwrap();
        let path = ControlPath::constant(0.0, 1.0, vec![0.0]).unwrap();
        let cfg = SolveConfig { dt: 0.05, order: 2, ..Default::default() };
        let v = cost_functional(&model, &MeasureState::Particles(mu0), &path, &cfg).unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn unit_running_cost_integrates_horizon() {
        let mut model = frozen_model();
        model.cost.l1 = Arc::new(|_, _, _| 1.0);
        model.terminal = TerminalCost::Zero;
        let mu0 = ParticleMeasure::dirac(0.0);
        let path = ControlPath::constant(0.25, 1.75, vec![0.0]).unwrap();
        let cfg = SolveConfig { dt: 0.05, order: 1, ..Default::default() };
        let v = cost_functional(&model, &MeasureState::Particles(mu0), &path, &cfg).unwrap();
        assert_relative_eq!(v, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn drift_only_closed_form() {
        // b(a) = a, L = 0, G = <mu, x>: cost = <mu0, x> + a (T - t)
        let mut model = frozen_model();
        model.drift = Arc::new(|_, _, a| a[0]);
        model.control_grid = vec![vec![-1.0], vec![0.0], vec![1.0]];
        let mu0 = ParticleMeasure::uniform(vec![-0.5, 0.9]).unwrap();
        let path = ControlPath::constant(0.0, 2.0, vec![1.0]).unwrap();
        let cfg = SolveConfig { dt: 0.1, order: 1, ..Default::default() };
        let v = cost_functional(&model, &MeasureState::Particles(mu0.clone()), &path, &cfg).unwrap();
        assert_relative_eq!(v, 0.2 + 2.0, epsilon = 1e-10);
    }

    #[test]
    fn backends_agree_on_polynomial_costs() {
        let mut model = frozen_model();
        model.drift = Arc::new(|_, _, _| 0.4);
        model.diffusion = Arc::new(|_, _, _| 0.5);
        model.cost = RunningCost {
            l1: Arc::new(|_, _, _| 0.0),
            l2: Arc::new(|_| 1.0),
            l3: CostIntegrand::Poly(XPoly::x_pow(2)),
        };
        let mu0 = ParticleMeasure::uniform(vec![-0.3, 0.0, 0.3]).unwrap();
        let path = ControlPath::constant(0.0, 1.0, vec![0.0]).unwrap();
        let m_cfg = SolveConfig { dt: 0.02, order: 2, ..Default::default() };
        let p_cfg = SolveConfig {
            backend: Backend::Particle,
            n_particles: 60_000,
            seed: 5,
            ..m_cfg.clone()
        };
        let state = MeasureState::Particles(mu0);
        let vm = cost_functional(&model, &state, &path, &m_cfg).unwrap();
        let vp = cost_functional(&model, &state, &path, &p_cfg).unwrap();
        assert!((vm - vp).abs() < 0.02, "moment {vm} vs particle {vp}");
    }

    #[test]
    fn non_polynomial_cost_rejected_on_moment_backend() {
        let mut model = frozen_model();
        model.cost = RunningCost {
            l1: Arc::new(|_, _, _| 0.0),
            l2: Arc::new(|_| 1.0),
            l3: CostIntegrand::CappedExp { cap: 1.0 },
        };
        let mu0 = ParticleMeasure::dirac(0.1);
        let path = ControlPath::constant(0.0, 1.0, vec![0.0]).unwrap();
        let cfg = SolveConfig { dt: 0.1, order: 2, ..Default::default() };
        let err = cost_functional(&model, &MeasureState::Particles(mu0), &path, &cfg).unwrap_err();
        assert!(matches!(err, Error::CostBackend { .. }));
    }
}
