//! Ready-made models for the check batteries, benchmarks, and examples.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::jump::JumpLaw;
use crate::model::{CostIntegrand, ModelBounds, ModelSpec, RunningCost, TerminalCost};
use crate::xpoly::XPoly;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Mean-field coupled jump-diffusion without control effect: drift and
/// intensity read the first two moments through saturating nonlinearities.
/// The benchmark instance for fixed-point iteration.
pub fn coupled_meanfield() -> ModelSpec {
    ModelSpec {
        drift: Arc::new(|_, m, _| 0.6 * m.moment(1).unwrap_or(0.0).tanh()),
        diffusion: Arc::new(|_, _, _| 0.25),
        intensity: Arc::new(|_, m, _| 0.3 * sigmoid(m.moment(2).unwrap_or(0.0))),
        cost: RunningCost::zero(),
        terminal: TerminalCost::Zero,
        bounds: ModelBounds {
            c0: 1.0,
            kappa0: 1.0,
            delta: 0.5,
        },
        moment_deps: BTreeSet::from([1, 2]),
        control_grid: vec![vec![0.0]],
        jump: JumpLaw::PointMass { value: 0.3 },
    }
}

/// Smooth-in-everything model for integrator order checks: coefficients vary
/// smoothly in time and in the first two moments.
pub fn smooth_meanfield() -> ModelSpec {
    ModelSpec {
        drift: Arc::new(|t, m, _| 0.5 * t.sin() + 0.3 * m.moment(1).unwrap_or(0.0).tanh()),
        diffusion: Arc::new(|t, m, _| 0.4 + 0.1 * t.cos() * m.moment(1).unwrap_or(0.0).tanh()),
        intensity: Arc::new(|_, m, _| 0.2 * (1.0 + m.moment(2).unwrap_or(0.0).tanh()) * 0.5),
        cost: RunningCost::zero(),
        terminal: TerminalCost::Zero,
        bounds: ModelBounds {
            c0: 1.0,
            kappa0: 1.0,
            delta: 0.5,
        },
        moment_deps: BTreeSet::from([1, 2]),
        control_grid: vec![vec![0.0]],
        jump: JumpLaw::Gaussian {
            mean: 0.1,
            std_dev: 0.2,
        },
    }
}

/// Pure drift control `b(a) = a` over the grid `{-1, 0, 1}` minimizing the
/// terminal mean. Closed form: the value from `(t, mu)` is
/// `<mu, x> - (horizon - t)` with the constant control `-1`.
pub fn drift_control() -> ModelSpec {
    ModelSpec {
        drift: Arc::new(|_, _, a| a[0]),
        diffusion: Arc::new(|_, _, _| 0.0),
        intensity: Arc::new(|_, _, _| 0.0),
        cost: RunningCost::zero(),
        terminal: TerminalCost::Poly(XPoly::x_pow(1)),
        bounds: ModelBounds {
            c0: 1.0,
            kappa0: 1.0,
            delta: 0.5,
        },
        moment_deps: BTreeSet::new(),
        control_grid: vec![vec![-1.0], vec![0.0], vec![1.0]],
        jump: JumpLaw::PointMass { value: 0.0 },
    }
}

/// A randomized model whose coefficients stay within a sampled bound `c0`,
/// for sublevel-set invariance batteries. Returns the model and an initial
/// point for a unit-mass start.
pub fn random_bounded(seed: u64) -> (ModelSpec, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c0: f64 = rng.random_range(0.3..0.8);
    let b_amp: f64 = rng.random_range(-1.0..1.0) * c0;
    let sigma_amp: f64 = rng.random_range(0.2..1.0) * c0;
    let lambda_amp: f64 = rng.random_range(0.0..1.0) * c0;
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let jump = if rng.random_bool(0.5) {
        JumpLaw::PointMass {
            value: rng.random_range(-0.5..0.5),
        }
    } else {
        JumpLaw::Gaussian {
            mean: rng.random_range(-0.2..0.2),
            std_dev: rng.random_range(0.05..0.3),
        }
    };
    let x0: f64 = rng.random_range(-0.5..0.5);
    let model = ModelSpec {
        drift: Arc::new(move |t, m, _| {
            b_amp * (t + phase).cos() * m.moment(1).unwrap_or(0.0).tanh().mul_add(0.5, 0.5)
        }),
        diffusion: Arc::new(move |t, _, _| sigma_amp * (0.6 + 0.4 * (t + phase).sin().abs())),
        intensity: Arc::new(move |_, m, _| lambda_amp * sigmoid(m.moment(1).unwrap_or(0.0))),
        cost: RunningCost::zero(),
        terminal: TerminalCost::Zero,
        bounds: ModelBounds {
            c0,
            kappa0: 1.0,
            delta: 0.5,
        },
        moment_deps: BTreeSet::from([1]),
        control_grid: vec![vec![0.0]],
        jump,
    };
    (model, x0)
}

/// A randomized controlled model with polynomial costs (so both value-search
/// backends apply), for dynamic-programming consistency batteries. The
/// control grid always has three elements.
pub fn random_controlled(seed: u64) -> ModelSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b_ctrl: f64 = rng.random_range(0.2..0.5);
    let b_field: f64 = rng.random_range(-0.3..0.3);
    let sigma: f64 = rng.random_range(0.1..0.4);
    let lam: f64 = rng.random_range(0.0..0.3);
    let q: f64 = rng.random_range(0.1..0.8);
    let r: f64 = rng.random_range(-0.6..0.6);
    let g1: f64 = rng.random_range(-1.0..1.0);
    let g2: f64 = rng.random_range(0.0..0.5);
    let jump = JumpLaw::PointMass {
        value: rng.random_range(-0.4..0.4),
    };
    ModelSpec {
        drift: Arc::new(move |_, m, a| {
            b_ctrl * a[0] + b_field * m.moment(1).unwrap_or(0.0).tanh()
        }),
        diffusion: Arc::new(move |_, _, _| sigma),
        intensity: Arc::new(move |_, _, a| lam * (1.0 + a[0])),
        cost: RunningCost {
            l1: Arc::new(move |_, _, a| q * a[0] * a[0]),
            l2: Arc::new(|_| 1.0),
            l3: CostIntegrand::Poly(XPoly::new(vec![0.0, r])),
        },
        terminal: TerminalCost::Poly(XPoly::new(vec![0.0, g1, g2])),
        bounds: ModelBounds {
            c0: 1.0,
            kappa0: 1.0,
            delta: 0.5,
        },
        moment_deps: BTreeSet::from([1]),
        control_grid: vec![vec![0.0], vec![0.5], vec![1.0]],
        jump,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_pass_structural_validation() {
        coupled_meanfield().validate().unwrap();
        smooth_meanfield().validate().unwrap();
        drift_control().validate().unwrap();
        for seed in 0..5 {
            let (model, _) = random_bounded(seed);
            model.validate_sampled(200, seed).unwrap();
            random_controlled(seed).validate().unwrap();
        }
    }
}
