//! Interacting-particle Monte Carlo for the controlled jump-diffusion:
//! Euler-Maruyama steps with Poisson-count jumps, coupled through the
//! ensemble's own empirical moments. Each particle owns a counter-based RNG
//! stream derived from `(seed, particle index)`, so trajectories are
//! bit-identical for a fixed seed regardless of thread count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{time_grid, ControlPath, MeasureFlow};
use crate::error::{Error, Result};
use crate::measure::{e_delta, ExpMomentParams, MomentVector, ParticleMeasure};
use crate::model::ModelSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParticleSimParams {
    pub dt: f64,
    pub n_particles: usize,
    pub seed: u64,
    /// Moment order recorded in the output flow.
    pub record_order: usize,
    /// Record a full particle snapshot every this many steps (the initial and
    /// terminal clouds are always included when set).
    pub snapshot_every: Option<usize>,
}

impl ParticleSimParams {
    pub fn new(dt: f64, n_particles: usize, seed: u64) -> Self {
        Self {
            dt,
            n_particles,
            seed,
            record_order: 4,
            snapshot_every: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParticleSimOutput {
    /// Per-time empirical moments, with the `e_delta` estimate attached.
    pub flow: MeasureFlow,
    /// Standard error of the `e_delta` estimate at each grid time.
    pub exp_moment_se: Vec<f64>,
    /// The exponential-moment estimates themselves (same order as `flow.times`).
    pub exp_moment: Vec<f64>,
    pub snapshots: Vec<(f64, ParticleMeasure)>,
    pub terminal: ParticleMeasure,
    pub seed: u64,
}

/// Runs the interacting-particle scheme from `mu0` along `path`.
///
/// When `params.n_particles` equals the support size of `mu0`, its atoms and
/// weights are used directly (weighted particles evolve with their weights
/// intact); otherwise `n_particles` positions are resampled i.i.d. from `mu0`
/// with uniform weights.
pub fn simulate_particles(
    model: &ModelSpec,
    mu0: &ParticleMeasure,
    path: &ControlPath,
    params: &ParticleSimParams,
) -> Result<ParticleSimOutput> {
    model.validate()?;
    if params.n_particles == 0 {
        return Err(Error::InvalidInput("need at least one particle".into()));
    }
    let (n_steps, h) = time_grid(path.t0(), path.horizon(), params.dt)?;
    let delta = model.bounds.delta;
    let needed_order = model.required_moment_order().max(params.record_order);

    let (mut positions, weights) = initial_cloud(mu0, params);
    let mut rngs: Vec<ChaCha8Rng> = (0..positions.len())
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(i as u64);
            rng
        })
        .collect();

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut flow_moments = Vec::with_capacity(n_steps + 1);
    let mut exp_moment = Vec::with_capacity(n_steps + 1);
    let mut exp_moment_se = Vec::with_capacity(n_steps + 1);
    let mut snapshots = Vec::new();

    let sqrt_h = h.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    for step in 0..=n_steps {
        let t = path.t0() + step as f64 * h;
        let stats = ensemble_stats(&positions, &weights, needed_order, delta);
        times.push(t);
        flow_moments.push(MomentVector::with_exp_moment(
            stats.moments[..params.record_order.min(needed_order)].to_vec(),
            stats.exp_estimate,
        ));
        exp_moment.push(stats.exp_estimate);
        exp_moment_se.push(stats.exp_se);
        if let Some(every) = params.snapshot_every {
            if step % every.max(1) == 0 || step == n_steps {
                snapshots.push((t, ParticleMeasure::new(positions.clone(), weights.clone())?));
            }
        }
        if step == n_steps {
            break;
        }

        let control = path.value_at(t);
        let coeff_view = MomentVector::new(stats.moments[..model.required_moment_order()].to_vec());
        let (b, sigma, lambda) = model.eval_coefficients(t, &coeff_view, control);
        for (name, v) in [("drift", b), ("diffusion", sigma), ("intensity", lambda)] {
            if !v.is_finite() || v.abs() > model.bounds.c0 + 1e-9 {
                return Err(Error::Assumption(format!(
                    "{name} = {v} escapes the c0 bound at t = {t} on the visited range"
                )));
            }
        }
        if lambda < 0.0 {
            return Err(Error::Assumption(format!("negative intensity {lambda} at t = {t}")));
        }

        let jump_rate = lambda * h;
        let poisson = if jump_rate > 0.0 {
            Some(Poisson::new(jump_rate).map_err(|e| Error::InvalidInput(format!("poisson: {e}")))?)
        } else {
            None
        };
        let jump = &model.jump;

        positions
            .par_iter_mut()
            .zip(rngs.par_iter_mut())
            .for_each(|(x, rng)| {
                let z: f64 = normal.sample(rng);
                let mut next = *x + b * h + sigma * sqrt_h * z;
                if let Some(p) = &poisson {
                    let count = p.sample(rng) as u64;
                    for _ in 0..count {
                        next += jump.sample(rng);
                    }
                }
                *x = next;
            });

        if let Some(bad) = positions.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: format!(
                    "particle {bad} after step {} (t = {}, b = {b}, sigma = {sigma}, lambda = {lambda})",
                    step + 1,
                    t + h
                ),
            });
        }
    }

    let terminal = ParticleMeasure::new(positions, weights)?;
    Ok(ParticleSimOutput {
        flow: MeasureFlow::new(times, flow_moments)?,
        exp_moment_se,
        exp_moment,
        snapshots,
        terminal,
        seed: params.seed,
    })
}

fn initial_cloud(mu0: &ParticleMeasure, params: &ParticleSimParams) -> (Vec<f64>, Vec<f64>) {
    if mu0.len() == params.n_particles {
        return (mu0.points().to_vec(), mu0.weights().to_vec());
    }
    // i.i.d. resampling stream, placed after all particle streams
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(params.n_particles as u64);
    let points = (0..params.n_particles)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (&x, &w) in mu0.points().iter().zip(mu0.weights()) {
                acc += w;
                if u <= acc {
                    return x;
                }
            }
            *mu0.points().last().expect("non-empty")
        })
        .collect();
    let w = 1.0 / params.n_particles as f64;
    (points, vec![w; params.n_particles])
}

struct EnsembleStats {
    moments: Vec<f64>,
    exp_estimate: f64,
    exp_se: f64,
}

// summed serially so results do not depend on thread count
fn ensemble_stats(positions: &[f64], weights: &[f64], order: usize, delta: f64) -> EnsembleStats {
    let mut moments = vec![0.0; order];
    let mut exp_estimate = 0.0;
    for (&x, &w) in positions.iter().zip(weights) {
        let mut p = 1.0;
        for m in moments.iter_mut() {
            p *= x;
            *m += w * p;
        }
        exp_estimate += w * e_delta(x, delta);
    }
    let mut var = 0.0;
    for (&x, &w) in positions.iter().zip(weights) {
        let d = e_delta(x, delta) - exp_estimate;
        var += w * w * d * d;
    }
    EnsembleStats {
        moments,
        exp_estimate,
        exp_se: var.sqrt(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvarianceRow {
    pub t: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub envelope: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub rows: Vec<InvarianceRow>,
    pub ok: bool,
}

/// Checks the sublevel-set invariance along a simulated ensemble: flags any
/// grid time where the Monte Carlo estimate of `<mu_t, e_delta>` exceeds the
/// envelope `N e^{K* t}` by more than three standard errors.
pub fn invariance_check(output: &ParticleSimOutput, params: &ExpMomentParams) -> InvarianceReport {
    let rows: Vec<InvarianceRow> = output
        .flow
        .times
        .iter()
        .zip(output.exp_moment.iter().zip(&output.exp_moment_se))
        .map(|(&t, (&est, &se))| {
            let envelope = params.envelope(t);
            // small slack so pure floating noise in an exactly-tight estimate
            // does not raise a flag
            let slack = 1e-9 * (1.0 + envelope.abs());
            InvarianceRow {
                t,
                estimate: est,
                std_error: se,
                envelope,
                flagged: est - 3.0 * se > envelope + slack,
            }
        })
        .collect();
    let ok = rows.iter().all(|r| !r.flagged);
    InvarianceReport { rows, ok }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump::JumpLaw;
    use crate::model::{ModelBounds, RunningCost, TerminalCost};
    use approx::assert_relative_eq;
    use std::collections::BTreeSet;
    use std::sync::Arc;

    pub(crate) fn constant_model(b: f64, sigma: f64, lambda: f64, jump: JumpLaw) -> ModelSpec {
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

    fn params(dt: f64, n: usize, seed: u64) -> ParticleSimParams {
        ParticleSimParams::new(dt, n, seed)
    }

    #[test]
    fn frozen_dynamics_keeps_particles_in_place() {
        let model = constant_model(0.0, 0.0, 0.0, JumpLaw::PointMass { value: 0.0 });
        let mu0 = ParticleMeasure::uniform(vec![-1.0, 0.5, 2.0]).unwrap();
        let path = ControlPath::constant(0.0, 1.0, vec![0.0]).unwrap();
        let out = simulate_particles(&model, &mu0, &path, &params(0.1, 3, 7)).unwrap();
        assert_eq!(out.terminal.points(), mu0.points());
    }

    #[test]
    fn pure_drift_translates_exactly() {
        let model = constant_model(0.8, 0.0, 0.0, JumpLaw::PointMass { value: 0.0 });
        let mu0 = ParticleMeasure::uniform(vec![-1.0, 0.0, 1.0]).unwrap();
        let path = ControlPath::constant(0.0, 2.0, vec![0.0]).unwrap();
        let out = simulate_particles(&model, &mu0, &path, &params(0.125, 3, 7)).unwrap();
        for (x, x0) in out.terminal.points().iter().zip(mu0.points()) {
            assert_relative_eq!(*x, x0 + 0.8 * 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn compound_poisson_mean_displacement() {
        let (lambda, c) = (0.9, 0.5);
        let model = constant_model(0.0, 0.0, lambda, JumpLaw::PointMass { value: c });
        let mu0 = ParticleMeasure::dirac(0.0);
        let path = ControlPath::constant(0.0, 1.0, vec![0.0]).unwrap();
        let n = 100_000;
        let out = simulate_particles(&model, &mu0, &path, &params(0.02, n, 11)).unwrap();
        let mean = out.terminal.pair(|x| x).unwrap();
        let expect = lambda * c;
        // var of one compound-Poisson endpoint: lambda t c^2
        let se = (lambda * c * c / n as f64).sqrt();
        assert!(
            (mean - expect).abs() <= 3.0 * se,
            "mean {mean} vs {expect} (se {se})"
        );
    }

    #[test]
    fn seeded_runs_are_bitwise_identical() {
        let model = constant_model(0.3, 0.4, 0.5, JumpLaw::Gaussian { mean: 0.1, std_dev: 0.2 });
        let mu0 = ParticleMeasure::uniform(vec![0.0, 0.1, -0.1, 0.2]).unwrap();
        let path = ControlPath::constant(0.0, 1.0, vec![0.0]).unwrap();
        let mut p = params(0.05, 200, 33);
        p.snapshot_every = Some(1);
        let a = simulate_particles(&model, &mu0, &path, &p).unwrap();
        let b = simulate_particles(&model, &mu0, &path, &p).unwrap();
        assert_eq!(a.terminal, b.terminal);
        assert_eq!(a.snapshots.len(), b.snapshots.len());
        for ((ta, sa), (tb, sb)) in a.snapshots.iter().zip(&b.snapshots) {
            assert_eq!(ta, tb);
            assert_eq!(sa, sb);
        }
    }

    #[test]
    fn invariance_trivial_point_mass() {
        let jump = JumpLaw::PointMass { value: 0.0 };
        let model = constant_model(0.0, 0.0, 0.0, jump.clone());
        let mu0 = ParticleMeasure::dirac(0.0);
        let path = ControlPath::constant(0.0, 1.0, vec![0.0]).unwrap();
        let out = simulate_particles(&model, &mu0, &path, &params(0.1, 50, 3)).unwrap();
        let exp_params = ExpMomentParams::new(1.0, 0.5, 1.0, &jump).unwrap();
        let report = invariance_check(&out, &exp_params);
        assert!(report.ok);
        for row in &report.rows {
            assert_relative_eq!(row.estimate, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn invariance_drift_envelope() {
        // deterministic drift at the full c0 rate stays inside the envelope
        let c0 = 0.7;
        let jump = JumpLaw::PointMass { value: 0.0 };
        let model = constant_model(c0, 0.0, 0.0, jump.clone());
        let x0 = 0.4;
        let mu0 = ParticleMeasure::dirac(x0);
        let path = ControlPath::constant(0.0, 1.5, vec![0.0]).unwrap();
        let out = simulate_particles(&model, &mu0, &path, &params(0.05, 40, 5)).unwrap();
        let level = e_delta(x0, 0.5) + 1e-9;
        let exp_params = ExpMomentParams::new(c0, 0.5, level, &jump).unwrap();
        let report = invariance_check(&out, &exp_params);
        assert!(report.ok, "drift-only flow escaped the envelope: {report:?}");
    }

    #[test]
    fn resampling_draws_from_initial_law() {
        let mu0 = ParticleMeasure::new(vec![-1.0, 1.0], vec![0.25, 0.75]).unwrap();
        let model = constant_model(0.0, 0.0, 0.0, JumpLaw::PointMass { value: 0.0 });
        let path = ControlPath::constant(0.0, 0.5, vec![0.0]).unwrap();
        let out = simulate_particles(&model, &mu0, &path, &params(0.1, 50_000, 17)).unwrap();
        let mean = out.terminal.pair(|x| x).unwrap();
        assert!((mean - 0.5).abs() < 0.02, "resampled mean {mean}");
    }
}
