//! The operator `L^{a,mu}_t` acting on polynomials in `x`:
//! drift `b f'`, diffusion `1/2 sigma^2 f''`, and the non-local jump part,
//! which for a polynomial `f` collapses by Taylor expansion to the exact
//! finite sum `lambda sum_i m_i f^(i)`. Also the Hamiltonian over the finite
//! control grid and cylindrical test functions with their linear derivative.

use std::sync::Arc;

use crate::error::Result;
use crate::measure::MeasureState;
use crate::model::ModelSpec;
use crate::xpoly::XPoly;

/// Applies the generator to `f`, with coefficients evaluated at
/// `(t, moments of the state, control)`. Exact for polynomials: the jump
/// integral is replaced by its Taylor form. Errors when the state lacks a
/// moment the coefficients read.
pub fn apply_generator(
    f: &XPoly,
    t: f64,
    state: &MeasureState,
    control: &[f64],
    model: &ModelSpec,
) -> Result<XPoly> {
    let moments = state.moments(model.required_moment_order())?;
    let (b, sigma, lambda) = model.eval_coefficients(t, &moments, control);
    let mut out = f.derivative(1).scale(b);
    out = out.add(&f.derivative(2).scale(0.5 * sigma * sigma));
    if lambda != 0.0 && f.degree() >= 1 {
        let m = model.jump.moment_coeffs(f.degree());
        let mut jump_part = XPoly::zero();
        for i in 1..=f.degree() {
            let coeff = m[i - 1];
            if coeff != 0.0 {
                jump_part = jump_part.add(&f.derivative(i).scale(coeff));
            }
        }
        out = out.add(&jump_part.scale(lambda));
    }
    Ok(out)
}

/// `<mu, L^{a,mu}_t[f]>`.
pub fn expected_generator(
    f: &XPoly,
    t: f64,
    state: &MeasureState,
    control: &[f64],
    model: &ModelSpec,
) -> Result<f64> {
    let image = apply_generator(f, t, state, control, model)?;
    state.pair_xpoly(&image)
}

/// `H(t, mu, v) = max_a [ -L(t, mu, a) - <mu, L^{a,mu}_t[v]> ]` over the
/// model's control grid. Returns the value and the index of the first
/// maximizing grid element (ties break to the earliest).
pub fn hamiltonian(
    t: f64,
    state: &MeasureState,
    v: &XPoly,
    model: &ModelSpec,
) -> Result<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (idx, a) in model.control_grid.iter().enumerate() {
        let l = model.running_cost(t, state, a)?;
        let gen = expected_generator(v, t, state, a, model)?;
        let h = -l - gen;
        match best {
            Some((value, _)) if h <= value => {}
            _ => best = Some((h, idx)),
        }
    }
    best.ok_or_else(|| crate::error::Error::InvalidInput("empty control grid".into()))
}

/// A cylindrical function `phi(t, mu) = F(t, <mu, f>)` with `f` polynomial,
/// carrying the closed-form partials of `F`. Its linear derivative is
/// `D_m phi(t, mu, x) = dF/dy(t, <mu, f>) f(x)` by the chain rule.
#[derive(Clone)]
pub struct CylindricalTest {
    pub f: XPoly,
    pub outer: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub outer_dt: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub outer_dy: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl CylindricalTest {
    /// The linear map `phi(t, mu) = <mu, f>` itself.
    pub fn linear(f: XPoly) -> Self {
        Self {
            f,
            outer: Arc::new(|_t, y| y),
            outer_dt: Arc::new(|_t, _y| 0.0),
            outer_dy: Arc::new(|_t, _y| 1.0),
        }
    }

    pub fn eval(&self, t: f64, state: &MeasureState) -> Result<f64> {
        Ok((self.outer)(t, state.pair_xpoly(&self.f)?))
    }

    pub fn time_derivative(&self, t: f64, state: &MeasureState) -> Result<f64> {
        Ok((self.outer_dt)(t, state.pair_xpoly(&self.f)?))
    }

    /// `D_m phi(t, mu, .)` as a polynomial in `x`.
    pub fn linear_derivative(&self, t: f64, state: &MeasureState) -> Result<XPoly> {
        let y = state.pair_xpoly(&self.f)?;
        Ok(self.f.scale((self.outer_dy)(t, y)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump::JumpLaw;
    use crate::measure::{MomentVector, ParticleMeasure};
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

    fn any_state() -> MeasureState {
        MeasureState::Particles(ParticleMeasure::uniform(vec![-0.5, 0.5, 1.0]).unwrap())
    }

    #[test]
    fn generator_on_identity_polynomial() {
        // b=2, sigma=3, lambda=1, jump mean 1/2: L[x] = 2 + 1 * (1/2) = 5/2
        let model = constant_model(2.0, 3.0, 1.0, JumpLaw::PointMass { value: 0.5 });
        let out = apply_generator(&XPoly::x_pow(1), 0.0, &any_state(), &[0.0], &model).unwrap();
        assert_eq!(out.degree(), 0);
        assert_relative_eq!(out.coeff(0), 2.5);
        let e = expected_generator(&XPoly::x_pow(1), 0.0, &any_state(), &[0.0], &model).unwrap();
        assert_relative_eq!(e, 2.5);
    }

    #[test]
    fn zero_intensity_is_pure_diffusion() {
        let model = constant_model(1.5, 2.0, 0.0, JumpLaw::PointMass { value: 9.0 });
        let f = XPoly::new(vec![0.0, 0.0, 1.0]); // x^2
        let out = apply_generator(&f, 0.0, &any_state(), &[0.0], &model).unwrap();
        // b * 2x + 0.5 sigma^2 * 2
        assert_eq!(out, XPoly::new(vec![4.0, 3.0]));
    }

    #[test]
    fn generator_kills_constants() {
        let model = constant_model(1.0, 1.0, 1.0, JumpLaw::PointMass { value: 0.3 });
        let out = apply_generator(&XPoly::constant(4.0), 0.0, &any_state(), &[0.0], &model).unwrap();
        assert!(out.is_zero());
    }

    #[test]
    fn expected_generator_second_moment() {
        // f = x^2, b=0, sigma=1, lambda=0: <mu, L[f]> = 1
        let model = constant_model(0.0, 1.0, 0.0, JumpLaw::PointMass { value: 0.0 });
        let f = XPoly::x_pow(2);
        let e = expected_generator(&f, 0.3, &any_state(), &[0.0], &model).unwrap();
        assert_relative_eq!(e, 1.0);
    }

    #[test]
    fn generator_is_linear() {
        let model = constant_model(0.7, 0.4, 0.9, JumpLaw::Gaussian { mean: 0.1, std_dev: 0.2 });
        let f = XPoly::new(vec![1.0, -2.0, 0.5, 0.25]);
        let g = XPoly::new(vec![0.0, 1.0, 1.0]);
        let state = any_state();
        let lhs = apply_generator(
            &f.scale(2.0).add(&g.scale(-3.0)),
            0.2,
            &state,
            &[0.0],
            &model,
        )
        .unwrap();
        let rhs = apply_generator(&f, 0.2, &state, &[0.0], &model)
            .unwrap()
            .scale(2.0)
            .add(&apply_generator(&g, 0.2, &state, &[0.0], &model).unwrap().scale(-3.0));
        for k in 0..=lhs.degree().max(rhs.degree()) {
            assert_relative_eq!(lhs.coeff(k), rhs.coeff(k), epsilon = 1e-12);
        }
    }

    #[test]
    fn missing_moment_is_an_error() {
        let mut model = constant_model(0.0, 0.0, 0.0, JumpLaw::PointMass { value: 0.0 });
        model.moment_deps = BTreeSet::from([3]);
        model.drift = Arc::new(|_, m, _| m.moment(3).unwrap_or(f64::NAN));
        let state = MeasureState::Moments(MomentVector::new(vec![1.0, 2.0]));
        assert!(apply_generator(&XPoly::x_pow(1), 0.0, &state, &[0.0], &model).is_err());
    }

    #[test]
    fn hamiltonian_enumerates_grid() {
        // constructed costs: H^a = -L(a) with zero dynamics; L(0) = -1, L(1) = -2
        let mut model = constant_model(0.0, 0.0, 0.0, JumpLaw::PointMass { value: 0.0 });
        model.control_grid = vec![vec![0.0], vec![1.0]];
        model.cost = RunningCost {
            l1: Arc::new(|_, _, a| if a[0] == 0.0 { -1.0 } else { -2.0 }),
            l2: Arc::new(|_| 0.0),
            l3: crate::model::CostIntegrand::Zero,
        };
        let (h, idx) = hamiltonian(0.0, &any_state(), &XPoly::x_pow(1), &model).unwrap();
        assert_relative_eq!(h, 2.0);
        assert_eq!(idx, 1);
    }

    #[test]
    fn hamiltonian_zero_model() {
        let model = constant_model(0.0, 0.0, 0.0, JumpLaw::PointMass { value: 0.0 });
        let (h, idx) = hamiltonian(0.5, &any_state(), &XPoly::new(vec![1.0, 2.0, 3.0]), &model).unwrap();
        assert_eq!(h, 0.0);
        assert_eq!(idx, 0);
    }

    #[test]
    fn hamiltonian_singleton_grid() {
        let model = constant_model(1.0, 0.5, 0.2, JumpLaw::PointMass { value: 0.1 });
        let v = XPoly::new(vec![0.0, 1.0, 1.0]);
        let state = any_state();
        let (h, idx) = hamiltonian(0.1, &state, &v, &model).unwrap();
        assert_eq!(idx, 0);
        let l = model.running_cost(0.1, &state, &model.control_grid[0]).unwrap();
        let g = expected_generator(&v, 0.1, &state, &model.control_grid[0], &model).unwrap();
        assert_relative_eq!(h, -l - g);
    }

    #[test]
    fn argmax_invariant_under_cost_shift() {
        let mut model = constant_model(0.5, 0.0, 0.0, JumpLaw::PointMass { value: 0.0 });
        model.control_grid = vec![vec![-1.0], vec![0.0], vec![1.0]];
        model.drift = Arc::new(|_, _, a| 0.5 * a[0]);
        model.cost = RunningCost {
            l1: Arc::new(|_, _, a| a[0] * a[0]),
            l2: Arc::new(|_| 0.0),
            l3: crate::model::CostIntegrand::Zero,
        };
        let v = XPoly::x_pow(1);
        let state = any_state();
        let (_h1, idx1) = hamiltonian(0.0, &state, &v, &model).unwrap();
        let shifted = {
            let mut m = model.clone();
            m.cost.l1 = Arc::new(|_, _, a| a[0] * a[0] + 7.5);
            m
        };
        let (h1, _) = hamiltonian(0.0, &state, &v, &model).unwrap();
        let (h2, idx2) = hamiltonian(0.0, &state, &v, &shifted).unwrap();
        assert_eq!(idx1, idx2);
        assert_relative_eq!(h2, h1 - 7.5, epsilon = 1e-12);
    }

    #[test]
    fn taylor_form_matches_quadrature() {
        // the jump image of a polynomial equals the integral form: checked
        // against midpoint quadrature of (f(x+y) - f(x)) under a Gaussian
        let jump = JumpLaw::Gaussian { mean: 0.3, std_dev: 0.6 };
        let model = constant_model(0.0, 0.0, 1.0, jump.clone());
        let f = XPoly::new(vec![0.5, -1.0, 0.25, 2.0, 0.0, -0.3, 0.05]); // degree 6
        let state = any_state();
        let image = apply_generator(&f, 0.0, &state, &[0.0], &model).unwrap();
        for i in 0..100 {
            let x = -3.0 + 6.0 * i as f64 / 99.0;
            let quad = gaussian_quadrature(|y| f.eval(x + y) - f.eval(x), 0.3, 0.6);
            assert!(
                (image.eval(x) - quad).abs() <= 1e-8,
                "taylor vs quadrature at {x}: {} vs {quad}",
                image.eval(x)
            );
        }
    }

    // midpoint rule on [mean - 12 sd, mean + 12 sd], fine enough for 1e-10
    fn gaussian_quadrature(g: impl Fn(f64) -> f64, mean: f64, sd: f64) -> f64 {
        let n = 40_000;
        let lo = mean - 12.0 * sd;
        let hi = mean + 12.0 * sd;
        let h = (hi - lo) / n as f64;
        let norm = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
        (0..n)
            .map(|i| {
                let y = lo + (i as f64 + 0.5) * h;
                g(y) * norm * (-(y - mean) * (y - mean) / (2.0 * sd * sd)).exp() * h
            })
            .sum()
    }
}
