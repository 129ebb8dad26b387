//! Model specifications: coefficient functions `b, sigma, lambda` reading the
//! measure through finitely many moments, running and terminal costs, the
//! standing bounds, a finite control grid, and the jump law. Includes the
//! built-in technological-innovation model.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::jump::JumpLaw;
use crate::measure::{MeasureState, MomentVector};
use crate::xpoly::XPoly;

/// Coefficient function `(t, moments, control) -> value`. Must be pure and
/// reentrant: it may be called concurrently from many threads.
pub type CoefFn = Arc<dyn Fn(f64, &MomentVector, &[f64]) -> f64 + Send + Sync>;

/// Control-only function, e.g. the cost factor `L2`.
pub type ControlFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// The standing constants: coefficient bound `c0`, modulus `kappa0`, and the
/// exponential-moment rate `delta`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ModelBounds {
    pub c0: f64,
    pub kappa0: f64,
    pub delta: f64,
}

/// The state-integrated part `L3` of the running cost.
#[derive(Clone)]
pub enum CostIntegrand {
    Zero,
    /// Polynomial in `x`; evaluable on both backends.
    Poly(XPoly),
    /// `min(exp(x), exp(cap))`; particle backend only.
    CappedExp { cap: f64 },
    /// `exp(x)`; particle backend only, needs `delta > 1` for the growth bound.
    Exp,
    /// Arbitrary pointwise integrand; particle backend only.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl CostIntegrand {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            CostIntegrand::Zero => 0.0,
            CostIntegrand::Poly(p) => p.eval(x),
            CostIntegrand::CappedExp { cap } => x.exp().min(cap.exp()),
            CostIntegrand::Exp => x.exp(),
            CostIntegrand::Custom(f) => f(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, CostIntegrand::Zero) || matches!(self, CostIntegrand::Poly(p) if p.is_zero())
    }

    pub fn as_poly(&self) -> Option<XPoly> {
        match self {
            CostIntegrand::Zero => Some(XPoly::zero()),
            CostIntegrand::Poly(p) => Some(p.clone()),
            _ => None,
        }
    }
}

impl std::fmt::Debug for CostIntegrand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CostIntegrand::Zero => write!(f, "Zero"),
            CostIntegrand::Poly(p) => write!(f, "Poly({p})"),
            CostIntegrand::CappedExp { cap } => write!(f, "CappedExp {{ cap: {cap} }}"),
            CostIntegrand::Exp => write!(f, "Exp"),
            CostIntegrand::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Running cost `L(t, mu, a) = L1(t, mu, a) + L2(a) <mu, L3>`.
#[derive(Clone)]
pub struct RunningCost {
    pub l1: CoefFn,
    pub l2: ControlFn,
    pub l3: CostIntegrand,
}

impl RunningCost {
    pub fn zero() -> Self {
        Self {
            l1: Arc::new(|_, _, _| 0.0),
            l2: Arc::new(|_| 0.0),
            l3: CostIntegrand::Zero,
        }
    }
}

/// Terminal cost `G(mu)`.
#[derive(Debug, Clone)]
pub enum TerminalCost {
    Zero,
    /// `G(mu) = <mu, p>`; evaluable on both backends.
    Poly(XPoly),
}

impl TerminalCost {
    pub fn eval(&self, state: &MeasureState) -> Result<f64> {
        match self {
            TerminalCost::Zero => Ok(0.0),
            TerminalCost::Poly(p) => state.pair_xpoly(p),
        }
    }
}

/// A controlled McKean-Vlasov jump-diffusion model. Immutable after
/// construction; all callables must be pure.
#[derive(Clone)]
pub struct ModelSpec {
    pub drift: CoefFn,
    pub diffusion: CoefFn,
    pub intensity: CoefFn,
    pub cost: RunningCost,
    pub terminal: TerminalCost,
    pub bounds: ModelBounds,
    /// Declared finite set of moment orders the coefficients read.
    pub moment_deps: BTreeSet<usize>,
    /// The finite control grid realizing the control space.
    pub control_grid: Vec<Vec<f64>>,
    pub jump: JumpLaw,
}

impl std::fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelSpec")
            .field("bounds", &self.bounds)
            .field("moment_deps", &self.moment_deps)
            .field("control_grid", &self.control_grid)
            .field("jump", &self.jump)
            .finish_non_exhaustive()
    }
}

impl ModelSpec {
    /// Basic structural validation (the analytic bounds are sampled
    /// separately by [`ModelSpec::validate_sampled`]).
    pub fn validate(&self) -> Result<()> {
        if self.control_grid.is_empty() {
            return Err(Error::InvalidInput("control grid must be non-empty".into()));
        }
        let dim = self.control_grid[0].len();
        if self.control_grid.iter().any(|a| a.len() != dim) {
            return Err(Error::InvalidInput("control grid values have mixed dimensions".into()));
        }
        if self.bounds.delta <= 0.0 {
            return Err(Error::Assumption("delta must be positive".into()));
        }
        if self.bounds.c0 < 0.0 || self.bounds.kappa0 < 0.0 {
            return Err(Error::Assumption("c0 and kappa0 must be non-negative".into()));
        }
        self.jump.validate()?;
        // the jump law must carry a finite delta-exponential moment
        self.jump.exp_moment(self.bounds.delta)?;
        Ok(())
    }

    /// Largest moment order the coefficient functions may read.
    pub fn required_moment_order(&self) -> usize {
        self.moment_deps.iter().max().copied().unwrap_or(0)
    }

    pub fn eval_coefficients(&self, t: f64, moments: &MomentVector, control: &[f64]) -> (f64, f64, f64) {
        (
            (self.drift)(t, moments, control),
            (self.diffusion)(t, moments, control),
            (self.intensity)(t, moments, control),
        )
    }

    /// `L(t, mu, a)`; the `<mu, L3>` pairing follows the state representation
    /// and errors when `L3` is not evaluable on it.
    pub fn running_cost(&self, t: f64, state: &MeasureState, control: &[f64]) -> Result<f64> {
        let moments = state.moments(self.required_moment_order())?;
        let l1 = (self.cost.l1)(t, &moments, control);
        let l2 = (self.cost.l2)(control);
        if self.cost.l3.is_zero() || l2 == 0.0 {
            return Ok(l1);
        }
        let pairing = match state {
            MeasureState::Particles(mu) => mu.pair(|x| self.cost.l3.eval(x))?,
            MeasureState::Moments(m) => {
                let p = self.cost.l3.as_poly().ok_or(Error::CostBackend {
                    term: "L3".into(),
                    backend: "moment".into(),
                })?;
                m.pair_xpoly(&p)?
            }
        };
        Ok(l1 + l2 * pairing)
    }

    pub fn terminal_cost(&self, state: &MeasureState) -> Result<f64> {
        self.terminal.eval(state)
    }

    /// Samples `(t, moments, a, x)` tuples and checks the standing bounds:
    /// coefficients within `c0`, non-negative intensity, and the
    /// `|L3(x) x| <= c0 exp(delta |x|)` growth bound. A sampling check, not a
    /// proof; it catches mis-specified models early.
    pub fn validate_sampled(&self, samples: usize, seed: u64) -> Result<()> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let order = self.required_moment_order();
        for _ in 0..samples {
            let t: f64 = rng.random_range(0.0..1.0);
            let moments =
                MomentVector::new((0..order).map(|_| rng.random_range(-5.0..5.0)).collect());
            let a = &self.control_grid[rng.random_range(0..self.control_grid.len())];
            let (b, sigma, lambda) = self.eval_coefficients(t, &moments, a);
            for (name, v) in [("drift", b), ("diffusion", sigma), ("intensity", lambda)] {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        context: format!("{name} at sampled state"),
                    });
                }
                if v.abs() > self.bounds.c0 + 1e-9 {
                    return Err(Error::Assumption(format!(
                        "|{name}| = {} exceeds c0 = {} at a sampled state",
                        v.abs(),
                        self.bounds.c0
                    )));
                }
            }
            if lambda < -1e-12 {
                return Err(Error::Assumption(format!("negative intensity {lambda}")));
            }
            let x: f64 = rng.random_range(-12.0..12.0);
            let growth = (self.cost.l3.eval(x) * x).abs();
            if growth > self.bounds.c0 * (self.bounds.delta * x.abs()).exp() + 1e-9 {
                return Err(Error::Assumption(format!(
                    "|L3(x) x| = {growth} exceeds c0 exp(delta|x|) at x = {x}"
                )));
            }
        }
        Ok(())
    }
}

/// Parameters for the built-in technological-innovation model: a planner
/// steers the log-efficiency frontier with research funding `a1` (drift) and a
/// meeting rate `a2` (jump intensity), harvesting `(1 - a2) exp(X)` net of the
/// quadratic funding cost. The reward is negated into a running cost.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct InnovationParams {
    pub b_max: f64,
    pub lambda_max: f64,
    pub sigma: f64,
    pub delta: f64,
    /// Cap on the exponential harvest term: `L3(x) = min(e^x, e^cap)`.
    /// `None` keeps the raw exponential, which requires `delta > 1`.
    pub x_cap: Option<f64>,
    pub jump: JumpLaw,
    pub a1_grid: Vec<f64>,
    pub a2_grid: Vec<f64>,
}

impl Default for InnovationParams {
    fn default() -> Self {
        Self {
            b_max: 0.5,
            lambda_max: 0.5,
            sigma: 0.3,
            delta: 0.5,
            x_cap: Some(2.0),
            jump: JumpLaw::PointMass { value: 0.2 },
            a1_grid: vec![0.0, 0.5, 1.0],
            a2_grid: vec![0.0, 0.5],
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Builds the innovation model:
/// drift `b_max tanh(m1) a1`, intensity `lambda_max sigmoid(m1) a2`, constant
/// diffusion, running cost `(a1)^2 - (1 - a2) <mu, L3>`, zero terminal cost,
/// moment dependence `{1}`.
pub fn innovation_model(params: &InnovationParams) -> Result<ModelSpec> {
    if params.b_max < 0.0 || params.lambda_max < 0.0 || params.sigma < 0.0 {
        return Err(Error::InvalidInput("innovation model bounds must be non-negative".into()));
    }
    if params.delta <= 0.0 {
        return Err(Error::Assumption("delta must be positive".into()));
    }
    if params.x_cap.is_none() && params.delta <= 1.0 {
        return Err(Error::Assumption(
            "uncapped exponential harvest needs delta > 1; cap it or raise delta".into(),
        ));
    }
    if params.a2_grid.iter().any(|&a| a < 0.0) {
        return Err(Error::InvalidInput("meeting-rate controls a2 must be non-negative".into()));
    }
    if params.a1_grid.is_empty() || params.a2_grid.is_empty() {
        return Err(Error::InvalidInput("control grids must be non-empty".into()));
    }

    let l3 = match params.x_cap {
        Some(cap) => CostIntegrand::CappedExp { cap },
        None => CostIntegrand::Exp,
    };
    let a1_max = params.a1_grid.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    let a2_max = params.a2_grid.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    let growth_sup = sup_cost_growth(&l3, params.delta);
    let c0 = (params.b_max * a1_max)
        .max(params.lambda_max * a2_max)
        .max(params.sigma)
        .max(growth_sup);
    // tanh and sigmoid have derivative at most 1, so the moment-Lipschitz
    // modulus is controlled by the coefficient amplitudes
    let kappa0 = (params.b_max * a1_max).max(params.lambda_max * a2_max).max(1.0);

    let b_max = params.b_max;
    let lambda_max = params.lambda_max;
    let sigma = params.sigma;

    let control_grid: Vec<Vec<f64>> = params
        .a1_grid
        .iter()
        .flat_map(|&a1| params.a2_grid.iter().map(move |&a2| vec![a1, a2]))
        .collect();

    let model = ModelSpec {
        drift: Arc::new(move |_t, m, a| b_max * m.moment(1).unwrap_or(0.0).tanh() * a[0]),
        diffusion: Arc::new(move |_t, _m, _a| sigma),
        intensity: Arc::new(move |_t, m, a| lambda_max * sigmoid(m.moment(1).unwrap_or(0.0)) * a[1]),
        cost: RunningCost {
            l1: Arc::new(|_t, _m, a| a[0] * a[0]),
            l2: Arc::new(|a| -(1.0 - a[1])),
            l3,
        },
        terminal: TerminalCost::Zero,
        bounds: ModelBounds {
            c0,
            kappa0,
            delta: params.delta,
        },
        moment_deps: BTreeSet::from([1]),
        control_grid,
        jump: params.jump.clone(),
    };
    model.validate()?;
    Ok(model)
}

/// `sup_x |x L3(x)| exp(-delta |x|)`, the constant the growth assumption on
/// the running cost needs.
fn sup_cost_growth(l3: &CostIntegrand, delta: f64) -> f64 {
    let g = |x: f64| (x * l3.eval(x)).abs() * (-delta * x.abs()).exp();
    let reach = match l3 {
        CostIntegrand::CappedExp { cap } => cap.abs() + 10.0 / delta + 10.0,
        CostIntegrand::Exp => 10.0 + 2.0 / (delta - 1.0).max(1e-6),
        _ => 20.0,
    };
    let n = 4096;
    let mut best = 0.0_f64;
    for i in 0..=n {
        let x = -reach + 2.0 * reach * i as f64 / n as f64;
        best = best.max(g(x));
    }
    best
}
