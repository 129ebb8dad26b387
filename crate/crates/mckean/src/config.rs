//! Run configuration: one self-describing JSON file holding the model, the
//! initial measure, simulation and control settings, and output paths.
//! Validation collects every violated field before reporting, so a broken
//! config is fixed in one round trip.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::control::{Backend, SolveConfig};
use crate::dynamics::{ControlPath, ParticleSimParams};
use crate::error::{Error, Result};
use crate::expr::{parse_expr, EvalContext, Expr, Var};
use crate::jump::JumpLaw;
use crate::measure::{MeasureState, MomentVector, ParticleMeasure};
use crate::model::{
    innovation_model, CostIntegrand, InnovationParams, ModelBounds, ModelSpec, RunningCost,
    TerminalCost,
};
use crate::xpoly::XPoly;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub model_name: String,
    pub initial: InitialSpec,
    pub simulation: SimulationSettings,
    pub control: ControlSettings,
    pub output: OutputSettings,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationSettings {
    pub t0: f64,
    pub horizon: f64,
    pub dt: f64,
    pub particles: usize,
    pub seed: u64,
    /// Moment order carried by flows (must cover the model's dependence set).
    pub order: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlSettings {
    pub n_intervals: usize,
    pub backend: Backend,
    pub budget: u128,
    /// Control held fixed by `simulate` and `picard`.
    pub fixed: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputSettings {
    pub dir: PathBuf,
    /// Step stride for particle snapshots; `None` disables them.
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialSpec {
    Atoms {
        points: Vec<f64>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    ParticlesCsv {
        path: PathBuf,
    },
    Moments {
        values: Vec<f64>,
    },
}

impl InitialSpec {
    /// The initial cloud; moment-vector initials have no particle form.
    pub fn particles(&self, base_dir: &Path) -> Result<ParticleMeasure> {
        match self {
            InitialSpec::Atoms { points, weights } => match weights {
                Some(w) => ParticleMeasure::new(points.clone(), w.clone()),
                None => ParticleMeasure::uniform(points.clone()),
            },
            InitialSpec::ParticlesCsv { path } => {
                let resolved = if path.is_absolute() {
                    path.clone()
                } else {
                    base_dir.join(path)
                };
                crate::measure::read_particles_csv(&resolved)
            }
            InitialSpec::Moments { .. } => Err(Error::InvalidInput(
                "initial.kind = moments has no particle representation".into(),
            )),
        }
    }

    pub fn state(&self, base_dir: &Path, order: usize) -> Result<MeasureState> {
        match self {
            InitialSpec::Moments { values } => {
                if values.len() < order {
                    return Err(Error::MissingMoment {
                        index: order,
                        order: values.len(),
                    });
                }
                Ok(MeasureState::Moments(MomentVector::new(values.clone())))
            }
            other => Ok(MeasureState::Particles(other.particles(base_dir)?)),
        }
    }
}

// Permissive mirror of the file: everything optional so that validation can
// name every missing or invalid field in one pass.
#[derive(Debug, Default, Deserialize)]
struct RawConfig {
    model: Option<Value>,
    initial: Option<Value>,
    simulation: Option<RawSimulation>,
    control: Option<RawControl>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize)]
struct RawSimulation {
    t0: Option<f64>,
    horizon: Option<f64>,
    dt: Option<f64>,
    particles: Option<usize>,
    seed: Option<u64>,
    order: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
struct RawControl {
    n_intervals: Option<usize>,
    backend: Option<String>,
    budget: Option<u128>,
    fixed: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
struct RawOutput {
    dir: Option<PathBuf>,
    snapshot_every: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum L3Config {
    Poly(Vec<f64>),
    CappedExp(f64),
    Exp,
    Expr(String),
}

#[derive(Debug, Deserialize)]
struct ExpressionModelConfig {
    drift: String,
    diffusion: String,
    intensity: String,
    #[serde(default)]
    l1: Option<String>,
    #[serde(default)]
    l2: Option<String>,
    #[serde(default)]
    l3: Option<L3Config>,
    #[serde(default)]
    terminal_poly: Option<Vec<f64>>,
    bounds: ModelBounds,
    moment_deps: Vec<usize>,
    control_grid: Vec<Vec<f64>>,
    jump: JumpLaw,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses and validates; on failure the error lists every violation.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text)?;
        let mut violations = Vec::new();

        let sim = validate_simulation(raw.simulation.unwrap_or_default(), &mut violations);
        let (model, model_name) = match &raw.model {
            None => {
                violations.push("model: missing section".to_string());
                (None, String::new())
            }
            Some(value) => build_model(value, &mut violations),
        };

        let initial = match raw.initial {
            None => {
                violations.push("initial: missing section".to_string());
                None
            }
            Some(value) => match serde_json::from_value::<InitialSpec>(value) {
                Ok(spec) => {
                    validate_initial(&spec, &mut violations);
                    Some(spec)
                }
                Err(e) => {
                    violations.push(format!("initial: {e}"));
                    None
                }
            },
        };

        let raw_control = raw.control.unwrap_or_default();
        let backend = match raw_control.backend.as_deref() {
            None | Some("moment") => Backend::Moment,
            Some("particle") => Backend::Particle,
            Some(other) => {
                violations.push(format!(
                    "control.backend: `{other}` is not one of moment | particle"
                ));
                Backend::Moment
            }
        };
        let control = ControlSettings {
            n_intervals: raw_control.n_intervals.unwrap_or(4),
            backend,
            budget: raw_control.budget.unwrap_or(200_000),
            fixed: raw_control.fixed.unwrap_or_default(),
        };
        if control.n_intervals == 0 {
            violations.push("control.n_intervals: must be >= 1".to_string());
        }

        let raw_output = raw.output.unwrap_or_default();
        let output = OutputSettings {
            dir: raw_output.dir.unwrap_or_else(|| PathBuf::from("out")),
            snapshot_every: raw_output.snapshot_every,
        };

        // cross-section rules need the built model
        let mut control = control;
        if let (Some(model), Some(sim)) = (&model, &sim) {
            let needed = model.required_moment_order();
            if sim.order < needed {
                violations.push(format!(
                    "simulation.order: {} is below the model's moment dependence {needed}",
                    sim.order
                ));
            }
            if control.fixed.is_empty() {
                control.fixed = model.control_grid[0].clone();
            } else if !model.control_grid.contains(&control.fixed) {
                violations.push("control.fixed: value is not a member of the control grid".to_string());
            }
        }

        if !violations.is_empty() {
            return Err(Error::Config { violations });
        }
        Ok(RunConfig {
            model: model.expect("validated"),
            model_name,
            initial: initial.expect("validated"),
            simulation: sim.expect("validated"),
            control,
            output,
        })
    }

    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            backend: self.control.backend,
            dt: self.simulation.dt,
            order: self.simulation.order,
            n_particles: self.simulation.particles,
            seed: self.simulation.seed,
            budget: self.control.budget,
        }
    }

    pub fn sim_params(&self) -> ParticleSimParams {
        ParticleSimParams {
            dt: self.simulation.dt,
            n_particles: self.simulation.particles,
            seed: self.simulation.seed,
            record_order: self.simulation.order,
            snapshot_every: self.output.snapshot_every,
        }
    }

    /// The constant path driven by `control.fixed` over the configured horizon.
    pub fn fixed_path(&self) -> Result<ControlPath> {
        ControlPath::constant(
            self.simulation.t0,
            self.simulation.horizon,
            self.control.fixed.clone(),
        )
    }
}

fn validate_simulation(
    raw: RawSimulation,
    violations: &mut Vec<String>,
) -> Option<SimulationSettings> {
    let mut ok = true;
    let t0 = raw.t0.unwrap_or(0.0);
    let horizon = match raw.horizon {
        Some(h) if h > t0 => h,
        Some(h) => {
            violations.push(format!("simulation.horizon: {h} must exceed t0 = {t0}"));
            ok = false;
            t0 + 1.0
        }
        None => {
            violations.push("simulation.horizon: missing".to_string());
            ok = false;
            t0 + 1.0
        }
    };
    let dt = match raw.dt {
        Some(dt) if dt > 0.0 => dt,
        Some(dt) => {
            violations.push(format!("simulation.dt: {dt} must be positive"));
            ok = false;
            0.01
        }
        None => {
            violations.push("simulation.dt: missing".to_string());
            ok = false;
            0.01
        }
    };
    let particles = raw.particles.unwrap_or(10_000);
    if particles == 0 {
        violations.push("simulation.particles: must be >= 1".to_string());
        ok = false;
    }
    let order = raw.order.unwrap_or(4);
    if order == 0 {
        violations.push("simulation.order: must be >= 1".to_string());
        ok = false;
    }
    let settings = SimulationSettings {
        t0,
        horizon,
        dt,
        particles,
        seed: raw.seed.unwrap_or(0),
        order,
    };
    ok.then_some(settings)
}

fn validate_initial(spec: &InitialSpec, violations: &mut Vec<String>) {
    match spec {
        InitialSpec::Atoms { points, weights } => {
            if points.is_empty() {
                violations.push("initial.points: must be non-empty".to_string());
            }
            if let Some(w) = weights {
                if w.len() != points.len() {
                    violations.push(format!(
                        "initial.weights: {} entries for {} points",
                        w.len(),
                        points.len()
                    ));
                }
            }
        }
        InitialSpec::Moments { values } => {
            if values.is_empty() {
                violations.push("initial.values: must be non-empty".to_string());
            }
        }
        InitialSpec::ParticlesCsv { .. } => {}
    }
}

fn build_model(value: &Value, violations: &mut Vec<String>) -> (Option<ModelSpec>, String) {
    let name = value
        .get("name")
        .and_then(|v| v.as_str())
        .unwrap_or_default()
        .to_string();
    match name.as_str() {
        "innovation" => {
            let params: InnovationParams = match serde_json::from_value(strip_name(value)) {
                Ok(p) => p,
                Err(e) => {
                    violations.push(format!("model: {e}"));
                    return (None, name);
                }
            };
            match innovation_model(&params) {
                Ok(model) => (Some(model), name),
                Err(e) => {
                    violations.push(format!("model: {e}"));
                    (None, name)
                }
            }
        }
        "expressions" => {
            let cfg: ExpressionModelConfig = match serde_json::from_value(strip_name(value)) {
                Ok(c) => c,
                Err(e) => {
                    violations.push(format!("model: {e}"));
                    return (None, name);
                }
            };
            (build_expression_model(&cfg, violations), name)
        }
        "" => {
            violations.push("model.name: missing".to_string());
            (None, name)
        }
        other => {
            violations.push(format!(
                "model.name: `{other}` is not one of innovation | expressions"
            ));
            (None, name)
        }
    }
}

fn strip_name(value: &Value) -> Value {
    let mut v = value.clone();
    if let Some(map) = v.as_object_mut() {
        map.remove("name");
    }
    v
}

fn build_expression_model(
    cfg: &ExpressionModelConfig,
    violations: &mut Vec<String>,
) -> Option<ModelSpec> {
    let deps: BTreeSet<usize> = cfg.moment_deps.iter().copied().collect();
    if deps.contains(&0) {
        violations.push("model.moment_deps: moment orders are 1-based".to_string());
    }
    if cfg.control_grid.is_empty() {
        violations.push("model.control_grid: must be non-empty".to_string());
    }
    let dim = cfg.control_grid.first().map(|a| a.len()).unwrap_or(0);

    let mut coefs = Vec::new();
    for (field, text) in [
        ("model.drift", &cfg.drift),
        ("model.diffusion", &cfg.diffusion),
        ("model.intensity", &cfg.intensity),
    ] {
        match parse_expr(text) {
            Ok(expr) => {
                check_vars(&expr, field, &deps, dim, false, violations);
                coefs.push(expr);
            }
            Err(e) => violations.push(format!("{field}: {e}")),
        }
    }

    let l1 = match &cfg.l1 {
        None => None,
        Some(text) => match parse_expr(text) {
            Ok(expr) => {
                check_vars(&expr, "model.l1", &deps, dim, false, violations);
                Some(expr)
            }
            Err(e) => {
                violations.push(format!("model.l1: {e}"));
                None
            }
        },
    };
    let l2 = match &cfg.l2 {
        None => None,
        Some(text) => match parse_expr(text) {
            Ok(expr) => {
                for v in expr.vars() {
                    if !matches!(v, Var::Control(_)) {
                        violations.push(format!("model.l2: variable `{v}` is not a control"));
                    }
                    if let Var::Control(i) = v {
                        if i >= dim {
                            violations.push(format!("model.l2: control slot a{} beyond grid dimension", i + 1));
                        }
                    }
                }
                Some(expr)
            }
            Err(e) => {
                violations.push(format!("model.l2: {e}"));
                None
            }
        },
    };
    let l3 = match &cfg.l3 {
        None => CostIntegrand::Zero,
        Some(L3Config::Poly(coeffs)) => CostIntegrand::Poly(XPoly::new(coeffs.clone())),
        Some(L3Config::CappedExp(cap)) => CostIntegrand::CappedExp { cap: *cap },
        Some(L3Config::Exp) => CostIntegrand::Exp,
        Some(L3Config::Expr(text)) => match parse_expr(text) {
            Ok(expr) => {
                for v in expr.vars() {
                    if v != Var::X {
                        violations.push(format!("model.l3: variable `{v}` is not x"));
                    }
                }
                let expr = Arc::new(expr);
                CostIntegrand::Custom(Arc::new(move |x| {
                    expr.eval(&EvalContext {
                        t: 0.0,
                        x,
                        moments: None,
                        control: &[],
                    })
                }))
            }
            Err(e) => {
                violations.push(format!("model.l3: {e}"));
                CostIntegrand::Zero
            }
        },
    };

    if !violations.is_empty() || coefs.len() != 3 {
        return None;
    }

    let [drift, diffusion, intensity]: [Expr; 3] =
        coefs.try_into().ok().expect("three coefficients");
    let model = ModelSpec {
        drift: coef_fn(drift),
        diffusion: coef_fn(diffusion),
        intensity: coef_fn(intensity),
        cost: RunningCost {
            l1: match l1 {
                Some(expr) => coef_fn(expr),
                None => Arc::new(|_, _, _| 0.0),
            },
            l2: match l2 {
                Some(expr) => {
                    let expr = Arc::new(expr);
                    Arc::new(move |a: &[f64]| {
                        expr.eval(&EvalContext {
                            t: 0.0,
                            x: 0.0,
                            moments: None,
                            control: a,
                        })
                    })
                }
                None => Arc::new(|_| 0.0),
            },
            l3,
        },
        terminal: match &cfg.terminal_poly {
            Some(coeffs) => TerminalCost::Poly(XPoly::new(coeffs.clone())),
            None => TerminalCost::Zero,
        },
        bounds: cfg.bounds,
        moment_deps: deps,
        control_grid: cfg.control_grid.clone(),
        jump: cfg.jump.clone(),
    };
    if let Err(e) = model.validate() {
        violations.push(format!("model: {e}"));
        return None;
    }
    Some(model)
}

fn check_vars(
    expr: &Expr,
    field: &str,
    deps: &BTreeSet<usize>,
    control_dim: usize,
    allow_x: bool,
    violations: &mut Vec<String>,
) {
    for v in expr.vars() {
        match v {
            Var::T => {}
            Var::X if allow_x => {}
            Var::X => violations.push(format!("{field}: `x` is not in scope here")),
            Var::Control(i) => {
                if i >= control_dim {
                    violations.push(format!(
                        "{field}: control slot a{} beyond grid dimension {control_dim}",
                        i + 1
                    ));
                }
            }
            Var::Moment(k) => {
                if !deps.contains(&k) {
                    violations.push(format!(
                        "{field}: moment m{k} is not in the declared moment_deps"
                    ));
                }
            }
        }
    }
}

fn coef_fn(expr: Expr) -> crate::model::CoefFn {
    let expr = Arc::new(expr);
    Arc::new(move |t: f64, m: &MomentVector, a: &[f64]| {
        expr.eval(&EvalContext {
            t,
            x: 0.0,
            moments: Some(m),
            control: a,
        })
    })
}
