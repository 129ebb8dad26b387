//! Forward dynamics: piecewise-constant control paths, measure-valued flows
//! on a time grid, interacting-particle Monte Carlo, the closed moment-ODE
//! hierarchy, and the freeze-the-law fixed-point iteration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coeff::CoefficientTable;
use crate::error::{Error, Result};
use crate::measure::MomentVector;
use crate::metric::metric_d_abs_moments;

mod moment;
mod particle;
mod picard;

pub use moment::moment_flow;
pub use particle::{
    invariance_check, simulate_particles, InvarianceReport, InvarianceRow, ParticleSimOutput,
    ParticleSimParams,
};
pub use picard::{picard_solve, PicardOutcome};

/// A deterministic piecewise-constant control: value `values[k]` on the
/// right-open interval `[breakpoints[k], breakpoints[k+1])`, covering
/// `[t0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPath {
    breakpoints: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl ControlPath {
    pub fn new(breakpoints: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidInput("control path needs at least two breakpoints".into()));
        }
        if values.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidInput(format!(
                "{} control values for {} breakpoints",
                values.len(),
                breakpoints.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("breakpoints must be strictly increasing".into()));
        }
        if breakpoints.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("non-finite breakpoint".into()));
        }
        Ok(Self { breakpoints, values })
    }

    /// A single constant value on `[t0, horizon]`.
    pub fn constant(t0: f64, horizon: f64, value: Vec<f64>) -> Result<Self> {
        Self::new(vec![t0, horizon], vec![value])
    }

    /// Values on a uniform grid over `[t0, horizon]`.
    pub fn uniform(t0: f64, horizon: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        let k = values.len();
        if k == 0 {
            return Err(Error::InvalidInput("need at least one control value".into()));
        }
        let breakpoints = (0..=k)
            .map(|i| t0 + (horizon - t0) * i as f64 / k as f64)
            .collect();
        Self::new(breakpoints, values)
    }

    pub fn t0(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().expect("validated")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// The control in force at time `t`; times at or beyond the horizon take
    /// the final value.
    pub fn value_at(&self, t: f64) -> &[f64] {
        let k = match self.breakpoints[1..].iter().position(|&b| t < b) {
            Some(k) => k,
            None => self.values.len() - 1,
        };
        &self.values[k]
    }
}

/// A measure-valued trajectory on a strictly increasing time grid, stored as
/// truncated moment vectors of a common order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureFlow {
    pub times: Vec<f64>,
    pub moments: Vec<MomentVector>,
}

impl MeasureFlow {
    pub fn new(times: Vec<f64>, moments: Vec<MomentVector>) -> Result<Self> {
        if times.len() != moments.len() || times.is_empty() {
            return Err(Error::InvalidInput("flow times and moments must align and be non-empty".into()));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) && times.len() > 1 {
            return Err(Error::InvalidInput("flow time grid must be strictly increasing".into()));
        }
        let order = moments[0].order();
        if moments.iter().any(|m| m.order() != order) {
            return Err(Error::InvalidInput("flow moment vectors have mixed orders".into()));
        }
        Ok(Self { times, moments })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn order(&self) -> usize {
        self.moments.first().map(|m| m.order()).unwrap_or(0)
    }

    pub fn terminal(&self) -> &MomentVector {
        self.moments.last().expect("validated non-empty")
    }

    /// Linear interpolation of the moment vector at time `t` (clamped to the
    /// grid range).
    pub fn interpolate(&self, t: f64) -> MomentVector {
        if t <= self.times[0] {
            return self.moments[0].clone();
        }
        if t >= *self.times.last().unwrap() {
            return self.terminal().clone();
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let w = (t - t0) / (t1 - t0);
        let moments = self.moments[i]
            .moments
            .iter()
            .zip(&self.moments[i + 1].moments)
            .map(|(a, b)| a + w * (b - a))
            .collect();
        MomentVector::new(moments)
    }
}

/// `sup_t d(mu_t, nu_t)` in the absolute metric over a shared time grid.
pub fn d_sup(
    a: &MeasureFlow,
    b: &MeasureFlow,
    table: &CoefficientTable,
    j_max: usize,
) -> Result<f64> {
    if a.times.len() != b.times.len()
        || a.times
            .iter()
            .zip(&b.times)
            .any(|(s, t)| (s - t).abs() > 1e-12)
    {
        return Err(Error::GridMismatch("flows live on different time grids".into()));
    }
    let mut sup = 0.0_f64;
    for (ma, mb) in a.moments.iter().zip(&b.moments) {
        sup = sup.max(metric_d_abs_moments(ma, mb, table, j_max)?.value);
    }
    Ok(sup)
}

/// Uniform step subdivision of `[t0, t1]` with target step `dt`: the number
/// of steps and the realized (exactly dividing) step size.
pub(crate) fn time_grid(t0: f64, t1: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt = {dt} must be positive")));
    }
    if !(t1 > t0) {
        return Err(Error::InvalidInput(format!("empty horizon [{t0}, {t1}]")));
    }
    let n = ((t1 - t0) / dt - 1e-9).ceil().max(1.0) as usize;
    Ok((n, (t1 - t0) / n as f64))
}

/// Writes a flow as CSV `time,moment_1..moment_D` with an optional seed
/// provenance comment.
pub fn write_flow_csv(path: &Path, flow: &MeasureFlow, seed: Option<u64>) -> Result<()> {
    let mut raw = String::new();
    if let Some(seed) = seed {
        raw.push_str(&format!("# seed={seed}\n"));
    }
    raw.push_str("time");
    for k in 1..=flow.order() {
        raw.push_str(&format!(",moment_{k}"));
    }
    raw.push('\n');
    for (t, m) in flow.times.iter().zip(&flow.moments) {
        raw.push_str(&t.to_string());
        for v in &m.moments {
            raw.push_str(&format!(",{v}"));
        }
        raw.push('\n');
    }
    std::fs::write(path, raw)?;
    Ok(())
}

pub fn read_flow_csv(path: &Path) -> Result<MeasureFlow> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)?;
    let mut times = Vec::new();
    let mut moments = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|s| s.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) if !row.is_empty() => {
                times.push(row[0]);
                moments.push(MomentVector::new(row[1..].to_vec()));
            }
            _ if i == 0 => continue, // header
            _ => {
                return Err(Error::InvalidInput(format!(
                    "flow CSV row {} is not numeric",
                    i + 1
                )))
            }
        }
    }
    MeasureFlow::new(times, moments)
}
