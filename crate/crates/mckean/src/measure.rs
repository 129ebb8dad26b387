//! Probability-measure representations: weighted particle clouds for Monte
//! Carlo work and truncated moment vectors for deterministic flows, together
//! with the exponential weight `e_delta`, the growth rate `K*`, and the
//! exponential-moment ball / sublevel-set membership tests.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jump::JumpLaw;
use crate::xpoly::XPoly;

/// `e_delta(x) = exp(delta [sqrt(x^2+1) - 1])`, a smooth stand-in for
/// `exp(delta |x|)` satisfying
/// `exp(delta[|x|-1]) <= e_delta(x) <= exp(delta |x|)`.
pub fn e_delta(x: f64, delta: f64) -> f64 {
    (delta * ((x * x + 1.0).sqrt() - 1.0)).exp()
}

/// Growth rate of the invariant sublevel sets:
/// `K* = (delta C0 / 2)(2 + C0 + delta C0) + C0 (<gamma, e^{delta|y|}> - 1)`.
/// Errors when the jump law has no finite `delta`-exponential moment.
pub fn k_star(c0: f64, delta: f64, jump: &JumpLaw) -> Result<f64> {
    let exp_moment = jump.exp_moment(delta)?;
    Ok(0.5 * delta * c0 * (2.0 + c0 + delta * c0) + c0 * (exp_moment - 1.0))
}

/// Parameters of the exponential-moment geometry for one model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpMomentParams {
    pub delta: f64,
    pub c0: f64,
    pub k_star: f64,
    pub level_n: f64,
}

impl ExpMomentParams {
    pub fn new(c0: f64, delta: f64, level_n: f64, jump: &JumpLaw) -> Result<Self> {
        if delta <= 0.0 || c0 < 0.0 || level_n <= 0.0 {
            return Err(Error::InvalidInput(
                "exponential-moment parameters need delta > 0, c0 >= 0, level_n > 0".into(),
            ));
        }
        Ok(Self {
            delta,
            c0,
            k_star: k_star(c0, delta, jump)?,
            level_n,
        })
    }

    /// The sublevel-set envelope `N e^{K* t}` at time `t`.
    pub fn envelope(&self, t: f64) -> f64 {
        self.level_n * (self.k_star * t).exp()
    }
}

/// A weighted particle cloud on the line. Weights are non-negative and sum
/// to one (within 1e-12).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleMeasure {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl ParticleMeasure {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidMeasure("particle measure needs at least one point".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} points vs {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite particle position".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidMeasure("weights must be finite and non-negative".into()));
        }
        let total = kahan_sum(&weights);
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, expected 1 within 1e-12"
            )));
        }
        Ok(Self { points, weights })
    }

    /// Equal weights on the given points.
    pub fn uniform(points: Vec<f64>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::InvalidMeasure("particle measure needs at least one point".into()));
        }
        let w = 1.0 / n as f64;
        Self::new(points, vec![w; n])
    }

    pub fn dirac(x: f64) -> Self {
        Self {
            points: vec![x],
            weights: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `<mu, f>`; errors if `f` is non-finite at a support point.
    pub fn pair<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let mut acc = 0.0;
        for (&x, &w) in self.points.iter().zip(&self.weights) {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("integrand at support point {x}"),
                });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    pub fn pair_xpoly(&self, p: &XPoly) -> Result<f64> {
        self.pair(|x| p.eval(x))
    }

    /// Raw moment `<mu, x^k>`.
    pub fn raw_moment(&self, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * x.powi(k as i32))
            .sum()
    }

    /// Truncated moment vector of the first `order` moments.
    pub fn moments(&self, order: usize) -> MomentVector {
        MomentVector::new((1..=order).map(|k| self.raw_moment(k)).collect())
    }

    /// `<mu, e_delta>`.
    pub fn exp_moment(&self, delta: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * e_delta(x, delta))
            .sum()
    }

    /// Largest support magnitude.
    pub fn radius(&self) -> f64 {
        self.points.iter().fold(0.0_f64, |r, x| r.max(x.abs()))
    }

    /// Translated copy (same weights).
    pub fn shift(&self, dx: f64) -> Self {
        Self {
            points: self.points.iter().map(|x| x + dx).collect(),
            weights: self.weights.clone(),
        }
    }
}

// compensated summation so large uniform clouds pass the normalization check
fn kahan_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for &v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

/// `<mu, f>` as a free function, matching the usual pairing notation.
pub fn pairing<F: Fn(f64) -> f64>(measure: &ParticleMeasure, f: F) -> Result<f64> {
    measure.pair(f)
}

/// Membership in the exponential-moment ball `M_b`.
pub fn in_m_b(measure: &ParticleMeasure, b: f64, delta: f64) -> bool {
    measure.exp_moment(delta) <= b
}

/// Membership in the sublevel set at level `N`: `<mu, e_delta> <= N e^{K* t}`.
pub fn in_o_n(t: f64, measure: &ParticleMeasure, level_n: f64, params: &ExpMomentParams) -> bool {
    measure.exp_moment(params.delta) <= level_n * (params.k_star * t).exp()
}

/// Truncated moment vector `<mu, x>, ..., <mu, x^D>`. The zeroth moment is
/// implicitly 1. No Hankel-type consistency is enforced: vectors produced by
/// ODE integration are truncations, not full measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub moments: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exp_moment: Option<f64>,
}

impl MomentVector {
    pub fn new(moments: Vec<f64>) -> Self {
        Self {
            moments,
            exp_moment: None,
        }
    }

    pub fn with_exp_moment(moments: Vec<f64>, exp_moment: f64) -> Self {
        Self {
            moments,
            exp_moment: Some(exp_moment),
        }
    }

    pub fn order(&self) -> usize {
        self.moments.len()
    }

    /// `<mu, x^k>`; `None` beyond the stored order.
    pub fn moment(&self, k: usize) -> Option<f64> {
        if k == 0 {
            Some(1.0)
        } else {
            self.moments.get(k - 1).copied()
        }
    }

    /// Pairing with a numeric polynomial through the stored moments.
    pub fn pair_xpoly(&self, p: &XPoly) -> Result<f64> {
        let mut acc = 0.0;
        for (k, &coef) in p.coeffs().iter().enumerate() {
            if coef == 0.0 {
                continue;
            }
            let m = self.moment(k).ok_or(Error::MissingMoment {
                index: k,
                order: self.order(),
            })?;
            acc += coef * m;
        }
        Ok(acc)
    }
}

/// Either measure representation, where an operation accepts both.
#[derive(Debug, Clone)]
pub enum MeasureState {
    Particles(ParticleMeasure),
    Moments(MomentVector),
}

impl MeasureState {
    pub fn moment(&self, k: usize) -> Result<f64> {
        match self {
            MeasureState::Particles(p) => Ok(p.raw_moment(k)),
            MeasureState::Moments(m) => m.moment(k).ok_or(Error::MissingMoment {
                index: k,
                order: m.order(),
            }),
        }
    }

    pub fn moments(&self, order: usize) -> Result<MomentVector> {
        match self {
            MeasureState::Particles(p) => Ok(p.moments(order)),
            MeasureState::Moments(m) => {
                if m.order() < order {
                    Err(Error::MissingMoment {
                        index: order,
                        order: m.order(),
                    })
                } else {
                    Ok(MomentVector {
                        moments: m.moments[..order].to_vec(),
                        exp_moment: m.exp_moment,
                    })
                }
            }
        }
    }

    pub fn pair_xpoly(&self, p: &XPoly) -> Result<f64> {
        match self {
            MeasureState::Particles(m) => m.pair_xpoly(p),
            MeasureState::Moments(m) => m.pair_xpoly(p),
        }
    }
}

/// Writes a particle measure as two-column CSV (`position,weight`). A seed
/// provenance comment is prepended when given.
pub fn write_particles_csv(path: &Path, measure: &ParticleMeasure, seed: Option<u64>) -> Result<()> {
    let mut raw = String::new();
    if let Some(seed) = seed {
        raw.push_str(&format!("# seed={seed}\n"));
    }
    raw.push_str("position,weight\n");
    for (x, w) in measure.points().iter().zip(measure.weights()) {
        raw.push_str(&format!("{x},{w}\n"));
    }
    std::fs::write(path, raw)?;
    Ok(())
}

/// Reads a two-column particle CSV; `#` comment lines and an optional header
/// row are skipped.
pub fn read_particles_csv(path: &Path) -> Result<ParticleMeasure> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(false)
        .from_path(path)?;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(Error::InvalidMeasure(format!(
                "row {} has {} fields, expected 2",
                i + 1,
                record.len()
            )));
        }
        match (record[0].trim().parse::<f64>(), record[1].trim().parse::<f64>()) {
            (Ok(x), Ok(w)) => {
                points.push(x);
                weights.push(w);
            }
            _ if i == 0 => continue, // header row
            _ => {
                return Err(Error::InvalidMeasure(format!(
                    "row {} is not numeric: {:?}",
                    i + 1,
                    record
                )))
            }
        }
    }
    ParticleMeasure::new(points, weights)
}

/// Writes a moment vector as a JSON array.
pub fn write_moments_json(path: &Path, moments: &MomentVector) -> Result<()> {
    let text = serde_json::to_string_pretty(&moments.moments)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_moments_json(path: &Path) -> Result<MomentVector> {
    let text = std::fs::read_to_string(path)?;
    let moments: Vec<f64> = serde_json::from_str(&text)?;
    Ok(MomentVector::new(moments))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn e_delta_reference_points() {
        assert_eq!(e_delta(0.0, 0.7), 1.0);
        assert_relative_eq!(e_delta(3.0_f64.sqrt(), 1.0), std::f64::consts::E, epsilon = 1e-12);
    }

    #[test]
    fn e_delta_sandwich_bounds() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let x: f64 = rng.random_range(-20.0..20.0);
            let delta: f64 = rng.random_range(0.05..3.0);
            let v = e_delta(x, delta);
            assert!(v >= (delta * (x.abs() - 1.0)).exp() - 1e-12);
            assert!(v <= (delta * x.abs()).exp() + 1e-12);
        }
    }

    #[test]
    fn pairing_examples() {
        let mu = ParticleMeasure::uniform(vec![0.0, 2.0]).unwrap();
        assert_relative_eq!(mu.pair(|_| 1.0).unwrap(), 1.0);
        assert_relative_eq!(mu.pair(|x| x).unwrap(), 1.0);
        assert_relative_eq!(mu.pair(|x| x * x).unwrap(), 2.0);
    }

    #[test]
    fn pairing_rejects_non_finite() {
        let mu = ParticleMeasure::uniform(vec![0.0, 1.0]).unwrap();
        assert!(mu.pair(|x| 1.0 / x).is_err());
    }

    #[test]
    fn k_star_reference_values() {
        let point0 = JumpLaw::PointMass { value: 0.0 };
        assert_relative_eq!(k_star(1.0, 1.0, &point0).unwrap(), 2.0);
        assert_relative_eq!(k_star(0.0, 1.3, &point0).unwrap(), 0.0);
        let c = 0.8;
        let point = JumpLaw::PointMass { value: c };
        let (c0, delta) = (0.6, 0.9);
        let expect = 0.5 * delta * c0 * (2.0 + c0 + delta * c0) + c0 * ((delta * c).exp() - 1.0);
        assert_relative_eq!(k_star(c0, delta, &point).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn sublevel_membership() {
        let jump = JumpLaw::PointMass { value: 0.0 };
        let params = ExpMomentParams::new(1.0, 1.0, 1.0, &jump).unwrap();
        let origin = ParticleMeasure::dirac(0.0);
        assert!(in_o_n(0.0, &origin, 1.0, &params));
        assert!(in_o_n(0.7, &origin, 3.0, &params));

        // a cloud with exponential moment above the level fails at t = 0
        let far = ParticleMeasure::dirac(3.0);
        let level = far.exp_moment(params.delta) - 1.0;
        assert!(!in_o_n(0.0, &far, level, &params));
        // membership is monotone in N and t
        assert!(in_o_n(0.0, &far, level + 2.0, &params));
        let t_big = (far.exp_moment(params.delta) / level).ln() / params.k_star + 0.1;
        assert!(in_o_n(t_big, &far, level, &params));
    }

    #[test]
    fn moment_vector_pairing() {
        let m = MomentVector::new(vec![1.0, 2.5]);
        let p = XPoly::new(vec![3.0, 0.0, 2.0]); // 3 + 2x^2
        assert_relative_eq!(m.pair_xpoly(&p).unwrap(), 3.0 + 5.0);
        let q = XPoly::x_pow(3);
        assert!(m.pair_xpoly(&q).is_err());
    }

    #[test]
    fn invalid_measures_rejected() {
        assert!(ParticleMeasure::new(vec![], vec![]).is_err());
        assert!(ParticleMeasure::new(vec![0.0], vec![0.5]).is_err());
        assert!(ParticleMeasure::new(vec![0.0, 1.0], vec![0.5]).is_err());
        assert!(ParticleMeasure::new(vec![0.0], vec![-1.0]).is_err());
        assert!(ParticleMeasure::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn particle_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mu.csv");
        let mu = ParticleMeasure::new(vec![-1.25, 0.5, 2.0], vec![0.25, 0.25, 0.5]).unwrap();
        write_particles_csv(&path, &mu, Some(99)).unwrap();
        let back = read_particles_csv(&path).unwrap();
        assert_eq!(back, mu);
    }

    #[test]
    fn moments_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = MomentVector::new(vec![0.5, 1.25, -0.75]);
        write_moments_json(&path, &m).unwrap();
        assert_eq!(read_moments_json(&path).unwrap(), m);
    }
}
