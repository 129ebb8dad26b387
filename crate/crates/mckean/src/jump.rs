//! Jump-size distributions: seedable sampling, exact raw moments, and the
//! delta-exponential moment `<gamma, exp(delta |y|)>`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpLaw {
    /// All jumps equal `value`.
    PointMass { value: f64 },
    /// Finitely supported law; weights must be non-negative and sum to 1.
    Discrete { atoms: Vec<f64>, weights: Vec<f64> },
    Gaussian { mean: f64, std_dev: f64 },
    /// A density represented by quadrature nodes and weights; moments and
    /// samples are taken from the discretization.
    Quadrature { nodes: Vec<f64>, weights: Vec<f64> },
}

impl JumpLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            JumpLaw::PointMass { value } => {
                finite(*value, "jump point mass")?;
            }
            JumpLaw::Discrete { atoms, weights } | JumpLaw::Quadrature { nodes: atoms, weights } => {
                if atoms.len() != weights.len() || atoms.is_empty() {
                    return Err(Error::InvalidInput(
                        "jump law atoms and weights must be non-empty and of equal length".into(),
                    ));
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(Error::InvalidInput("jump law weights must be non-negative".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidInput(format!(
                        "jump law weights sum to {total}, expected 1"
                    )));
                }
            }
            JumpLaw::Gaussian { mean, std_dev } => {
                finite(*mean, "jump mean")?;
                if !std_dev.is_finite() || *std_dev < 0.0 {
                    return Err(Error::InvalidInput("jump std_dev must be >= 0".into()));
                }
            }
        }
        Ok(())
    }

    /// Raw moment `<gamma, y^i>`, exact for every supported kind.
    pub fn raw_moment(&self, i: usize) -> f64 {
        if i == 0 {
            return 1.0;
        }
        match self {
            JumpLaw::PointMass { value } => value.powi(i as i32),
            JumpLaw::Discrete { atoms, weights } | JumpLaw::Quadrature { nodes: atoms, weights } => {
                atoms
                    .iter()
                    .zip(weights)
                    .map(|(a, w)| w * a.powi(i as i32))
                    .sum()
            }
            JumpLaw::Gaussian { mean, std_dev } => gaussian_raw_moment(*mean, *std_dev, i),
        }
    }

    /// Taylor coefficients `m_i = <gamma, y^i> / i!` for `i = 1..=upto`.
    pub fn moment_coeffs(&self, upto: usize) -> Vec<f64> {
        let mut fact = 1.0;
        (1..=upto)
            .map(|i| {
                fact *= i as f64;
                self.raw_moment(i) / fact
            })
            .collect()
    }

    /// `<gamma, exp(delta |y|)>`; errors when it is not finite.
    pub fn exp_moment(&self, delta: f64) -> Result<f64> {
        let value = match self {
            JumpLaw::PointMass { value } => (delta * value.abs()).exp(),
            JumpLaw::Discrete { atoms, weights } | JumpLaw::Quadrature { nodes: atoms, weights } => {
                atoms
                    .iter()
                    .zip(weights)
                    .map(|(a, w)| w * (delta * a.abs()).exp())
                    .sum()
            }
            JumpLaw::Gaussian { mean, std_dev } => {
                if *std_dev == 0.0 {
                    (delta * mean.abs()).exp()
                } else {
                    let z = mean / std_dev;
                    let base = (0.5 * delta * delta * std_dev * std_dev).exp();
                    base
                        * ((delta * mean).exp() * normal_cdf(z + delta * std_dev)
                            + (-delta * mean).exp() * normal_cdf(-z + delta * std_dev))
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::InfiniteExpMoment { delta })
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            JumpLaw::PointMass { value } => *value,
            JumpLaw::Discrete { atoms, weights } | JumpLaw::Quadrature { nodes: atoms, weights } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (a, w) in atoms.iter().zip(weights) {
                    acc += w;
                    if u <= acc {
                        return *a;
                    }
                }
                *atoms.last().expect("validated non-empty")
            }
            JumpLaw::Gaussian { mean, std_dev } => {
                if *std_dev == 0.0 {
                    *mean
                } else {
                    Normal::new(*mean, *std_dev)
                        .expect("validated parameters")
                        .sample(rng)
                }
            }
        }
    }
}

fn finite(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { context: what.into() })
    }
}

pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn gaussian_raw_moment(mean: f64, std_dev: f64, i: usize) -> f64 {
    // E[(mean + std_dev Z)^i] expanded over central normal moments
    let mut total = 0.0;
    let mut binom = 1.0;
    for k in 0..=i {
        if k % 2 == 0 {
            total += binom * mean.powi((i - k) as i32) * std_dev.powi(k as i32) * double_factorial_odd(k);
        }
        binom = binom * (i - k) as f64 / (k + 1) as f64;
    }
    total
}

// (k-1)!! for even k, i.e. E[Z^k]
fn double_factorial_odd(k: usize) -> f64 {
    let mut out = 1.0;
    let mut j = 1;
    while j + 1 < k {
        j += 2;
        out *= j as f64;
    }
    out
}
