//! Numeric polynomials in `x` with `f64` coefficients — the specialization
//! target of the symbolic [`crate::poly::Polynomial`] and the currency of the
//! generator, metric, and flow computations.

use serde::{Deserialize, Serialize};

/// Coefficients by ascending degree; trailing zeros are trimmed, the zero
/// polynomial is the empty vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct XPoly(Vec<f64>);

impl XPoly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self(coeffs)
    }

    pub fn zero() -> Self {
        Self(Vec::new())
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `x^degree`.
    pub fn x_pow(degree: usize) -> Self {
        let mut coeffs = vec![0.0; degree + 1];
        coeffs[degree] = 1.0;
        Self(coeffs)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Max degree with a (possibly explicit-zero) stored coefficient;
    /// 0 for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn coeff(&self, degree: usize) -> f64 {
        self.0.get(degree).copied().unwrap_or(0.0)
    }

    /// Horner evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.0.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn derivative(&self, order: usize) -> Self {
        let mut cur = self.0.clone();
        for _ in 0..order {
            if cur.len() <= 1 {
                return Self::zero();
            }
            cur = cur
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect();
        }
        Self::new(cur)
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.0.len().max(other.0.len());
        let coeffs = (0..n).map(|k| self.coeff(k) + other.coeff(k)).collect();
        Self::new(coeffs)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.0.iter().map(|c| c * s).collect())
    }

    /// `1 + max_i |a_i / a_n|` — every root (and by Gauss-Lucas every root of
    /// every derivative) has modulus below this.
    pub fn cauchy_root_bound(&self) -> f64 {
        if self.0.len() <= 1 {
            return 0.0;
        }
        let lead = self.0.last().copied().unwrap_or(0.0).abs();
        if lead == 0.0 {
            return 0.0;
        }
        let max_ratio = self.0[..self.0.len() - 1]
            .iter()
            .map(|c| (c / lead).abs())
            .fold(0.0_f64, f64::max);
        1.0 + max_ratio
    }
}

impl std::fmt::Display for XPoly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.0.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            if first {
                first = false;
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else if c < 0.0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let a = c.abs();
            match k {
                0 => write!(f, "{a}")?,
                1 if a == 1.0 => write!(f, "x")?,
                1 => write!(f, "{a}x")?,
                _ if a == 1.0 => write!(f, "x^{k}")?,
                _ => write!(f, "{a}x^{k}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_derivative() {
        let p = XPoly::new(vec![1.0, -2.0, 3.0]); // 3x^2 - 2x + 1
        assert_eq!(p.eval(2.0), 9.0);
        assert_eq!(p.derivative(1), XPoly::new(vec![-2.0, 6.0]));
        assert_eq!(p.derivative(3), XPoly::zero());
    }

    #[test]
    fn trailing_zeros_trimmed() {
        let p = XPoly::new(vec![1.0, 0.0, 0.0]);
        assert_eq!(p.degree(), 0);
        assert!(XPoly::new(vec![0.0]).is_zero());
    }

    #[test]
    fn cauchy_bound_dominates_roots() {
        // (x-3)(x+1) = x^2 - 2x - 3
        let p = XPoly::new(vec![-3.0, -2.0, 1.0]);
        assert!(p.cauchy_root_bound() >= 3.0);
    }
}
