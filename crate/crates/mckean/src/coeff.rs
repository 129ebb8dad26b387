//! The weighted basis behind the measure metrics: an enumeration of the
//! monomial-closure union together with decay coefficients `c_j` built from
//! per-element envelope bounds against the exponential weight.

use serde::{Deserialize, Serialize};

use crate::closure::{enumerate_theta, enumerate_theta_through_degree, star_closure};
use crate::error::{Error, Result};
use crate::jump::JumpLaw;
use crate::measure::e_delta;
use crate::poly::Polynomial;
use crate::xpoly::XPoly;

/// Basis polynomials `f_1..f_J` with their envelope constants and decay
/// coefficients. Index sets are 1-based positions into `basis`, matching the
/// `2^k` weighting in the defining formula.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientTable {
    /// Symbolic basis, in enumeration order.
    pub basis: Vec<Polynomial>,
    /// Numeric specialization of `basis` under `jump_moments`.
    pub basis_num: Vec<XPoly>,
    /// Upper bounds `s_j = 1 + (b C_j)^2` on `1 + sup <mu, f_j>^2` over the
    /// exponential-moment ball of radius `b`.
    pub s_hat: Vec<f64>,
    /// Decay coefficients `c_j <= 2^-j`.
    pub c: Vec<f64>,
    /// Envelope constants `C_j = sup_x |f_j(x)| / e_delta(x)`.
    pub envelope: Vec<f64>,
    /// 1-based closure index sets `I_j` (sorted); always within `1..=j`.
    pub deps: Vec<Vec<usize>>,
    pub bound_b: f64,
    pub delta: f64,
    /// Values substituted for the symbols `m_1..m_D`.
    pub jump_moments: Vec<f64>,
}

impl CoefficientTable {
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Largest x-degree over the numeric basis.
    pub fn max_degree(&self) -> usize {
        self.basis_num.iter().map(|p| p.degree()).max().unwrap_or(0)
    }
}

/// Builds the table for the first `j_max` elements of the enumeration.
pub fn coeff_table(bound_b: f64, j_max: usize, jump: &JumpLaw, delta: f64) -> Result<CoefficientTable> {
    if bound_b <= 0.0 || delta <= 0.0 || j_max == 0 {
        return Err(Error::InvalidInput(
            "coefficient table needs bound_b > 0, delta > 0, j_max >= 1".into(),
        ));
    }
    let mut basis = enumerate_theta(j_max);
    basis.truncate(j_max);
    build_table(basis, bound_b, jump, delta)
}

/// Builds the table over all enumeration elements generated by monomials of
/// degree at most `max_degree` — every basis polynomial then has x-degree at
/// most `max_degree`, so pairings stay within a truncated moment vector.
pub fn coeff_table_through_degree(
    bound_b: f64,
    max_degree: u32,
    jump: &JumpLaw,
    delta: f64,
) -> Result<CoefficientTable> {
    if bound_b <= 0.0 || delta <= 0.0 || max_degree == 0 {
        return Err(Error::InvalidInput(
            "coefficient table needs bound_b > 0, delta > 0, max_degree >= 1".into(),
        ));
    }
    build_table(enumerate_theta_through_degree(max_degree), bound_b, jump, delta)
}

fn build_table(basis: Vec<Polynomial>, bound_b: f64, jump: &JumpLaw, delta: f64) -> Result<CoefficientTable> {
    jump.validate()?;
    let max_sym = basis.iter().map(|p| p.degree()).max().unwrap_or(0) as usize;
    let jump_moments = jump.moment_coeffs(max_sym);

    let mut basis_num = Vec::with_capacity(basis.len());
    let mut envelope = Vec::with_capacity(basis.len());
    let mut s_hat = Vec::with_capacity(basis.len());
    for f in &basis {
        let num = f.specialize(&jump_moments)?;
        let c_j = sup_ratio_over_e_delta(&num, delta);
        if !c_j.is_finite() {
            return Err(Error::NonFinite {
                context: format!("envelope constant of basis element {f}"),
            });
        }
        s_hat.push(1.0 + (bound_b * c_j).powi(2));
        envelope.push(c_j);
        basis_num.push(num);
    }

    let mut deps = Vec::with_capacity(basis.len());
    for (j, f) in basis.iter().enumerate() {
        let closure = star_closure(f);
        let mut idx = Vec::new();
        for g in closure.iter().filter(|g| !g.is_zero()) {
            let pos = basis
                .iter()
                .position(|h| h == g)
                .ok_or_else(|| Error::InvalidInput(format!("closure member {g} escaped the enumeration")))?;
            debug_assert!(pos <= j, "enumeration order violated");
            idx.push(pos + 1);
        }
        idx.sort_unstable();
        deps.push(idx);
    }

    let c = deps.iter().map(|set| decay_coefficient(set, &s_hat)).collect();

    Ok(CoefficientTable {
        basis,
        basis_num,
        s_hat,
        c,
        envelope,
        deps,
        bound_b,
        delta,
        jump_moments,
    })
}

/// `c_j = (sum_{k in I_j} 2^k)^-1 (sum_{k in I_j} s_k)^-2`, indices 1-based.
pub fn decay_coefficient(index_set: &[usize], s_hat: &[f64]) -> f64 {
    let pow_sum: f64 = index_set.iter().map(|&k| 2.0_f64.powi(k as i32)).sum();
    let s_sum: f64 = index_set.iter().map(|&k| s_hat[k - 1]).sum();
    1.0 / (pow_sum * s_sum * s_sum)
}

/// `sup_x |p(x)| / e_delta(x)`.
///
/// Beyond `X* = max(1, 2R, 3 deg / delta)` (R the Cauchy root bound, which by
/// Gauss-Lucas also bounds the roots of every derivative) the log-derivative
/// of the ratio is negative, so the sup is attained on `[-X*, X*]`; a dense
/// scan plus golden-section polish finds it there.
pub fn sup_ratio_over_e_delta(p: &XPoly, delta: f64) -> f64 {
    if p.is_zero() {
        return 0.0;
    }
    if p.degree() == 0 {
        // e_delta is minimized (= 1) at the origin
        return p.coeff(0).abs();
    }
    let ratio = |x: f64| p.eval(x).abs() / e_delta(x, delta);
    let r = p.cauchy_root_bound();
    let x_star = (2.0 * r).max(3.0 * p.degree() as f64 / delta).max(1.0);

    let n = 8192;
    let h = 2.0 * x_star / n as f64;
    let grid: Vec<f64> = (0..=n).map(|i| -x_star + i as f64 * h).collect();
    let vals: Vec<f64> = grid.iter().map(|&x| ratio(x)).collect();

    let mut best = 0.0_f64;
    for i in 0..=n {
        let left = if i == 0 { f64::NEG_INFINITY } else { vals[i - 1] };
        let right = if i == n { f64::NEG_INFINITY } else { vals[i + 1] };
        if vals[i] >= left && vals[i] >= right {
            let a = grid[i.saturating_sub(1)];
            let b = grid[(i + 1).min(n)];
            best = best.max(golden_max(ratio, a, b));
        }
    }
    best
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..120 {
        if (b - a).abs() < 1e-13 * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}
