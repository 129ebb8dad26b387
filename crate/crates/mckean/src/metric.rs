//! The measure metrics built on the weighted closure basis: the squared-form
//! `sum_j c_j <mu - nu, f_j>^2` and the absolute-form
//! `sum_j c_j |<mu - nu, f_j>|` that metrizes weak convergence on the
//! exponential-moment ball. Both are computed truncated, with a certified
//! bound on the discarded tail.

use crate::coeff::CoefficientTable;
use crate::error::{Error, Result};
use crate::measure::{MomentVector, ParticleMeasure};

/// A truncated metric value together with an upper bound for the tail of the
/// series beyond the truncation index.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricValue {
    pub value: f64,
    pub tail_bound: f64,
}

impl MetricValue {
    /// Guaranteed interval for the untruncated series.
    pub fn upper(&self) -> f64 {
        self.value + self.tail_bound
    }
}

/// Squared-form metric between particle measures. Both arguments must lie in
/// the ball `M_b` of the table, otherwise the tail certificate is invalid and
/// an error is returned.
pub fn metric_d_sq(
    mu: &ParticleMeasure,
    nu: &ParticleMeasure,
    table: &CoefficientTable,
    j_max: usize,
) -> Result<MetricValue> {
    check_membership(mu, table)?;
    check_membership(nu, table)?;
    let value = truncated_sum(table, j_max, |p| Ok(mu.pair_xpoly(p)? - nu.pair_xpoly(p)?), true)?;
    Ok(MetricValue {
        value,
        // c_j <mu-nu, f_j>^2 <= 4 c_j (s_j - 1) <= 4 * 2^-j
        tail_bound: 4.0 * 2.0_f64.powi(-(j_max as i32)),
    })
}

/// Absolute-form metric between particle measures (the weak-convergence
/// metric on `M_b`).
pub fn metric_d_abs(
    mu: &ParticleMeasure,
    nu: &ParticleMeasure,
    table: &CoefficientTable,
    j_max: usize,
) -> Result<MetricValue> {
    check_membership(mu, table)?;
    check_membership(nu, table)?;
    let value = truncated_sum(table, j_max, |p| Ok(mu.pair_xpoly(p)? - nu.pair_xpoly(p)?), false)?;
    Ok(MetricValue {
        value,
        // c_j |<mu-nu, f_j>| <= 2 c_j sqrt(s_j - 1) <= sqrt(2) * 2^-j
        tail_bound: std::f64::consts::SQRT_2 * 2.0_f64.powi(-(j_max as i32)),
    })
}

/// Squared-form metric between truncated moment vectors. Membership in `M_b`
/// cannot be read off a truncation, so no membership check is performed and
/// the tail certificate is conditional on actual membership; used for
/// comparing deterministic moment flows.
pub fn metric_d_sq_moments(
    mu: &MomentVector,
    nu: &MomentVector,
    table: &CoefficientTable,
    j_max: usize,
) -> Result<MetricValue> {
    let value = truncated_sum(table, j_max, |p| Ok(mu.pair_xpoly(p)? - nu.pair_xpoly(p)?), true)?;
    Ok(MetricValue {
        value,
        tail_bound: 4.0 * 2.0_f64.powi(-(j_max as i32)),
    })
}

/// Absolute-form metric between truncated moment vectors (no membership
/// check; see [`metric_d_sq_moments`]).
pub fn metric_d_abs_moments(
    mu: &MomentVector,
    nu: &MomentVector,
    table: &CoefficientTable,
    j_max: usize,
) -> Result<MetricValue> {
    let value = truncated_sum(table, j_max, |p| Ok(mu.pair_xpoly(p)? - nu.pair_xpoly(p)?), false)?;
    Ok(MetricValue {
        value,
        tail_bound: std::f64::consts::SQRT_2 * 2.0_f64.powi(-(j_max as i32)),
    })
}

fn check_membership(mu: &ParticleMeasure, table: &CoefficientTable) -> Result<()> {
    let exp_moment = mu.exp_moment(table.delta);
    if exp_moment > table.bound_b {
        return Err(Error::OutsideBall {
            exp_moment,
            bound: table.bound_b,
        });
    }
    Ok(())
}

fn truncated_sum(
    table: &CoefficientTable,
    j_max: usize,
    diff: impl Fn(&crate::xpoly::XPoly) -> Result<f64>,
    squared: bool,
) -> Result<f64> {
    if j_max == 0 || j_max > table.len() {
        return Err(Error::InvalidInput(format!(
            "truncation index {j_max} outside 1..={}",
            table.len()
        )));
    }
    let mut acc = 0.0;
    for j in 0..j_max {
        let d = diff(&table.basis_num[j])?;
        acc += table.c[j] * if squared { d * d } else { d.abs() };
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::coeff_table;
    use crate::jump::JumpLaw;
    use rand::Rng;
    use rand::SeedableRng;

    fn table() -> CoefficientTable {
        let jump = JumpLaw::Gaussian { mean: 0.2, std_dev: 0.3 };
        coeff_table(4.0, 25, &jump, 0.5).unwrap()
    }

    fn random_cloud(rng: &mut impl Rng, n: usize, scale: f64) -> ParticleMeasure {
        let points = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
        ParticleMeasure::uniform(points).unwrap()
    }

    #[test]
    fn identical_measures_have_zero_distance() {
        let t = table();
        let mu = ParticleMeasure::uniform(vec![-0.5, 0.25, 1.0]).unwrap();
        assert_eq!(metric_d_sq(&mu, &mu, &t, 25).unwrap().value, 0.0);
        assert_eq!(metric_d_abs(&mu, &mu, &t, 25).unwrap().value, 0.0);
    }

    #[test]
    fn symmetry_and_separation() {
        let t = table();
        let mu = ParticleMeasure::uniform(vec![-0.5, 0.25, 1.0]).unwrap();
        let nu = ParticleMeasure::uniform(vec![-0.5, 0.3, 1.0]).unwrap();
        let ab = metric_d_abs(&mu, &nu, &t, 25).unwrap().value;
        let ba = metric_d_abs(&nu, &mu, &t, 25).unwrap().value;
        assert_eq!(ab, ba);
        assert!(ab > 0.0, "distinct supports must separate");
        assert!(metric_d_sq(&mu, &nu, &t, 25).unwrap().value > 0.0);
    }

    #[test]
    fn permutation_invariance() {
        let t = table();
        let mu = ParticleMeasure::uniform(vec![0.1, -0.7, 0.9]).unwrap();
        let mu_perm = ParticleMeasure::uniform(vec![0.9, 0.1, -0.7]).unwrap();
        let nu = ParticleMeasure::uniform(vec![0.0, 0.0, 0.4]).unwrap();
        let a = metric_d_sq(&mu, &nu, &t, 20).unwrap().value;
        let b = metric_d_sq(&mu_perm, &nu, &t, 20).unwrap().value;
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn triangle_inequality_on_sampled_triples() {
        let t = table();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let a = random_cloud(&mut rng, 6, 1.5);
            let b = random_cloud(&mut rng, 6, 1.5);
            let c = random_cloud(&mut rng, 6, 1.5);
            let ab = metric_d_abs(&a, &b, &t, 25).unwrap().value;
            let bc = metric_d_abs(&b, &c, &t, 25).unwrap().value;
            let ac = metric_d_abs(&a, &c, &t, 25).unwrap().value;
            assert!(ac <= ab + bc + 1e-12);
        }
    }

    #[test]
    fn uniform_series_bound_inside_ball() {
        let t = table();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let zero = ParticleMeasure::dirac(0.0);
        for _ in 0..50 {
            let mu = random_cloud(&mut rng, 8, 2.0);
            assert!(mu.exp_moment(t.delta) <= t.bound_b, "test cloud escaped the ball");
            // sum c_j <mu, f_j>^2 <= 1  (checked through the distance to delta_0
            // being bounded by the derived constant 4)
            let single: f64 = (0..t.len())
                .map(|j| t.c[j] * mu.pair_xpoly(&t.basis_num[j]).unwrap().powi(2))
                .sum();
            assert!(single <= 1.0 + 1e-12, "uniform series bound violated: {single}");
            let d = metric_d_sq(&mu, &zero, &t, t.len()).unwrap();
            assert!(d.value <= 4.0 + 1e-12);
            let d_abs = metric_d_abs(&mu, &zero, &t, t.len()).unwrap();
            assert!(d_abs.upper() <= std::f64::consts::SQRT_2 + 1e-12);
        }
    }

    #[test]
    fn membership_violation_is_an_error() {
        let t = table();
        let far = ParticleMeasure::dirac(40.0);
        let near = ParticleMeasure::dirac(0.0);
        assert!(matches!(
            metric_d_sq(&far, &near, &t, 10),
            Err(Error::OutsideBall { .. })
        ));
    }

    #[test]
    fn moment_variant_matches_particle_variant() {
        let t = table();
        let mu = ParticleMeasure::uniform(vec![-0.4, 0.2, 0.8]).unwrap();
        let nu = ParticleMeasure::uniform(vec![0.1, 0.3]).unwrap();
        let d_particles = metric_d_abs(&mu, &nu, &t, 19).unwrap().value;
        let order = t.max_degree();
        let d_moments = metric_d_abs_moments(&mu.moments(order), &nu.moments(order), &t, 19)
            .unwrap()
            .value;
        assert!((d_particles - d_moments).abs() < 1e-12);
    }
}
