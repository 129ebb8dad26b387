//! Closure of a polynomial under differentiation and the jump-moment
//! combination `p -> sum_i m_i p^(i)`, plus the canonical enumeration of the
//! union of all monomial closures.
//!
//! The closure of any polynomial is finite: both operations strictly lower
//! the x-degree, so a worklist with exact (symbolic) deduplication terminates.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::poly::Polynomial;

/// The smallest set of polynomials containing `generator` that is closed
/// under all derivatives and under the jump image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureSet {
    pub generator: Polynomial,
    pub elements: BTreeSet<Polynomial>,
}

impl ClosureSet {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, p: &Polynomial) -> bool {
        self.elements.contains(p)
    }

    /// Members in canonical order (degree first, then coefficients).
    pub fn iter(&self) -> impl Iterator<Item = &Polynomial> {
        self.elements.iter()
    }
}

/// Computes the closure of `f` by a worklist with exact-equality dedup.
pub fn star_closure(f: &Polynomial) -> ClosureSet {
    let mut elements = BTreeSet::new();
    let mut pending = vec![f.clone()];
    while let Some(g) = pending.pop() {
        if !elements.insert(g.clone()) {
            continue;
        }
        if !g.is_zero() {
            for i in 1..=g.degree() {
                pending.push(g.derivative(i));
            }
        }
        pending.push(g.jump_image());
    }
    ClosureSet {
        generator: f.clone(),
        elements,
    }
}

/// Deterministic enumeration of the union of the monomial closures
/// `closure(x), closure(x^2), ...`, excluding the zero polynomial.
///
/// Monomial degrees are consumed in increasing order; within the batch of a
/// degree, new elements are sorted canonically (x-degree first). Since every
/// non-generator member of a closure has strictly smaller degree than its
/// generator, this ordering guarantees that the closure of the `j`-th element
/// occupies positions `1..=j` — truncations of the enumeration are
/// self-contained.
///
/// Stops at the smallest monomial degree whose cumulative union reaches at
/// least `min_len` elements and returns that whole union.
pub fn enumerate_theta(min_len: usize) -> Vec<Polynomial> {
    let mut out = Vec::new();
    let mut k = 1;
    while out.len() < min_len {
        append_batch(&mut out, k);
        k += 1;
    }
    out
}

/// The enumeration restricted to monomial generators `x, ..., x^max_degree`.
/// Useful when downstream pairings can only reach moments up to a fixed order.
pub fn enumerate_theta_through_degree(max_degree: u32) -> Vec<Polynomial> {
    let mut out = Vec::new();
    for k in 1..=max_degree {
        append_batch(&mut out, k);
    }
    out
}

fn append_batch(out: &mut Vec<Polynomial>, k: u32) {
    let batch = star_closure(&Polynomial::x_pow(k));
    let mut fresh: Vec<Polynomial> = batch
        .elements
        .into_iter()
        .filter(|p| !p.is_zero() && !out.contains(p))
        .collect();
    fresh.sort();
    out.extend(fresh);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Polynomial {
        Polynomial::parse(s).unwrap()
    }

    fn set(items: &[&str]) -> BTreeSet<Polynomial> {
        items.iter().map(|s| p(s)).collect()
    }

    #[test]
    fn closure_of_x() {
        let c = star_closure(&p("x"));
        assert_eq!(c.elements, set(&["0", "1", "m1", "x"]));
    }

    #[test]
    fn closure_of_x_squared() {
        let c = star_closure(&p("x^2"));
        assert_eq!(
            c.elements,
            set(&["0", "2", "2m1", "2m1^2", "2x", "2m1x + 2m2", "x^2"])
        );
    }

    #[test]
    fn closure_of_x_cubed() {
        let c = star_closure(&p("x^3"));
        assert_eq!(
            c.elements,
            set(&[
                "0",
                "6",
                "6m1",
                "6m1^2",
                "6m1^3",
                "6x",
                "6m1x + 6m2",
                "6m1^2x + 12m1m2",
                "3x^2",
                "3m1x^2 + 6m2x + 6m3",
                "x^3",
            ])
        );
    }

    #[test]
    fn closure_of_constant() {
        let c = star_closure(&p("5"));
        assert_eq!(c.elements, set(&["5", "0"]));
    }

    #[test]
    fn closure_is_closed_and_minimal() {
        let c = star_closure(&p("x^3"));
        for g in c.iter() {
            if !g.is_zero() {
                for i in 1..=g.degree() {
                    assert!(c.contains(&g.derivative(i)), "derivative escaped");
                }
            }
            assert!(c.contains(&g.jump_image()), "jump image escaped");
            // idempotence: closures of members stay inside
            let sub = star_closure(g);
            assert!(sub.elements.is_subset(&c.elements));
        }
    }

    #[test]
    fn theta_contains_monomials_and_is_stable() {
        let theta = enumerate_theta(19);
        assert!(theta.contains(&p("x")));
        assert!(theta.contains(&p("x^2")));
        assert!(theta.contains(&p("x^3")));
        assert!(!theta.iter().any(|q| q.is_zero()));
        assert_eq!(theta, enumerate_theta(19));
        // no duplicates
        let unique: BTreeSet<_> = theta.iter().cloned().collect();
        assert_eq!(unique.len(), theta.len());
    }

    #[test]
    fn theta_first_batch_is_closure_of_x() {
        let theta = enumerate_theta(1);
        assert_eq!(theta, vec![p("1"), p("m1"), p("x")]);
    }

    #[test]
    fn theta_truncations_are_self_contained() {
        let theta = enumerate_theta(40);
        for (j, f) in theta.iter().enumerate() {
            let closure = star_closure(f);
            for g in closure.iter().filter(|g| !g.is_zero()) {
                let pos = theta.iter().position(|h| h == g).expect("member enumerated");
                assert!(pos <= j, "closure member after its generator");
            }
        }
    }
}
