//! Exact univariate polynomials in `x` whose coefficients live in the ring
//! `Q[m1, m2, ...]` of rational polynomials in the formal jump-moment symbols.
//!
//! Keeping the `m_i` symbolic (rather than substituting numbers eagerly) makes
//! equality of polynomials exact and decidable, which is what the closure-set
//! worklist in [`crate::closure`] relies on for deduplication. Numeric
//! specialization happens at the very end, via [`Polynomial::specialize`].

use std::collections::BTreeMap;
use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::xpoly::XPoly;

mod parse;

/// A monomial in the jump-moment symbols: maps 1-based symbol index to its
/// exponent. The empty map is the unit monomial.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MomentMonomial(BTreeMap<u32, u32>);

impl MomentMonomial {
    pub fn unit() -> Self {
        Self::default()
    }

    /// The single symbol `m_index` (index is 1-based).
    pub fn symbol(index: u32) -> Self {
        assert!(index >= 1, "moment symbols are 1-based");
        let mut map = BTreeMap::new();
        map.insert(index, 1);
        Self(map)
    }

    pub fn is_unit(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut map = self.0.clone();
        for (&i, &e) in &other.0 {
            *map.entry(i).or_insert(0) += e;
        }
        Self(map)
    }

    /// Largest symbol index appearing, or 0 for the unit monomial.
    pub fn max_symbol(&self) -> u32 {
        self.0.keys().next_back().copied().unwrap_or(0)
    }

    /// Evaluates at concrete moment values, `values[i-1]` holding `m_i`.
    /// Returns `None` when a needed symbol is out of range.
    pub fn eval(&self, values: &[f64]) -> Option<f64> {
        let mut out = 1.0;
        for (&i, &e) in &self.0 {
            let v = *values.get(i as usize - 1)?;
            out *= v.powi(e as i32);
        }
        Some(out)
    }

    pub fn exponents(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.0.iter().map(|(&i, &e)| (i, e))
    }
}

/// A polynomial in the moment symbols with exact rational coefficients.
/// Canonical form: no stored coefficient is zero.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MomentPoly(BTreeMap<MomentMonomial, BigRational>);

impl MomentPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_rational(BigRational::one())
    }

    pub fn from_rational(r: BigRational) -> Self {
        let mut map = BTreeMap::new();
        if !r.is_zero() {
            map.insert(MomentMonomial::unit(), r);
        }
        Self(map)
    }

    pub fn from_integer(n: i64) -> Self {
        Self::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    /// The symbol `m_index` with coefficient 1.
    pub fn symbol(index: u32) -> Self {
        let mut map = BTreeMap::new();
        map.insert(MomentMonomial::symbol(index), BigRational::one());
        Self(map)
    }

    pub fn term(mono: MomentMonomial, coeff: BigRational) -> Self {
        let mut map = BTreeMap::new();
        if !coeff.is_zero() {
            map.insert(mono, coeff);
        }
        Self(map)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut map = self.0.clone();
        for (mono, coeff) in &other.0 {
            let entry = map.entry(mono.clone()).or_insert_with(BigRational::zero);
            *entry += coeff;
            if entry.is_zero() {
                map.remove(mono);
            }
        }
        Self(map)
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|(m, c)| (m.clone(), -c.clone())).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut map: BTreeMap<MomentMonomial, BigRational> = BTreeMap::new();
        for (ma, ca) in &self.0 {
            for (mb, cb) in &other.0 {
                let mono = ma.mul(mb);
                let entry = map.entry(mono.clone()).or_insert_with(BigRational::zero);
                *entry += ca * cb;
                if entry.is_zero() {
                    map.remove(&mono);
                }
            }
        }
        Self(map)
    }

    pub fn scale(&self, r: &BigRational) -> Self {
        if r.is_zero() {
            return Self::zero();
        }
        Self(self.0.iter().map(|(m, c)| (m.clone(), c * r)).collect())
    }

    pub fn max_symbol(&self) -> u32 {
        self.0.keys().map(|m| m.max_symbol()).max().unwrap_or(0)
    }

    pub fn eval(&self, values: &[f64]) -> Option<f64> {
        let mut out = 0.0;
        for (mono, coeff) in &self.0 {
            out += rational_to_f64(coeff) * mono.eval(values)?;
        }
        Some(out)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MomentMonomial, &BigRational)> {
        self.0.iter()
    }
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    // Safe for the magnitudes in play here; falls back to the ratio of
    // f64-converted parts when the parts individually overflow.
    let num = bigint_to_f64(r.numer());
    let den = bigint_to_f64(r.denom());
    num / den
}

fn bigint_to_f64(n: &BigInt) -> f64 {
    use num::ToPrimitive;
    n.to_f64().unwrap_or(f64::NAN)
}

/// A polynomial in `x` over `Q[m1..mD]`: maps x-degree to its coefficient.
/// Canonical form: no stored coefficient is the zero `MomentPoly`, so the
/// zero polynomial has an empty term map.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Polynomial(BTreeMap<u32, MomentPoly>);

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn constant(coeff: MomentPoly) -> Self {
        Self::term(0, coeff)
    }

    pub fn constant_int(n: i64) -> Self {
        Self::constant(MomentPoly::from_integer(n))
    }

    /// The monomial `x^degree`.
    pub fn x_pow(degree: u32) -> Self {
        Self::term(degree, MomentPoly::one())
    }

    pub fn term(degree: u32, coeff: MomentPoly) -> Self {
        let mut map = BTreeMap::new();
        if !coeff.is_zero() {
            map.insert(degree, coeff);
        }
        Self(map)
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (u32, MomentPoly)>) -> Self {
        let mut out = Self::zero();
        for (deg, coeff) in terms {
            out = out.add(&Self::term(deg, coeff));
        }
        out
    }

    /// Max stored x-degree; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.0.keys().next_back().copied().unwrap_or(0)
    }

    pub fn coeff(&self, degree: u32) -> MomentPoly {
        self.0.get(&degree).cloned().unwrap_or_default()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut map = self.0.clone();
        for (&deg, coeff) in &other.0 {
            let entry = map.entry(deg).or_default();
            *entry = entry.add(coeff);
            if entry.is_zero() {
                map.remove(&deg);
            }
        }
        Self(map)
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|(&d, c)| (d, c.neg())).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (&da, ca) in &self.0 {
            for (&db, cb) in &other.0 {
                out = out.add(&Self::term(da + db, ca.mul(cb)));
            }
        }
        out
    }

    pub fn scale(&self, r: &MomentPoly) -> Self {
        if r.is_zero() {
            return Self::zero();
        }
        Self(self.0.iter().map(|(&d, c)| (d, c.mul(r))).collect())
    }

    pub fn pow(&self, exp: u32) -> Self {
        let mut out = Self::constant(MomentPoly::one());
        for _ in 0..exp {
            out = out.mul(self);
        }
        out
    }

    /// Exact `order`-th derivative in `x`; orders beyond the degree yield the
    /// zero polynomial.
    pub fn derivative(&self, order: u32) -> Self {
        if order == 0 {
            return self.clone();
        }
        let mut map = BTreeMap::new();
        for (&deg, coeff) in &self.0 {
            if deg < order {
                continue;
            }
            // falling factorial deg * (deg-1) * ... * (deg-order+1)
            let mut fact = BigInt::one();
            for k in 0..order {
                fact *= BigInt::from(deg - k);
            }
            let scaled = coeff.scale(&BigRational::from_integer(fact));
            if !scaled.is_zero() {
                map.insert(deg - order, scaled);
            }
        }
        Self(map)
    }

    /// The jump operator image `sum_{i=1}^{deg} m_i * p^(i)` with the `m_i`
    /// kept symbolic. Constants (and the zero polynomial) map to zero.
    pub fn jump_image(&self) -> Self {
        let mut out = Self::zero();
        for i in 1..=self.degree() {
            let d = self.derivative(i);
            if !d.is_zero() {
                out = out.add(&d.scale(&MomentPoly::symbol(i)));
            }
        }
        out
    }

    /// Largest jump-moment symbol index appearing in any coefficient.
    pub fn max_symbol(&self) -> u32 {
        self.0.values().map(|c| c.max_symbol()).max().unwrap_or(0)
    }

    /// Numeric specialization: substitutes `moment_values[i-1]` for `m_i`
    /// and returns the resulting numeric polynomial in `x`.
    pub fn specialize(&self, moment_values: &[f64]) -> Result<XPoly> {
        let deg = self.degree() as usize;
        let mut coeffs = vec![0.0; if self.is_zero() { 0 } else { deg + 1 }];
        for (&d, coeff) in &self.0 {
            coeffs[d as usize] = coeff.eval(moment_values).ok_or(Error::MissingMoment {
                index: coeff.max_symbol() as usize,
                order: moment_values.len(),
            })?;
        }
        Ok(XPoly::new(coeffs))
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, &MomentPoly)> {
        self.0.iter().map(|(&d, c)| (d, c))
    }

    /// Parses the textual form produced by `Display`, e.g. `"3m1x^2 + 6m2x + 6m3"`.
    pub fn parse(input: &str) -> Result<Self> {
        parse::parse_polynomial(input)
    }

    /// Degree-keyed term map with coefficient strings, for JSON emission.
    pub fn to_term_strings(&self) -> BTreeMap<String, String> {
        self.0
            .iter()
            .map(|(&d, c)| (d.to_string(), format_moment_poly(c)))
            .collect()
    }

    pub fn from_term_strings(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut out = Self::zero();
        for (deg, coeff) in map {
            let deg: u32 = deg.parse().map_err(|_| Error::Parse {
                position: 0,
                message: format!("bad degree key `{deg}`"),
            })?;
            let coeff_poly = Self::parse(coeff)?;
            if coeff_poly.degree() != 0 && !coeff_poly.is_zero() {
                return Err(Error::Parse {
                    position: 0,
                    message: format!("coefficient string `{coeff}` contains x"),
                });
            }
            out = out.add(&Self::term(deg, coeff_poly.coeff(0)));
        }
        Ok(out)
    }
}

// Ordered by x-degree first, then by the term maps; gives the deterministic
// "canonical polynomial order" used when enumerating closure sets.
impl PartialOrd for Polynomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Polynomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn format_term(rat: &BigRational, mono: &MomentMonomial, x_deg: u32) -> String {
    let mut parts = String::new();
    let abs = rat.abs();
    let has_tail = !mono.is_unit() || x_deg > 0;
    if !abs.is_one() || !has_tail {
        parts.push_str(&format_rational(&abs));
    }
    for (i, e) in mono.exponents() {
        parts.push_str(&format!("m{i}"));
        if e > 1 {
            parts.push_str(&format!("^{e}"));
        }
    }
    if x_deg >= 1 {
        parts.push('x');
        if x_deg > 1 {
            parts.push_str(&format!("^{x_deg}"));
        }
    }
    parts
}

fn format_moment_poly(p: &MomentPoly) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (idx, (mono, rat)) in p.terms().enumerate() {
        if idx == 0 {
            if rat.is_negative() {
                out.push('-');
            }
        } else if rat.is_negative() {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        out.push_str(&format_term(rat, mono, 0));
    }
    out
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        // highest x-degree first, matching the usual handwritten order
        for (&deg, coeff) in self.0.iter().rev() {
            for (mono, rat) in coeff.terms() {
                if first {
                    if rat.is_negative() {
                        write!(f, "-")?;
                    }
                    first = false;
                } else if rat.is_negative() {
                    write!(f, " - ")?;
                } else {
                    write!(f, " + ")?;
                }
                write!(f, "{}", format_term(rat, mono, deg))?;
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for Polynomial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl serde::Serialize for Polynomial {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(serde::Serialize)]
        struct Repr<'a> {
            terms: BTreeMap<String, String>,
            #[serde(skip_serializing_if = "Option::is_none")]
            display: Option<&'a str>,
        }
        let display = self.to_string();
        Repr {
            terms: self.to_term_strings(),
            display: Some(&display),
        }
        .serialize(serializer)
    }
}

impl<'de> serde::Deserialize<'de> for Polynomial {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        struct Repr {
            terms: BTreeMap<String, String>,
        }
        let repr = Repr::deserialize(deserializer)?;
        Polynomial::from_term_strings(&repr.terms).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Polynomial {
        Polynomial::parse(s).unwrap()
    }

    #[test]
    fn derivative_power_rule() {
        assert_eq!(p("x^3").derivative(1), p("3x^2"));
        assert_eq!(p("x^3").derivative(2), p("6x"));
        assert_eq!(p("x^3").derivative(3), p("6"));
        assert_eq!(p("x^3").derivative(4), Polynomial::zero());
    }

    #[test]
    fn derivative_with_symbols() {
        assert_eq!(p("2m1x + 2m2").derivative(1), p("2m1"));
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        assert_eq!(p("7").derivative(1), Polynomial::zero());
        assert_eq!(p("m1^2").derivative(1), Polynomial::zero());
    }

    #[test]
    fn jump_image_examples() {
        assert_eq!(p("x").jump_image(), p("m1"));
        assert_eq!(p("x^2").jump_image(), p("2m1x + 2m2"));
        assert_eq!(p("5").jump_image(), Polynomial::zero());
        assert_eq!(
            p("x^3").jump_image(),
            p("3m1x^2 + 6m2x + 6m3"),
        );
    }

    #[test]
    fn canonical_form_drops_zero_terms() {
        let q = p("x^2 + m1x").sub(&p("m1x"));
        assert_eq!(q, p("x^2"));
        assert!(p("x").sub(&p("x")).is_zero());
    }

    #[test]
    fn display_round_trip() {
        for s in ["x^3", "3m1x^2 + 6m2x + 6m3", "2m1x + 2m2", "-x + 1/2", "0", "6m1^2x + 12m1m2"] {
            let q = p(s);
            assert_eq!(Polynomial::parse(&q.to_string()).unwrap(), q, "{s}");
        }
    }

    #[test]
    fn term_strings_round_trip() {
        let q = p("3/2m1x^2 - 6m2x + 6m3");
        let map = q.to_term_strings();
        assert_eq!(Polynomial::from_term_strings(&map).unwrap(), q);
    }

    #[test]
    fn specialize_substitutes_moments() {
        let q = p("2m1x + 2m2");
        let xp = q.specialize(&[0.5, 0.25]).unwrap();
        assert_eq!(xp.eval(1.0), 2.0 * 0.5 + 2.0 * 0.25);
        assert!(q.specialize(&[0.5]).is_err());
    }

    #[test]
    fn ordering_sorts_by_degree_first() {
        assert!(p("m3") < p("x"));
        assert!(p("x") < p("x^2"));
        assert!(p("2x") < p("x^2"));
    }
}
