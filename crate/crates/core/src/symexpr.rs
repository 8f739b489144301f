//! Exact-rational sparse polynomials in the formal variables `g_m^(k)`.
//!
//! `g_m` is the ground-state-excluded chain sum of order `m` and `g_m^(k)`
//! its `k`-th derivative with respect to the Laplace variable `z` at `z = 0`.
//! `g_1` does not depend on `z`, so every derivative of it vanishes.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A formal variable `g_order^(deriv)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GVar {
    order: u32,
    deriv: u32,
}

impl GVar {
    /// # Panics
    /// If `order == 0`.
    pub fn new(order: u32, deriv: u32) -> Self {
        assert!(order >= 1, "g variables start at order 1");
        GVar { order, deriv }
    }

    pub fn try_new(order: u32, deriv: u32) -> Result<Self> {
        if order == 0 {
            return Err(Error::ArgumentRange("g variable order must be >= 1".into()));
        }
        Ok(GVar { order, deriv })
    }

    /// Shorthand for `g_order` at `z = 0` with no derivative.
    pub fn g(order: u32) -> Self {
        GVar::new(order, 0)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn deriv(&self) -> u32 {
        self.deriv
    }

    /// Next z-derivative, or `None` when it vanishes identically.
    pub fn differentiated(&self) -> Option<GVar> {
        if self.order == 1 {
            None
        } else {
            Some(GVar {
                order: self.order,
                deriv: self.deriv + 1,
            })
        }
    }
}

impl fmt::Display for GVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.deriv == 0 {
            write!(f, "g{}", self.order)
        } else {
            write!(f, "g{}^({})", self.order, self.deriv)
        }
    }
}

/// A product of [`GVar`] powers. The empty product is the constant 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct GMonomial {
    factors: BTreeMap<GVar, u32>,
}

impl GMonomial {
    pub fn one() -> Self {
        GMonomial::default()
    }

    pub fn var(v: GVar) -> Self {
        GMonomial::pow(v, 1)
    }

    pub fn pow(v: GVar, exp: u32) -> Self {
        let mut factors = BTreeMap::new();
        if exp > 0 {
            factors.insert(v, exp);
        }
        GMonomial { factors }
    }

    pub fn from_factors<I: IntoIterator<Item = (GVar, u32)>>(it: I) -> Self {
        let mut m = GMonomial::one();
        for (v, e) in it {
            m.multiply_var(v, e);
        }
        m
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> impl Iterator<Item = (GVar, u32)> + '_ {
        self.factors.iter().map(|(v, e)| (*v, *e))
    }

    pub fn exponent(&self, v: GVar) -> u32 {
        self.factors.get(&v).copied().unwrap_or(0)
    }

    /// Ordinary total degree.
    pub fn degree(&self) -> u32 {
        self.factors.values().sum()
    }

    /// Perturbative order under the grading `deg(g_m^(k)) = m`.
    pub fn weight(&self) -> u32 {
        self.factors.iter().map(|(v, e)| v.order * e).sum()
    }

    fn multiply_var(&mut self, v: GVar, e: u32) {
        if e > 0 {
            *self.factors.entry(v).or_insert(0) += e;
        }
    }

    fn divide_var(&mut self, v: GVar) {
        match self.factors.get_mut(&v) {
            Some(e) if *e > 1 => *e -= 1,
            Some(_) => {
                self.factors.remove(&v);
            }
            None => panic!("dividing a monomial by a variable it does not contain"),
        }
    }

    pub fn mul(&self, other: &GMonomial) -> GMonomial {
        let mut out = self.clone();
        for (v, e) in other.factors() {
            out.multiply_var(v, e);
        }
        out
    }
}

// Graded lexicographic: total degree first, then the sorted factor list.
impl Ord for GMonomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.factors.iter().cmp(other.factors.iter()))
    }
}

impl PartialOrd for GMonomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for GMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return write!(f, "1");
        }
        let mut first = true;
        for (v, e) in self.factors() {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "{v}")?;
            if e > 1 {
                write!(f, "^{e}")?;
            }
        }
        Ok(())
    }
}

/// Sparse polynomial with exact rational coefficients, in canonical form:
/// no zero coefficients are stored and terms are kept in [`GMonomial`] order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GExpression {
    terms: BTreeMap<GMonomial, BigRational>,
}

impl GExpression {
    pub fn zero() -> Self {
        GExpression::default()
    }

    pub fn one() -> Self {
        GExpression::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        GExpression::term(GMonomial::one(), c)
    }

    pub fn var(v: GVar) -> Self {
        GExpression::term(GMonomial::var(v), BigRational::one())
    }

    pub fn term(m: GMonomial, c: BigRational) -> Self {
        let mut e = GExpression::zero();
        e.add_term(m, c);
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&GMonomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &GMonomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    /// All variables appearing in the expression.
    pub fn variables(&self) -> BTreeSet<GVar> {
        self.terms
            .keys()
            .flat_map(|m| m.factors().map(|(v, _)| v))
            .collect()
    }

    pub fn add_term(&mut self, m: GMonomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                *existing += c;
                if existing.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn scale(&self, c: &BigRational) -> GExpression {
        if c.is_zero() {
            return GExpression::zero();
        }
        GExpression {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    /// Formal `d/dz` with `d g_m^(k) = g_m^(k+1)` and `d g_1^(k) = 0`.
    pub fn differentiate_z(&self) -> GExpression {
        let mut out = GExpression::zero();
        for (m, c) in &self.terms {
            for (v, e) in m.factors() {
                let Some(dv) = v.differentiated() else {
                    continue;
                };
                let mut dm = m.clone();
                dm.divide_var(v);
                dm.multiply_var(dv, 1);
                out.add_term(dm, c * BigRational::from_integer(BigInt::from(e)));
            }
        }
        out
    }

    /// `k`-fold [`differentiate_z`](Self::differentiate_z).
    pub fn differentiate_z_n(&self, k: usize) -> GExpression {
        let mut out = self.clone();
        for _ in 0..k {
            if out.is_zero() {
                break;
            }
            out = out.differentiate_z();
        }
        out
    }

    pub fn evaluate(&self, bindings: &HashMap<GVar, f64>) -> Result<f64> {
        self.evaluate_with(|v| bindings.get(&v).copied())
    }

    /// Evaluate with a lookup closure; the first unbound variable is reported.
    pub fn evaluate_with<F>(&self, mut lookup: F) -> Result<f64>
    where
        F: FnMut(GVar) -> Option<f64>,
    {
        let mut total = 0.0;
        for (m, c) in &self.terms {
            let mut prod = rational_to_f64(c);
            for (v, e) in m.factors() {
                let x = lookup(v).ok_or(Error::UnboundVariable(v))?;
                prod *= x.powi(e as i32);
            }
            total += prod;
        }
        Ok(total)
    }

    /// Every monomial has the given perturbative weight.
    pub fn is_homogeneous(&self, weight: u32) -> bool {
        self.terms.keys().all(|m| m.weight() == weight)
    }
}

fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        q.numer().to_f64().unwrap_or(f64::NAN) / q.denom().to_f64().unwrap_or(f64::NAN)
    })
}

impl From<GVar> for GExpression {
    fn from(v: GVar) -> Self {
        GExpression::var(v)
    }
}

impl Add<&GExpression> for &GExpression {
    type Output = GExpression;
    fn add(self, rhs: &GExpression) -> GExpression {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Add for GExpression {
    type Output = GExpression;
    fn add(mut self, rhs: GExpression) -> GExpression {
        for (m, c) in rhs.terms {
            self.add_term(m, c);
        }
        self
    }
}

impl Neg for &GExpression {
    type Output = GExpression;
    fn neg(self) -> GExpression {
        GExpression {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Neg for GExpression {
    type Output = GExpression;
    fn neg(self) -> GExpression {
        -&self
    }
}

impl Sub<&GExpression> for &GExpression {
    type Output = GExpression;
    fn sub(self, rhs: &GExpression) -> GExpression {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl Sub for GExpression {
    type Output = GExpression;
    fn sub(self, rhs: GExpression) -> GExpression {
        &self - &rhs
    }
}

impl Mul<&GExpression> for &GExpression {
    type Output = GExpression;
    fn mul(self, rhs: &GExpression) -> GExpression {
        let mut out = GExpression::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Mul for GExpression {
    type Output = GExpression;
    fn mul(self, rhs: GExpression) -> GExpression {
        &self * &rhs
    }
}

// Text rendering: `-1/2 g1^2 g2^(2) + g3`.
impl fmt::Display for GExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let negative = c.is_negative();
            match (i, negative) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let abs = c.abs();
            if m.is_one() {
                write!(f, "{abs}")?;
            } else if abs.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{abs} {m}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for GExpression {
    type Err = Error;

    /// Parses the text rendering produced by `Display`.
    fn from_str(s: &str) -> Result<Self> {
        Parser {
            src: s.as_bytes(),
            pos: 0,
        }
        .expression()
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at byte {} of expression", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn integer(&mut self) -> Result<BigInt> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected an integer"));
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        Ok(text.parse().expect("digits parse as BigInt"))
    }

    fn small_integer(&mut self) -> Result<u32> {
        self.integer()?
            .to_u32()
            .ok_or_else(|| self.err("integer too large"))
    }

    fn expression(&mut self) -> Result<GExpression> {
        let mut out = GExpression::zero();
        let mut sign = if self.eat(b'-') {
            -1
        } else {
            self.eat(b'+');
            1
        };
        loop {
            let (m, c) = self.term()?;
            out.add_term(m, if sign < 0 { -c } else { c });
            match self.peek() {
                None => break,
                Some(b'+') => {
                    self.pos += 1;
                    sign = 1;
                }
                Some(b'-') => {
                    self.pos += 1;
                    sign = -1;
                }
                Some(_) => return Err(self.err("expected '+' or '-'")),
            }
        }
        Ok(out)
    }

    fn term(&mut self) -> Result<(GMonomial, BigRational)> {
        let mut coeff = BigRational::one();
        let mut saw_anything = false;
        if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            let num = self.integer()?;
            let den = if self.eat(b'/') {
                self.integer()?
            } else {
                BigInt::one()
            };
            if den.is_zero() {
                return Err(self.err("zero denominator"));
            }
            coeff = BigRational::new(num, den);
            saw_anything = true;
        }
        let mut m = GMonomial::one();
        while self.peek() == Some(b'g') {
            self.pos += 1;
            let order = self.small_integer()?;
            let mut deriv = 0;
            let mut exp = 1;
            if self.eat(b'^') {
                if self.eat(b'(') {
                    deriv = self.small_integer()?;
                    if !self.eat(b')') {
                        return Err(self.err("expected ')'"));
                    }
                    if self.eat(b'^') {
                        exp = self.small_integer()?;
                    }
                } else {
                    exp = self.small_integer()?;
                }
            }
            let v = GVar::try_new(order, deriv).map_err(|_| self.err("g0 is not a variable"))?;
            m.multiply_var(v, exp);
            saw_anything = true;
        }
        if !saw_anything {
            return Err(self.err("expected a term"));
        }
        Ok((m, coeff))
    }
}

#[derive(Serialize, Deserialize)]
struct JsonFactor {
    m: u32,
    k: u32,
    exp: u32,
}

#[derive(Serialize, Deserialize)]
struct JsonTerm {
    coeff_num: serde_json::Number,
    coeff_den: serde_json::Number,
    factors: Vec<JsonFactor>,
}

#[derive(Serialize, Deserialize)]
struct JsonExpression {
    terms: Vec<JsonTerm>,
}

fn big_to_number(b: &BigInt) -> serde_json::Number {
    b.to_string()
        .parse()
        .expect("integers are valid JSON numbers")
}

impl Serialize for GExpression {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| JsonTerm {
                coeff_num: big_to_number(c.numer()),
                coeff_den: big_to_number(c.denom()),
                factors: m
                    .factors()
                    .map(|(v, exp)| JsonFactor {
                        m: v.order,
                        k: v.deriv,
                        exp,
                    })
                    .collect(),
            })
            .collect();
        JsonExpression { terms }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GExpression {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = JsonExpression::deserialize(deserializer)?;
        let mut out = GExpression::zero();
        for t in raw.terms {
            let num: BigInt = t.coeff_num.to_string().parse().map_err(D::Error::custom)?;
            let den: BigInt = t.coeff_den.to_string().parse().map_err(D::Error::custom)?;
            if den.is_zero() {
                return Err(D::Error::custom("zero denominator"));
            }
            let mut m = GMonomial::one();
            for fct in t.factors {
                let v = GVar::try_new(fct.m, fct.k).map_err(D::Error::custom)?;
                m.multiply_var(v, fct.exp);
            }
            out.add_term(m, BigRational::new(num, den));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(m: u32) -> GExpression {
        GExpression::var(GVar::g(m))
    }

    fn gd(m: u32, k: u32) -> GExpression {
        GExpression::var(GVar::new(m, k))
    }

    fn int(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    fn p(s: &str) -> GExpression {
        s.parse().unwrap()
    }

    #[test]
    fn add_identity_inverse_and_merge() {
        assert_eq!(&g(2) + &GExpression::zero(), g(2));
        assert!((&g(2) + &g(2).scale(&int(-1))).is_zero());
        let a = &g(3) + &(&g(1) * &gd(2, 1));
        let b = &g(1) * &gd(2, 1);
        assert_eq!(&a + &b, p("g3 + 2 g1 g2^(1)"));
    }

    #[test]
    fn mul_examples() {
        assert_eq!(&g(1) * &g(1), p("g1^2"));
        assert_eq!(&(&g(1) + &g(2)) * &gd(2, 1), p("g1 g2^(1) + g2 g2^(1)"));
        assert_eq!(&GExpression::one() * &g(4), g(4));
    }

    #[test]
    fn differentiate_examples() {
        assert_eq!(g(2).differentiate_z(), gd(2, 1));
        assert_eq!((&g(1) * &g(2)).differentiate_z(), p("g1 g2^(1)"));
        assert_eq!((&g(2) * &g(2)).differentiate_z(), p("2 g2 g2^(1)"));
        assert!(g(1).differentiate_z().is_zero());
        assert!(GExpression::one().differentiate_z().is_zero());
    }

    #[test]
    fn evaluate_examples() {
        let b: HashMap<GVar, f64> = [(GVar::g(1), 0.25)].into();
        assert_eq!(g(1).evaluate(&b).unwrap(), 0.25);
        let b: HashMap<GVar, f64> = [(GVar::g(2), 0.04)].into();
        assert_eq!((-g(2)).evaluate(&b).unwrap(), -0.04);
        let e = p("g3 + g1 g2^(1)");
        let b: HashMap<GVar, f64> = [
            (GVar::g(3), 0.0),
            (GVar::g(1), 0.5),
            (GVar::new(2, 1), -0.2),
        ]
        .into();
        assert!((e.evaluate(&b).unwrap() + 0.1).abs() < 1e-15);
    }

    #[test]
    fn evaluate_reports_missing_variable() {
        let e = p("g3 + g1 g2^(1)");
        let b: HashMap<GVar, f64> = [(GVar::g(3), 1.0), (GVar::g(1), 1.0)].into();
        assert_eq!(e.evaluate(&b), Err(Error::UnboundVariable(GVar::new(2, 1))));
    }

    #[test]
    fn text_rendering() {
        let e = p("-1/2 g1^2 g2^(2) - g4 - g2 g2^(1) - g1 g3^(1)");
        assert_eq!(
            e.to_string(),
            "-g4 - g1 g3^(1) - g2 g2^(1) - 1/2 g1^2 g2^(2)"
        );
        assert_eq!(GExpression::zero().to_string(), "0");
        assert_eq!(p("g2^(1)^2").to_string(), "g2^(1)^2");
        assert_eq!(p("3/4").to_string(), "3/4");
    }

    #[test]
    fn parse_errors() {
        assert!("".parse::<GExpression>().is_err());
        assert!("g0".parse::<GExpression>().is_err());
        assert!("g2 *".parse::<GExpression>().is_err());
        assert!("1/0 g2".parse::<GExpression>().is_err());
    }

    #[test]
    fn json_shape() {
        let e = p("-1/2 g1^2 g2^(2)");
        let text = serde_json::to_string(&e).unwrap();
        assert_eq!(
            text,
            r#"{"terms":[{"coeff_num":-1,"coeff_den":2,"factors":[{"m":1,"k":0,"exp":2},{"m":2,"k":2,"exp":1}]}]}"#
        );
        let back: GExpression = serde_json::from_str(&text).unwrap();
        assert_eq!(back, e);
    }

    fn arb_var() -> impl Strategy<Value = GVar> {
        (1u32..5, 0u32..3).prop_map(|(m, k)| GVar::new(m, if m == 1 { 0 } else { k }))
    }

    fn arb_expr() -> impl Strategy<Value = GExpression> {
        let term = (
            -6i64..7,
            1i64..5,
            proptest::collection::vec((arb_var(), 1u32..3), 0..3),
        );
        proptest::collection::vec(term, 0..5).prop_map(|terms| {
            let mut e = GExpression::zero();
            for (n, d, fs) in terms {
                e.add_term(
                    GMonomial::from_factors(fs),
                    BigRational::new(n.into(), d.into()),
                );
            }
            e
        })
    }

    fn bindings() -> impl Fn(GVar) -> Option<f64> {
        |v: GVar| Some(0.3 + 0.17 * v.order() as f64 - 0.11 * v.deriv() as f64)
    }

    proptest! {
        #[test]
        fn ring_axioms(a in arb_expr(), b in arb_expr(), c in arb_expr()) {
            prop_assert_eq!(&a + &b, &b + &a);
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert!(!(&a - &a).terms().any(|_| true));
        }

        #[test]
        fn derivative_is_linear_and_leibniz(a in arb_expr(), b in arb_expr()) {
            prop_assert_eq!(
                (&a + &b).differentiate_z(),
                &a.differentiate_z() + &b.differentiate_z()
            );
            prop_assert_eq!(
                (&a * &b).differentiate_z(),
                &(&a.differentiate_z() * &b) + &(&a * &b.differentiate_z())
            );
        }

        #[test]
        fn evaluation_is_a_homomorphism(a in arb_expr(), b in arb_expr()) {
            let f = bindings();
            let ea = a.evaluate_with(&f).unwrap();
            let eb = b.evaluate_with(&f).unwrap();
            let prod = (&a * &b).evaluate_with(&f).unwrap();
            let sum = (&a + &b).evaluate_with(&f).unwrap();
            let scale = 1.0 + (ea * eb).abs() + ea.abs() + eb.abs();
            prop_assert!((prod - ea * eb).abs() <= 1e-12 * scale);
            prop_assert!((sum - ea - eb).abs() <= 1e-12 * scale);
        }

        #[test]
        fn text_round_trip(a in arb_expr()) {
            let back: GExpression = a.to_string().parse().unwrap();
            prop_assert_eq!(back, a);
        }
    }
}
