//! External numbers `a + A`: a finite ε-series representative and a neutrix.
//!
//! Values are kept canonical, so structural equality is set equality:
//! `5 + ε + ⊘` and `5 + ⊘` are the same value.
//!
//! The four order relations follow the quantifier definitions
//! (`α ≤ β` is `∀x∈α ∃y∈β x ≤ y`, `α < β` is `∀x∈α ∀y∈β x < y`, and
//! dually for `≥`, `>`). They are not mirror images of each other:
//! `ge(α, β)` is in general different from `le(β, α)`; for instance
//! `⊘ ≥ £` holds while `£ ≤ ⊘` does not.

use std::cmp::Ordering;
use std::fmt;
use std::ops;
use std::str::FromStr;

use num::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::scale::{fmt_eps_power, Exponent, Kind, Neutrix};
use crate::Q;

/// Relative ε-depth kept when a reciprocal series never terminates and no
/// neutrix swallows the tail; the remainder becomes a `£` enclosure.
pub const DIV_ENCLOSURE_DEPTH: i64 = 24;

/// Sorted by ascending exponent (leading magnitude first), no zero
/// coefficients, no repeated exponents. The empty series is `0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct FormalSeries {
    terms: Vec<(Q, Exponent)>,
}

impl FormalSeries {
    pub fn new(terms: impl IntoIterator<Item = (Q, Exponent)>) -> Self {
        let mut v: Vec<(Q, Exponent)> = terms.into_iter().collect();
        v.sort_by_key(|t| t.1);
        let mut out: Vec<(Q, Exponent)> = Vec::with_capacity(v.len());
        for (c, q) in v {
            match out.last_mut() {
                Some(last) if last.1 == q => last.0 += c,
                _ => out.push((c, q)),
            }
        }
        out.retain(|(c, _)| !c.is_zero());
        FormalSeries { terms: out }
    }

    pub fn zero() -> Self {
        FormalSeries::default()
    }

    pub fn monomial(c: Q, q: Exponent) -> Self {
        FormalSeries::new([(c, q)])
    }

    pub fn constant(c: Q) -> Self {
        FormalSeries::monomial(c, Exponent::zero())
    }

    pub fn terms(&self) -> &[(Q, Exponent)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The term of largest magnitude.
    pub fn leading(&self) -> Option<&(Q, Exponent)> {
        self.terms.first()
    }

    pub fn neg(&self) -> Self {
        FormalSeries { terms: self.terms.iter().map(|(c, q)| (-c, *q)).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        FormalSeries::new(self.terms.iter().chain(other.terms.iter()).cloned())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        FormalSeries::new(
            self.terms
                .iter()
                .flat_map(|(c1, q1)| other.terms.iter().map(move |(c2, q2)| (c1 * c2, q1 + q2))),
        )
    }

    /// Product keeping only exponents accepted by `keep`.
    fn mul_where(&self, other: &Self, keep: &dyn Fn(Exponent) -> bool) -> Self {
        FormalSeries::new(self.terms.iter().flat_map(|(c1, q1)| {
            other
                .terms
                .iter()
                .filter(move |(_, q2)| keep(q1 + q2))
                .map(move |(c2, q2)| (c1 * c2, q1 + q2))
        }))
    }

    /// `c·ε^q·self`.
    pub fn scale(&self, c: &Q, q: Exponent) -> Self {
        FormalSeries::new(self.terms.iter().map(|(d, p)| (c * d, p + q)))
    }

    /// Drop every term the neutrix absorbs.
    pub fn without_absorbed(&self, n: &Neutrix) -> Self {
        FormalSeries { terms: self.terms.iter().filter(|(_, q)| !n.absorbs(*q)).cloned().collect() }
    }

    /// Numeric value at a concrete ε.
    pub fn eval_f64(&self, eps: f64) -> f64 {
        use num::ToPrimitive;
        self.terms
            .iter()
            .map(|(c, q)| c.to_f64().unwrap_or(f64::NAN) * eps.powf(q.to_f64().unwrap_or(f64::NAN)))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExternalNumber {
    rep: FormalSeries,
    neutrix: Neutrix,
}

/// Unique normal form of `rep + N`.
pub fn canonicalize(rep: FormalSeries, neutrix: Neutrix) -> ExternalNumber {
    ExternalNumber { rep: rep.without_absorbed(&neutrix), neutrix }
}

impl ExternalNumber {
    pub fn new(rep: FormalSeries, neutrix: Neutrix) -> Self {
        canonicalize(rep, neutrix)
    }

    pub fn zero() -> Self {
        Self::from_neutrix(Neutrix::Zero)
    }

    pub fn one() -> Self {
        Self::from_q(Q::one())
    }

    pub fn from_neutrix(n: Neutrix) -> Self {
        ExternalNumber { rep: FormalSeries::zero(), neutrix: n }
    }

    pub fn precise(rep: FormalSeries) -> Self {
        ExternalNumber { rep, neutrix: Neutrix::Zero }
    }

    pub fn from_q(c: Q) -> Self {
        Self::precise(FormalSeries::constant(c))
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_q(Q::from_integer(n.into()))
    }

    /// `c·ε^q`.
    pub fn monomial(c: Q, q: Exponent) -> Self {
        Self::precise(FormalSeries::monomial(c, q))
    }

    /// `ε^q`.
    pub fn eps_pow(q: impl Into<Exponent>) -> Self {
        Self::monomial(Q::one(), q.into())
    }

    pub fn rep(&self) -> &FormalSeries {
        &self.rep
    }

    pub fn neutrix(&self) -> Neutrix {
        self.neutrix
    }

    pub fn is_precise(&self) -> bool {
        self.neutrix.is_zero()
    }

    /// Exactly `{0}`.
    pub fn is_zero(&self) -> bool {
        self.neutrix.is_zero() && self.rep.is_zero()
    }

    /// `0 ∉ α`.
    pub fn zeroless(&self) -> bool {
        !self.rep.is_zero()
    }

    /// The value as a precise rational, if it is one.
    pub fn as_rational(&self) -> Option<Q> {
        if !self.is_precise() {
            return None;
        }
        match self.rep.terms() {
            [] => Some(Q::zero()),
            [(c, q)] if q.is_zero() => Some(c.clone()),
            _ => None,
        }
    }

    pub fn neg(&self) -> Self {
        ExternalNumber { rep: self.rep.neg(), neutrix: self.neutrix }
    }

    pub fn add(&self, other: &Self) -> Self {
        canonicalize(self.rep.add(&other.rep), self.neutrix + other.neutrix)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// `(a+A)(b+B) = ab + aB + bA + AB`.
    pub fn mul(&self, other: &Self) -> Self {
        let rep = self.rep.mul(&other.rep);
        let n = lead_scale(&self.rep, other.neutrix)
            + lead_scale(&other.rep, self.neutrix)
            + self.neutrix * other.neutrix;
        canonicalize(rep, n)
    }

    /// `1/α = 1/a + A/a²` for zeroless `α`.
    pub fn recip(&self) -> Result<Self> {
        let (c0, q0) = self.rep.leading().cloned().ok_or(Error::DivisionByNeutrix)?;
        let inv_c0 = c0.recip();
        let n = self.neutrix.scale(&(&inv_c0 * &inv_c0), -q0 * 2);
        // 1/a = (1/c0) ε^{-q0} · 1/(1 + r)
        let r = FormalSeries::new(self.rep.terms()[1..].iter().map(|(c, q)| (c * &inv_c0, q - q0)));
        if r.is_zero() {
            return Ok(canonicalize(FormalSeries::monomial(inv_c0, -q0), n));
        }
        let (keep, n): (Box<dyn Fn(Exponent) -> bool>, Neutrix) = match n {
            Neutrix::Mono(..) | Neutrix::Full => (Box::new(move |e: Exponent| !n.absorbs(e - q0)), n),
            Neutrix::Zero | Neutrix::Micro => {
                let bound = Exponent::from(DIV_ENCLOSURE_DEPTH);
                (Box::new(move |e: Exponent| e < bound), Neutrix::Mono(Kind::Pound, bound - q0))
            }
        };
        let minus_r = r.neg();
        let mut power = FormalSeries::constant(Q::one());
        let mut acc = power.clone();
        loop {
            power = power.mul_where(&minus_r, &*keep);
            if power.is_zero() {
                break;
            }
            acc = acc.add(&power);
        }
        Ok(canonicalize(acc.scale(&inv_c0, -q0), n))
    }

    /// `self / other`, computed as `self · (1/other)`.
    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul(&other.recip()?))
    }

    /// Integer power; negative powers need a zeroless base.
    pub fn powi(&self, k: i64) -> Result<Self> {
        let base = if k < 0 { self.recip()? } else { self.clone() };
        let mut acc = ExternalNumber::one();
        for _ in 0..k.unsigned_abs() {
            acc = acc.mul(&base);
        }
        Ok(acc)
    }

    /// Rational power of a precise monomial with an exact root, or an
    /// integer power of anything.
    pub fn pow(&self, p: Exponent) -> Result<Self> {
        if p.is_integer() {
            return self.powi(*p.numer());
        }
        match (self.is_precise(), self.rep.terms()) {
            (true, [(c, q)]) if c.is_positive() => {
                let root = rational_root(c, *p.denom())
                    .ok_or_else(|| Error::EvalDomain(format!("{c}^(1/{}) is irrational", p.denom())))?;
                let c = num::pow::Pow::pow(&root, p.numer().unsigned_abs() as u32);
                let c = if p.is_negative() { c.recip() } else { c };
                Ok(ExternalNumber::monomial(c, q * p))
            }
            _ => Err(Error::EvalDomain(format!("({self})^({p}) has no exact form"))),
        }
    }

    pub fn abs(&self) -> Self {
        match self.rep.leading() {
            Some((c, _)) if c.is_negative() => self.neg(),
            _ => self.clone(),
        }
    }

    pub fn neutrix_part(&self) -> Neutrix {
        self.neutrix
    }

    /// `self ⊆ other`.
    pub fn subset(&self, other: &Self) -> bool {
        self.neutrix.is_subset(&other.neutrix)
            && self.rep.sub(&other.rep).without_absorbed(&other.neutrix).is_zero()
    }

    /// `None` when the sets overlap; otherwise where `self` lies relative to
    /// `other` (two external numbers are disjoint or one contains the other).
    pub fn separation(&self, other: &Self) -> Option<Ordering> {
        let d = self.rep.sub(&other.rep).without_absorbed(&(self.neutrix + other.neutrix));
        d.leading().map(|(c, _)| if c.is_negative() { Ordering::Less } else { Ordering::Greater })
    }

    pub fn disjoint(&self, other: &Self) -> bool {
        self.separation(other).is_some()
    }

    /// `∀x∈α ∀y∈β: x < y`.
    pub fn lt(&self, other: &Self) -> bool {
        self.separation(other) == Some(Ordering::Less)
    }

    /// `∀x∈α ∀y∈β: x > y`.
    pub fn gt(&self, other: &Self) -> bool {
        self.separation(other) == Some(Ordering::Greater)
    }

    /// `∀x∈α ∃y∈β: x ≤ y`.
    pub fn le(&self, other: &Self) -> bool {
        self.lt(other) || self.subset(other)
    }

    /// `∀x∈α ∃y∈β: x ≥ y`. Not the same as `other.le(self)`.
    pub fn ge(&self, other: &Self) -> bool {
        self.gt(other) || self.subset(other)
    }
}

fn lead_scale(rep: &FormalSeries, n: Neutrix) -> Neutrix {
    match rep.leading() {
        Some((c, q)) => n.scale(c, *q),
        None => Neutrix::Zero,
    }
}

fn rational_root(c: &Q, k: i64) -> Option<Q> {
    let root = |x: &num::BigInt| -> Option<num::BigInt> {
        let r = x.nth_root(k as u32);
        (num::pow::Pow::pow(&r, k as u32) == *x).then_some(r)
    };
    if k <= 0 || c.is_negative() {
        return None;
    }
    Some(Q::new(root(c.numer())?, root(c.denom())?))
}

pub fn add(a: &ExternalNumber, b: &ExternalNumber) -> ExternalNumber {
    a.add(b)
}
pub fn sub(a: &ExternalNumber, b: &ExternalNumber) -> ExternalNumber {
    a.sub(b)
}
pub fn neg(a: &ExternalNumber) -> ExternalNumber {
    a.neg()
}
pub fn mul(a: &ExternalNumber, b: &ExternalNumber) -> ExternalNumber {
    a.mul(b)
}
pub fn div(a: &ExternalNumber, b: &ExternalNumber) -> Result<ExternalNumber> {
    a.div(b)
}
pub fn abs(a: &ExternalNumber) -> ExternalNumber {
    a.abs()
}
pub fn lt(a: &ExternalNumber, b: &ExternalNumber) -> bool {
    a.lt(b)
}
pub fn gt(a: &ExternalNumber, b: &ExternalNumber) -> bool {
    a.gt(b)
}
pub fn le(a: &ExternalNumber, b: &ExternalNumber) -> bool {
    a.le(b)
}
pub fn ge(a: &ExternalNumber, b: &ExternalNumber) -> bool {
    a.ge(b)
}
pub fn subset(a: &ExternalNumber, b: &ExternalNumber) -> bool {
    a.subset(b)
}
pub fn zeroless(a: &ExternalNumber) -> bool {
    a.zeroless()
}
pub fn neutrix_part(a: &ExternalNumber) -> Neutrix {
    a.neutrix_part()
}

impl From<Neutrix> for ExternalNumber {
    fn from(n: Neutrix) -> Self {
        ExternalNumber::from_neutrix(n)
    }
}

impl From<i64> for ExternalNumber {
    fn from(n: i64) -> Self {
        ExternalNumber::from_int(n)
    }
}

impl ops::Add for &ExternalNumber {
    type Output = ExternalNumber;
    fn add(self, rhs: &ExternalNumber) -> ExternalNumber {
        ExternalNumber::add(self, rhs)
    }
}

impl ops::Sub for &ExternalNumber {
    type Output = ExternalNumber;
    fn sub(self, rhs: &ExternalNumber) -> ExternalNumber {
        ExternalNumber::sub(self, rhs)
    }
}

impl ops::Mul for &ExternalNumber {
    type Output = ExternalNumber;
    fn mul(self, rhs: &ExternalNumber) -> ExternalNumber {
        ExternalNumber::mul(self, rhs)
    }
}

impl ops::Neg for &ExternalNumber {
    type Output = ExternalNumber;
    fn neg(self) -> ExternalNumber {
        ExternalNumber::neg(self)
    }
}

fn fmt_term(c: &Q, q: Exponent) -> String {
    if q.is_zero() {
        return c.to_string();
    }
    let p = fmt_eps_power(q);
    if c.is_one() {
        p
    } else if *c == -Q::one() {
        format!("-{p}")
    } else {
        format!("{c}*{p}")
    }
}

impl fmt::Display for FormalSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (c, q)) in self.terms.iter().enumerate() {
            if i == 0 {
                write!(f, "{}", fmt_term(c, *q))?;
            } else if c.is_negative() {
                write!(f, " - {}", fmt_term(&-c, *q))?;
            } else {
                write!(f, " + {}", fmt_term(c, *q))?;
            }
        }
        Ok(())
    }
}

/// `1 + e^2 - 3/2*e^3 + (e^4)o`; a pure neutrix prints alone.
impl fmt::Display for ExternalNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.rep.is_zero(), self.neutrix.is_zero()) {
            (true, _) => write!(f, "{}", self.neutrix),
            (false, true) => write!(f, "{}", self.rep),
            (false, false) => write!(f, "{} + {}", self.rep, self.neutrix),
        }
    }
}

impl FromStr for ExternalNumber {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        crate::dsl::parse_extnum(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(s: &str) -> ExternalNumber {
        s.parse().unwrap()
    }

    fn q(n: i64) -> Exponent {
        Exponent::from(n)
    }

    #[test]
    fn canonical_forms() {
        let a = canonicalize(FormalSeries::new([(Q::one(), q(0)), (Q::one(), q(2))]), Neutrix::OSLASH);
        assert_eq!(a.rep(), &FormalSeries::constant(Q::one()));
        let b = canonicalize(FormalSeries::monomial(Q::one(), q(1)), Neutrix::pound_at(1));
        assert!(b.rep().is_zero());
        assert_eq!(b.neutrix(), Neutrix::pound_at(1));
        let c = canonicalize(FormalSeries::new([(Q::one(), q(0)), (Q::one(), q(1))]), Neutrix::oslash_at(1));
        assert_eq!(c.rep().terms().len(), 2);
    }

    #[test]
    fn sums() {
        assert_eq!(x("1 + o").add(&x("2 + e*L")), x("3 + o"));
        assert_eq!(x("5 + o").sub(&x("5 + o")), x("o"));
        assert_eq!(x("w^2 + w*L").add(&x("-w^2")), x("w*L"));
    }

    #[test]
    fn products() {
        assert_eq!(x("1/w + o").mul(&x("w^2 + w*L")), x("w^2*o"));
        assert_eq!(x("2 + o").mul(&x("3 + e*L")), x("6 + o"));
        let a = x("3 - e + e^2*L");
        assert_eq!(a.mul(&ExternalNumber::one()), a);
    }

    #[test]
    fn reciprocals() {
        assert_eq!(ExternalNumber::one().div(&x("1 + o")).unwrap(), x("1 + o"));
        assert_eq!(x("w + L").recip().unwrap(), x("e + e^2*L"));
        assert_eq!(x("o").recip(), Err(Error::DivisionByNeutrix));
        // 1/(1+ε+ε²⊘) = 1 - ε + ε² ⊘-truncated at ε²
        assert_eq!(x("1 + e + e^2*o").recip().unwrap(), x("1 - e + e^2 + e^2*o"));
        // non-terminating and precise: a £ enclosure at the fixed depth
        let r = x("1 + e").recip().unwrap();
        assert_eq!(r.neutrix(), Neutrix::pound_at(DIV_ENCLOSURE_DEPTH));
        assert_eq!(r.rep().terms()[1], (-Q::one(), q(1)));
    }

    #[test]
    fn absolute_value() {
        assert_eq!(x("-2 + o").abs(), x("2 + o"));
        assert_eq!(x("o").abs(), x("o"));
        assert_eq!(x("-e + e^2*L").abs(), x("e + e^2*L"));
    }

    #[test]
    fn order_facts() {
        assert!(x("1 + e*L").gt(&x("o")));
        assert!(x("o").ge(&x("L")));
        assert!(!x("L").le(&x("o")));
        assert!(x("e").le(&x("o")) && x("e").ge(&x("o")));
        assert!(x("o").le(&x("L")));
    }

    #[test]
    fn predicates() {
        assert!(x("e").subset(&x("o")));
        assert!(x("1 + o").zeroless());
        assert_eq!(x("w^2 + w*L").neutrix_part(), Neutrix::pound_at(-1));
        assert!(!x("e*L").zeroless());
    }

    #[test]
    fn powers() {
        assert_eq!(x("4*e^2").pow(Exponent::new(1, 2)).unwrap(), x("2*e"));
        assert!(x("2").pow(Exponent::new(1, 2)).is_err());
        assert_eq!(x("w + L").powi(2).unwrap(), x("w^2 + w*L"));
    }

    #[test]
    fn display_round_trip_samples() {
        for s in ["0", "o", "3/2*e^2 - e^3 + (e^4)o", "-w^2 + (e^-1)L", "e^(1/2) + M", "R", "-7"] {
            let v = x(s);
            assert_eq!(x(&v.to_string()), v, "{s}");
        }
    }
}
