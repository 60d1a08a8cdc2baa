//! Neutrices on the monomial ε-scale.
//!
//! The represented family is `{0}`, the microhalo `£ε^∞`, the monomial
//! groups `ε^q⊘` and `ε^q£` for rational `q`, and `ℝ`. Inclusion is a total
//! order on this family:
//!
//! `0 ⊂ M ⊂ ε^q⊘ ⊂ ε^q£ ⊂ ε^{q'}⊘ ⊂ … ⊂ ℝ` whenever `q > q'`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul};

use num::{Signed, Zero as _};

use crate::Q;

/// Power of the generator ε. Negative values are unlimited magnitudes.
pub type Exponent = num::rational::Rational64;

/// The idempotent behind a monomial neutrix: `⊘` (infinitesimals) or `£`
/// (limited reals). `Oslash < Pound`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Oslash,
    Pound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Neutrix {
    Zero,
    /// `ε^q · ⊘` or `ε^q · £`.
    Mono(Kind, Exponent),
    /// The microhalo `£ε^∞`.
    Micro,
    Full,
}

impl Neutrix {
    pub const OSLASH: Neutrix = Neutrix::Mono(Kind::Oslash, Exponent::new_raw(0, 1));
    pub const POUND: Neutrix = Neutrix::Mono(Kind::Pound, Exponent::new_raw(0, 1));

    pub fn oslash_at(q: impl Into<Exponent>) -> Self {
        Neutrix::Mono(Kind::Oslash, q.into())
    }

    pub fn pound_at(q: impl Into<Exponent>) -> Self {
        Neutrix::Mono(Kind::Pound, q.into())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Neutrix::Zero)
    }

    pub fn is_full(&self) -> bool {
        matches!(self, Neutrix::Full)
    }

    /// Inclusion test `self ⊆ other`.
    pub fn is_subset(&self, other: &Neutrix) -> bool {
        self <= other
    }

    /// Whether a nonzero precise term `c·ε^q` lies in this neutrix.
    pub fn absorbs(&self, q: Exponent) -> bool {
        match *self {
            Neutrix::Zero | Neutrix::Micro => false,
            Neutrix::Full => true,
            Neutrix::Mono(Kind::Pound, p) => q >= p,
            Neutrix::Mono(Kind::Oslash, p) => q > p,
        }
    }

    /// `c·ε^q·N`. The rational factor is absorbed; a zero factor gives `{0}`.
    pub fn scale(&self, c: &Q, q: Exponent) -> Neutrix {
        if c.is_zero() {
            return Neutrix::Zero;
        }
        match *self {
            Neutrix::Mono(k, p) => Neutrix::Mono(k, p + q),
            other => other,
        }
    }

    /// Exponent of the monomial, if any.
    pub fn exponent(&self) -> Option<Exponent> {
        match self {
            Neutrix::Mono(_, q) => Some(*q),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Neutrix::Zero => 0,
            Neutrix::Micro => 1,
            Neutrix::Mono(..) => 2,
            Neutrix::Full => 3,
        }
    }
}

impl Ord for Neutrix {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Neutrix::Mono(k1, q1), Neutrix::Mono(k2, q2)) => q2.cmp(q1).then(k1.cmp(k2)),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Neutrix {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for Neutrix {
    type Output = Neutrix;
    fn add(self, rhs: Neutrix) -> Neutrix {
        self.max(rhs)
    }
}

impl Mul for Neutrix {
    type Output = Neutrix;
    fn mul(self, rhs: Neutrix) -> Neutrix {
        use Neutrix::*;
        match (self, rhs) {
            (Zero, _) | (_, Zero) => Zero,
            (Full, _) | (_, Full) => Full,
            (Micro, _) | (_, Micro) => Micro,
            (Mono(k1, q1), Mono(k2, q2)) => {
                let k = if k1 == Kind::Pound && k2 == Kind::Pound { Kind::Pound } else { Kind::Oslash };
                Mono(k, q1 + q2)
            }
        }
    }
}

pub fn neutrix_add(n: Neutrix, m: Neutrix) -> Neutrix {
    n + m
}

pub fn neutrix_mul(n: Neutrix, m: Neutrix) -> Neutrix {
    n * m
}

/// Inclusion order.
pub fn neutrix_cmp(n: Neutrix, m: Neutrix) -> Ordering {
    n.cmp(&m)
}

pub fn neutrix_scale(c: &Q, q: Exponent, n: Neutrix) -> Neutrix {
    n.scale(c, q)
}

/// `e^2`, `e^-1`, `e^(3/2)`; `e` for exponent 1.
pub(crate) fn fmt_eps_power(q: Exponent) -> String {
    if q == Exponent::from(1) {
        "e".to_string()
    } else if q.is_integer() {
        format!("e^{}", q.numer())
    } else if q.is_negative() {
        format!("e^(-{}/{})", -q.numer(), q.denom())
    } else {
        format!("e^({}/{})", q.numer(), q.denom())
    }
}

impl fmt::Display for Neutrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Neutrix::Zero => write!(f, "0"),
            Neutrix::Micro => write!(f, "M"),
            Neutrix::Full => write!(f, "R"),
            Neutrix::Mono(k, q) => {
                let sym = match k {
                    Kind::Oslash => 'o',
                    Kind::Pound => 'L',
                };
                if q.is_zero() {
                    write!(f, "{sym}")
                } else if q.is_integer() {
                    write!(f, "(e^{}){sym}", q.numer())
                } else {
                    write!(f, "({}){sym}", fmt_eps_power(*q))
                }
            }
        }
    }
}
