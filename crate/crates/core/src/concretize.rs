//! A finite numeric model of the ε-scale.
//!
//! ε is fixed to a concrete `eps0` and each neutrix becomes a symmetric
//! interval. Half-exponent buffers separate `⊘` from `£` at every level:
//! `ε^q⊘ ↦ eps0^(q+δ)`, `ε^q£ ↦ eps0^(q−δ)`, `M ↦ eps0^micro_exp`.
//! Note `ε^(q+1)£` and `ε^q⊘` get the same radius; comparisons at that
//! boundary are outside what the model can resolve.

use num::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::extnum::ExternalNumber;
use crate::scale::{Exponent, Kind, Neutrix};

pub const DEFAULT_EPS0: f64 = 1e-3;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq)]
pub struct Concretization {
    eps0: f64,
    delta: Exponent,
    micro_exp: Exponent,
    seed: u64,
}

impl Default for Concretization {
    fn default() -> Self {
        Concretization {
            eps0: DEFAULT_EPS0,
            delta: Exponent::new(1, 2),
            micro_exp: Exponent::from(8),
            seed: DEFAULT_SEED,
        }
    }
}

impl Concretization {
    pub fn new(eps0: f64, delta: Exponent, micro_exp: Exponent, seed: u64) -> Result<Self> {
        if !(eps0 > 0.0 && eps0 <= 1e-2) {
            return Err(Error::InvalidConcretization(format!("eps0 = {eps0} must lie in (0, 1e-2]")));
        }
        if delta <= Exponent::from(0) {
            return Err(Error::InvalidConcretization(format!("delta = {delta} must be positive")));
        }
        if micro_exp <= Exponent::from(0) {
            return Err(Error::InvalidConcretization(format!("micro_exp = {micro_exp} must be positive")));
        }
        Ok(Concretization { eps0, delta, micro_exp, seed })
    }

    pub fn with_eps0(eps0: f64) -> Result<Self> {
        let d = Concretization::default();
        Concretization::new(eps0, d.delta, d.micro_exp, d.seed)
    }

    /// Defaults overridden by `FLEX_EPS0`, `FLEX_DELTA`, `FLEX_MICRO_EXP`,
    /// `FLEX_SEED`.
    pub fn from_env() -> Result<Self> {
        let d = Concretization::default();
        let var = |k: &str| std::env::var(k).ok().filter(|s| !s.trim().is_empty());
        let bad = |k: &str, v: &str| Error::InvalidConcretization(format!("{k}={v}"));
        let eps0 = match var("FLEX_EPS0") {
            Some(v) => v.trim().parse::<f64>().map_err(|_| bad("FLEX_EPS0", &v))?,
            None => d.eps0,
        };
        let delta = match var("FLEX_DELTA") {
            Some(v) => parse_exponent(&v).ok_or_else(|| bad("FLEX_DELTA", &v))?,
            None => d.delta,
        };
        let micro_exp = match var("FLEX_MICRO_EXP") {
            Some(v) => parse_exponent(&v).ok_or_else(|| bad("FLEX_MICRO_EXP", &v))?,
            None => d.micro_exp,
        };
        let seed = match var("FLEX_SEED") {
            Some(v) => v.trim().parse::<u64>().map_err(|_| bad("FLEX_SEED", &v))?,
            None => d.seed,
        };
        Concretization::new(eps0, delta, micro_exp, seed)
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn delta(&self) -> Exponent {
        self.delta
    }

    pub fn micro_exp(&self) -> Exponent {
        self.micro_exp
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Concretization { seed, ..self.clone() }
    }

    pub fn with_micro_exp(&self, micro_exp: Exponent) -> Result<Self> {
        Concretization::new(self.eps0, self.delta, micro_exp, self.seed)
    }

    fn pow(&self, q: Exponent) -> f64 {
        self.eps0.powf(q.to_f64().unwrap_or(f64::NAN))
    }

    /// Exponent of the interval radius, `None` for `{0}`.
    pub fn radius_exponent(&self, n: Neutrix) -> Result<Option<Exponent>> {
        Ok(match n {
            Neutrix::Zero => None,
            Neutrix::Micro => Some(self.micro_exp),
            Neutrix::Mono(Kind::Oslash, q) => Some(q + self.delta),
            Neutrix::Mono(Kind::Pound, q) => Some(q - self.delta),
            Neutrix::Full => return Err(Error::FullNotConcretizable),
        })
    }

    pub fn radius(&self, n: Neutrix) -> Result<f64> {
        Ok(self.radius_exponent(n)?.map_or(0.0, |e| self.pow(e)))
    }

    /// A tolerance just above `N`: half a buffer beyond its radius. For
    /// `{0}` this is the microhalo radius.
    pub fn level(&self, n: Neutrix) -> Result<f64> {
        match n {
            Neutrix::Zero => self.radius(Neutrix::Micro),
            _ => Ok(self.radius(n)? * self.pow(-self.delta / 2)),
        }
    }

    /// Radius of `⊘`; `|x|` at or below this counts as infinitesimal.
    pub fn infinitesimal_threshold(&self) -> f64 {
        self.pow(self.delta)
    }

    pub fn center(&self, a: &ExternalNumber) -> f64 {
        a.rep().eval_f64(self.eps0)
    }

    pub fn interval(&self, a: &ExternalNumber) -> Result<(f64, f64)> {
        let c = self.center(a);
        let r = self.radius(a.neutrix())?;
        Ok((c - r, c + r))
    }

    /// Membership up to a few ulps of the centre (sampling adds the offset
    /// in floating point).
    pub fn contains(&self, x: f64, a: &ExternalNumber) -> Result<bool> {
        let r = self.radius(a.neutrix())?;
        let c = self.center(a);
        Ok((x - c).abs() <= r + 4.0 * f64::EPSILON * (c.abs() + r))
    }

    /// Uniform draw from the interval of `a`.
    pub fn sample<R: Rng + ?Sized>(&self, a: &ExternalNumber, rng: &mut R) -> Result<f64> {
        let c = self.center(a);
        let r = self.radius(a.neutrix())?;
        if r == 0.0 {
            return Ok(c);
        }
        Ok(c + rng.random_range(-r..=r))
    }

    /// Independent deterministic stream derived from the seed.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

fn parse_exponent(s: &str) -> Option<Exponent> {
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => {
            let d: i64 = b.trim().parse().ok()?;
            let n: i64 = a.trim().parse().ok()?;
            (d != 0).then(|| Exponent::new(n, d))
        }
        None => s.parse::<i64>().ok().map(Exponent::from),
    }
}

pub fn radius(n: Neutrix, conc: &Concretization) -> Result<f64> {
    conc.radius(n)
}

pub fn contains(x: f64, a: &ExternalNumber, conc: &Concretization) -> Result<bool> {
    conc.contains(x, a)
}

pub fn sample<R: Rng + ?Sized>(a: &ExternalNumber, conc: &Concretization, rng: &mut R) -> Result<f64> {
    conc.sample(a, rng)
}
