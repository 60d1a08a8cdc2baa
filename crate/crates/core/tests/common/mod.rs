//! Corpus generators and a numeric oracle shared by the integration tests.
//!
//! The oracle never looks at symbolic normal forms. Sequences are evaluated
//! pointwise at two huge indices (both parities), with every constant leaf
//! replaced by a fresh draw from its concretized interval.

#![allow(dead_code)]

use flexnum::extnum::ExternalNumber;
use flexnum::{Concretization, Exponent, Kind, Neutrix, SeqTerm, Q};
use num::{BigInt, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS0S: [f64; 2] = [1e-3, 1e-5];
pub const SAMPLES: usize = 64;
/// Tail indices are `ε₀^-TAIL_POWER`.
pub const TAIL_POWER: f64 = 28.0;

/// Proptest settings; regressions are not persisted next to integration
/// tests.
pub fn cases(n: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config { cases: n, failure_persistence: None, ..Default::default() }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn conc(eps0: f64) -> Concretization {
    Concretization::with_eps0(eps0).unwrap()
}

pub fn gen_neutrix<R: Rng>(r: &mut R) -> Neutrix {
    match r.random_range(0..10) {
        0 => Neutrix::Zero,
        1 => Neutrix::Micro,
        _ => {
            let kind = if r.random_bool(0.5) { Kind::Oslash } else { Kind::Pound };
            Neutrix::Mono(kind, Exponent::from_integer(r.random_range(-2..=4)))
        }
    }
}

/// Nonzero integer coefficient.
fn coeff<R: Rng>(r: &mut R, max: i64) -> i64 {
    let c = r.random_range(1..=max);
    if r.random_bool(0.5) {
        -c
    } else {
        c
    }
}

/// Random external number with integer exponents in `-2..=4`.
pub fn gen_extnum<R: Rng>(r: &mut R) -> ExternalNumber {
    let mut a = ExternalNumber::from_neutrix(gen_neutrix(r));
    for _ in 0..r.random_range(0..=3) {
        let t = ExternalNumber::monomial(Q::from_integer(BigInt::from(coeff(r, 5))), Exponent::from_integer(r.random_range(-2..=4)));
        a = a.add(&t);
    }
    a
}

pub fn gen_zeroless<R: Rng>(r: &mut R) -> ExternalNumber {
    loop {
        let a = gen_extnum(r);
        if a.zeroless() {
            return a;
        }
    }
}

/// Constant leaf: a small multiple of `ε^k`, optionally with a neutrix.
fn gen_const<R: Rng>(r: &mut R) -> ExternalNumber {
    let k = r.random_range(-1..=3);
    let c = ExternalNumber::monomial(Q::from_integer(BigInt::from(coeff(r, 4))), Exponent::from_integer(k));
    match r.random_range(0..4) {
        0 => c.add(&ExternalNumber::from_neutrix(gen_neutrix(r))),
        _ => c,
    }
}

/// An `n`-dependent factor.
fn gen_factor<R: Rng>(r: &mut R) -> SeqTerm {
    match r.random_range(0..10) {
        0 => SeqTerm::int(1),
        1 | 2 => SeqTerm::inv_n_pow(1),
        3 => SeqTerm::inv_n_pow(2),
        4 => SeqTerm::pow(SeqTerm::n(), Exponent::new(-1, 2)),
        5 => SeqTerm::AltSign,
        6 => SeqTerm::GeomPow(q(1, 2)),
        7 => SeqTerm::mul(SeqTerm::AltSign, SeqTerm::inv_n_pow(1)),
        8 => SeqTerm::n(),
        _ => SeqTerm::pow(SeqTerm::n(), Exponent::new(1, 2)),
    }
}

fn gen_product<R: Rng>(r: &mut R) -> SeqTerm {
    let base = SeqTerm::mul(SeqTerm::Const(gen_const(r)), gen_factor(r));
    match r.random_range(0..6) {
        0 => SeqTerm::neutrix_seq(gen_neutrix(r), gen_factor(r)),
        1 => SeqTerm::div(base, SeqTerm::int(coeff(r, 3))),
        2 => SeqTerm::div(base, SeqTerm::n()),
        _ => base,
    }
}

/// A sum of one to three products; depth stays at most three.
pub fn gen_seq<R: Rng>(r: &mut R) -> SeqTerm {
    let mut t = gen_product(r);
    for _ in 1..r.random_range(1..=3) {
        t = SeqTerm::add(t, gen_product(r));
    }
    if r.random_range(0..8) == 0 {
        t = SeqTerm::mul(t, gen_product(r));
    }
    t
}

/// Sequences that normalize, converge or not.
pub fn seq_corpus(seed: u64, count: usize) -> Vec<SeqTerm> {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let t = gen_seq(&mut r);
        if flexnum::seq::normalize(&t).is_ok() {
            out.push(t);
        }
    }
    out
}

pub fn neutrix_corpus() -> Vec<Neutrix> {
    let mut v = vec![Neutrix::Zero, Neutrix::Micro, Neutrix::Full];
    for e in -2..=4 {
        v.push(Neutrix::oslash_at(e));
        v.push(Neutrix::pound_at(e));
    }
    v
}

pub struct Oracle {
    pub conc: Concretization,
}

impl Oracle {
    pub fn new(eps0: f64) -> Self {
        Oracle { conc: conc(eps0) }
    }

    fn eps(&self) -> f64 {
        self.conc.eps0()
    }

    /// Radius, with `ℝ` as infinity.
    pub fn radius(&self, n: Neutrix) -> f64 {
        if n.is_full() {
            f64::INFINITY
        } else {
            self.conc.radius(n).unwrap()
        }
    }

    /// Decision threshold for membership in `N`: half a buffer above its
    /// radius, and half a buffer below the microhalo for `{0}`.
    pub fn threshold(&self, n: Neutrix) -> f64 {
        let half = self.eps().powf(self.conc.delta().to_f64().unwrap() / 2.0);
        match n {
            Neutrix::Full => f64::INFINITY,
            Neutrix::Zero => self.radius(Neutrix::Micro) * half,
            _ => self.radius(n) / half,
        }
    }

    /// Numeric size of a symbolic external number at `ε₀`.
    pub fn magnitude(&self, a: &ExternalNumber) -> f64 {
        self.conc.center(a).abs() + self.radius(a.neutrix())
    }

    /// Products of two imprecise factors in `t`. Each may land one buffer
    /// above the symbolic product (the interval of `£·⊘` is not that of `⊘`).
    pub fn buffers(t: &SeqTerm) -> i32 {
        use SeqTerm::*;
        fn imprecise(t: &SeqTerm) -> bool {
            match t {
                Const(a) => !a.neutrix().is_zero(),
                NeutrixSeq(..) => true,
                IndexN | AltSign | GeomPow(_) => false,
                Add(a, b) | Mul(a, b) | Div(a, b) => imprecise(a) || imprecise(b),
                Pow(a, _) => imprecise(a),
            }
        }
        match t {
            Const(_) | IndexN | AltSign | GeomPow(_) => 0,
            NeutrixSeq(_, a) => Self::buffers(a) + imprecise(a) as i32,
            Add(a, b) => Self::buffers(a).max(Self::buffers(b)),
            Mul(a, b) | Div(a, b) => Self::buffers(a) + Self::buffers(b) + (imprecise(a) && imprecise(b)) as i32,
            Pow(a, _) => Self::buffers(a),
        }
    }

    fn buffer(&self) -> f64 {
        self.eps().powf(-self.conc.delta().to_f64().unwrap())
    }

    /// Threshold for the values of `t`, widened by its product buffers.
    pub fn threshold_for(&self, n: Neutrix, t: &SeqTerm) -> f64 {
        self.threshold(n) * self.buffer().powi(Self::buffers(t))
    }

    /// Whether a symbolic size `m` is a full buffer away from the threshold
    /// on both sides, counting the product buffers of `t`.
    pub fn separated(&self, m: f64, n: Neutrix, t: &SeqTerm) -> bool {
        let t_lo = self.threshold(n);
        if !t_lo.is_finite() {
            return true;
        }
        m * self.buffer() <= t_lo || m >= self.threshold_for(n, t) * self.buffer()
    }

    pub fn sample(&self, a: &ExternalNumber, r: &mut ChaCha8Rng) -> f64 {
        if a.neutrix().is_full() {
            return f64::NAN;
        }
        self.conc.sample(a, r).unwrap()
    }

    /// One representative value at index `n` (given as a float) with parity,
    /// and a running bound on its floating-point error.
    pub fn eval(&self, t: &SeqTerm, n: f64, odd: bool, r: &mut ChaCha8Rng) -> (f64, f64) {
        use SeqTerm::*;
        const U: f64 = f64::EPSILON;
        let (v, e) = match t {
            Const(a) => (self.sample(a, r), 0.0),
            IndexN => (n, 0.0),
            AltSign => (if odd { -1.0 } else { 1.0 }, 0.0),
            Add(a, b) => {
                let ((x, ex), (y, ey)) = (self.eval(a, n, odd, r), self.eval(b, n, odd, r));
                (x + y, ex + ey + (x.abs() + y.abs()) * U)
            }
            Mul(a, b) => {
                let ((x, ex), (y, ey)) = (self.eval(a, n, odd, r), self.eval(b, n, odd, r));
                (x * y, ex * y.abs() + ey * x.abs() + ex * ey)
            }
            Div(a, b) => {
                let ((x, ex), (y, ey)) = (self.eval(a, n, odd, r), self.eval(b, n, odd, r));
                (x / y, (ex + (x / y).abs() * ey) / (y.abs() - ey).max(0.0))
            }
            Pow(a, p) => {
                let (x, ex) = self.eval(a, n, odd, r);
                let p = p.to_f64().unwrap();
                let v = x.powf(p);
                (v, (v * p / x).abs() * ex)
            }
            GeomPow(b) => (b.to_f64().unwrap().powf(n), 0.0),
            NeutrixSeq(m, a) => {
                let x = self.sample(&ExternalNumber::from_neutrix(*m), r);
                let (y, ey) = self.eval(a, n, odd, r);
                (x * y, x.abs() * ey)
            }
        };
        (v, e + v.abs() * U)
    }

    /// Representative values deep in the tail: two indices, both parities.
    /// Also returns the largest error bound.
    pub fn tail(&self, t: &SeqTerm, r: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
        let n1 = self.eps().powf(-TAIL_POWER);
        let idx = [n1, 3.0 * n1];
        let ve: Vec<_> = (0..SAMPLES).map(|i| self.eval(t, idx[(i / 2) % 2], i % 2 == 1, r)).collect();
        let err = ve.iter().map(|p| p.1).fold(0.0, f64::max);
        (ve.into_iter().map(|p| p.0).collect(), err)
    }

    /// `D = max |x − c_α| + r_α` over tail samples with its error bound;
    /// `None` when a sample is NaN.
    pub fn distance(&self, t: &SeqTerm, alpha: &ExternalNumber, r: &mut ChaCha8Rng) -> Option<(f64, f64)> {
        let c = self.conc.center(alpha);
        let ra = self.radius(alpha.neutrix());
        let (xs, err) = self.tail(t, r);
        if xs.iter().any(|x| x.is_nan()) || err.is_nan() {
            return None;
        }
        Some((xs.iter().map(|x| (x - c).abs()).fold(0.0, f64::max) + ra, err + c.abs() * f64::EPSILON))
    }

    /// `None` when a sample is NaN or rounding could flip the answer.
    pub fn converges(&self, t: &SeqTerm, alpha: &ExternalNumber, n: Neutrix, r: &mut ChaCha8Rng) -> Option<bool> {
        let (d, err) = self.distance(t, alpha, r)?;
        let thr = self.threshold_for(n, t);
        ((d - thr).abs() > 2.0 * err || d.is_infinite()).then_some(d <= thr)
    }

    /// Largest pairwise spread of tail samples with its error bound.
    pub fn spread(&self, t: &SeqTerm, r: &mut ChaCha8Rng) -> Option<(f64, f64)> {
        let (xs, err) = self.tail(t, r);
        if xs.iter().any(|x| x.is_nan()) || err.is_nan() {
            return None;
        }
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        Some((hi - lo, 2.0 * err))
    }

    pub fn cauchy(&self, t: &SeqTerm, n: Neutrix, r: &mut ChaCha8Rng) -> Option<bool> {
        let (s, err) = self.spread(t, r)?;
        let thr = self.threshold_for(n, t);
        ((s - thr).abs() > 2.0 * err || s.is_infinite()).then_some(s <= thr)
    }

    /// Offsets from the centre, endpoints included.
    fn offsets(&self, a: &ExternalNumber, r: &mut ChaCha8Rng) -> Vec<f64> {
        let rad = self.radius(a.neutrix());
        let mut v = vec![-rad, rad];
        v.extend((0..SAMPLES).map(|_| if rad == 0.0 { 0.0 } else { r.random_range(-rad..=rad) }));
        v
    }

    /// `[lt, gt, le, ge]` by quantifying over sampled subsets, or `None` when
    /// the decisive margin is inside the buffer. Points are taken relative to
    /// the centre of `b`, so large equal leading terms do not cancel in
    /// floating point.
    pub fn order(&self, a: &ExternalNumber, b: &ExternalNumber, r: &mut ChaCha8Rng) -> Option<[bool; 4]> {
        let (ra, rb) = (self.radius(a.neutrix()), self.radius(b.neutrix()));
        let d0 = a.rep().sub(b.rep()).eval_f64(self.eps());
        let scale = d0.abs().max(ra).max(rb);
        let tol = self.eps().powf(0.25) * scale;
        for m in [d0 + ra - rb, d0 - ra + rb, d0 + ra + rb, d0 - ra - rb] {
            if m.abs() < tol && scale > 0.0 {
                return None;
            }
        }
        let xa: Vec<f64> = self.offsets(a, r).into_iter().map(|x| d0 + x).collect();
        let xb = self.offsets(b, r);
        let all = |f: &dyn Fn(f64, f64) -> bool| xa.iter().all(|&x| xb.iter().all(|&y| f(x, y)));
        let each_some = |f: &dyn Fn(f64, f64) -> bool| xa.iter().all(|&x| xb.iter().any(|&y| f(x, y)));
        Some([all(&|x, y| x < y), all(&|x, y| x > y), each_some(&|x, y| x <= y), each_some(&|x, y| x >= y)])
    }
}
