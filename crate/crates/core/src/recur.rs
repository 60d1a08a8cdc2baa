//! Flexible recurrences `u_{n+1} = f(n, u_n, α₁, …, α_k)`.
//!
//! A solution is the envelope of internal paths in which every imprecise
//! constant `α_i` is replaced, at every step, by a fresh representative
//! `a_i(n) ∈ α_i`. Paths are sampled in the concretized model; stability
//! can be proven only for affine relations, otherwise sampling can only
//! falsify.

use std::fmt;

use num::{ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;

use crate::concretize::Concretization;
use crate::error::{Error, Result};
use crate::extnum::ExternalNumber;
use crate::scale::{Exponent, Neutrix};
use crate::seq::{self, SeqTerm};
use crate::Q;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RecTerm {
    /// Imprecise constants are parameters, redrawn at every step.
    Const(ExternalNumber),
    Index,
    State,
    AltSign,
    GeomPow(Q),
    Add(Box<RecTerm>, Box<RecTerm>),
    Mul(Box<RecTerm>, Box<RecTerm>),
    Div(Box<RecTerm>, Box<RecTerm>),
    Pow(Box<RecTerm>, Exponent),
}

impl RecTerm {
    pub fn konst(a: impl Into<ExternalNumber>) -> Self {
        RecTerm::Const(a.into())
    }

    pub fn add(a: RecTerm, b: RecTerm) -> Self {
        RecTerm::Add(Box::new(a), Box::new(b))
    }

    pub fn mul(a: RecTerm, b: RecTerm) -> Self {
        RecTerm::Mul(Box::new(a), Box::new(b))
    }

    /// `α·u + N`
    pub fn affine(alpha: ExternalNumber, n: Neutrix) -> Self {
        RecTerm::add(RecTerm::mul(RecTerm::Const(alpha), RecTerm::State), RecTerm::Const(n.into()))
    }
}

impl fmt::Display for RecTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::dsl::print_rec(self))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceSpec {
    pub f: RecTerm,
    pub u0: ExternalNumber,
    /// Number of steps.
    pub horizon: usize,
    /// Index of `u0`.
    pub start: u64,
}

impl RecurrenceSpec {
    pub fn new(f: RecTerm, u0: ExternalNumber, horizon: usize) -> Self {
        RecurrenceSpec { f, u0, horizon, start: 0 }
    }

    pub fn with_start(mut self, start: u64) -> Self {
        self.start = start;
        self
    }

    /// `u_{n+1} = (−1 + n^{−a})u_n + 2 − n^{−a} + (−1)^n(n^{−a} − (n+1)^{−a} − n^{−2a})`
    /// with solution `1 + (−1)^n/n^a`. Started at `n = 2`: at `n = 1` the
    /// coefficient of `u_n` vanishes and every path collapses.
    pub fn drain(a: u32, horizon: usize) -> Self {
        let f = crate::dsl::parse_rec(&format!(
            "(-1 + 1/n^{a})*u + 2 - 1/n^{a} + (-1)^n*(1/n^{a} - 1/(n + 1)^{a} - 1/n^{})",
            2 * a
        ))
        .expect("drain term parses");
        let u0 = ExternalNumber::from_q(Q::from_integer(1.into()) + Q::new(1.into(), (1i64 << a).into()));
        RecurrenceSpec { f, u0, horizon, start: 2 }
    }

    /// The closed-form solution of [`RecurrenceSpec::drain`].
    pub fn drain_solution(a: u32) -> SeqTerm {
        crate::dsl::parse_seq(&format!("1 + (-1)^n/n^{a}")).expect("drain solution parses")
    }

    /// Imprecise constants, in traversal order.
    pub fn parameters(&self) -> Vec<ExternalNumber> {
        let mut out = vec![];
        collect_params(&self.f, &mut out);
        out
    }

    /// One step `f(n, t, a)` with recorded parameter draws, on the
    /// compensated state `(hi, lo)`.
    pub fn eval_step(&self, conc: &Concretization, n: u64, t: (f64, f64), draws: &[f64]) -> (f64, f64) {
        let c = compile(&self.f, conc, &mut 0);
        let v = c.eval(n, Dd { hi: t.0, lo: t.1 }, draws);
        (v.hi, v.lo)
    }
}

fn collect_params(t: &RecTerm, out: &mut Vec<ExternalNumber>) {
    match t {
        RecTerm::Const(c) if !c.is_precise() => out.push(c.clone()),
        RecTerm::Add(a, b) | RecTerm::Mul(a, b) | RecTerm::Div(a, b) => {
            collect_params(a, out);
            collect_params(b, out);
        }
        RecTerm::Pow(a, _) => collect_params(a, out),
        _ => {}
    }
}

/// Double-double value, enough to keep `n^{−2a}` corrections visible over
/// long horizons.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }
}

impl Dd {
    fn from_q(q: &Q) -> Dd {
        let hi = q.to_f64().unwrap_or(f64::NAN);
        let lo = Q::from_float(hi).and_then(|h| (q - h).to_f64()).unwrap_or(0.0);
        quick_two_sum(hi, lo)
    }

    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        quick_two_sum(s, e + self.lo + o.lo)
    }

    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p) + self.hi * o.lo + self.lo * o.hi;
        quick_two_sum(p, e)
    }

    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.add(o.mul(Dd::from(q1)).neg());
        let q2 = r.hi / o.hi;
        let r = r.add(o.mul(Dd::from(q2)).neg());
        let q3 = r.hi / o.hi;
        quick_two_sum(q1, q2).add(Dd::from(q3))
    }

    fn powi(self, k: i64) -> Dd {
        let mut base = self;
        let mut acc = Dd::from(1.0);
        let mut e = k.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            e >>= 1;
        }
        if k < 0 {
            Dd::from(1.0).div(acc)
        } else {
            acc
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Lit(Dd),
    Param(usize),
    Index,
    State,
    Alt,
    Geom(Dd),
    Add(Box<Op>, Box<Op>),
    Mul(Box<Op>, Box<Op>),
    Div(Box<Op>, Box<Op>),
    PowI(Box<Op>, i64),
    PowF(Box<Op>, f64),
}

fn const_value(c: &ExternalNumber, eps0: f64) -> Dd {
    c.rep().terms().iter().fold(Dd::from(0.0), |acc, (coef, q)| {
        let scale = if q.is_zero() { Dd::from(1.0) } else { Dd::from(eps0.powf(q.to_f64().unwrap_or(f64::NAN))) };
        acc.add(Dd::from_q(coef).mul(scale))
    })
}

fn compile(t: &RecTerm, conc: &Concretization, next: &mut usize) -> Op {
    let mut rec = |x: &RecTerm| Box::new(compile(x, conc, next));
    match t {
        RecTerm::Const(c) if c.is_precise() => Op::Lit(const_value(c, conc.eps0())),
        RecTerm::Const(_) => {
            let i = *next;
            *next += 1;
            Op::Param(i)
        }
        RecTerm::Index => Op::Index,
        RecTerm::State => Op::State,
        RecTerm::AltSign => Op::Alt,
        RecTerm::GeomPow(b) => Op::Geom(Dd::from_q(b)),
        RecTerm::Add(a, b) => {
            let a = rec(a);
            Op::Add(a, rec(b))
        }
        RecTerm::Mul(a, b) => {
            let a = rec(a);
            Op::Mul(a, rec(b))
        }
        RecTerm::Div(a, b) => {
            let a = rec(a);
            Op::Div(a, rec(b))
        }
        RecTerm::Pow(a, p) if p.is_integer() => Op::PowI(rec(a), *p.numer()),
        RecTerm::Pow(a, p) => Op::PowF(rec(a), p.to_f64().unwrap_or(f64::NAN)),
    }
}

impl Op {
    fn eval(&self, n: u64, u: Dd, draws: &[f64]) -> Dd {
        match self {
            Op::Lit(v) => *v,
            Op::Param(i) => Dd::from(draws[*i]),
            Op::Index => Dd::from(n as f64),
            Op::State => u,
            Op::Alt => Dd::from(if n % 2 == 0 { 1.0 } else { -1.0 }),
            Op::Geom(b) => b.powi(n as i64),
            Op::Add(a, b) => a.eval(n, u, draws).add(b.eval(n, u, draws)),
            Op::Mul(a, b) => a.eval(n, u, draws).mul(b.eval(n, u, draws)),
            Op::Div(a, b) => a.eval(n, u, draws).div(b.eval(n, u, draws)),
            Op::PowI(a, k) => a.eval(n, u, draws).powi(*k),
            Op::PowF(a, p) => Dd::from(a.eval(n, u, draws).hi.powf(*p)),
        }
    }
}

/// One internal solution `t_0 … t_H` with its per-step parameter draws.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentativePath {
    pub start: u64,
    pub values: Vec<f64>,
    /// Low-order parts of the compensated state.
    pub lo: Vec<f64>,
    /// `draws[k][i]` is `a_i(start + k)`, used for step `k → k+1`.
    pub draws: Vec<Vec<f64>>,
}

struct Compiled {
    op: Op,
    params: Vec<ExternalNumber>,
}

impl Compiled {
    fn new(spec: &RecurrenceSpec, conc: &Concretization) -> Result<Self> {
        let op = compile(&spec.f, conc, &mut 0);
        let params = spec.parameters();
        for p in &params {
            conc.radius(p.neutrix())?;
        }
        Ok(Compiled { op, params })
    }

    fn run<R: Rng>(&self, spec: &RecurrenceSpec, conc: &Concretization, t0: f64, rng: &mut R) -> Result<RepresentativePath> {
        let mut t = Dd::from(t0);
        let mut values = Vec::with_capacity(spec.horizon + 1);
        let mut lo = Vec::with_capacity(spec.horizon + 1);
        let mut draws = Vec::with_capacity(spec.horizon);
        values.push(t0);
        lo.push(0.0);
        for k in 0..spec.horizon {
            let a: Vec<f64> = self.params.iter().map(|p| conc.sample(p, rng)).collect::<Result<_>>()?;
            t = self.op.eval(spec.start + k as u64, t, &a);
            if !t.hi.is_finite() {
                return Err(Error::NumericOverflow { step: k + 1 });
            }
            values.push(t.hi);
            lo.push(t.lo);
            draws.push(a);
        }
        Ok(RepresentativePath { start: spec.start, values, lo, draws })
    }
}

/// `count` independent paths; path `i` uses stream `i` of `seed`.
pub fn sample_paths(spec: &RecurrenceSpec, conc: &Concretization, count: usize, seed: u64) -> Result<Vec<RepresentativePath>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let compiled = Compiled::new(spec, conc)?;
    let conc = conc.with_seed(seed);
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = conc.rng(i as u64);
            let t0 = conc.sample(&spec.u0, &mut rng)?;
            compiled.run(spec, &conc, t0, &mut rng)
        })
        .collect()
}

/// `(a, b)` with `f = a·u + b`, if `f` is affine in the state and free of `n`.
pub fn affine_parts(f: &RecTerm) -> Option<(ExternalNumber, ExternalNumber)> {
    let zero = ExternalNumber::zero();
    Some(match f {
        RecTerm::Const(c) => (zero, c.clone()),
        RecTerm::State => (ExternalNumber::one(), zero),
        RecTerm::Add(x, y) => {
            let ((a1, b1), (a2, b2)) = (affine_parts(x)?, affine_parts(y)?);
            (a1.add(&a2), b1.add(&b2))
        }
        RecTerm::Mul(x, y) => {
            let ((a1, b1), (a2, b2)) = (affine_parts(x)?, affine_parts(y)?);
            if a1 == zero {
                (b1.mul(&a2), b1.mul(&b2))
            } else if a2 == zero {
                (a1.mul(&b2), b1.mul(&b2))
            } else {
                return None;
            }
        }
        RecTerm::Div(x, y) => {
            let ((a1, b1), (a2, b2)) = (affine_parts(x)?, affine_parts(y)?);
            if a2 != zero {
                return None;
            }
            (a1.div(&b2).ok()?, b1.div(&b2).ok()?)
        }
        _ => return None,
    })
}

/// Decay certificate for `u_{n+1} = α·u_n + N`, `|α|` appreciably below 1:
/// with `q ∈ |α|`, `c ∈ N` (upper ends in the concretization),
/// `|t_n| ≤ (|t_0| + c/(1−q))·qⁿ + c/(1−q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineCertificate {
    pub alpha: ExternalNumber,
    pub neutrix: Neutrix,
    pub u0: ExternalNumber,
    pub q: f64,
    pub c: f64,
    /// `N/(1−|α|)`, equal to `N`.
    pub limit_neutrix: Neutrix,
}

impl AffineCertificate {
    pub fn bound(&self, t0: f64, n: u32) -> f64 {
        affine_bound(self.q, self.c, t0, n)
    }

    /// Iterates of `u0` lie in `u0·OslashPow(n)` when `α ⊆ ⊘` and `N = 0`.
    pub fn power_family(&self, n: u32) -> Option<OslashPow> {
        let infinitesimal = self.alpha.subset(&ExternalNumber::from_neutrix(Neutrix::OSLASH));
        (infinitesimal && self.neutrix.is_zero() && n >= 1).then_some(OslashPow { n })
    }
}

pub fn affine_bound(q: f64, c: f64, t0: f64, n: u32) -> f64 {
    let tail = c / (1.0 - q);
    (t0.abs() + tail) * q.powi(n as i32) + tail
}

pub fn affine_closed_form(alpha: &ExternalNumber, n: Neutrix, u0: &ExternalNumber, conc: &Concretization) -> Result<AffineCertificate> {
    if n.is_full() {
        return Err(Error::InvalidArgument("neutrix must not be R".into()));
    }
    let gap = ExternalNumber::one().sub(&alpha.abs());
    if !gap.gt(&ExternalNumber::from_neutrix(Neutrix::OSLASH)) {
        return Err(Error::ContractionRequired);
    }
    let limit_neutrix = ExternalNumber::from_neutrix(n).div(&gap)?.neutrix();
    if limit_neutrix != n {
        return Err(Error::Inconsistent(format!("N/(1-|a|) = {limit_neutrix} differs from N = {n}")));
    }
    let q = conc.center(alpha).abs() + conc.radius(alpha.neutrix())?;
    if q >= 1.0 {
        return Err(Error::ContractionRequired);
    }
    let c = conc.radius(n)?;
    Ok(AffineCertificate { alpha: alpha.clone(), neutrix: n, u0: u0.clone(), q, c, limit_neutrix })
}

/// `⊘ⁿ = £e^{−n∞}`: the reals `x` with `|x|^{1/n}` infinitesimal. Not a
/// monomial neutrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OslashPow {
    pub n: u32,
}

pub fn oslash_power(n: u32) -> Result<OslashPow> {
    if n == 0 {
        return Err(Error::InvalidArgument("power must be at least 1".into()));
    }
    Ok(OslashPow { n })
}

impl OslashPow {
    pub fn contains(&self, x: f64, conc: &Concretization) -> bool {
        x == 0.0 || x.abs().ln() / f64::from(self.n) <= conc.infinitesimal_threshold().ln() + 1e-12
    }
}

impl fmt::Display for OslashPow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o^{}", self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flag {
    Proven,
    Falsified,
    Unknown,
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flag::Proven => "proven",
            Flag::Falsified => "falsified",
            Flag::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    pub flag: Flag,
    pub detail: String,
    /// Difference path `v_n − u_n` of the first counterexample.
    pub counterexample: Option<Vec<f64>>,
}

impl Evidence {
    fn of(flag: Flag, detail: impl Into<String>) -> Self {
        Evidence { flag, detail: detail.into(), counterexample: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityVerdict {
    pub neutrix: Neutrix,
    pub stable: Evidence,
    pub asymptotically_stable: Evidence,
    pub strongly_asymptotically_stable: Evidence,
    pub certificate: Option<AffineCertificate>,
    pub paths: usize,
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SamplingOptions {
    pub samples: usize,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions { samples: 1000 }
    }
}

/// Stability of `reference` as a solution of `spec` with respect to `n`.
/// Affine contractions with the zero reference are decided analytically;
/// anything else is sampled: perturbations of size up to `radius(N)` must
/// stay within `level(N)` (stability), and perturbations up to one buffer
/// beyond `level(N)` must end within `level(N)` (asymptotic) and
/// `radius(N)` (strong) over the last quarter of the horizon.
pub fn classify_stability(
    spec: &RecurrenceSpec,
    reference: &SeqTerm,
    n: Neutrix,
    conc: &Concretization,
    opts: SamplingOptions,
) -> Result<StabilityVerdict> {
    if n.is_full() {
        let all = || Evidence::of(Flag::Proven, "every difference lies in R");
        return Ok(StabilityVerdict {
            neutrix: n,
            stable: all(),
            asymptotically_stable: all(),
            strongly_asymptotically_stable: all(),
            certificate: None,
            paths: 0,
            horizon: spec.horizon,
        });
    }
    let zero_ref = seq::normalize(reference).ok().and_then(|nf| nf.as_constant()).is_some_and(|c| c.is_zero());
    if let (true, Some((alpha, b))) = (zero_ref, affine_parts(&spec.f)) {
        if b.rep().is_zero() {
            match affine_closed_form(&alpha, b.neutrix(), &spec.u0, conc) {
                Ok(cert) => return Ok(analytic_verdict(cert, n, spec.horizon)),
                Err(Error::ContractionRequired) => {}
                Err(e) => return Err(e),
            }
        }
    }
    sampled_verdict(spec, reference, n, conc, opts)
}

fn analytic_verdict(cert: AffineCertificate, m: Neutrix, horizon: usize) -> StabilityVerdict {
    let l = cert.limit_neutrix;
    let covered = l.is_subset(&m);
    let stable = if covered {
        Evidence::of(Flag::Proven, format!("|v_n| <= |v_0| + c/(1-q) with q = {:.6}, c = {:.3e}; {l} within {m}", cert.q, cert.c))
    } else {
        Evidence::of(Flag::Falsified, format!("v_1 contains {l}, not within {m}"))
    };
    let asym = if covered {
        Evidence::of(Flag::Proven, format!("geometric decay at rate {:.6} to the limit neutrix {l}", cert.q))
    } else {
        Evidence::of(Flag::Falsified, format!("the difference tends to {l}, larger than {m}"))
    };
    let strong = if !covered {
        Evidence::of(Flag::Falsified, "not asymptotically stable")
    } else if !m.is_zero() {
        Evidence::of(Flag::Proven, format!("asymptotic stability with nonzero neutrix {m} is strong"))
    } else if cert.alpha.is_zero() && l.is_zero() {
        Evidence::of(Flag::Proven, "every solution is 0 from n = 1 on")
    } else {
        Evidence::of(Flag::Falsified, "terms of a nonzero solution never equal {0}")
    };
    StabilityVerdict {
        neutrix: m,
        stable,
        asymptotically_stable: asym,
        strongly_asymptotically_stable: strong,
        certificate: Some(cert),
        paths: 0,
        horizon,
    }
}

struct PathOutcome {
    index: usize,
    diffs: Vec<f64>,
    /// last index with `|d| > level`, last index with `|d| > radius`
    last_above_level: Option<usize>,
    last_above_radius: Option<usize>,
}

fn run_perturbed(
    compiled: &Compiled,
    spec: &RecurrenceSpec,
    conc: &Concretization,
    refs: &[f64],
    width: f64,
    stream: u64,
    index: usize,
    level: f64,
    radius: f64,
) -> Result<PathOutcome> {
    let mut rng = conc.rng(stream);
    let d0 = if width > 0.0 { rng.random_range(-width..=width) } else { 0.0 };
    let path = compiled.run(spec, conc, refs[0] + d0, &mut rng)?;
    let diffs: Vec<f64> = path.values.iter().zip(refs).map(|(v, r)| v - r).collect();
    let last = |tol: f64| diffs.iter().rposition(|d| d.abs() > tol);
    Ok(PathOutcome { index, last_above_level: last(level), last_above_radius: last(radius), diffs })
}

fn sampled_verdict(
    spec: &RecurrenceSpec,
    reference: &SeqTerm,
    n: Neutrix,
    conc: &Concretization,
    opts: SamplingOptions,
) -> Result<StabilityVerdict> {
    let compiled = Compiled::new(spec, conc)?;
    let refs: Vec<f64> = (0..=spec.horizon as u64)
        .map(|k| seq::eval_at(reference, spec.start + k).map(|v| conc.center(&v)))
        .collect::<Result<_>>()?;
    let radius = conc.radius(n)?;
    let level = conc.level(n)?;
    let samples = opts.samples.max(1);
    let run = |width: f64, offset: u64| -> Result<Vec<PathOutcome>> {
        let mut out: Vec<PathOutcome> = (0..samples)
            .into_par_iter()
            .map(|i| run_perturbed(&compiled, spec, conc, &refs, width, offset + i as u64, i, level, radius))
            .collect::<Result<_>>()?;
        out.sort_by_key(|o| o.index);
        Ok(out)
    };
    // asymptotic attraction is probed from a full buffer beyond the level
    let reach = level * conc.eps0().powf(-conc.delta().to_f64().unwrap_or(0.5));
    let near = run(radius, 0)?;
    let wide = run(reach, samples as u64)?;
    let settle = spec.horizon - spec.horizon / 4;

    let stable = match near.iter().find(|o| o.last_above_level.is_some()) {
        Some(o) => Evidence {
            flag: Flag::Falsified,
            detail: format!("path {} with |v_0 - u_0| <= {radius:.3e} leaves {level:.3e}", o.index),
            counterexample: Some(o.diffs.clone()),
        },
        None => Evidence::of(
            Flag::Unknown,
            format!("{samples} perturbations within {radius:.3e} stayed within {level:.3e} for {} steps", spec.horizon),
        ),
    };
    let fails = |last: Option<usize>| last.is_some_and(|k| k >= settle);
    let asym = match wide.iter().find(|o| fails(o.last_above_level)) {
        Some(o) => Evidence {
            flag: Flag::Falsified,
            detail: format!("path {} with |v_0 - u_0| <= {reach:.3e} is still above {level:.3e} after step {settle}", o.index),
            counterexample: Some(o.diffs.clone()),
        },
        None => Evidence::of(Flag::Unknown, format!("{samples} perturbations within {reach:.3e} settled below {level:.3e}")),
    };
    let strong = match wide.iter().find(|o| fails(o.last_above_radius)) {
        Some(o) => Evidence {
            flag: Flag::Falsified,
            detail: format!("path {} does not enter and remain within {radius:.3e}", o.index),
            counterexample: Some(o.diffs.clone()),
        },
        None => Evidence::of(Flag::Unknown, format!("{samples} perturbations entered and stayed within {radius:.3e}")),
    };
    Ok(StabilityVerdict {
        neutrix: n,
        stable,
        asymptotically_stable: asym,
        strongly_asymptotically_stable: strong,
        certificate: None,
        paths: 2 * samples,
        horizon: spec.horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_rec, parse_seq};

    fn x(s: &str) -> ExternalNumber {
        s.parse().unwrap()
    }

    #[test]
    fn identity_recurrence_stays_put() {
        let conc = Concretization::default();
        let spec = RecurrenceSpec::new(parse_rec("u").unwrap(), x("1 + o"), 20);
        for p in sample_paths(&spec, &conc, 16, 7).unwrap() {
            assert!(conc.contains(p.values[0], &spec.u0).unwrap());
            assert!(p.values.iter().all(|v| *v == p.values[0]));
        }
    }

    #[test]
    fn drain_path_follows_closed_form() {
        let conc = Concretization::default();
        let spec = RecurrenceSpec::drain(2, 2000);
        let p = &sample_paths(&spec, &conc, 1, 0).unwrap()[0];
        for (k, v) in p.values.iter().enumerate() {
            let n = (k + 2) as f64;
            let exact = 1.0 + if (k + 2) % 2 == 0 { 1.0 } else { -1.0 } / (n * n);
            assert!((v - exact).abs() <= 1e-13, "n = {n}: {v} vs {exact}");
        }
    }

    #[test]
    fn paths_replay() {
        let conc = Concretization::default();
        let spec = RecurrenceSpec::new(RecTerm::affine(x("1/2 + o"), Neutrix::pound_at(1)), x("1"), 30);
        let ps = sample_paths(&spec, &conc, 4, 3).unwrap();
        assert_eq!(ps, sample_paths(&spec, &conc, 4, 3).unwrap());
        for p in &ps {
            for k in 0..30 {
                let next = spec.eval_step(&conc, k as u64, (p.values[k], p.lo[k]), &p.draws[k]);
                assert_eq!(next, (p.values[k + 1], p.lo[k + 1]));
            }
        }
    }

    #[test]
    fn affine_certificates() {
        let conc = Concretization::default();
        let c = affine_closed_form(&x("1/2 + o"), Neutrix::pound_at(1), &x("1"), &conc).unwrap();
        assert_eq!(c.limit_neutrix, Neutrix::pound_at(1));
        assert!(c.q > 0.5 && c.q < 0.6);
        let z = affine_closed_form(&x("0"), Neutrix::Zero, &x("7"), &conc).unwrap();
        assert_eq!(z.bound(7.0, 0), 7.0);
        assert_eq!(z.bound(7.0, 3), 0.0);
        let p = affine_closed_form(&x("o"), Neutrix::Zero, &x("1"), &conc).unwrap();
        assert_eq!(p.power_family(4), Some(OslashPow { n: 4 }));
        assert_eq!(affine_closed_form(&x("2"), Neutrix::OSLASH, &x("1"), &conc), Err(Error::ContractionRequired));
    }

    #[test]
    fn oslash_powers() {
        let conc = Concretization::default();
        let p5 = oslash_power(5).unwrap();
        assert!(p5.contains(conc.eps0().powi(5), &conc));
        assert!(!p5.contains(1.0, &conc));
        assert!(oslash_power(0).is_err());
    }

    #[test]
    fn verdicts() {
        let conc = Concretization::default();
        let zero = parse_seq("0").unwrap();
        let spec = RecurrenceSpec::new(RecTerm::affine(x("1/2"), Neutrix::pound_at(1)), x("1"), 50);
        let v = classify_stability(&spec, &zero, Neutrix::pound_at(1), &conc, SamplingOptions::default()).unwrap();
        assert_eq!(
            [v.stable.flag, v.asymptotically_stable.flag, v.strongly_asymptotically_stable.flag],
            [Flag::Proven; 3]
        );
        let spec = RecurrenceSpec::new(RecTerm::affine(x("2"), Neutrix::OSLASH), x("0"), 40);
        let v = classify_stability(&spec, &zero, Neutrix::OSLASH, &conc, SamplingOptions { samples: 50 }).unwrap();
        assert_eq!(v.stable.flag, Flag::Falsified);
        assert!(v.stable.counterexample.is_some());
    }
}
