//! Borel–Ritt shadow expansions and boundary-layer matching.

use std::fmt;

use num::{Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::concretize::Concretization;
use crate::error::{Error, Result};
use crate::extnum::{ExternalNumber, FormalSeries};
use crate::scale::{Exponent, Neutrix};
use crate::seq::Segment;
use crate::Q;

/// Prefix `a_0 … a_K` of a standard sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowExpansion {
    pub coeffs: Vec<Q>,
}

impl ShadowExpansion {
    pub fn new(coeffs: Vec<Q>) -> Self {
        ShadowExpansion { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// `s_n = Σ_{k≤n} a_k ε^k`
    pub fn partial_sum(&self, n: usize) -> FormalSeries {
        FormalSeries::new(self.coeffs.iter().take(n + 1).enumerate().map(|(k, a)| (a.clone(), Exponent::from(k as i64))))
    }
}

/// Local Cauchy property of the partial sums: `|s_n − s_m| ⊆ £ε^{m+1}` for
/// the stored prefix, read on the limited indices modulo the microhalo.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyCertificate {
    pub segment: Segment,
    pub neutrix: Neutrix,
    pub pairs_checked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BorelRitt {
    pub b: ExternalNumber,
    pub certificate: CauchyCertificate,
}

/// `b = s_K + M`, a number whose ε-shadow expansion starts with `a_0 … a_K`.
pub fn borel_ritt(coeffs: &[Q], k: usize) -> Result<BorelRitt> {
    if k == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    if coeffs.len() <= k {
        return Err(Error::IndexBeyondPrefix { index: k, len: coeffs.len() });
    }
    let e = ShadowExpansion::new(coeffs[..=k].to_vec());
    let sums: Vec<ExternalNumber> = (0..=k).map(|n| ExternalNumber::precise(e.partial_sum(n))).collect();
    let mut pairs = 0;
    for m in 0..k {
        let bound = ExternalNumber::from_neutrix(Neutrix::pound_at(m as i64 + 1));
        for n in m + 1..=k {
            let d = sums[n].sub(&sums[m]).abs();
            if !d.subset(&bound) {
                return Err(Error::Inconsistent(format!("|s_{n} - s_{m}| = {d} is not within {bound}")));
            }
            pairs += 1;
        }
    }
    let b = sums[k].add(&ExternalNumber::from_neutrix(Neutrix::Micro));
    Ok(BorelRitt {
        b,
        certificate: CauchyCertificate { segment: Segment::LimitedNat, neutrix: Neutrix::Micro, pairs_checked: pairs },
    })
}

fn check_level(coeffs: &[Q], n: usize) -> Result<()> {
    if n + 1 >= coeffs.len() {
        return Err(Error::IndexBeyondPrefix { index: n + 1, len: coeffs.len() });
    }
    Ok(())
}

/// `(b − s_n)/ε^{n+1} ⊆ a_{n+1} + ⊘`
pub fn shadow_check(b: &ExternalNumber, coeffs: &[Q], n: usize) -> Result<bool> {
    check_level(coeffs, n)?;
    let s = ExternalNumber::precise(ShadowExpansion::new(coeffs.to_vec()).partial_sum(n));
    let r = b.sub(&s).mul(&ExternalNumber::eps_pow(-Exponent::from(n as i64 + 1)));
    let target = ExternalNumber::from_q(coeffs[n + 1].clone()).add(&ExternalNumber::from_neutrix(Neutrix::OSLASH));
    Ok(r.subset(&target))
}

/// Numeric counterpart of [`shadow_check`] in exact rationals: draws `x`
/// from the concretized `b` and tests `(x − s_n(ε₀))/ε₀^{n+1}` against the
/// tail `Σ_{k>n} a_k ε₀^{k−n−1}` within the `⊘` radius. The microhalo must
/// be concretized deeper than `ε₀^{n+1}`.
pub fn shadow_check_sampled<R: Rng + ?Sized>(
    b: &ExternalNumber,
    coeffs: &[Q],
    n: usize,
    conc: &Concretization,
    rng: &mut R,
) -> Result<bool> {
    check_level(coeffs, n)?;
    if conc.micro_exp() <= Exponent::from(n as i64 + 1) {
        return Err(Error::InvalidConcretization(format!(
            "micro_exp = {} must exceed the level {}",
            conc.micro_exp(),
            n + 1
        )));
    }
    let eps = Q::from_float(conc.eps0()).ok_or_else(|| Error::InvalidConcretization("eps0".into()))?;
    let at = |s: &FormalSeries| -> Result<Q> {
        let mut acc = Q::zero();
        for (c, q) in s.terms() {
            if !q.is_integer() {
                return Err(Error::EvalDomain(format!("fractional exponent {q} in exact evaluation")));
            }
            acc += c * num::pow::Pow::pow(&eps, *q.numer() as i32);
        }
        Ok(acc)
    };
    let r = conc.radius(b.neutrix())?;
    let offset = if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
    let x = at(b.rep())? + Q::from_float(offset).unwrap_or_else(Q::zero);
    let e = ShadowExpansion::new(coeffs.to_vec());
    let scale = num::pow::Pow::pow(&eps, (n + 1) as i32);
    let residual = (x - at(&e.partial_sum(n))?) / &scale;
    let tail = (at(&e.partial_sum(e.order()))? - at(&e.partial_sum(n))?) / scale;
    let gap = (residual - tail).abs().to_f64().unwrap_or(f64::INFINITY);
    Ok(gap <= conc.radius(Neutrix::OSLASH)?)
}

/// Precise vector field `f(t, y)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FnTerm {
    Const(ExternalNumber),
    T,
    Y,
    Add(Box<FnTerm>, Box<FnTerm>),
    Mul(Box<FnTerm>, Box<FnTerm>),
    Div(Box<FnTerm>, Box<FnTerm>),
    Pow(Box<FnTerm>, Exponent),
}

impl FnTerm {
    pub fn eval(&self, t: f64, y: f64, eps0: f64) -> f64 {
        match self {
            FnTerm::Const(c) => c.rep().eval_f64(eps0),
            FnTerm::T => t,
            FnTerm::Y => y,
            FnTerm::Add(a, b) => a.eval(t, y, eps0) + b.eval(t, y, eps0),
            FnTerm::Mul(a, b) => a.eval(t, y, eps0) * b.eval(t, y, eps0),
            FnTerm::Div(a, b) => a.eval(t, y, eps0) / b.eval(t, y, eps0),
            FnTerm::Pow(a, p) if p.is_integer() => a.eval(t, y, eps0).powi(*p.numer() as i32),
            FnTerm::Pow(a, p) => a.eval(t, y, eps0).powf(p.to_f64().unwrap_or(f64::NAN)),
        }
    }
}

impl fmt::Display for FnTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::dsl::print_fn(self))
    }
}

/// `ε y' = f(t, y)`, `y(t0) = y0`, on `[t0, t_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlowCurveProblem {
    pub f: FnTerm,
    pub eps0: f64,
    pub y0: f64,
    pub t0: f64,
    pub t_max: f64,
    /// `None` picks `ε₀/20`.
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Fast,
    Halo,
    EpsTube,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::Fast => "fast",
            Region::Halo => "halo",
            Region::EpsTube => "eps_tube",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub y: f64,
    /// Slow-curve value `g(t)`.
    pub slow: f64,
    pub region: Region,
}

/// Entry times are measured against concretized radii, not true external
/// sets.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport {
    pub trajectory: Vec<TrajectoryPoint>,
    pub t_enter_halo: Option<f64>,
    pub t_enter_eps_tube: Option<f64>,
    pub halo_radius: f64,
    pub tube_radius: f64,
    pub dt: f64,
    pub steps: usize,
    /// First detected sign change of `∂f/∂y` along the slow curve.
    pub singular_t: Option<f64>,
    /// Post-entry containment held up to `singular_t` (or the end).
    pub contained: bool,
}

/// Tube radius as a multiple of `ε₀`.
pub const TUBE_FACTOR: f64 = 1.0;

const TRAJECTORY_POINTS: usize = 2001;

fn dfdy(f: &FnTerm, t: f64, y: f64, eps0: f64) -> f64 {
    let h = 1e-6 * y.abs().max(1.0);
    (f.eval(t, y + h, eps0) - f.eval(t, y - h, eps0)) / (2.0 * h)
}

fn slow_point(f: &FnTerm, t: f64, guess: f64, eps0: f64) -> Option<f64> {
    let mut y = guess;
    for _ in 0..100 {
        let v = f.eval(t, y, eps0);
        let d = dfdy(f, t, y, eps0);
        if !v.is_finite() || !d.is_finite() || d == 0.0 {
            return None;
        }
        let step = v / d;
        y -= step;
        if step.abs() <= 1e-14 * y.abs().max(1.0) {
            return Some(y);
        }
    }
    (f.eval(t, y, eps0).abs() <= 1e-10).then_some(y)
}

fn crossing(t_a: f64, l_a: f64, l_b: f64, dt: f64, r: f64) -> f64 {
    if l_b > 0.0 && l_a > l_b {
        t_a + dt * (l_a / r).ln() / (l_a / l_b).ln()
    } else {
        t_a + dt * (l_a - r) / (l_a - l_b)
    }
}

/// RK4 on `y' = f(t, y)/ε₀`; tracks `λ(t) = y(t) − g(t)` against the halo
/// (`⊘`) and ε-tube radii and checks that the trajectory stays in the tube
/// once it has entered, up to the first singular point.
pub fn match_simulate(p: &SlowCurveProblem, conc: &Concretization) -> Result<MatchReport> {
    let conc = Concretization::new(p.eps0, conc.delta(), conc.micro_exp(), conc.seed())?;
    let eps0 = p.eps0;
    let dt = p.dt.unwrap_or(eps0 / 20.0);
    if !(dt > 0.0) || dt > eps0 / 10.0 {
        return Err(Error::StepUnstable { dt, eps0 });
    }
    if !(p.t_max > p.t0) {
        return Err(Error::InvalidArgument("t_max must exceed t0".into()));
    }
    let f = &p.f;
    let g0 = slow_point(f, p.t0, p.y0, eps0).ok_or_else(|| Error::NotAttractive("no slow curve through the initial time".into()))?;
    if dfdy(f, p.t0, g0, eps0) >= 0.0 {
        return Err(Error::NotAttractive(format!("df/dy >= 0 on the slow curve at t = {}", p.t0)));
    }
    for i in 1..=16 {
        let y = g0 + (p.y0 - g0) * i as f64 / 16.0;
        if (y - g0) * f.eval(p.t0, y, eps0) >= 0.0 {
            return Err(Error::NotAttractive(format!("trajectories do not approach the slow curve at y = {y}")));
        }
    }
    let halo = conc.radius(Neutrix::OSLASH)?;
    let tube = TUBE_FACTOR * eps0;
    if (p.y0 - g0).abs() <= halo {
        return Err(Error::InvalidArgument("initial layer is already infinitesimal".into()));
    }

    let steps = ((p.t_max - p.t0) / dt).ceil() as usize;
    let every = (steps / (TRAJECTORY_POINTS - 1)).max(1);
    let rhs = |t: f64, y: f64| f.eval(t, y, eps0) / eps0;
    let region = |l: f64| {
        if l <= tube {
            Region::EpsTube
        } else if l <= halo {
            Region::Halo
        } else {
            Region::Fast
        }
    };
    let (mut t, mut y, mut g) = (p.t0, p.y0, g0);
    let mut lam = (y - g).abs();
    let mut sign = dfdy(f, t, g, eps0).signum();
    let mut trajectory = vec![TrajectoryPoint { t, y, slow: g, region: region(lam) }];
    let (mut t_halo, mut t_tube, mut singular_t) = (None, None, None);
    for k in 1..=steps {
        let h = dt.min(p.t_max - t);
        let k1 = rhs(t, y);
        let k2 = rhs(t + h / 2.0, y + h / 2.0 * k1);
        let k3 = rhs(t + h / 2.0, y + h / 2.0 * k2);
        let k4 = rhs(t + h, y + h * k3);
        let y_next = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let t_next = t + h;
        if !y_next.is_finite() {
            return Err(Error::NumericOverflow { step: k });
        }
        let g_next = slow_point(f, t_next, g, eps0).unwrap_or(f64::NAN);
        let lam_next = (y_next - g_next).abs();
        if singular_t.is_none() {
            let s = dfdy(f, t_next, g_next, eps0).signum();
            if !g_next.is_finite() || s != sign {
                singular_t = Some(t_next);
            }
            sign = s;
        }
        if singular_t.is_none() {
            if t_halo.is_none() && lam_next <= halo {
                t_halo = Some(crossing(t, lam, lam_next, h, halo));
            }
            if t_tube.is_none() && lam_next <= tube {
                t_tube = Some(crossing(t, lam, lam_next, h, tube));
            } else if t_tube.is_some() && lam_next > tube {
                return Err(Error::MatchingViolated { t: t_next });
            }
        }
        t = t_next;
        y = y_next;
        g = g_next;
        lam = lam_next;
        if k % every == 0 || k == steps {
            trajectory.push(TrajectoryPoint { t, y, slow: g, region: region(lam) });
        }
    }
    Ok(MatchReport {
        trajectory,
        t_enter_halo: t_halo,
        t_enter_eps_tube: t_tube,
        halo_radius: halo,
        tube_radius: tube,
        dt,
        steps,
        singular_t,
        contained: t_tube.is_some(),
    })
}

/// Entry time of `|y| = r` for `ε y' = −y`, `y(0) = y0`.
pub fn linear_entry_time(eps0: f64, y0: f64, r: f64) -> f64 {
    eps0 * (y0.abs() / r).ln()
}
