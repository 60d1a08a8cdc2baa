//! Flexible sequences given by closed-form terms over the index `n`.
//!
//! Limits are decided in a two-level regime: as `n → ∞` the index
//! eventually dominates every `ε^{-q}`, so in the normal form
//! `Σ c·ε^q·n^r·b^n·(−1)^{sn} + Σ N·n^r·b^n` the growth class `(b, r)`
//! outranks the ε-exponent. Segment-relative limits look at the values
//! just beyond the cut instead (see [`limit_wrt_segment`]).

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::extnum::{canonicalize, ExternalNumber, FormalSeries};
use crate::scale::{Exponent, Kind, Neutrix};
use crate::Q;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SeqTerm {
    Const(ExternalNumber),
    IndexN,
    /// `(−1)^n`
    AltSign,
    Add(Box<SeqTerm>, Box<SeqTerm>),
    Mul(Box<SeqTerm>, Box<SeqTerm>),
    Div(Box<SeqTerm>, Box<SeqTerm>),
    Pow(Box<SeqTerm>, Exponent),
    /// `b^n` for a positive rational `b`.
    GeomPow(Q),
    /// `N · t`
    NeutrixSeq(Neutrix, Box<SeqTerm>),
}

impl SeqTerm {
    pub fn konst(a: impl Into<ExternalNumber>) -> Self {
        SeqTerm::Const(a.into())
    }

    pub fn int(k: i64) -> Self {
        SeqTerm::Const(ExternalNumber::from_int(k))
    }

    pub fn n() -> Self {
        SeqTerm::IndexN
    }

    pub fn add(a: SeqTerm, b: SeqTerm) -> Self {
        SeqTerm::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: SeqTerm, b: SeqTerm) -> Self {
        SeqTerm::add(a, SeqTerm::mul(SeqTerm::int(-1), b))
    }

    pub fn mul(a: SeqTerm, b: SeqTerm) -> Self {
        SeqTerm::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: SeqTerm, b: SeqTerm) -> Self {
        SeqTerm::Div(Box::new(a), Box::new(b))
    }

    pub fn pow(a: SeqTerm, p: impl Into<Exponent>) -> Self {
        SeqTerm::Pow(Box::new(a), p.into())
    }

    pub fn neutrix_seq(n: Neutrix, t: SeqTerm) -> Self {
        SeqTerm::NeutrixSeq(n, Box::new(t))
    }

    /// `1/n^r`
    pub fn inv_n_pow(r: i64) -> Self {
        SeqTerm::div(SeqTerm::int(1), SeqTerm::pow(SeqTerm::n(), r))
    }

    /// Substitute `n ↦ k·n + j`.
    pub fn reindex(&self, k: u64, j: u64) -> SeqTerm {
        use SeqTerm::*;
        let kq = Q::from_integer(k.into());
        match self {
            Const(a) => Const(a.clone()),
            IndexN => {
                let kn = SeqTerm::mul(SeqTerm::konst(ExternalNumber::from_q(kq)), IndexN);
                if j == 0 {
                    kn
                } else {
                    SeqTerm::add(kn, SeqTerm::int(j as i64))
                }
            }
            AltSign => {
                let sign = if j % 2 == 0 { 1 } else { -1 };
                if k % 2 == 0 {
                    SeqTerm::int(sign)
                } else {
                    SeqTerm::mul(SeqTerm::int(sign), AltSign)
                }
            }
            GeomPow(b) => {
                let shift = num::pow::Pow::pow(b, j as u32);
                SeqTerm::mul(SeqTerm::konst(ExternalNumber::from_q(shift)), GeomPow(num::pow::Pow::pow(b, k as u32)))
            }
            Add(a, b) => SeqTerm::add(a.reindex(k, j), b.reindex(k, j)),
            Mul(a, b) => SeqTerm::mul(a.reindex(k, j), b.reindex(k, j)),
            Div(a, b) => SeqTerm::div(a.reindex(k, j), b.reindex(k, j)),
            Pow(a, p) => SeqTerm::pow(a.reindex(k, j), *p),
            NeutrixSeq(m, t) => SeqTerm::neutrix_seq(*m, t.reindex(k, j)),
        }
    }

    /// Pointwise absolute value is not in the grammar; this multiplies the
    /// term by the eventual sign when that sign does not oscillate.
    pub fn eventual_abs(&self) -> Result<SeqTerm> {
        let nf = normalize(self)?;
        let mut signs = [0i8; 2];
        for (i, odd) in [false, true].into_iter().enumerate() {
            let a = AsymNumber::from_nf(&nf, odd);
            signs[i] = a.lead_sign();
        }
        match signs {
            [s, t] if s == t && s < 0 => Ok(SeqTerm::mul(SeqTerm::int(-1), self.clone())),
            [s, t] if s == t => Ok(self.clone()),
            _ => Err(Error::Unnormalizable("sign of the tail oscillates".into())),
        }
    }
}

impl From<ExternalNumber> for SeqTerm {
    fn from(a: ExternalNumber) -> Self {
        SeqTerm::Const(a)
    }
}

impl fmt::Display for SeqTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::dsl::print_seq(self))
    }
}

/// `c·ε^q·n^r·b^n·(−1)^{sn}`
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub coeff: Q,
    pub eps: Exponent,
    pub npow: Exponent,
    pub base: Q,
    pub alt: bool,
}

/// `N·n^r·b^n`, with any ε-scaling folded into `N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NeutrixMonomial {
    pub neutrix: Neutrix,
    pub npow: Exponent,
    pub base: Q,
}

/// Eventual-equality normal form of a [`SeqTerm`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct NormalForm {
    reps: Vec<Monomial>,
    neutrices: Vec<NeutrixMonomial>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Growth {
    Vanishing,
    Constant,
    Growing,
}

fn growth(base: &Q, npow: Exponent) -> Growth {
    match base.cmp(&Q::one()) {
        Ordering::Greater => Growth::Growing,
        Ordering::Less => Growth::Vanishing,
        Ordering::Equal => match npow.cmp(&Exponent::zero()) {
            Ordering::Greater => Growth::Growing,
            Ordering::Less => Growth::Vanishing,
            Ordering::Equal => Growth::Constant,
        },
    }
}

/// Magnitude class of `n^r·b^n`, ordered lexicographically by `(b, r)`.
type Class = (Q, Exponent);

impl NormalForm {
    pub fn reps(&self) -> &[Monomial] {
        &self.reps
    }

    pub fn neutrices(&self) -> &[NeutrixMonomial] {
        &self.neutrices
    }

    pub fn is_full(&self) -> bool {
        self.neutrices.iter().any(|m| m.neutrix.is_full())
    }

    fn full() -> Self {
        NormalForm {
            reps: vec![],
            neutrices: vec![NeutrixMonomial { neutrix: Neutrix::Full, npow: Exponent::zero(), base: Q::one() }],
        }
    }

    pub fn constant(a: &ExternalNumber) -> Self {
        NormalForm::build(
            a.rep()
                .terms()
                .iter()
                .map(|(c, q)| Monomial { coeff: c.clone(), eps: *q, npow: Exponent::zero(), base: Q::one(), alt: false })
                .collect(),
            vec![NeutrixMonomial { neutrix: a.neutrix(), npow: Exponent::zero(), base: Q::one() }],
        )
    }

    fn monomial(m: Monomial) -> Self {
        NormalForm::build(vec![m], vec![])
    }

    fn build(reps: Vec<Monomial>, neutrices: Vec<NeutrixMonomial>) -> Self {
        if neutrices.iter().any(|m| m.neutrix.is_full()) {
            return NormalForm::full();
        }
        let mut ncls: BTreeMap<Class, Neutrix> = BTreeMap::new();
        for m in neutrices {
            if m.neutrix.is_zero() {
                continue;
            }
            let e = ncls.entry((m.base, m.npow)).or_insert(Neutrix::Zero);
            *e = *e + m.neutrix;
        }
        let mut rcls: BTreeMap<(Q, Exponent, Exponent, bool), Q> = BTreeMap::new();
        for m in reps {
            *rcls.entry((m.base, m.npow, m.eps, m.alt)).or_insert_with(Q::zero) += m.coeff;
        }
        // largest magnitude first
        let mut reps: Vec<Monomial> = rcls
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .filter(|((b, r, q, _), _)| !ncls.get(&(b.clone(), *r)).is_some_and(|n| n.absorbs(*q)))
            .map(|((base, npow, eps, alt), coeff)| Monomial { coeff, eps, npow, base, alt })
            .collect();
        reps.sort_by(|a, b| {
            (&b.base, b.npow).cmp(&(&a.base, a.npow)).then(a.eps.cmp(&b.eps)).then(a.alt.cmp(&b.alt))
        });
        let mut neutrices: Vec<NeutrixMonomial> =
            ncls.into_iter().map(|((base, npow), neutrix)| NeutrixMonomial { neutrix, npow, base }).collect();
        neutrices.reverse();
        NormalForm { reps, neutrices }
    }

    fn add(&self, other: &Self) -> Self {
        NormalForm::build(
            self.reps.iter().chain(&other.reps).cloned().collect(),
            self.neutrices.iter().chain(&other.neutrices).cloned().collect(),
        )
    }

    fn mul(&self, other: &Self) -> Self {
        let mut reps = vec![];
        let mut ns = vec![];
        for a in &self.reps {
            for b in &other.reps {
                reps.push(Monomial {
                    coeff: &a.coeff * &b.coeff,
                    eps: a.eps + b.eps,
                    npow: a.npow + b.npow,
                    base: &a.base * &b.base,
                    alt: a.alt ^ b.alt,
                });
            }
            for m in &other.neutrices {
                ns.push(NeutrixMonomial {
                    neutrix: m.neutrix.scale(&a.coeff, a.eps),
                    npow: a.npow + m.npow,
                    base: &a.base * &m.base,
                });
            }
        }
        for m in &self.neutrices {
            for b in &other.reps {
                ns.push(NeutrixMonomial {
                    neutrix: m.neutrix.scale(&b.coeff, b.eps),
                    npow: m.npow + b.npow,
                    base: &m.base * &b.base,
                });
            }
            for k in &other.neutrices {
                ns.push(NeutrixMonomial { neutrix: m.neutrix * k.neutrix, npow: m.npow + k.npow, base: &m.base * &k.base });
            }
        }
        NormalForm::build(reps, ns)
    }

    /// The value as an n-free external number, if it is one.
    pub fn as_constant(&self) -> Option<ExternalNumber> {
        let one = Q::one();
        let n_free = |b: &Q, r: &Exponent| *b == one && r.is_zero();
        if !self.reps.iter().all(|m| n_free(&m.base, &m.npow) && !m.alt)
            || !self.neutrices.iter().all(|m| n_free(&m.base, &m.npow))
        {
            return None;
        }
        let n = self.neutrices.iter().fold(Neutrix::Zero, |acc, m| acc + m.neutrix);
        Some(canonicalize(FormalSeries::new(self.reps.iter().map(|m| (m.coeff.clone(), m.eps))), n))
    }

    fn recip(&self) -> Result<Self> {
        if let [m] = self.reps.as_slice() {
            let cls = (&m.base, m.npow);
            for k in &self.neutrices {
                let ok = match (&k.base, k.npow).cmp(&cls) {
                    Ordering::Less => true,
                    Ordering::Equal => !k.neutrix.absorbs(m.eps),
                    Ordering::Greater => false,
                };
                if !ok {
                    return Err(Error::Unnormalizable("denominator is not eventually zeroless".into()));
                }
            }
            let inv = m.coeff.recip();
            let inv_b = m.base.recip();
            let rep = Monomial { coeff: inv.clone(), eps: -m.eps, npow: -m.npow, base: inv_b.clone(), alt: m.alt };
            let sq = &inv * &inv;
            let ns = self
                .neutrices
                .iter()
                .map(|k| NeutrixMonomial {
                    neutrix: k.neutrix.scale(&sq, -m.eps * 2),
                    npow: k.npow - m.npow * 2,
                    base: &k.base * &inv_b * &inv_b,
                })
                .collect();
            return Ok(NormalForm::build(vec![rep], ns));
        }
        if let Some(c) = self.as_constant() {
            return c
                .recip()
                .map(|r| NormalForm::constant(&r))
                .map_err(|_| Error::Unnormalizable(format!("constant divisor {c} is not zeroless")));
        }
        Err(Error::Unnormalizable("division by a sum of non-constant monomials".into()))
    }

    fn powi(&self, k: i64) -> Result<Self> {
        let mut acc = NormalForm::constant(&ExternalNumber::one());
        for _ in 0..k.unsigned_abs() {
            acc = acc.mul(self);
        }
        if k < 0 {
            acc.recip()
        } else {
            Ok(acc)
        }
    }

    fn pow(&self, p: Exponent) -> Result<Self> {
        if p.is_integer() {
            return self.powi(*p.numer());
        }
        match (self.reps.as_slice(), self.neutrices.is_empty()) {
            ([m], true) if !m.alt && m.coeff.is_positive() => {
                let c = ExternalNumber::from_q(m.coeff.clone()).pow(p).ok().and_then(|v| v.as_rational());
                let b = ExternalNumber::from_q(m.base.clone()).pow(p).ok().and_then(|v| v.as_rational());
                match (c, b) {
                    (Some(coeff), Some(base)) => Ok(NormalForm::monomial(Monomial {
                        coeff,
                        eps: m.eps * p,
                        npow: m.npow * p,
                        base,
                        alt: false,
                    })),
                    _ => Err(Error::Unnormalizable(format!("irrational power {p}"))),
                }
            }
            _ => Err(Error::Unnormalizable(format!("fractional power {p} of a non-monomial"))),
        }
    }

    /// Exact value at a concrete index.
    pub fn eval_at(&self, n: u64) -> Result<ExternalNumber> {
        let mut acc = ExternalNumber::zero();
        for m in &self.reps {
            let f = index_factor(n, m.npow, &m.base)?;
            let sign = if m.alt && n % 2 == 1 { -Q::one() } else { Q::one() };
            acc = acc.add(&ExternalNumber::monomial(&m.coeff * f * sign, m.eps));
        }
        for m in &self.neutrices {
            let f = index_factor(n, m.npow, &m.base)?;
            acc = acc.add(&ExternalNumber::from_neutrix(m.neutrix.scale(&f, Exponent::zero())));
        }
        Ok(acc)
    }
}

/// `n^r·b^n` as an exact rational.
fn index_factor(n: u64, r: Exponent, b: &Q) -> Result<Q> {
    let nq = ExternalNumber::from_q(Q::from_integer(n.into()));
    if n == 0 && r.is_negative() {
        return Err(Error::EvalDomain("0 raised to a negative power".into()));
    }
    let np = if n == 0 {
        if r.is_zero() {
            Q::one()
        } else {
            Q::zero()
        }
    } else {
        nq.pow(r)?.as_rational().ok_or_else(|| Error::EvalDomain(format!("{n}^{r} is not rational")))?
    };
    Ok(np * num::pow::Pow::pow(b, n as u32))
}

impl fmt::Display for NormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = vec![];
        let cls = |r: Exponent, b: &Q| {
            let mut s = String::new();
            if !r.is_zero() {
                s.push_str(&format!("*n^{}", fmt_exp(r)));
            }
            if !b.is_one() {
                s.push_str(&format!("*({b})^n"));
            }
            s
        };
        for m in &self.reps {
            let c = ExternalNumber::monomial(m.coeff.clone(), m.eps).to_string();
            let alt = if m.alt { "*(-1)^n" } else { "" };
            let tail = format!("{}{alt}", cls(m.npow, &m.base));
            parts.push(match (c.as_str(), tail.strip_prefix('*')) {
                ("1", Some(t)) => t.to_string(),
                ("-1", Some(t)) => format!("-{t}"),
                _ => format!("{c}{tail}"),
            });
        }
        for m in &self.neutrices {
            parts.push(format!("{}{}", m.neutrix, cls(m.npow, &m.base)));
        }
        if parts.is_empty() {
            parts.push("0".into());
        }
        f.write_str(&parts.join(" + "))
    }
}

fn fmt_exp(r: Exponent) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("({r})")
    }
}

/// Asymptotic normal form; equal to `u` for all sufficiently large `n`.
pub fn normalize(u: &SeqTerm) -> Result<NormalForm> {
    use SeqTerm::*;
    Ok(match u {
        Const(a) => NormalForm::constant(a),
        IndexN => NormalForm::monomial(Monomial {
            coeff: Q::one(),
            eps: Exponent::zero(),
            npow: Exponent::one(),
            base: Q::one(),
            alt: false,
        }),
        AltSign => NormalForm::monomial(Monomial {
            coeff: Q::one(),
            eps: Exponent::zero(),
            npow: Exponent::zero(),
            base: Q::one(),
            alt: true,
        }),
        GeomPow(b) => {
            if !b.is_positive() {
                return Err(Error::Unnormalizable(format!("geometric base {b} must be positive")));
            }
            NormalForm::monomial(Monomial {
                coeff: Q::one(),
                eps: Exponent::zero(),
                npow: Exponent::zero(),
                base: b.clone(),
                alt: false,
            })
        }
        Add(a, b) => normalize(a)?.add(&normalize(b)?),
        Mul(a, b) => normalize(a)?.mul(&normalize(b)?),
        Div(a, b) => normalize(a)?.mul(&normalize(b)?.recip()?),
        Pow(a, p) => normalize(a)?.pow(*p)?,
        NeutrixSeq(n, t) => NormalForm::constant(&ExternalNumber::from_neutrix(*n)).mul(&normalize(t)?),
    })
}

/// Exact value at index `n`.
pub fn eval_at(u: &SeqTerm, n: u64) -> Result<ExternalNumber> {
    use SeqTerm::*;
    let domain = |e: Error| match e {
        Error::DivisionByNeutrix => Error::EvalDomain(format!("division by a non-zeroless value at n = {n}")),
        other => other,
    };
    Ok(match u {
        Const(a) => a.clone(),
        IndexN => ExternalNumber::from_int(n as i64),
        AltSign => ExternalNumber::from_int(if n % 2 == 0 { 1 } else { -1 }),
        GeomPow(b) => ExternalNumber::from_q(num::pow::Pow::pow(b, n as u32)),
        Add(a, b) => eval_at(a, n)?.add(&eval_at(b, n)?),
        Mul(a, b) => eval_at(a, n)?.mul(&eval_at(b, n)?),
        Div(a, b) => eval_at(a, n)?.div(&eval_at(b, n)?).map_err(domain)?,
        Pow(a, p) => eval_at(a, n)?.pow(*p).map_err(domain)?,
        NeutrixSeq(m, t) => ExternalNumber::from_neutrix(*m).mul(&eval_at(t, n)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Converges,
    Diverges,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converges => "converges",
            Status::Diverges => "diverges",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitReport {
    pub status: Status,
    /// Present when converging.
    pub limit: Option<ExternalNumber>,
    /// Smallest `N` for which the sequence is `N`-convergent (`ℝ` when diverging).
    pub minimal_neutrix: Neutrix,
    /// Terms are eventually contained in the limit.
    pub strong: bool,
    pub witness: Vec<String>,
}

impl LimitReport {
    fn diverges(witness: Vec<String>) -> Self {
        LimitReport { status: Status::Diverges, limit: None, minimal_neutrix: Neutrix::Full, strong: false, witness }
    }

    pub fn converges(&self) -> bool {
        self.status == Status::Converges
    }
}

fn cls_text(base: &Q, npow: Exponent) -> String {
    match (base.is_one(), npow.is_zero()) {
        (true, true) => "1".into(),
        (true, false) => format!("n^{}", fmt_exp(npow)),
        (false, true) => format!("({base})^n"),
        (false, false) => format!("n^{}*({base})^n", fmt_exp(npow)),
    }
}

/// Limit as `n → ∞` over all naturals.
pub fn n_limit(u: &SeqTerm) -> Result<LimitReport> {
    let nf = normalize(u)?;
    limit_of_normal_form(&nf)
}

pub fn limit_of_normal_form(nf: &NormalForm) -> Result<LimitReport> {
    let mut w = vec![format!("normal form: {nf}")];
    if nf.is_full() {
        w.push("terms are all of R".into());
        return Ok(LimitReport::diverges(w));
    }
    let mut rep = vec![];
    let mut osc = Neutrix::Zero;
    let mut nconst = Neutrix::Zero;
    for m in nf.reps() {
        let cls = cls_text(&m.base, m.npow);
        match (growth(&m.base, m.npow), m.alt) {
            (Growth::Growing, _) => {
                w.push(format!("term with growth {cls} is unbounded"));
                return Ok(LimitReport::diverges(w));
            }
            (Growth::Vanishing, _) => w.push(format!("term with growth {cls} tends to 0")),
            (Growth::Constant, false) => rep.push((m.coeff.clone(), m.eps)),
            (Growth::Constant, true) => {
                let amp = Neutrix::pound_at(m.eps);
                w.push(format!("oscillation of amplitude {} needs neutrix {amp}", ExternalNumber::monomial(m.coeff.abs(), m.eps)));
                osc = osc + amp;
            }
        }
    }
    for m in nf.neutrices() {
        let cls = cls_text(&m.base, m.npow);
        match growth(&m.base, m.npow) {
            Growth::Growing => {
                w.push(format!("neutrix term {}*{cls} is unbounded", m.neutrix));
                return Ok(LimitReport::diverges(w));
            }
            Growth::Vanishing => w.push(format!("neutrix term {}*{cls} shrinks to 0", m.neutrix)),
            Growth::Constant => nconst = nconst + m.neutrix,
        }
    }
    let minimal = osc + nconst;
    let limit = canonicalize(FormalSeries::new(rep), minimal);
    let strong = tail_within(nf, &limit);
    w.push(format!("limit {limit}, minimal neutrix {minimal}"));
    w.push(format!("tail contained in the limit: {strong}"));
    if !minimal.is_zero() && !strong {
        return Err(Error::Inconsistent(format!("limit {limit} has nonzero neutrix but the tail escapes it")));
    }
    Ok(LimitReport { status: Status::Converges, limit: Some(limit), minimal_neutrix: minimal, strong, witness: w })
}

/// Whether `u_n ⊆ target` for every sufficiently large `n`.
pub fn tail_within(nf: &NormalForm, target: &ExternalNumber) -> bool {
    let t = target.neutrix();
    if t.is_full() {
        return true;
    }
    if nf.is_full() {
        return false;
    }
    let mut constant = vec![];
    for m in nf.reps() {
        match growth(&m.base, m.npow) {
            Growth::Growing => return false,
            Growth::Vanishing if t.is_zero() => return false,
            Growth::Vanishing => {}
            Growth::Constant if m.alt => {
                if !t.absorbs(m.eps) {
                    return false;
                }
            }
            Growth::Constant => constant.push((m.coeff.clone(), m.eps)),
        }
    }
    for m in nf.neutrices() {
        let ok = match growth(&m.base, m.npow) {
            Growth::Growing => false,
            Growth::Vanishing => !t.is_zero(),
            Growth::Constant => m.neutrix.is_subset(&t),
        };
        if !ok {
            return false;
        }
    }
    FormalSeries::new(constant).sub(target.rep()).without_absorbed(&t).is_zero()
}

/// `u` is `N`-convergent to `α`.
pub fn n_converges(u: &SeqTerm, alpha: &ExternalNumber, n: Neutrix) -> Result<bool> {
    let r = n_limit(u)?;
    Ok(match &r.limit {
        None => n.is_full(),
        Some(l) => r.minimal_neutrix.is_subset(&n) && alpha.subset(&canonicalize(l.rep().clone(), n)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    /// Uses only the first report.
    Recip,
}

impl ArithOp {
    pub const ALL: [ArithOp; 4] = [ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Recip];

    /// The combined sequence whose limit the prediction describes.
    pub fn combine(self, u: &SeqTerm, v: &SeqTerm) -> SeqTerm {
        match self {
            ArithOp::Add => SeqTerm::add(u.clone(), v.clone()),
            ArithOp::Sub => SeqTerm::sub(u.clone(), v.clone()),
            ArithOp::Mul => SeqTerm::mul(u.clone(), v.clone()),
            ArithOp::Recip => SeqTerm::div(SeqTerm::int(1), u.clone()),
        }
    }
}

/// Predicted limit of a combination from the limits of its parts:
/// sums carry `N + M`, products `K = αM + βN + MN`, reciprocals `N/a²`.
/// `strong` is only asserted where the theorem gives it (nonzero neutrix).
pub fn limit_arith(a: &LimitReport, b: &LimitReport, op: ArithOp) -> Result<LimitReport> {
    let need = |r: &LimitReport| r.limit.clone().ok_or_else(|| Error::HypothesisUnverified("input diverges".into()));
    let alpha = need(a)?;
    let (n, m) = (a.minimal_neutrix, b.minimal_neutrix);
    let (limit, k, how) = match op {
        ArithOp::Add | ArithOp::Sub => {
            let beta = need(b)?;
            let l = if op == ArithOp::Add { alpha.add(&beta) } else { alpha.sub(&beta) };
            (l, n + m, "N + M".to_string())
        }
        ArithOp::Mul => {
            let beta = need(b)?;
            let am = alpha.mul(&ExternalNumber::from_neutrix(m)).neutrix();
            let bn = beta.mul(&ExternalNumber::from_neutrix(n)).neutrix();
            let k = am + bn + n * m;
            let l = alpha.mul(&beta).add(&ExternalNumber::from_neutrix(k));
            (l, k, format!("aM + bN + MN = {am} + {bn} + {}", n * m))
        }
        ArithOp::Recip => {
            let (c, q) = alpha.rep().leading().cloned().ok_or(Error::ZerolessRequired)?;
            let k = n.scale(&(c.recip() * c.recip()), -q * 2);
            let l = alpha.recip()?;
            (l, k, "N/a^2".to_string())
        }
    };
    let k = k + limit.neutrix();
    Ok(LimitReport {
        status: Status::Converges,
        strong: !k.is_zero(),
        witness: vec![format!("{op:?}: neutrix {how} -> {k}"), format!("predicted limit {limit}")],
        limit: Some(limit),
        minimal_neutrix: k,
    })
}

/// Squeeze: from `u →_N α`, `w →_M α` and eventually `u ≤ v ≤ w`, claims
/// `v →_{N+M} α`. When `v` normalizes the claim is checked against its own
/// limit.
pub fn squeeze(u: &SeqTerm, v: &SeqTerm, w: &SeqTerm, alpha: &ExternalNumber, n: Neutrix, m: Neutrix) -> Result<bool> {
    if !n_converges(u, alpha, n)? {
        return Err(Error::HypothesisUnverified(format!("lower sequence is not {n}-convergent to {alpha}")));
    }
    if !n_converges(w, alpha, m)? {
        return Err(Error::HypothesisUnverified(format!("upper sequence is not {m}-convergent to {alpha}")));
    }
    let (nu, nv, nw) = (normalize(u)?, normalize(v), normalize(w)?);
    let nv = nv.map_err(|e| Error::HypothesisUnverified(format!("middle sequence: {e}")))?;
    if !eventually_le(&nu, &nv) || !eventually_le(&nv, &nw) {
        return Err(Error::HypothesisUnverified("eventual ordering u <= v <= w not established".into()));
    }
    let claim = n_converges(v, alpha, n + m)?;
    if !claim {
        return Err(Error::Inconsistent("squeeze conclusion contradicts the direct limit".into()));
    }
    Ok(true)
}

/// A normal form at one parity, as an external number over the extended
/// scale ordered by `(b, r, −q)`.
#[derive(Debug, Clone)]
struct AsymNumber {
    /// `(class, eps) -> coeff`, nonzero
    terms: BTreeMap<(Class, Exponent), Q>,
    neutrix: AsymNeutrix,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum AsymNeutrix {
    Zero,
    At(Class, Neutrix),
    Full,
}

impl AsymNeutrix {
    fn absorbs(&self, cls: &Class, eps: Exponent) -> bool {
        match self {
            AsymNeutrix::Zero => false,
            AsymNeutrix::Full => true,
            AsymNeutrix::At(c, n) => match cls.cmp(c) {
                Ordering::Less => true,
                Ordering::Equal => n.absorbs(eps),
                Ordering::Greater => false,
            },
        }
    }
}

impl AsymNumber {
    fn from_nf(nf: &NormalForm, odd: bool) -> Self {
        let mut terms: BTreeMap<(Class, Exponent), Q> = BTreeMap::new();
        for m in nf.reps() {
            let c = if m.alt && odd { -m.coeff.clone() } else { m.coeff.clone() };
            *terms.entry(((m.base.clone(), m.npow), m.eps)).or_insert_with(Q::zero) += c;
        }
        terms.retain(|_, c| !c.is_zero());
        let neutrix = nf
            .neutrices()
            .iter()
            .map(|m| match m.neutrix {
                Neutrix::Full => AsymNeutrix::Full,
                Neutrix::Zero => AsymNeutrix::Zero,
                n => AsymNeutrix::At((m.base.clone(), m.npow), n),
            })
            .max()
            .unwrap_or(AsymNeutrix::Zero);
        AsymNumber { terms, neutrix }
    }

    /// Terms of `self − other` not absorbed by `n`, largest first.
    fn diff_unabsorbed(&self, other: &Self, n: &AsymNeutrix) -> Vec<((Class, Exponent), Q)> {
        let mut d = self.terms.clone();
        for (k, c) in &other.terms {
            *d.entry(k.clone()).or_insert_with(Q::zero) -= c;
        }
        let mut v: Vec<_> = d.into_iter().filter(|((cls, q), c)| !c.is_zero() && !n.absorbs(cls, *q)).collect();
        v.sort_by(|((c1, q1), _), ((c2, q2), _)| c2.cmp(c1).then(q1.cmp(q2)));
        v
    }

    fn lead_sign(&self) -> i8 {
        let zero = AsymNumber { terms: BTreeMap::new(), neutrix: AsymNeutrix::Zero };
        match self.diff_unabsorbed(&zero, &self.neutrix).first() {
            None => 0,
            Some((_, c)) if c.is_negative() => -1,
            Some(_) => 1,
        }
    }

    fn le(&self, other: &Self) -> bool {
        let joint = self.neutrix.clone().max(other.neutrix.clone());
        let lt = self.diff_unabsorbed(other, &joint).first().is_some_and(|(_, c)| c.is_negative());
        let subset = self.neutrix <= other.neutrix && self.diff_unabsorbed(other, &other.neutrix).is_empty();
        lt || subset
    }
}

/// `u_n ≤ v_n` (in the external sense) for all sufficiently large `n`.
pub fn eventually_le(u: &NormalForm, v: &NormalForm) -> bool {
    [false, true].into_iter().all(|odd| AsymNumber::from_nf(u, odd).le(&AsymNumber::from_nf(v, odd)))
}

/// A precise monomial `k·ε^q` bounding `|u_n|` eventually, or `None` when
/// the tail is unbounded (or the term is outside the fragment).
pub fn eventually_bounded(u: &SeqTerm) -> Option<ExternalNumber> {
    let nf = normalize(u).ok()?;
    if nf.is_full() {
        return None;
    }
    // (exponent, coefficient sum) for exact contributions, plus whether
    // anything strictly smaller is also present
    let mut exact: BTreeMap<Exponent, Q> = BTreeMap::new();
    let mut soft: Vec<Exponent> = vec![];
    let mut extra = false;
    for m in nf.reps() {
        match growth(&m.base, m.npow) {
            Growth::Growing => return None,
            Growth::Vanishing => extra = true,
            Growth::Constant => *exact.entry(m.eps).or_insert_with(Q::zero) += m.coeff.abs(),
        }
    }
    for m in nf.neutrices() {
        match growth(&m.base, m.npow) {
            Growth::Growing => return None,
            Growth::Vanishing => extra = true,
            Growth::Constant => match m.neutrix {
                Neutrix::Mono(Kind::Oslash, q) => soft.push(q),
                Neutrix::Mono(Kind::Pound, q) => soft.push(q - 1),
                _ => extra = true,
            },
        }
    }
    let q_star = exact.keys().chain(soft.iter()).min().copied().unwrap_or_else(Exponent::zero);
    let s = exact.get(&q_star).cloned().unwrap_or_else(Q::zero);
    let more = extra || soft.contains(&q_star) || exact.keys().any(|q| *q != q_star) || soft.iter().any(|q| *q != q_star);
    let k = if more { s.floor() + Q::one() } else { s.ceil().max(Q::one()) };
    Some(ExternalNumber::monomial(k, q_star))
}

/// `u` is `N`-Cauchy: `|u_m − u_n|` eventually below every `ε > N`.
/// Computed from pairwise tail differences and, independently, from the
/// limit; the two must agree.
pub fn is_cauchy(u: &SeqTerm, n: Neutrix) -> Result<bool> {
    let direct = cauchy_direct(u, n)?;
    let via = cauchy_via_limit(u, n)?;
    if direct != via {
        return Err(Error::Inconsistent(format!("Cauchy test disagrees with convergence for N = {n}")));
    }
    Ok(direct)
}

/// Pairwise tail differences: constant parts cancel, vanishing parts go
/// to zero, an oscillation `c·ε^q(−1)^n` leaves differences of size
/// `2|c|ε^q`, and each constant neutrix term survives as itself.
pub fn cauchy_direct(u: &SeqTerm, n: Neutrix) -> Result<bool> {
    let nf = normalize(u)?;
    if n.is_full() {
        return Ok(true);
    }
    if nf.is_full() {
        return Ok(false);
    }
    let mut spread = Neutrix::Zero;
    for m in nf.reps() {
        match growth(&m.base, m.npow) {
            Growth::Growing => return Ok(false),
            Growth::Constant if m.alt => {
                spread = spread + ExternalNumber::monomial(m.coeff.clone() * Q::from_integer(2.into()), m.eps).mul(&ExternalNumber::from_neutrix(Neutrix::POUND)).neutrix();
            }
            _ => {}
        }
    }
    for m in nf.neutrices() {
        match growth(&m.base, m.npow) {
            Growth::Growing => return Ok(false),
            Growth::Constant => spread = spread + m.neutrix,
            Growth::Vanishing => {}
        }
    }
    Ok(spread.is_subset(&n))
}

pub fn cauchy_via_limit(u: &SeqTerm, n: Neutrix) -> Result<bool> {
    let r = n_limit(u)?;
    Ok(match r.status {
        Status::Converges => r.minimal_neutrix.is_subset(&n),
        Status::Diverges => n.is_full(),
    })
}

/// A downward-closed initial segment `C` of the naturals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Segment {
    Finite(u64),
    /// `£ ∩ ℕ`: the cut between limited and unlimited indices.
    LimitedNat,
    /// `⊘·ε^{−q} ∩ ℕ`, `q > 0`.
    HaloTimes(Exponent),
    /// `£·ε^{−q} ∩ ℕ`, `q ≥ 0`.
    GalaxyTimes(Exponent),
    AllNat,
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Segment::Finite(m) => write!(f, "finite:{m}"),
            Segment::LimitedNat => write!(f, "limited"),
            Segment::HaloTimes(q) => write!(f, "halo:{q}"),
            Segment::GalaxyTimes(q) => write!(f, "galaxy:{q}"),
            Segment::AllNat => write!(f, "all"),
        }
    }
}

/// Size of `n^r·b^n` for indices just beyond the cut.
enum CutFactor {
    One,
    Scaled(Neutrix),
    Diverge,
}

fn cut_factor(seg: Segment, base: &Q, npow: Exponent) -> CutFactor {
    match growth(base, npow) {
        Growth::Growing => CutFactor::Diverge,
        Growth::Constant => CutFactor::One,
        Growth::Vanishing if *base < Q::one() => CutFactor::Scaled(match seg {
            Segment::LimitedNat => Neutrix::OSLASH,
            Segment::GalaxyTimes(p) if p.is_zero() => Neutrix::OSLASH,
            _ => Neutrix::Micro,
        }),
        Growth::Vanishing => {
            let depth = -npow;
            CutFactor::Scaled(match seg {
                Segment::HaloTimes(p) => Neutrix::pound_at(p * depth),
                Segment::GalaxyTimes(p) => Neutrix::oslash_at(p * depth),
                _ => Neutrix::OSLASH,
            })
        }
    }
}

/// Limit with respect to an initial segment `C`, with the sequence defined
/// on all of `ℕ`: the limit must contain every term beyond the cut and be
/// approached from within `C`. For a cut at `ε^{−q}` a vanishing factor
/// `n^{−r}` contributes `ε^{qr}£` (halo) or `ε^{qr}⊘` (galaxy); beyond the
/// limited naturals it contributes `⊘`.
pub fn limit_wrt_segment(u: &SeqTerm, c: Segment) -> Result<LimitReport> {
    match c {
        Segment::AllNat => return n_limit(u),
        Segment::Finite(0) => return Err(Error::InvalidArgument("empty segment".into())),
        Segment::Finite(m) => {
            let v = eval_at(u, m)?;
            return Ok(LimitReport {
                status: Status::Converges,
                minimal_neutrix: v.neutrix(),
                witness: vec![format!("finite segment: value at n = {m} is {v}")],
                limit: Some(v),
                strong: true,
            });
        }
        Segment::HaloTimes(p) if !p.is_positive() => {
            return Err(Error::InvalidArgument(format!("halo segment needs a positive exponent, got {p}")))
        }
        Segment::GalaxyTimes(p) if p.is_negative() => {
            return Err(Error::InvalidArgument(format!("galaxy segment needs a nonnegative exponent, got {p}")))
        }
        _ => {}
    }
    let nf = normalize(u)?;
    let mut w = vec![format!("normal form: {nf}"), format!("segment: {c}")];
    if nf.is_full() {
        w.push("terms are all of R".into());
        return Ok(LimitReport::diverges(w));
    }
    let mut rep = vec![];
    let mut parts: Vec<Neutrix> = vec![];
    for m in nf.reps() {
        match (cut_factor(c, &m.base, m.npow), m.alt) {
            (CutFactor::Diverge, _) => {
                w.push(format!("growth {} is unbounded beyond the cut", cls_text(&m.base, m.npow)));
                return Ok(LimitReport::diverges(w));
            }
            (CutFactor::One, false) => rep.push((m.coeff.clone(), m.eps)),
            (CutFactor::One, true) => parts.push(Neutrix::pound_at(m.eps)),
            (CutFactor::Scaled(k), _) => {
                let s = k.scale(&m.coeff, m.eps);
                w.push(format!("{} beyond the cut lies in {s}", cls_text(&m.base, m.npow)));
                parts.push(s);
            }
        }
    }
    for m in nf.neutrices() {
        match cut_factor(c, &m.base, m.npow) {
            CutFactor::Diverge => {
                w.push(format!("neutrix growth {} is unbounded beyond the cut", cls_text(&m.base, m.npow)));
                return Ok(LimitReport::diverges(w));
            }
            CutFactor::One => parts.push(m.neutrix),
            CutFactor::Scaled(k) => parts.push(m.neutrix * k),
        }
    }
    let minimal = parts.iter().fold(Neutrix::Zero, |a, b| a + *b);
    let limit = canonicalize(FormalSeries::new(rep.clone()), minimal);
    let strong = parts.iter().all(|p| p.is_subset(&minimal))
        && FormalSeries::new(rep).sub(limit.rep()).without_absorbed(&minimal).is_zero();
    w.push(format!("limit {limit}, strong: {strong}"));
    Ok(LimitReport { status: Status::Converges, limit: Some(limit), minimal_neutrix: minimal, strong, witness: w })
}
