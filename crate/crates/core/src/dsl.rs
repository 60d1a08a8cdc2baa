//! Text syntax for external numbers, sequences, recurrences and `f(t, y)`.
//!
//! Tokens: decimals and integers, `e` (ε), `w` (ω = ε⁻¹), `o` (⊘), `L` (£),
//! `M` (microhalo), `R` (ℝ), the variables `n`, `u`, `t`, `y`, operators
//! `+ - * / ^` and parentheses. The Unicode symbols `ε ω ⊘ £` are accepted
//! as aliases. Juxtaposition before a letter or `(` multiplies, so
//! `(e^2)o` and `2n` parse. `^` is right associative and binds tighter
//! than unary minus.
//!
//! Subtrees free of variables are folded to a single constant. `x^n` with
//! a constant base becomes `(−1)^n` or `b^n`. Canonical prints satisfy
//! `parse(print(t)) == t`.

use num::{One, Signed, ToPrimitive, Zero};

use crate::apps::FnTerm;
use crate::error::{Error, ParseError};
use crate::extnum::ExternalNumber;
use crate::recur::RecTerm;
use crate::scale::{Exponent, Neutrix};
use crate::seq::SeqTerm;
use crate::Q;

type PResult<T> = std::result::Result<T, ParseError>;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Q),
    Ident(char),
    Op(char),
    LParen,
    RParen,
}

fn perr(position: usize, expected: impl Into<String>) -> ParseError {
    ParseError { position, expected: expected.into() }
}

fn tokenize(text: &str) -> PResult<Vec<(Tok, usize)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = vec![];
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '0'..='9' | '.' => {
                let mut int = String::new();
                let mut frac = String::new();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    int.push(chars[i]);
                    i += 1;
                }
                if i < chars.len() && chars[i] == '.' {
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        frac.push(chars[i]);
                        i += 1;
                    }
                }
                if int.is_empty() && frac.is_empty() {
                    return Err(perr(start, "digit"));
                }
                let digits = format!("{int}{frac}");
                let num: num::BigInt = digits.parse().map_err(|_| perr(start, "number"))?;
                let den = num::pow::Pow::pow(num::BigInt::from(10), frac.len() as u32);
                out.push((Tok::Num(Q::new(num, den)), start));
                continue;
            }
            'e' | 'w' | 'o' | 'L' | 'M' | 'R' | 'n' | 'u' | 't' | 'y' => out.push((Tok::Ident(c), start)),
            'ε' => out.push((Tok::Ident('e'), start)),
            'ω' => out.push((Tok::Ident('w'), start)),
            '⊘' => out.push((Tok::Ident('o'), start)),
            '£' => out.push((Tok::Ident('L'), start)),
            '+' | '-' | '*' | '/' | '^' => out.push((Tok::Op(c), start)),
            '−' => out.push((Tok::Op('-'), start)),
            '(' => out.push((Tok::LParen, start)),
            ')' => out.push((Tok::RParen, start)),
            _ => return Err(perr(start, "number, symbol, operator or parenthesis")),
        }
        i += 1;
    }
    Ok(out)
}

/// Span-annotated syntax tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Spanned {
    pub node: Node,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(Q),
    Sym(char),
    Neg(Box<Spanned>),
    Bin(char, Box<Spanned>, Box<Spanned>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceExpr {
    pub text: String,
    pub root: Spanned,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.len, |(_, p)| *p)
    }

    fn last_end(&self) -> usize {
        self.pos.checked_sub(1).and_then(|i| self.toks.get(i)).map_or(0, |(_, p)| p + 1)
    }

    fn bin(op: char, a: Spanned, b: Spanned) -> Spanned {
        let (start, end) = (a.start, b.end);
        Spanned { node: Node::Bin(op, Box::new(a), Box::new(b)), start, end }
    }

    fn expr(&mut self) -> PResult<Spanned> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let c = *c;
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Parser::bin(c, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> PResult<Spanned> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Op(c @ ('*' | '/'))) => {
                    let c = *c;
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Parser::bin(c, lhs, rhs);
                }
                Some(Tok::Ident(_) | Tok::LParen) => {
                    let rhs = self.power()?;
                    lhs = Parser::bin('*', lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> PResult<Spanned> {
        if let Some(Tok::Op('-')) = self.peek() {
            let start = self.here();
            self.pos += 1;
            let inner = self.unary()?;
            let end = inner.end;
            return Ok(Spanned { node: Node::Neg(Box::new(inner)), start, end });
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Spanned> {
        let base = self.primary()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.exponent()?;
            return Ok(Parser::bin('^', base, exp));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> PResult<Spanned> {
        if let Some(Tok::Op('-')) = self.peek() {
            let start = self.here();
            self.pos += 1;
            let inner = self.exponent()?;
            let end = inner.end;
            return Ok(Spanned { node: Node::Neg(Box::new(inner)), start, end });
        }
        self.power()
    }

    fn primary(&mut self) -> PResult<Spanned> {
        let start = self.here();
        match self.toks.get(self.pos).cloned() {
            Some((Tok::Num(q), _)) => {
                self.pos += 1;
                Ok(Spanned { node: Node::Num(q), start, end: self.last_end() })
            }
            Some((Tok::Ident(c), _)) => {
                self.pos += 1;
                Ok(Spanned { node: Node::Sym(c), start, end: start + 1 })
            }
            Some((Tok::LParen, _)) => {
                self.pos += 1;
                let inner = self.expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(Spanned { node: inner.node, start, end: self.last_end() })
                    }
                    _ => Err(perr(self.here(), "')'")),
                }
            }
            _ => Err(perr(start, "number, symbol or '('")),
        }
    }
}

/// Parse to a span-annotated tree without interpreting symbols.
pub fn parse_source(text: &str) -> PResult<SourceExpr> {
    let toks = tokenize(text)?;
    let len = text.chars().count();
    let mut p = Parser { toks, pos: 0, len };
    if p.toks.is_empty() {
        return Err(perr(0, "expression"));
    }
    let root = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(perr(p.here(), "operator or end of input"));
    }
    Ok(SourceExpr { text: text.to_string(), root })
}

/// Variable-aware term shared by the sequence, recurrence and function
/// languages.
#[derive(Debug, Clone, PartialEq)]
enum Lowered {
    Const(ExternalNumber),
    Var(char),
    AltSign,
    Geom(Q),
    Add(Box<Lowered>, Box<Lowered>),
    Mul(Box<Lowered>, Box<Lowered>),
    Div(Box<Lowered>, Box<Lowered>),
    Pow(Box<Lowered>, Exponent),
    NeutrixMul(Neutrix, Box<Lowered>),
}

fn mentions(s: &Spanned, vars: &[char]) -> bool {
    match &s.node {
        Node::Num(_) => false,
        Node::Sym(c) => vars.contains(c),
        Node::Neg(a) => mentions(a, vars),
        Node::Bin(_, a, b) => mentions(a, vars) || mentions(b, vars),
    }
}

fn constant(s: &Spanned) -> PResult<ExternalNumber> {
    match &s.node {
        Node::Num(q) => Ok(ExternalNumber::from_q(q.clone())),
        Node::Sym(c) => Ok(match c {
            'e' => ExternalNumber::eps_pow(Exponent::one()),
            'w' => ExternalNumber::eps_pow(-Exponent::one()),
            'o' => ExternalNumber::from_neutrix(Neutrix::OSLASH),
            'L' => ExternalNumber::from_neutrix(Neutrix::POUND),
            'M' => ExternalNumber::from_neutrix(Neutrix::Micro),
            'R' => ExternalNumber::from_neutrix(Neutrix::Full),
            _ => return Err(perr(s.start, "one of e w o L M R")),
        }),
        Node::Neg(a) => Ok(constant(a)?.neg()),
        Node::Bin(op, a, b) => {
            if *op == '^' {
                let p = exponent_of(b)?;
                return constant(a)?.pow(p).map_err(|_| perr(b.start, "an exponent the base admits"));
            }
            let (x, y) = (constant(a)?, constant(b)?);
            Ok(match op {
                '+' => x.add(&y),
                '-' => x.sub(&y),
                '*' => x.mul(&y),
                _ => x.div(&y).map_err(|_| perr(b.start, "zeroless divisor"))?,
            })
        }
    }
}

fn exponent_of(s: &Spanned) -> PResult<Exponent> {
    let v = constant(s)?;
    let q = v.as_rational().ok_or_else(|| perr(s.start, "precise rational exponent"))?;
    match (q.numer().to_i64(), q.denom().to_i64()) {
        (Some(a), Some(b)) => Ok(Exponent::new(a, b)),
        _ => Err(perr(s.start, "exponent of moderate size")),
    }
}

fn lower(s: &Spanned, vars: &[char]) -> PResult<Lowered> {
    if !mentions(s, vars) {
        return constant(s).map(Lowered::Const);
    }
    match &s.node {
        Node::Num(_) => unreachable!("constants are folded"),
        Node::Sym(c) => Ok(Lowered::Var(*c)),
        Node::Neg(a) => Ok(Lowered::Mul(Box::new(Lowered::Const(ExternalNumber::from_int(-1))), Box::new(lower(a, vars)?))),
        Node::Bin('^', a, b) => {
            if matches!(b.node, Node::Sym('n')) && vars.contains(&'n') {
                if mentions(a, vars) {
                    return Err(perr(a.start, "constant base for a power of n"));
                }
                let base = constant(a)?.as_rational().ok_or_else(|| perr(a.start, "precise rational base"))?;
                let minus_one = -Q::one();
                return Ok(if base == minus_one {
                    Lowered::AltSign
                } else if base.is_positive() {
                    Lowered::Geom(base)
                } else if base.is_zero() {
                    return Err(perr(a.start, "nonzero base"));
                } else {
                    Lowered::Mul(Box::new(Lowered::AltSign), Box::new(Lowered::Geom(-base)))
                });
            }
            if mentions(b, vars) {
                return Err(perr(b.start, "constant exponent"));
            }
            Ok(Lowered::Pow(Box::new(lower(a, vars)?), exponent_of(b)?))
        }
        Node::Bin(op, a, b) => {
            let (x, y) = (lower(a, vars)?, lower(b, vars)?);
            Ok(match op {
                '+' => Lowered::Add(Box::new(x), Box::new(y)),
                '-' => Lowered::Add(
                    Box::new(x),
                    Box::new(Lowered::Mul(Box::new(Lowered::Const(ExternalNumber::from_int(-1))), Box::new(y))),
                ),
                '*' => match (x, y) {
                    (Lowered::Const(c), other) | (other, Lowered::Const(c))
                        if c.rep().is_zero() && !c.neutrix().is_zero() =>
                    {
                        Lowered::NeutrixMul(c.neutrix(), Box::new(other))
                    }
                    (x, y) => Lowered::Mul(Box::new(x), Box::new(y)),
                },
                _ => Lowered::Div(Box::new(x), Box::new(y)),
            })
        }
    }
}

fn parse_lowered(text: &str, vars: &[char]) -> PResult<Lowered> {
    let src = parse_source(text)?;
    check_symbols(&src.root, vars)?;
    lower(&src.root, vars)
}

fn check_symbols(s: &Spanned, vars: &[char]) -> PResult<()> {
    match &s.node {
        Node::Num(_) => Ok(()),
        Node::Sym(c) if "ewoLMR".contains(*c) || vars.contains(c) => Ok(()),
        Node::Sym(_) => {
            let mut allowed: String = "e w o L M R".into();
            for v in vars {
                allowed.push(' ');
                allowed.push(*v);
            }
            Err(perr(s.start, format!("one of {allowed}")))
        }
        Node::Neg(a) => check_symbols(a, vars),
        Node::Bin(_, a, b) => check_symbols(a, vars).and(check_symbols(b, vars)),
    }
}

pub fn parse_extnum(text: &str) -> std::result::Result<ExternalNumber, Error> {
    match parse_lowered(text, &[])? {
        Lowered::Const(c) => Ok(c),
        _ => unreachable!("no variables allowed"),
    }
}

pub fn parse_seq(text: &str) -> std::result::Result<SeqTerm, Error> {
    Ok(to_seq(parse_lowered(text, &['n'])?))
}

/// Recurrence right-hand side over `n` and the state `u`.
pub fn parse_rec(text: &str) -> std::result::Result<RecTerm, Error> {
    Ok(to_rec(parse_lowered(text, &['n', 'u'])?))
}

/// Vector field `f(t, y)` with precise constants.
pub fn parse_fn(text: &str) -> std::result::Result<FnTerm, Error> {
    let l = parse_lowered(text, &['t', 'y'])?;
    to_fn(l).map_err(|p| Error::Parse(perr(p, "precise constant")))
}

/// Parse a neutrix literal such as `o`, `(e^2)L`, `M`, `0`.
pub fn parse_neutrix(text: &str) -> std::result::Result<Neutrix, Error> {
    let v = parse_extnum(text)?;
    if !v.rep().is_zero() {
        return Err(Error::Parse(perr(0, "a neutrix (no precise part)")));
    }
    Ok(v.neutrix())
}

fn to_seq(l: Lowered) -> SeqTerm {
    let b = |x: Box<Lowered>| Box::new(to_seq(*x));
    match l {
        Lowered::Const(c) => SeqTerm::Const(c),
        Lowered::Var(_) => SeqTerm::IndexN,
        Lowered::AltSign => SeqTerm::AltSign,
        Lowered::Geom(q) => SeqTerm::GeomPow(q),
        Lowered::Add(x, y) => SeqTerm::Add(b(x), b(y)),
        Lowered::Mul(x, y) => SeqTerm::Mul(b(x), b(y)),
        Lowered::Div(x, y) => SeqTerm::Div(b(x), b(y)),
        Lowered::Pow(x, p) => SeqTerm::Pow(b(x), p),
        Lowered::NeutrixMul(n, x) => SeqTerm::NeutrixSeq(n, b(x)),
    }
}

fn to_rec(l: Lowered) -> RecTerm {
    let b = |x: Box<Lowered>| Box::new(to_rec(*x));
    match l {
        Lowered::Const(c) => RecTerm::Const(c),
        Lowered::Var('u') => RecTerm::State,
        Lowered::Var(_) => RecTerm::Index,
        Lowered::AltSign => RecTerm::AltSign,
        Lowered::Geom(q) => RecTerm::GeomPow(q),
        Lowered::Add(x, y) => RecTerm::Add(b(x), b(y)),
        Lowered::Mul(x, y) => RecTerm::Mul(b(x), b(y)),
        Lowered::Div(x, y) => RecTerm::Div(b(x), b(y)),
        Lowered::Pow(x, p) => RecTerm::Pow(b(x), p),
        Lowered::NeutrixMul(n, x) => {
            RecTerm::Mul(Box::new(RecTerm::Const(ExternalNumber::from_neutrix(n))), b(x))
        }
    }
}

/// Position-free failure: the offending constant is imprecise.
fn to_fn(l: Lowered) -> std::result::Result<FnTerm, usize> {
    let b = |x: Box<Lowered>| to_fn(*x).map(Box::new);
    Ok(match l {
        Lowered::Const(c) if c.is_precise() => FnTerm::Const(c),
        Lowered::Const(_) | Lowered::NeutrixMul(..) | Lowered::AltSign | Lowered::Geom(_) => return Err(0),
        Lowered::Var('t') => FnTerm::T,
        Lowered::Var(_) => FnTerm::Y,
        Lowered::Add(x, y) => FnTerm::Add(b(x)?, b(y)?),
        Lowered::Mul(x, y) => FnTerm::Mul(b(x)?, b(y)?),
        Lowered::Div(x, y) => FnTerm::Div(b(x)?, b(y)?),
        Lowered::Pow(x, p) => FnTerm::Pow(b(x)?, p),
    })
}

pub fn print_extnum(a: &ExternalNumber) -> String {
    a.to_string()
}

// Printing precedence: 1 sum, 2 product, 3 power operand.
fn is_atomic_const(s: &str) -> bool {
    s.chars().all(|c| c.is_ascii_digit()) || (s.chars().count() == 1 && "ewoLMR".contains(s))
}

fn wrap(s: String, need: bool) -> String {
    if need {
        format!("({s})")
    } else {
        s
    }
}

fn print_const(c: &ExternalNumber, ctx: u8) -> String {
    let s = c.to_string();
    let need = match ctx {
        0 | 1 => false,
        2 => s.contains(" + ") || s.contains(" - ") || s.starts_with('-'),
        _ => !is_atomic_const(&s),
    };
    wrap(s, need)
}

fn fmt_pow(p: Exponent) -> String {
    if p.is_integer() {
        p.numer().to_string()
    } else {
        format!("({p})")
    }
}

fn print_lowered(l: &Lowered, ctx: u8, var: &dyn Fn(char) -> char) -> String {
    match l {
        Lowered::Const(c) => print_const(c, ctx),
        Lowered::Var(v) => var(*v).to_string(),
        Lowered::AltSign => "(-1)^n".into(),
        Lowered::Geom(q) => {
            let b = q.to_string();
            format!("{}^n", wrap(b.clone(), !is_atomic_const(&b)))
        }
        Lowered::Add(a, b) => wrap(format!("{} + {}", print_lowered(a, 1, var), print_lowered(b, 2, var)), ctx >= 2),
        Lowered::Mul(a, b) => wrap(format!("{}*{}", print_lowered(a, 2, var), print_lowered(b, 3, var)), ctx >= 3),
        Lowered::Div(a, b) => wrap(format!("{}/{}", print_lowered(a, 2, var), print_lowered(b, 3, var)), ctx >= 3),
        Lowered::Pow(a, p) => wrap(format!("{}^{}", print_lowered(a, 4, var), fmt_pow(*p)), ctx >= 4),
        Lowered::NeutrixMul(n, a) => {
            let ns = n.to_string();
            let ns = wrap(ns.clone(), !is_atomic_const(&ns));
            wrap(format!("{ns}*{}", print_lowered(a, 3, var)), ctx >= 3)
        }
    }
}

fn seq_to_lowered(t: &SeqTerm) -> Lowered {
    let b = |x: &SeqTerm| Box::new(seq_to_lowered(x));
    match t {
        SeqTerm::Const(c) => Lowered::Const(c.clone()),
        SeqTerm::IndexN => Lowered::Var('n'),
        SeqTerm::AltSign => Lowered::AltSign,
        SeqTerm::GeomPow(q) => Lowered::Geom(q.clone()),
        SeqTerm::Add(x, y) => Lowered::Add(b(x), b(y)),
        SeqTerm::Mul(x, y) => Lowered::Mul(b(x), b(y)),
        SeqTerm::Div(x, y) => Lowered::Div(b(x), b(y)),
        SeqTerm::Pow(x, p) => Lowered::Pow(b(x), *p),
        SeqTerm::NeutrixSeq(n, x) => Lowered::NeutrixMul(*n, b(x)),
    }
}

fn rec_to_lowered(t: &RecTerm) -> Lowered {
    let b = |x: &RecTerm| Box::new(rec_to_lowered(x));
    match t {
        RecTerm::Const(c) => Lowered::Const(c.clone()),
        RecTerm::Index => Lowered::Var('n'),
        RecTerm::State => Lowered::Var('u'),
        RecTerm::AltSign => Lowered::AltSign,
        RecTerm::GeomPow(q) => Lowered::Geom(q.clone()),
        RecTerm::Add(x, y) => Lowered::Add(b(x), b(y)),
        RecTerm::Mul(x, y) => Lowered::Mul(b(x), b(y)),
        RecTerm::Div(x, y) => Lowered::Div(b(x), b(y)),
        RecTerm::Pow(x, p) => Lowered::Pow(b(x), *p),
    }
}

fn fn_to_lowered(t: &FnTerm) -> Lowered {
    let b = |x: &FnTerm| Box::new(fn_to_lowered(x));
    match t {
        FnTerm::Const(c) => Lowered::Const(c.clone()),
        FnTerm::T => Lowered::Var('t'),
        FnTerm::Y => Lowered::Var('y'),
        FnTerm::Add(x, y) => Lowered::Add(b(x), b(y)),
        FnTerm::Mul(x, y) => Lowered::Mul(b(x), b(y)),
        FnTerm::Div(x, y) => Lowered::Div(b(x), b(y)),
        FnTerm::Pow(x, p) => Lowered::Pow(b(x), *p),
    }
}

pub fn print_seq(t: &SeqTerm) -> String {
    print_lowered(&seq_to_lowered(t), 0, &|c| c)
}

pub fn print_rec(t: &RecTerm) -> String {
    print_lowered(&rec_to_lowered(t), 0, &|c| c)
}

pub fn print_fn(t: &FnTerm) -> String {
    print_lowered(&fn_to_lowered(t), 0, &|c| c)
}
