//! The ten acceptance criteria. Each prints one line; the test fails if any
//! criterion fails.

mod common;

use common::{q, rng, seq_corpus, Oracle, EPS0S};
use flexnum::apps::{borel_ritt, linear_entry_time, match_simulate, shadow_check, shadow_check_sampled, SlowCurveProblem};
use flexnum::dsl::parse_seq;
use flexnum::extnum::{ge, gt, le, lt};
use flexnum::recur::{classify_stability, oslash_power, sample_paths, Flag, RecTerm, RecurrenceSpec, SamplingOptions};
use flexnum::seq::{
    cauchy_direct, cauchy_via_limit, is_cauchy, limit_arith, n_converges, n_limit, normalize, tail_within, ArithOp,
};
use flexnum::{Concretization, Exponent, ExternalNumber, Neutrix, SeqTerm, Q};
use rand::Rng;

/// Relative tolerance on matching entry times.
const ENTRY_TOL: f64 = 0.05;
/// Relative slack on the affine decay bound (floating point only).
const BOUND_SLACK: f64 = 1e-12;
const CORPUS_SEED: u64 = 2024;

type Outcome = (bool, String);

fn x(s: &str) -> ExternalNumber {
    s.parse().unwrap()
}

fn s(t: &str) -> SeqTerm {
    parse_seq(t).unwrap()
}

fn nx(t: &str) -> Neutrix {
    flexnum::dsl::parse_neutrix(t).unwrap()
}

fn zero() -> ExternalNumber {
    ExternalNumber::zero()
}

fn golden_pairs() -> Vec<(ExternalNumber, ExternalNumber)> {
    vec![(x("1 + e*L"), x("o")), (x("o"), x("L")), (x("L"), x("o")), (x("e"), x("o"))]
}

fn c1() -> Outcome {
    let facts = [
        gt(&x("1 + e*L"), &x("o")),
        ge(&x("o"), &x("L")) && !le(&x("L"), &x("o")),
        le(&x("e"), &x("o")) && ge(&x("e"), &x("o")),
        le(&x("o"), &x("L")),
    ];
    let ok = facts.iter().filter(|f| **f).count();
    (ok == facts.len(), format!("{ok}/{} golden order facts", facts.len()))
}

/// Convergence claims `(u, α, N, expected)` from criteria 2 and 3.
fn claims() -> Vec<(SeqTerm, ExternalNumber, Neutrix, bool)> {
    let ww = SeqTerm::mul(SeqTerm::konst(x("w^2 + w*L")), SeqTerm::konst(x("w^2 + w*L")));
    vec![
        (s("(1/n + o)*(1/n^2 + e*L)"), zero(), nx("e*o"), true),
        (s("(1/n + o)*(1/n^2 + e*L)"), zero(), nx("(e^2)L"), false),
        (s("(1/n + o)*(w^2 + w*L)"), zero(), nx("(w^2)*o"), true),
        (s("(1/n + o)*(w^2 + w*L)"), zero(), nx("w*L"), false),
        (ww.clone(), x("w^4"), nx("w^3*L"), true),
        (ww, x("w^4"), nx("w*L"), false),
        (s("(-1)^n"), zero(), nx("L"), true),
        (s("(-1)^n"), zero(), nx("o"), false),
        (s("(-1)^n"), x("1"), nx("o"), false),
        (s("(-1)^n"), x("-1"), nx("o"), false),
    ]
}

fn c2() -> Outcome {
    let mut notes = vec![];
    let mut ok = true;
    let u = s("(1/n + o)*(1/n^2 + e*L)");
    let nf = normalize(&u).unwrap();
    let expected = normalize(&s("n^-3 + e*L/n + o/n^2 + e*o")).unwrap();
    ok &= nf == expected;
    notes.push(format!("normal form {nf}"));
    let r = n_limit(&u).unwrap();
    ok &= r.minimal_neutrix == nx("e*o") && r.limit.as_ref() == Some(&x("e*o"));

    let v = s("(1/n + o)*(w^2 + w*L)");
    let r = n_limit(&v).unwrap();
    ok &= r.minimal_neutrix == nx("w^2*o");
    notes.push(format!("second limit {}", r.limit.clone().unwrap()));

    let w = SeqTerm::konst(x("w^2 + w*L"));
    let rw = n_limit(&w).unwrap();
    let pred = limit_arith(&rw, &rw, ArithOp::Mul).unwrap();
    ok &= pred.limit.as_ref() == Some(&x("w^4 + w^3*L")) && pred.minimal_neutrix == nx("w^3*L");
    // two representatives of w: a·b − a² = ω³ escapes ω£
    let (a, b) = (x("w^2"), x("w^2 + w"));
    let witness = a.mul(&b).sub(&a.mul(&a));
    let escapes = !witness.subset(&ExternalNumber::from_neutrix(nx("w*L")));
    ok &= witness == x("w^3") && escapes;
    notes.push(format!("w*w -> {} (witness ab - a^2 = {witness})", pred.limit.unwrap()));

    for (t, alpha, n, want) in claims().into_iter().take(6) {
        ok &= n_converges(&t, &alpha, n).unwrap() == want;
    }
    (ok, notes.join("; "))
}

fn c3() -> Outcome {
    let alt = s("(-1)^n");
    let r = n_limit(&alt).unwrap();
    let pound = n_converges(&alt, &zero(), Neutrix::POUND).unwrap();
    let oslash = [zero(), x("1"), x("-1"), x("1/2")].iter().any(|a| n_converges(&alt, a, Neutrix::OSLASH).unwrap());
    let ok = pound && !oslash && r.minimal_neutrix == Neutrix::POUND && !is_cauchy(&alt, Neutrix::OSLASH).unwrap();
    (ok, format!("L-convergent {pound}, o-convergent {oslash}, minimal {}", r.minimal_neutrix))
}

/// Converging corpus terms with a nonzero limit neutrix.
fn strong_corpus() -> Vec<(SeqTerm, ExternalNumber, Neutrix)> {
    seq_corpus(CORPUS_SEED, 3000)
        .into_iter()
        .filter_map(|u| {
            let r = n_limit(&u).ok()?;
            let a = r.limit?;
            (!r.minimal_neutrix.is_zero()).then_some((u, a, r.minimal_neutrix))
        })
        .take(250)
        .collect()
}

fn c4() -> Outcome {
    let corpus = strong_corpus();
    let mut bad = 0;
    for (u, a, _) in &corpus {
        let nf = normalize(u).unwrap();
        if !(n_limit(u).unwrap().strong && tail_within(&nf, a)) {
            bad += 1;
        }
    }
    let counter = SeqTerm::neutrix_seq(Neutrix::OSLASH, s("1/n"));
    let r = n_limit(&counter).unwrap();
    let counter_ok = r.converges() && !r.strong && r.minimal_neutrix.is_zero();
    let ok = corpus.len() >= 200 && bad == 0 && counter_ok;
    (ok, format!("{} terms, {bad} not strong; o*(1/n) converges without being strong: {counter_ok}", corpus.len()))
}

fn cauchy_neutrices() -> [Neutrix; 5] {
    [Neutrix::Zero, Neutrix::Micro, nx("e*L"), Neutrix::OSLASH, Neutrix::POUND]
}

fn c5() -> Outcome {
    let corpus = seq_corpus(CORPUS_SEED + 1, 400);
    let (mut checked, mut bad, mut yes) = (0, 0, 0);
    for u in &corpus {
        for n in cauchy_neutrices() {
            let d = cauchy_direct(u, n).unwrap();
            let v = cauchy_via_limit(u, n).unwrap();
            checked += 1;
            yes += d as usize;
            bad += (d != v) as usize;
        }
    }
    (bad == 0, format!("{checked} decisions ({yes} Cauchy), {bad} disagreements"))
}

struct ArithCase {
    combined: SeqTerm,
    predicted: flexnum::LimitReport,
}

fn arith_cases() -> (Vec<ArithCase>, usize) {
    let conv: Vec<_> = seq_corpus(CORPUS_SEED + 2, 600)
        .into_iter()
        .filter_map(|u| {
            let r = n_limit(&u).ok()?;
            r.converges().then_some((u, r))
        })
        .collect();
    let mut r = rng(CORPUS_SEED + 3);
    let mut out = vec![];
    let mut pairs = 0;
    while pairs < 600 {
        let (u, ru) = &conv[r.random_range(0..conv.len())];
        let (v, rv) = &conv[r.random_range(0..conv.len())];
        pairs += 1;
        for op in ArithOp::ALL {
            let Ok(predicted) = limit_arith(ru, rv, op) else { continue };
            out.push(ArithCase { combined: op.combine(u, v), predicted });
        }
    }
    (out, pairs)
}

fn c6() -> Outcome {
    let (cases, pairs) = arith_cases();
    let (mut checked, mut exact, mut unsound) = (0, 0, vec![]);
    for c in &cases {
        let Ok(actual) = n_limit(&c.combined) else { continue };
        let (Some(p), Some(a)) = (&c.predicted.limit, &actual.limit) else {
            unsound.push(format!("{} diverges", c.combined));
            continue;
        };
        checked += 1;
        let sound = n_converges(&c.combined, p, c.predicted.minimal_neutrix).unwrap() && a.subset(p);
        if !sound {
            unsound.push(format!("{}: predicted {p}, actual {a}", c.combined));
        }
        if a == p && actual.minimal_neutrix == c.predicted.minimal_neutrix {
            exact += 1;
        }
    }
    let ok = pairs >= 500 && checked >= 500 && unsound.is_empty();
    let mut line = format!("{pairs} pairs, {checked} combinations, {exact} exact, {} unsound", unsound.len());
    if let Some(u) = unsound.first() {
        line.push_str(&format!(" (first: {u})"));
    }
    (ok, line)
}

fn c7() -> Outcome {
    let mut notes = vec![];
    let mut ok = true;
    for eps0 in EPS0S {
        let o = Oracle::new(eps0);
        let mut r = rng(CORPUS_SEED + 7);
        let (mut decided, mut disagree) = (0usize, vec![]);
        let mut record = |what: String, sym: bool, num: bool| {
            decided += 1;
            if sym != num {
                disagree.push(what);
            }
        };
        // order facts
        for (a, b) in golden_pairs() {
            if let Some(num) = o.order(&a, &b, &mut r) {
                let sym = [lt(&a, &b), gt(&a, &b), le(&a, &b), ge(&a, &b)];
                for k in 0..4 {
                    record(format!("order {a} vs {b}"), sym[k], num[k]);
                }
            }
        }
        // convergence claims of criteria 2, 3 and the soundness claims of 6
        let mut conv: Vec<(SeqTerm, ExternalNumber, Neutrix, ExternalNumber)> = claims()
            .into_iter()
            .map(|(u, a, n, _)| {
                let rep = n_limit(&u).unwrap();
                let gap = rep.limit.map(|l| a.sub(&l)).unwrap_or_else(|| ExternalNumber::from_neutrix(Neutrix::Full));
                (u, a, n, gap)
            })
            .collect();
        for c in arith_cases().0.into_iter().step_by(3) {
            let Ok(actual) = n_limit(&c.combined) else { continue };
            let (Some(p), Some(l)) = (c.predicted.limit, actual.limit) else { continue };
            let gap = p.sub(&l).add(&ExternalNumber::from_neutrix(actual.minimal_neutrix));
            conv.push((c.combined, p, c.predicted.minimal_neutrix, gap));
        }
        for (u, a, n, gap) in &conv {
            if gap.neutrix().is_full() || o.separated(o.magnitude(gap), *n, u) {
                if let Some(num) = o.converges(u, a, *n, &mut r) {
                    record(format!("{u} -> {a} wrt {n}"), n_converges(u, a, *n).unwrap(), num);
                }
            }
        }
        // strong limits: sampled tails inside the limit interval
        for (u, a, m) in strong_corpus() {
            if matches!(m, Neutrix::Micro) {
                continue;
            }
            let Some((d, err)) = o.distance(&u, &ExternalNumber::precise(a.rep().clone()), &mut r) else { continue };
            if o.radius(m) < 1e3 * err {
                continue;
            }
            record(format!("{u} strong"), true, d <= o.threshold_for(m, &u));
        }
        // Cauchy decisions
        for u in seq_corpus(CORPUS_SEED + 1, 400) {
            let rep = n_limit(&u).unwrap();
            let spread = if rep.converges() { o.radius(rep.minimal_neutrix) } else { f64::INFINITY };
            for n in cauchy_neutrices() {
                if o.separated(spread, n, &u) {
                    if let Some(num) = o.cauchy(&u, n, &mut r) {
                        record(format!("{u} Cauchy wrt {n}"), is_cauchy(&u, n).unwrap(), num);
                    }
                }
            }
        }
        ok &= disagree.is_empty() && decided > 1000;
        let mut note = format!("eps0={eps0:e}: {decided} decisions, {} disagreements", disagree.len());
        if let Some(d) = disagree.first() {
            note.push_str(&format!(" (first: {d})"));
        }
        notes.push(note);
    }
    (ok, notes.join("; "))
}

fn c8() -> Outcome {
    let mut r = rng(CORPUS_SEED + 8);
    let conc = Concretization::new(1e-3, Exponent::new(1, 2), Exponent::from_integer(16), CORPUS_SEED).unwrap();
    let mut bad = vec![];
    for case in 0..100 {
        let k = r.random_range(1..=12usize);
        let coeffs: Vec<Q> = (0..=k + 1).map(|_| q(r.random_range(-20..=20), r.random_range(1..=6))).collect();
        let b = borel_ritt(&coeffs, k).unwrap().b;
        let micro = b.add(&ExternalNumber::from_neutrix(Neutrix::Micro)).add(&ExternalNumber::eps_pow(40));
        for n in 0..k {
            let pass = shadow_check(&b, &coeffs, n).unwrap()
                && shadow_check(&micro, &coeffs, n).unwrap()
                && shadow_check_sampled(&b, &coeffs, n, &conc, &mut r).unwrap();
            if !pass {
                bad.push(format!("case {case} level {n}"));
            }
            let bumped = b.add(&ExternalNumber::eps_pow(n as i64 + 1));
            let first_fail = (0..k).find(|&m| !shadow_check(&bumped, &coeffs, m).unwrap());
            if first_fail != Some(n) {
                bad.push(format!("case {case}: perturbation at {n} first fails at {first_fail:?}"));
            }
        }
    }
    (bad.is_empty(), format!("100 prefixes, {} failures{}", bad.len(), bad.first().map(|b| format!(" (first: {b})")).unwrap_or_default()))
}

fn c9() -> Outcome {
    let mut ok = true;
    let mut notes = vec![];
    for eps0 in [1e-3, 1e-4, 1e-5] {
        let p = SlowCurveProblem {
            f: flexnum::dsl::parse_fn("-y").unwrap(),
            eps0,
            y0: 1.0,
            t0: 0.0,
            t_max: 1.0,
            dt: None,
        };
        let m = match_simulate(&p, &Concretization::with_eps0(eps0).unwrap()).unwrap();
        let (Some(th), Some(tt)) = (m.t_enter_halo, m.t_enter_eps_tube) else {
            ok = false;
            notes.push(format!("eps0={eps0:e}: no entry"));
            continue;
        };
        let eh = linear_entry_time(eps0, 1.0, m.halo_radius);
        let et = linear_entry_time(eps0, 1.0, m.tube_radius);
        let (rh, rt) = ((th - eh).abs() / eh, (tt - et).abs() / et);
        ok &= rh <= ENTRY_TOL && rt <= ENTRY_TOL && m.contained;
        notes.push(format!("eps0={eps0:e}: halo {th:.4e} ({rh:.1e}), tube {tt:.4e} ({rt:.1e})"));
    }
    (ok, notes.join("; "))
}

fn c10() -> Outcome {
    let conc = Concretization::with_eps0(1e-3).unwrap().with_seed(CORPUS_SEED);
    let alpha = x("1/2 + o");
    let n = nx("e*L");
    let spec = RecurrenceSpec::new(RecTerm::affine(alpha, n), x("1"), 100);
    let v = classify_stability(&spec, &SeqTerm::int(0), n, &conc, SamplingOptions::default()).unwrap();
    let cert = v.certificate.clone().unwrap();
    let proven = [&v.stable, &v.asymptotically_stable, &v.strongly_asymptotically_stable].iter().all(|e| e.flag == Flag::Proven);
    let paths = sample_paths(&spec, &conc, 10_000, CORPUS_SEED).unwrap();
    let violations = paths
        .iter()
        .filter(|p| p.values.iter().enumerate().any(|(k, t)| t.abs() > cert.bound(p.values[0], k as u32) * (1.0 + BOUND_SLACK)))
        .count();

    let drain = RecurrenceSpec::drain(2, 400);
    let dv = classify_stability(&drain, &RecurrenceSpec::drain_solution(2), Neutrix::OSLASH, &conc, SamplingOptions { samples: 1000 }).unwrap();
    let drain_ok = dv.stable.flag != Flag::Falsified && dv.asymptotically_stable.flag == Flag::Falsified;

    let mut r = conc.rng(99);
    let th = conc.infinitesimal_threshold();
    let mut pow_bad = 0;
    for _ in 0..10_000 {
        let mut p = 1.0;
        for k in 1..=50u32 {
            p *= r.random_range(-th..=th);
            if !oslash_power(k).unwrap().contains(p, &conc) {
                pow_bad += 1;
            }
        }
    }
    let ok = violations == 0 && proven && drain_ok && pow_bad == 0;
    (
        ok,
        format!(
            "affine: {violations}/10000 paths break the bound, verdict {}/{}/{}; drain: stable {}, asymptotic {}; o^n: {pow_bad} misses",
            v.stable.flag, v.asymptotically_stable.flag, v.strongly_asymptotically_stable.flag, dv.stable.flag, dv.asymptotically_stable.flag
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("order facts", c1),
        ("limit examples", c2),
        ("alternating sign", c3),
        ("strong convergence", c4),
        ("Cauchy routes", c5),
        ("limit arithmetic", c6),
        ("oracle consistency", c7),
        ("Borel-Ritt", c8),
        ("matching", c9),
        ("recurrence stability", c10),
    ];
    let mut failed = vec![];
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (ok, detail) = f();
        println!("criterion {:>2} {:<22} {}  {detail}", i + 1, name, if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
