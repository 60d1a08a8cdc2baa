use std::io::{self, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flexnum::apps::{self, Region, SlowCurveProblem};
use flexnum::recur::{self, Evidence, Flag, RecurrenceSpec, SamplingOptions};
use flexnum::{dsl, seq, Concretization, Error, Exponent, LimitReport, Segment, Q};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "flexnum", version, about = "External numbers, flexible sequences and their limits")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Numeric value of ε used by the concretization.
    #[arg(long, global = true, env = "FLEX_EPS0", default_value_t = 1e-3)]
    eps0: f64,
    /// Buffer exponent between ⊘ and £.
    #[arg(long, global = true, env = "FLEX_DELTA", default_value = "1/2")]
    delta: Exponent,
    /// Exponent of the microhalo radius.
    #[arg(long, global = true, env = "FLEX_MICRO_EXP", default_value = "8")]
    micro_exp: Exponent,
    #[arg(long, global = true, env = "FLEX_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Canonical form of an external number, or of a sequence term at an index.
    Eval {
        #[arg(allow_hyphen_values = true)]
        expr: String,
        /// Evaluate a sequence in `n` at this index.
        #[arg(long)]
        at: Option<u64>,
    },
    /// Limit of a sequence in `n`.
    Limit {
        #[arg(allow_hyphen_values = true)]
        expr: String,
        /// all | limited | finite:M | halo:Q | galaxy:Q
        #[arg(long, default_value = "all", value_parser = parse_segment)]
        wrt: Segment,
    },
    /// Whether a sequence is N-Cauchy.
    Cauchy {
        #[arg(allow_hyphen_values = true)]
        expr: String,
        #[arg(long)]
        neutrix: String,
    },
    /// Stability of a solution of a flexible recurrence `u_{n+1} = f(n, u_n)`.
    Recur {
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        #[arg(long, allow_hyphen_values = true)]
        u0: String,
        #[arg(long)]
        neutrix: String,
        /// Solution whose stability is classified.
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        reference: String,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 200)]
        horizon: usize,
        /// Index of `u0`.
        #[arg(long, default_value_t = 0)]
        start: u64,
    },
    /// A number realizing a given ε-shadow expansion prefix.
    BorelRitt {
        /// Comma-separated rational coefficients a_0, a_1, ...
        #[arg(long, allow_hyphen_values = true)]
        coeffs: String,
        #[arg(long)]
        order: usize,
        /// Run the shadow check at every level, symbolically and sampled.
        #[arg(long)]
        check_all: bool,
    },
    /// Slow-curve matching for `ε y' = f(t, y)`.
    Match {
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, allow_hyphen_values = true)]
        y0: f64,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long)]
        tmax: f64,
        /// Step size, or `auto` for ε/20.
        #[arg(long, default_value = "auto")]
        dt: String,
    },
}

fn parse_segment(s: &str) -> Result<Segment, String> {
    let exp = |v: &str| v.parse::<Exponent>().map_err(|e| format!("bad exponent {v:?}: {e}"));
    match s.split_once(':') {
        None if s == "all" => Ok(Segment::AllNat),
        None if s == "limited" => Ok(Segment::LimitedNat),
        Some(("finite", m)) => m.parse().map(Segment::Finite).map_err(|e| format!("bad index {m:?}: {e}")),
        Some(("halo", q)) => exp(q).map(Segment::HaloTimes),
        Some(("galaxy", q)) => exp(q).map(Segment::GalaxyTimes),
        _ => Err(format!("unknown segment {s:?}")),
    }
}

/// What a command printed and whether its claim holds.
struct Report {
    holds: bool,
    json: Value,
    text: String,
    csv: Vec<Vec<String>>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(r) => match emit(&r, cli.global.format) {
            Ok(()) => ExitCode::from(if r.holds { 0 } else { 1 }),
            Err(e) if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) => {
                ExitCode::from(if r.holds { 0 } else { 1 })
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn emit(r: &Report, format: Format) -> Result<(), Box<dyn std::error::Error>> {
    match format {
        Format::Text => writeln!(io::stdout(), "{}", r.text)?,
        Format::Json => writeln!(io::stdout(), "{}", serde_json::to_string_pretty(&r.json)?)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(io::stdout());
            for row in &r.csv {
                w.write_record(row).map_err(io::Error::from)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn concretization(g: &Global) -> Result<Concretization, Error> {
    Concretization::new(g.eps0, g.delta, g.micro_exp, g.seed)
}

fn header(cells: &[&str]) -> Vec<String> {
    cells.iter().map(|c| c.to_string()).collect()
}

fn row<const K: usize>(cells: [&dyn ToString; K]) -> Vec<String> {
    cells.iter().map(|c| c.to_string()).collect()
}

fn run(cli: &Cli) -> Result<Report, Error> {
    let conc = concretization(&cli.global)?;
    match &cli.cmd {
        Cmd::Eval { expr, at } => eval(expr, *at, &conc),
        Cmd::Limit { expr, wrt } => limit(expr, *wrt),
        Cmd::Cauchy { expr, neutrix } => {
            let u = dsl::parse_seq(expr)?;
            let n = dsl::parse_neutrix(neutrix)?;
            let c = seq::is_cauchy(&u, n)?;
            Ok(Report {
                holds: c,
                json: json!({ "sequence": dsl::print_seq(&u), "neutrix": n.to_string(), "cauchy": c }),
                text: format!("{} is {}{n}-Cauchy", dsl::print_seq(&u), if c { "" } else { "not " }),
                csv: vec![header(&["neutrix", "cauchy"]), row([&n, &c])],
            })
        }
        Cmd::Recur { f, u0, neutrix, reference, samples, horizon, start } => {
            let spec = RecurrenceSpec::new(dsl::parse_rec(f)?, dsl::parse_extnum(u0)?, *horizon).with_start(*start);
            let reference = dsl::parse_seq(reference)?;
            let n = dsl::parse_neutrix(neutrix)?;
            recur_report(&spec, &reference, n, &conc, *samples)
        }
        Cmd::BorelRitt { coeffs, order, check_all } => borel_ritt(coeffs, *order, *check_all, &conc),
        Cmd::Match { f, eps, y0, t0, tmax, dt } => {
            let dt = match dt.as_str() {
                "auto" => None,
                v => Some(v.parse::<f64>().map_err(|e| Error::InvalidArgument(format!("dt {v:?}: {e}")))?),
            };
            let p = SlowCurveProblem { f: dsl::parse_fn(f)?, eps0: *eps, y0: *y0, t0: *t0, t_max: *tmax, dt };
            let conc = Concretization::new(*eps, cli.global.delta, cli.global.micro_exp, cli.global.seed)?;
            matching(&p, &conc)
        }
    }
}

fn eval(expr: &str, at: Option<u64>, conc: &Concretization) -> Result<Report, Error> {
    let value = match at {
        Some(n) => seq::eval_at(&dsl::parse_seq(expr)?, n)?,
        None => dsl::parse_extnum(expr)?,
    };
    let shown = dsl::print_extnum(&value);
    let interval = (!value.neutrix().is_full()).then(|| conc.interval(&value)).transpose()?;
    let mut text = shown.clone();
    if let Some((lo, hi)) = interval {
        text.push_str(&format!("\n[{lo:e}, {hi:e}] at eps0 = {:e}", conc.eps0()));
    }
    let (lo, hi) = interval.map_or((String::new(), String::new()), |(l, h)| (l.to_string(), h.to_string()));
    Ok(Report {
        holds: true,
        json: json!({
            "value": shown,
            "neutrix": value.neutrix().to_string(),
            "interval": interval.map(|(l, h)| vec![l, h]),
            "eps0": conc.eps0(),
        }),
        text,
        csv: vec![header(&["value", "neutrix", "lo", "hi"]), row([&shown, &value.neutrix(), &lo, &hi])],
    })
}

fn limit_json(r: &LimitReport) -> Value {
    json!({
        "status": r.status.to_string(),
        "limit": r.limit.as_ref().map(dsl::print_extnum),
        "minimal_neutrix": r.minimal_neutrix.to_string(),
        "strong": r.strong,
        "witness": r.witness,
    })
}

fn limit(expr: &str, wrt: Segment) -> Result<Report, Error> {
    let u = dsl::parse_seq(expr)?;
    let r = seq::limit_wrt_segment(&u, wrt)?;
    let lim = r.limit.as_ref().map(dsl::print_extnum).unwrap_or_default();
    let mut text = match &r.limit {
        Some(l) => format!("{} -> {} (minimal neutrix {}, {})", dsl::print_seq(&u), dsl::print_extnum(l), r.minimal_neutrix, if r.strong { "strong" } else { "not strong" }),
        None => format!("{} diverges", dsl::print_seq(&u)),
    };
    for w in &r.witness {
        text.push_str(&format!("\n  {w}"));
    }
    let mut json = limit_json(&r);
    json["sequence"] = json!(dsl::print_seq(&u));
    json["segment"] = json!(wrt.to_string());
    Ok(Report {
        holds: r.converges(),
        json,
        text,
        csv: vec![
            header(&["status", "limit", "minimal_neutrix", "strong"]),
            row([&r.status, &lim, &r.minimal_neutrix, &r.strong]),
        ],
    })
}

fn evidence_json(e: &Evidence) -> Value {
    json!({ "flag": e.flag.to_string(), "detail": e.detail, "counterexample": e.counterexample })
}

fn recur_report(spec: &RecurrenceSpec, reference: &flexnum::SeqTerm, n: flexnum::Neutrix, conc: &Concretization, samples: usize) -> Result<Report, Error> {
    let v = recur::classify_stability(spec, reference, n, conc, SamplingOptions { samples })?;
    let flags = [("stable", &v.stable), ("asymptotically_stable", &v.asymptotically_stable), ("strongly_asymptotically_stable", &v.strongly_asymptotically_stable)];
    let holds = flags.iter().all(|(_, e)| e.flag != Flag::Falsified);
    let mut text = format!("neutrix {} over {} steps, {} sampled paths", v.neutrix, v.horizon, v.paths);
    for (name, e) in flags {
        text.push_str(&format!("\n{name}: {} ({})", e.flag, e.detail));
    }
    let cert = v.certificate.as_ref().map(|c| {
        json!({ "q": c.q, "c": c.c, "alpha": dsl::print_extnum(&c.alpha), "limit_neutrix": c.limit_neutrix.to_string() })
    });
    let mut csv = vec![header(&["property", "flag", "detail"])];
    csv.extend(flags.iter().map(|(name, e)| row([name, &e.flag, &e.detail])));
    Ok(Report {
        holds,
        json: json!({
            "f": dsl::print_rec(&spec.f),
            "u0": dsl::print_extnum(&spec.u0),
            "neutrix": v.neutrix.to_string(),
            "paths": v.paths,
            "horizon": v.horizon,
            "stable": evidence_json(&v.stable),
            "asymptotically_stable": evidence_json(&v.asymptotically_stable),
            "strongly_asymptotically_stable": evidence_json(&v.strongly_asymptotically_stable),
            "certificate": cert,
        }),
        text,
        csv,
    })
}

fn borel_ritt(coeffs: &str, order: usize, check_all: bool, conc: &Concretization) -> Result<Report, Error> {
    let coeffs: Vec<Q> = coeffs
        .split(',')
        .map(|c| c.trim().parse::<Q>().map_err(|e| Error::InvalidArgument(format!("coefficient {c:?}: {e}"))))
        .collect::<Result<_, _>>()?;
    let br = apps::borel_ritt(&coeffs, order)?;
    let mut levels = vec![];
    if check_all {
        // the sampled check needs a microhalo deeper than every level
        let deep = conc.micro_exp().max(Exponent::from(order as i64 + 4));
        let sconc = conc.with_micro_exp(deep)?;
        let mut rng = sconc.rng(0);
        for n in 0..order.min(coeffs.len().saturating_sub(1)) {
            let sym = apps::shadow_check(&br.b, &coeffs, n)?;
            let num = apps::shadow_check_sampled(&br.b, &coeffs, n, &sconc, &mut rng)?;
            levels.push((n, sym, num));
        }
    }
    let holds = levels.iter().all(|(_, s, n)| *s && *n);
    let b = dsl::print_extnum(&br.b);
    let mut text = format!("b = {b}\nCauchy on {} wrt {} ({} pairs)", br.certificate.segment, br.certificate.neutrix, br.certificate.pairs_checked);
    for (n, s, m) in &levels {
        text.push_str(&format!("\nlevel {n}: symbolic {}, sampled {}", pass(*s), pass(*m)));
    }
    let mut csv = vec![header(&["level", "symbolic", "sampled"])];
    csv.extend(levels.iter().map(|(n, s, m)| row([n, s, m])));
    Ok(Report {
        holds,
        json: json!({
            "b": b,
            "order": order,
            "certificate": {
                "segment": br.certificate.segment.to_string(),
                "neutrix": br.certificate.neutrix.to_string(),
                "pairs_checked": br.certificate.pairs_checked,
            },
            "levels": levels.iter().map(|(n, s, m)| json!({ "level": n, "symbolic": s, "sampled": m })).collect::<Vec<_>>(),
        }),
        text,
        csv,
    })
}

fn pass(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "fail"
    }
}

fn region(r: Region) -> &'static str {
    match r {
        Region::Fast => "fast",
        Region::Halo => "halo",
        Region::EpsTube => "eps_tube",
    }
}

fn matching(p: &SlowCurveProblem, conc: &Concretization) -> Result<Report, Error> {
    let m = apps::match_simulate(p, conc)?;
    let fmt_t = |t: Option<f64>| t.map_or("never".to_string(), |t| format!("{t:.6e}"));
    let text = format!(
        "halo (radius {:.3e}) entered at t = {}\neps-tube (radius {:.3e}) entered at t = {}\n{} steps of dt = {:.3e}; contained: {}{}",
        m.halo_radius,
        fmt_t(m.t_enter_halo),
        m.tube_radius,
        fmt_t(m.t_enter_eps_tube),
        m.steps,
        m.dt,
        m.contained,
        m.singular_t.map(|t| format!("; singular point near t = {t:.6e}")).unwrap_or_default(),
    );
    let mut csv = vec![header(&["t", "y", "region"])];
    csv.extend(m.trajectory.iter().map(|pt| row([&pt.t, &pt.y, &region(pt.region)])));
    Ok(Report {
        holds: m.contained,
        json: json!({
            "t_enter_halo": m.t_enter_halo,
            "t_enter_eps_tube": m.t_enter_eps_tube,
            "halo_radius": m.halo_radius,
            "tube_radius": m.tube_radius,
            "dt": m.dt,
            "steps": m.steps,
            "singular_t": m.singular_t,
            "contained": m.contained,
            "trajectory": m.trajectory.iter().map(|pt| json!({ "t": pt.t, "y": pt.y, "slow": pt.slow, "region": region(pt.region) })).collect::<Vec<_>>(),
        }),
        text,
        csv,
    })
}
