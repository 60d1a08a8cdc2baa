//! Benchmark inputs shared by the criterion suites.

use flexnum::apps::SlowCurveProblem;
use flexnum::recur::{RecTerm, RecurrenceSpec};
use flexnum::{dsl, ExternalNumber, Neutrix, SeqTerm};

pub const EXTNUMS: [&str; 4] = ["1 + e + o", "w^2 + w*L", "3*e^-1 - 2 + 5*e^2 + (e^3)o", "1/2 + e^(3/2) + M"];

pub const SEQUENCES: [&str; 4] = [
    "(1/n + o)*(1/n^2 + e*L)",
    "(1/n + o)*(w^2 + w*L)",
    "(-1)^n*e + 3/n^(1/2) - (1/2)^n",
    "(2 + e/n)*(1 - e*(-1)^n/n^2) + o/n",
];

pub fn extnums() -> Vec<ExternalNumber> {
    EXTNUMS.iter().map(|s| dsl::parse_extnum(s).unwrap()).collect()
}

pub fn sequences() -> Vec<SeqTerm> {
    SEQUENCES.iter().map(|s| dsl::parse_seq(s).unwrap()).collect()
}

pub fn affine(horizon: usize) -> RecurrenceSpec {
    let alpha = dsl::parse_extnum("1/2 + o").unwrap();
    RecurrenceSpec::new(RecTerm::affine(alpha, Neutrix::pound_at(1)), ExternalNumber::one(), horizon)
}

pub fn decay(eps0: f64) -> SlowCurveProblem {
    SlowCurveProblem { f: dsl::parse_fn("-y").unwrap(), eps0, y0: 1.0, t0: 0.0, t_max: 1.0, dt: None }
}
