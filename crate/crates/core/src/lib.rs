//! External numbers on a one-infinitesimal scale.
//!
//! An external number is a rational ε-series representative plus a neutrix
//! (an order-of-magnitude error group). On top of that sit flexible
//! sequences with their limits, flexible recurrences, two applications
//! (Borel–Ritt shadows and slow-curve matching) and a numeric model used as
//! a test oracle.

pub mod apps;
pub mod concretize;
pub mod dsl;
mod error;
pub mod extnum;
pub mod recur;
pub mod scale;
pub mod seq;

pub use concretize::Concretization;
pub use error::{Error, ParseError, Result};
pub use extnum::{ExternalNumber, FormalSeries};
pub use scale::{Exponent, Kind, Neutrix};
pub use seq::{LimitReport, Segment, SeqTerm};

/// Exact rational used for series coefficients.
pub type Q = num::BigRational;
