//! Bounded metric temporal logic over finite timed traces.

mod eval;
mod formula;
mod parse;

use thiserror::Error;

pub use eval::{evaluate, Truth, Verdict};
pub use formula::{required_horizon, Bound, Comparator, MtlFormula};
pub use parse::parse_formula;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MtlError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("bad interval [{a}, {b}]: bounds must satisfy 0 <= a <= b < inf")]
    BadInterval { a: f64, b: f64 },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
}
