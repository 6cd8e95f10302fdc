//! Reverse-mode automatic differentiation over `f64` scalars.
//!
//! [`Tape`] records a dynamic graph; [`Var`] is the taped scalar. Code that
//! must run both with and without gradients is written against [`Real`].

mod fdcheck;
mod real;
mod tape;

pub use fdcheck::{finite_difference_check, FdReport};
pub use real::{norm, sum, Real};
pub use tape::{Gradients, Tape, Var};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("output variable was not recorded on this tape")]
    ForeignVariable,
    #[error("non-finite value{}", .coordinate.map(|c| format!(" at coordinate {c}")).unwrap_or_default())]
    NonFinite { coordinate: Option<usize> },
}

/// `min(x, 0)` with a leaky derivative: 1 where `x < 0`, `alpha` elsewhere.
pub fn leaky_min_zero<T: Real>(x: T, alpha: f64) -> T {
    x.leaky_min_zero(alpha)
}

#[cfg(test)]
mod tests;
