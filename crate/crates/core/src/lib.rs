//! Numerical toolkit for deciding and witnessing k-divisibility of quantum
//! dynamical maps through ancilla-assisted channel discrimination.
//!
//! Composite spaces are ordered ancilla ⊗ system throughout; the basis index
//! of `|a⟩ ⊗ |s⟩` is `a · dim_s + s`.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod discrimination;
pub mod dynamics;
pub mod error;
pub mod linops;
pub mod scenario;

pub use error::{Error, Result};
