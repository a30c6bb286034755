//! Minimal reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records each primitive as it is evaluated; [`Tape::backward`]
//! replays the record in reverse and accumulates gradients into every value
//! that depends on a parameter. The symmetric eigensolver lives here as well
//! but is not differentiable.

mod eig;
mod gradcheck;
mod tape;
mod tensor;

pub use eig::{sym_eig, SymEig};
pub use gradcheck::{grad_check, relative_deviation, GradCheckReport, ABS_FLOOR};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
