//! Reverse-mode differentiation over dense tensors.

mod gradcheck;
mod graph;

pub use gradcheck::{gradient_check, gradient_check_report, GradCheckReport};
pub use graph::{softmax_values, ActivationKind, ElementwiseKind, GradientMap, Graph, Var};
