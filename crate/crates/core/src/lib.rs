//! Dynamic memory networks with tensor-based attention gates, an end-to-end
//! memory network baseline, and the training harness around them.

pub mod autodiff;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod model;
pub mod params;
pub mod scoring;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
