//! Finsler geometry workbench.
//!
//! Metrics are written as expressions in `x1..xn`, `y1..yn`; every tensor is
//! computed from exact Taylor jets of `F²` and can be cross-checked against
//! an independent finite-difference pipeline.

pub mod dsl;
pub mod fields;
pub mod jet;
pub mod sampling;
pub mod scalar;
pub mod spaces;
pub mod tensors;
pub mod tolerance;
pub mod verify;
pub mod zoo;

pub use scalar::Scalar;

pub type Jet64 = jet::Jet<f64>;
pub type TensorBundle64 = tensors::TensorBundle<f64>;
pub type TensorBundle32 = tensors::TensorBundle<f32>;
