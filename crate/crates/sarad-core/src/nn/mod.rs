//! Minimal differentiable-network engine: a fixed layer set with explicit
//! backpropagation, Adam, a cyclical learning-rate schedule, and
//! finite-difference gradient verification.

mod adam;
mod check;
mod conv;
mod layers;
mod model;
mod tensor;

pub use adam::{AdamState, LrSchedule, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use check::{fd_param_gradients, gradient_check, max_relative_error, FD_STEP};
pub use layers::{Layer, LayerSpec};
pub use model::{Cache, Gradients, ModelBundle};
pub use tensor::Tensor;
