//! Derivatives for the physics-informed network.
//!
//! Input derivatives (∂/∂t up to third order and ∂/∂ζ) travel forward as
//! truncated Taylor [`Jet`]s. Every jet operation can be recorded on a
//! [`Tape`]; a reverse sweep over the tape then yields the gradient of a
//! scalar loss with respect to all network weights (reverse over forward).

mod grad;
mod jet;
mod tape;

pub use grad::{loss_weight_gradient, loss_weight_gradient_chunked, DEFAULT_CHUNK};
pub use jet::{jet_tanh, tanh_derivatives, Jet, Slot};
pub use tape::{NodeId, Tape};

/// Step used by the finite-difference checks of input derivatives.
pub const FD_INPUT_STEP: f64 = 1e-2;
/// Step used by the finite-difference checks of weight gradients.
pub const FD_WEIGHT_STEP: f64 = 1e-4;
/// Relative tolerance of both finite-difference checks.
pub const FD_RELATIVE_TOL: f64 = 1e-4;
/// Absolute floor below which differences are not compared relatively.
pub const FD_ABSOLUTE_FLOOR: f64 = 1e-8;
