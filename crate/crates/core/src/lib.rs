//! Parameterized principle-driven fiber model.
//!
//! Pulse propagation in a single-mode fiber obeys the normalized nonlinear
//! Schrödinger equation. This crate trains a handful of physics-informed
//! networks ("eigen solutions") at greedily chosen points of a fiber
//! parameter lattice and predicts every other lattice point as a fitted real
//! linear combination of their fields. A symmetric split-step Fourier solver
//! provides the reference answer for every accuracy check.
//!
//! Module map:
//!
//! * [`physics`]: fiber parameters, normalized coefficients, pulses, grids and
//!   the parameter lattice.
//! * [`field`]: complex fields sampled on a grid, interpolation and file formats.
//! * [`ssfm`]: the split-step Fourier reference solver.
//! * [`autodiff`]: truncated Taylor jets in the inputs and a reverse sweep over
//!   them for weight gradients.
//! * [`pinn`]: the network, the NLSE residual, loss, training and snapshots.
//! * [`rbm`]: reduced-basis combination, coefficient fitting and greedy selection.
//! * [`analysis`]: error statistics, MAC-count complexity model and timing.
//! * [`config`] / [`io`]: run configuration and artifact persistence.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod autodiff;
pub mod config;
pub mod error;
pub mod field;
pub mod io;
pub mod physics;
pub mod pinn;
pub mod rbm;
pub mod ssfm;

pub use error::{Error, Result};
pub use num_complex::Complex64;
