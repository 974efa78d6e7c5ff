use num_complex::Complex64;

use super::loss::{field_loss, DerivativeFields};
use super::model::{init_model, MlpModel};
use super::train::{train, LossHistory, TrainConfig};
use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::physics::{derive_coefficients, generate_pulse, FiberParams, Grid, NormalizedCoefficients, PulseSpec};

/// A trained network frozen into grid arrays: ψ and the derivatives the
/// residual needs, at every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSnapshot {
    pub params: FiberParams,
    pub coeffs: NormalizedCoefficients,
    pub fields: DerivativeFields,
    /// Full-grid loss of the stored arrays under their own coefficients.
    pub loss: f64,
    pub epochs: usize,
}

impl EigenSnapshot {
    pub fn grid(&self) -> &Grid {
        &self.fields.grid
    }

    /// ψ as a [`Field2D`].
    pub fn field(&self) -> Field2D {
        Field2D::from_data(self.fields.grid, self.fields.psi.clone())
            .expect("snapshot arrays match their grid")
            .with_params(self.params)
    }

    pub fn validate(&self) -> Result<()> {
        self.fields.check_shape()?;
        if !self.fields.is_finite() {
            return Err(Error::NonFinite("snapshot arrays".into()));
        }
        Ok(())
    }
}

/// Evaluates `model` with its input derivatives on every point of `grid`.
///
/// `initial` is only used to compute the stored loss.
pub fn snapshot(
    model: &MlpModel,
    params: &FiberParams,
    coeffs: &NormalizedCoefficients,
    grid: &Grid,
    initial: &[Complex64],
    epochs: usize,
) -> Result<EigenSnapshot> {
    let fields = DerivativeFields::from_network(model, grid)?;
    let loss = field_loss(&fields, &coeffs.terms(), initial)?;
    Ok(EigenSnapshot { params: *params, coeffs: *coeffs, fields, loss, epochs })
}

/// Output of [`train_eigen`].
#[derive(Debug, Clone)]
pub struct TrainedEigen {
    pub model: MlpModel,
    pub history: LossHistory,
    pub snapshot: EigenSnapshot,
}

/// Trains a fresh network at `params` and snapshots it on `grid`.
pub fn train_eigen(
    params: &FiberParams,
    pulse: &PulseSpec,
    grid: &Grid,
    layers: &[usize],
    seed: u64,
    cfg: &TrainConfig,
) -> Result<TrainedEigen> {
    let coeffs = derive_coefficients(params, pulse, grid)?;
    let initial = generate_pulse(pulse, grid)?;
    let (model, history) = train(init_model(layers, seed)?, &coeffs, grid, &initial, cfg)?;
    let snapshot = snapshot(&model, params, &coeffs, grid, &initial, history.len())?;
    Ok(TrainedEigen { model, history, snapshot })
}
