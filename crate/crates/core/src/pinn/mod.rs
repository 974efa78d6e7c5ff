//! Physics-informed network for one fixed fiber parameter point.

mod loss;
mod model;
mod residual;
mod snapshot;
mod train;

pub use loss::{
    field_loss, pinn_loss, pinn_loss_and_gradient, Collocation, CollocationPoint, DerivativeFields,
};
pub use model::{init_model, network_jets, LayerShape, MlpModel};
pub use residual::{finite_difference_residual, nlse_residual, record_residual, residual_complex};
pub use snapshot::{snapshot, train_eigen, EigenSnapshot, TrainedEigen};
pub use train::{train, Adam, AdamConfig, LossHistory, LossRecord, TrainConfig};
