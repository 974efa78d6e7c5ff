use std::io::Write;
use std::time::Instant;

use log::{debug, info};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::loss::{pinn_loss_and_gradient, Collocation};
use super::model::MlpModel;
use crate::error::{invalid, Error, Result};
use crate::io::fmt_f64;
use crate::physics::{Grid, NormalizedCoefficients};

/// Training aborts once the loss exceeds this value.
const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Bias-corrected ADAM state for one flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    steps: i32,
}

impl Adam {
    pub fn new(cfg: AdamConfig, n_params: usize) -> Self {
        Self { cfg, m: vec![0.0; n_params], v: vec![0.0; n_params], steps: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.cfg;
        self.steps += 1;
        let c1 = 1.0 - beta1.powi(self.steps);
        let c2 = 1.0 - beta2.powi(self.steps);
        for k in 0..params.len() {
            self.m[k] = beta1 * self.m[k] + (1.0 - beta1) * grad[k];
            self.v[k] = beta2 * self.v[k] + (1.0 - beta2) * grad[k] * grad[k];
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            params[k] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Training stops as soon as the loss drops below this value.
    pub stop_loss: f64,
    pub adam: AdamConfig,
    pub collocation: Collocation,
    /// Log every this many epochs (0 disables progress logging).
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 60_000,
            stop_loss: 1e-5,
            adam: AdamConfig::default(),
            collocation: Collocation::Full,
            log_every: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(invalid("max_epochs must be at least 1"));
        }
        if !(self.stop_loss > 0.0) {
            return Err(invalid(format!("stop_loss must be positive, got {}", self.stop_loss)));
        }
        let a = &self.adam;
        if !(a.learning_rate >= 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.epsilon > 0.0)
        {
            return Err(invalid(format!("bad ADAM settings {a:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub epoch: usize,
    /// Loss of the weights at the start of the epoch.
    pub loss: f64,
    /// Seconds since training started.
    pub elapsed: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossHistory {
    pub records: Vec<LossRecord>,
}

impl LossHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }

    pub fn min_loss(&self) -> Option<f64> {
        self.records.iter().map(|r| r.loss).reduce(f64::min)
    }

    /// `epoch,loss` rows; timings are left out so reruns are byte-identical.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch,loss")?;
        for r in &self.records {
            writeln!(w, "{},{}", r.epoch, fmt_f64(r.loss))?;
        }
        Ok(())
    }
}

/// Full-batch ADAM on the physics-informed loss.
///
/// Each epoch evaluates the loss and gradient of the current weights, records
/// the loss, stops if it is below `stop_loss`, and otherwise takes one ADAM
/// step. The returned model holds the weights after the last step.
pub fn train(
    mut model: MlpModel,
    coeffs: &NormalizedCoefficients,
    grid: &Grid,
    initial: &[Complex64],
    cfg: &TrainConfig,
) -> Result<(MlpModel, LossHistory)> {
    cfg.validate()?;
    let points = cfg.collocation.points(grid, initial)?;
    let terms = coeffs.terms();
    let mut adam = Adam::new(cfg.adam, model.param_count());
    let mut history = LossHistory::default();
    let start = Instant::now();

    let diverged = |epoch: usize, loss: f64, history: &LossHistory| Error::TrainingDiverged {
        epoch,
        loss,
        history: history.records.iter().map(|r| (r.epoch, r.loss)).collect(),
    };

    for epoch in 1..=cfg.max_epochs {
        let (loss, grad) = match pinn_loss_and_gradient(&model, &terms, &points) {
            Ok(v) => v,
            Err(Error::NonFinite(_)) => return Err(diverged(epoch, f64::NAN, &history)),
            Err(e) => return Err(e),
        };
        history.records.push(LossRecord { epoch, loss, elapsed: start.elapsed().as_secs_f64() });
        if loss > DIVERGENCE_LOSS || grad.iter().any(|g| !g.is_finite()) {
            return Err(diverged(epoch, loss, &history));
        }
        if cfg.log_every > 0 && (epoch == 1 || epoch % cfg.log_every == 0) {
            info!("epoch {epoch}: loss {loss:.6e}");
        }
        if loss < cfg.stop_loss {
            debug!("stop loss reached at epoch {epoch}");
            break;
        }
        adam.step(model.params_mut(), &grad);
    }
    Ok((model, history))
}
