use num_complex::Complex64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{network_jets, MlpModel};
use super::residual::{record_residual, residual_complex};
use crate::autodiff::{loss_weight_gradient, Slot};
use crate::error::{invalid, Error, Result};
use crate::physics::{EquationTerms, Grid, NormalizedCoefficients};

/// ψ and the derivatives entering the residual, sampled on a grid.
///
/// Each array packs the real channel in `re` and the imaginary channel in
/// `im`, so `zeta[k] = ∂ψ_R/∂ζ + i ∂ψ_I/∂ζ` at grid index `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeFields {
    pub grid: Grid,
    pub psi: Vec<Complex64>,
    pub zeta: Vec<Complex64>,
    pub tt: Vec<Complex64>,
    pub ttt: Vec<Complex64>,
}

impl DerivativeFields {
    pub fn zeros(grid: Grid) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); grid.len()];
        Self { grid, psi: z.clone(), zeta: z.clone(), tt: z.clone(), ttt: z }
    }

    /// Evaluates the network jets at every grid point.
    pub fn from_network(model: &MlpModel, grid: &Grid) -> Result<Self> {
        let samples: Vec<[Complex64; 4]> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k % grid.t_points, k / grid.t_points);
                let [u, v] = network_jets(model, grid.t(i), grid.zeta(j))?;
                if !(u.is_finite() && v.is_finite()) {
                    return Err(Error::NonFinite(format!("network output at grid point ({i}, {j})")));
                }
                Ok([
                    Complex64::new(u.value, v.value),
                    Complex64::new(u.d_zeta, v.d_zeta),
                    Complex64::new(u.d_tt, v.d_tt),
                    Complex64::new(u.d_ttt, v.d_ttt),
                ])
            })
            .collect::<Result<_>>()?;
        let mut out = Self::zeros(*grid);
        for (k, s) in samples.into_iter().enumerate() {
            out.psi[k] = s[0];
            out.zeta[k] = s[1];
            out.tt[k] = s[2];
            out.ttt[k] = s[3];
        }
        Ok(out)
    }

    pub fn check_shape(&self) -> Result<()> {
        let n = self.grid.len();
        if [&self.psi, &self.zeta, &self.tt, &self.ttt].iter().any(|a| a.len() != n) {
            return Err(Error::DimensionMismatch("derivative arrays do not match the grid".into()));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        [&self.psi, &self.zeta, &self.tt, &self.ttt]
            .iter()
            .all(|a| a.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }
}

fn check_initial(grid: &Grid, initial: &[Complex64]) -> Result<()> {
    if initial.len() != grid.t_points {
        return Err(Error::DimensionMismatch(format!(
            "initial field has {} samples, grid has {} time points",
            initial.len(),
            grid.t_points
        )));
    }
    Ok(())
}

/// Residual mean square over every grid point plus the initial-condition
/// mean square over the ζ = 0 row.
pub fn field_loss(fields: &DerivativeFields, terms: &EquationTerms, initial: &[Complex64]) -> Result<f64> {
    fields.check_shape()?;
    check_initial(&fields.grid, initial)?;
    let mut residual = 0.0;
    for k in 0..fields.grid.len() {
        residual += residual_complex(fields.psi[k], fields.zeta[k], fields.tt[k], fields.ttt[k], terms).norm_sqr();
    }
    let ic: f64 = fields.psi[..initial.len()]
        .iter()
        .zip(initial)
        .map(|(p, q)| (p - q).norm_sqr())
        .sum();
    let loss = residual / fields.grid.len() as f64 + ic / initial.len() as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    Ok(loss)
}

/// Loss of the network on the full grid.
pub fn pinn_loss(
    model: &MlpModel,
    coeffs: &NormalizedCoefficients,
    grid: &Grid,
    initial: &[Complex64],
) -> Result<f64> {
    check_initial(grid, initial)?;
    let fields = DerivativeFields::from_network(model, grid)?;
    field_loss(&fields, &coeffs.terms(), initial)
}

/// Which grid points enter the training loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Collocation {
    /// Every grid point, every epoch.
    #[default]
    Full,
    /// A fixed uniform sample of residual points drawn once from `seed`. The
    /// initial-condition term always uses the whole ζ = 0 row.
    Subsample { points: usize, seed: u64 },
}

/// One training point with its weights in the loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollocationPoint {
    pub t: f64,
    pub zeta: f64,
    /// Weight of `r_R² + r_I²`; zero for initial-condition-only points.
    pub residual_weight: f64,
    /// Target value and weight of the initial-condition term.
    pub initial: Option<(Complex64, f64)>,
}

impl Collocation {
    pub fn points(&self, grid: &Grid, initial: &[Complex64]) -> Result<Vec<CollocationPoint>> {
        check_initial(grid, initial)?;
        let n = grid.len();
        let chosen: Vec<usize> = match *self {
            Collocation::Full => (0..n).collect(),
            Collocation::Subsample { points, seed } => {
                if points == 0 || points > n {
                    return Err(invalid(format!("subsample of {points} points from a grid of {n}")));
                }
                let mut idx = sample(&mut ChaCha8Rng::seed_from_u64(seed), n, points).into_vec();
                idx.sort_unstable();
                idx
            }
        };
        let w_res = 1.0 / chosen.len() as f64;
        let w_ini = 1.0 / grid.t_points as f64;
        let mut weights: Vec<Option<CollocationPoint>> = vec![None; n];
        for k in chosen {
            let (i, j) = (k % grid.t_points, k / grid.t_points);
            weights[k] = Some(CollocationPoint { t: grid.t(i), zeta: grid.zeta(j), residual_weight: w_res, initial: None });
        }
        for (i, target) in initial.iter().enumerate() {
            let p = weights[i].get_or_insert(CollocationPoint {
                t: grid.t(i),
                zeta: 0.0,
                residual_weight: 0.0,
                initial: None,
            });
            p.initial = Some((*target, w_ini));
        }
        Ok(weights.into_iter().flatten().collect())
    }
}

/// Training loss over `points` and its exact gradient in the network weights.
pub fn pinn_loss_and_gradient(
    model: &MlpModel,
    terms: &EquationTerms,
    points: &[CollocationPoint],
) -> Result<(f64, Vec<f64>)> {
    let coords: Vec<(f64, f64)> = points.iter().map(|p| (p.t, p.zeta)).collect();
    loss_weight_gradient(model, &coords, |tape, k, out| {
        let p = &points[k];
        let mut acc = tape.constant(0.0);
        if p.residual_weight > 0.0 {
            let [r_re, r_im] = record_residual(tape, out, terms);
            let a = tape.mul(r_re, r_re);
            let b = tape.mul(r_im, r_im);
            let s = tape.add(a, b);
            acc = tape.scale(s, p.residual_weight);
        }
        if let Some((target, w)) = p.initial {
            let u = tape.slot(out[0], Slot::Value);
            let v = tape.slot(out[1], Slot::Value);
            let tu = tape.constant(target.re);
            let tv = tape.constant(target.im);
            let du = tape.sub(u, tu);
            let dv = tape.sub(v, tv);
            let a = tape.mul(du, du);
            let b = tape.mul(dv, dv);
            let s = tape.add(a, b);
            let s = tape.scale(s, w);
            acc = tape.add(acc, s);
        }
        acc
    })
}
