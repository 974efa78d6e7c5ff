use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{check_len, CoefficientSet, EigenBasis};
use crate::error::{invalid, Error, Result};
use crate::physics::{EquationTerms, FiberParams, NormalizedCoefficients};

/// Fits abort once the loss exceeds this value.
const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Stop once the gradient norm falls below this value.
    pub gradient_tolerance: f64,
    /// Start each greedy round from the previous round's coefficients
    /// (plus a zero for the new snapshot) instead of the default start.
    pub warm_start: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-2, max_iterations: 2000, gradient_tolerance: 1e-8, warm_start: true }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(format!("fit learning rate {} must be finite and >= 0", self.learning_rate)));
        }
        if !(self.gradient_tolerance >= 0.0) {
            return Err(invalid("gradient tolerance must be >= 0"));
        }
        Ok(())
    }
}

/// The reduced loss for one target parameter point, with the linear part of
/// every snapshot's residual precomputed.
///
/// For snapshot m the linear residual is
/// `ℓ_m = i(A1 ψ_ζ,m + κ1A2 ψ_m + (κ1A4/κ2³) ψ_ttt,m) + (κ1A3/κ2²) ψ_tt,m`,
/// so the residual of the combination is `Σ c_m ℓ_m + κ1A5 |Φ|² Φ`.
pub struct RbmProblem<'a> {
    basis: &'a EigenBasis,
    terms: EquationTerms,
    initial: &'a [Complex64],
    /// Point-major: `linear[k * p + m]`.
    linear: Vec<Complex64>,
    /// Point-major copy of ψ: `psi[k * p + m]`.
    psi: Vec<Complex64>,
}

impl<'a> RbmProblem<'a> {
    pub fn new(basis: &'a EigenBasis, coeffs: &NormalizedCoefficients, initial: &'a [Complex64]) -> Result<Self> {
        let grid = *basis.grid().ok_or_else(|| invalid("empty basis"))?;
        if initial.len() != grid.t_points {
            return Err(Error::DimensionMismatch(format!(
                "initial field has {} samples, grid has {} time points",
                initial.len(),
                grid.t_points
            )));
        }
        let terms = coeffs.terms();
        let p = basis.len();
        let n = grid.len();
        let i = Complex64::i();
        let mut linear = vec![Complex64::new(0.0, 0.0); n * p];
        let mut psi = vec![Complex64::new(0.0, 0.0); n * p];
        for (m, s) in basis.snapshots().iter().enumerate() {
            let f = &s.fields;
            for k in 0..n {
                linear[k * p + m] = i * (f.zeta[k] * terms.zeta + f.psi[k] * terms.attenuation + f.ttt[k] * terms.dispersion3)
                    + f.tt[k] * terms.dispersion2;
                psi[k * p + m] = f.psi[k];
            }
        }
        Ok(Self { basis, terms, initial, linear, psi })
    }

    pub fn size(&self) -> usize {
        self.basis.len()
    }

    fn evaluate(&self, c: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let p = self.size();
        let n = self.psi.len() / p;
        let nl = self.terms.nonlinear;
        let n_ini = self.initial.len();
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
        let (w_res, w_ini) = (1.0 / n as f64, 1.0 / n_ini as f64);
        let mut residual = 0.0;
        let mut ic = 0.0;
        for k in 0..n {
            let psi = &self.psi[k * p..(k + 1) * p];
            let lin = &self.linear[k * p..(k + 1) * p];
            let mut phi = Complex64::new(0.0, 0.0);
            let mut l = Complex64::new(0.0, 0.0);
            for m in 0..p {
                phi += psi[m] * c[m];
                l += lin[m] * c[m];
            }
            let mag = phi.norm_sqr();
            let r = l + phi * (nl * mag);
            residual += r.norm_sqr();
            let e = if k < n_ini { Some(phi - self.initial[k]) } else { None };
            if let Some(e) = e {
                ic += e.norm_sqr();
            }
            if let Some(g) = grad.as_deref_mut() {
                let rc = r.conj();
                for m in 0..p {
                    let dmag = 2.0 * (phi.conj() * psi[m]).re;
                    let dr = lin[m] + (phi * dmag + psi[m] * mag) * nl;
                    g[m] += 2.0 * w_res * (rc * dr).re;
                    if let Some(e) = e {
                        g[m] += 2.0 * w_ini * (e.conj() * psi[m]).re;
                    }
                }
            }
        }
        residual * w_res + ic * w_ini
    }

    pub fn loss(&self, c: &[f64]) -> Result<f64> {
        check_len(self.basis, c)?;
        Ok(self.evaluate(c, None))
    }

    pub fn loss_and_gradient(&self, c: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len(self.basis, c)?;
        let mut g = vec![0.0; c.len()];
        let l = self.evaluate(c, Some(&mut g));
        Ok((l, g))
    }
}

pub fn rbm_loss(
    basis: &EigenBasis,
    c: &[f64],
    coeffs: &NormalizedCoefficients,
    initial: &[Complex64],
) -> Result<f64> {
    RbmProblem::new(basis, coeffs, initial)?.loss(c)
}

pub fn rbm_gradient(
    basis: &EigenBasis,
    c: &[f64],
    coeffs: &NormalizedCoefficients,
    initial: &[Complex64],
) -> Result<Vec<f64>> {
    Ok(RbmProblem::new(basis, coeffs, initial)?.loss_and_gradient(c)?.1)
}

/// Default starting point: the first snapshot alone. All snapshots share
/// the launched pulse, so this already matches the initial condition.
pub(crate) fn default_start(p: usize) -> Vec<f64> {
    let mut c = vec![0.0; p];
    c[0] = 1.0;
    c
}

/// Gradient descent `c ← c − lr ∇L(c)` from `start`, or from the default
/// start when `start` is `None`. A shorter `start` is padded with zeros.
///
/// The returned coefficients are the best iterate seen, so the fitted loss
/// never exceeds the loss at the starting point.
pub fn fit_coefficients(
    basis: &EigenBasis,
    params: &FiberParams,
    coeffs: &NormalizedCoefficients,
    initial: &[Complex64],
    cfg: &FitConfig,
    start: Option<&[f64]>,
) -> Result<CoefficientSet> {
    cfg.validate()?;
    let problem = RbmProblem::new(basis, coeffs, initial)?;
    let p = basis.len();
    let mut c = match start {
        Some(s) if s.len() > p => {
            return Err(Error::DimensionMismatch(format!("start has {} coefficients for a basis of {p}", s.len())))
        }
        Some(s) => {
            let mut c = s.to_vec();
            c.resize(p, 0.0);
            c
        }
        None => default_start(p),
    };

    let mut best = (f64::INFINITY, c.clone());
    let mut iterations = 0;
    loop {
        let (loss, grad) = problem.loss_and_gradient(&c)?;
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            return Err(Error::FitDiverged { iterations, loss });
        }
        if loss < best.0 {
            best = (loss, c.clone());
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < cfg.gradient_tolerance || iterations == cfg.max_iterations {
            break;
        }
        for (cm, g) in c.iter_mut().zip(&grad) {
            *cm -= cfg.learning_rate * g;
        }
        iterations += 1;
    }
    Ok(CoefficientSet { coefficients: best.1, params: *params, loss: best.0, iterations })
}
