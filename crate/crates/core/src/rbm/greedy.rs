use std::collections::BTreeMap;

use log::{info, warn};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{default_start, fit_coefficients, rbm_loss, FitConfig};
use super::{combine, CoefficientSet, EigenBasis};
use crate::error::{invalid, Error, Result};
use crate::field::Field2D;
use crate::physics::{derive_coefficients, generate_pulse, FiberParams, Grid, ParameterSpace, PulseSpec};
use crate::pinn::{train_eigen, EigenSnapshot, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GreedyConfig {
    /// Number of eigen solutions to select.
    pub n_b: usize,
    /// First parameter point; the lattice centre when `None`.
    pub seed_index: Option<usize>,
    pub fit: FitConfig,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self { n_b: 10, seed_index: None, fit: FitConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyRound {
    /// 1-based round number, equal to the basis size after the round.
    pub round: usize,
    pub chosen: usize,
    /// Largest fitted loss in `candidates`; `None` in the first round.
    pub worst_loss: Option<f64>,
    /// `(lattice index, fitted loss)` for every remaining candidate.
    pub candidates: Vec<(usize, f64)>,
    /// Candidates whose training failed before `chosen` succeeded.
    pub fallbacks: Vec<(usize, String)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GreedyReport {
    pub rounds: Vec<GreedyRound>,
    /// Worst fitted loss over the non-basis points with the final basis.
    pub final_worst: Option<f64>,
    /// Final coefficients for every lattice point. Eigen points keep their
    /// indicator vector.
    pub coefficients: BTreeMap<usize, CoefficientSet>,
}

impl GreedyReport {
    pub fn chosen_indices(&self) -> Vec<usize> {
        self.rounds.iter().map(|r| r.chosen).collect()
    }

    /// Worst candidate loss per round followed by the final worst loss.
    pub fn worst_losses(&self) -> Vec<f64> {
        self.rounds.iter().filter_map(|r| r.worst_loss).chain(self.final_worst).collect()
    }

    /// True if no worst loss exceeds its predecessor by more than the
    /// relative `tolerance`.
    pub fn is_non_increasing(&self, tolerance: f64) -> bool {
        self.worst_losses().windows(2).all(|w| w[1] <= w[0] * (1.0 + tolerance))
    }
}

/// Fits every index in `targets`. Diverged fits are kept with an infinite
/// loss so they rank as worst.
fn fit_all(
    basis: &EigenBasis,
    lattice: &[FiberParams],
    coeffs: &[crate::physics::NormalizedCoefficients],
    initial: &[Complex64],
    cfg: &FitConfig,
    targets: &[usize],
    start_for: impl Fn(usize) -> Option<Vec<f64>> + Sync,
) -> Result<Vec<(usize, CoefficientSet)>> {
    targets
        .par_iter()
        .map(|&idx| {
            let start = start_for(idx);
            match fit_coefficients(basis, &lattice[idx], &coeffs[idx], initial, cfg, start.as_deref()) {
                Ok(set) => Ok((idx, set)),
                Err(Error::FitDiverged { iterations, loss }) => {
                    warn!("fit at lattice index {idx} diverged after {iterations} iterations (loss {loss:e})");
                    let coefficients = start.unwrap_or_else(|| default_start(basis.len()));
                    let mut coefficients = coefficients;
                    coefficients.resize(basis.len(), 0.0);
                    Ok((idx, CoefficientSet { coefficients, params: lattice[idx], loss: f64::INFINITY, iterations }))
                }
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Greedy selection with a caller-supplied eigen trainer.
///
/// `trainer(index, params)` must return the snapshot of a network trained at
/// lattice point `index`. A `resume` basis continues an interrupted build.
pub fn greedy_build_with<F>(
    space: &ParameterSpace,
    pulse: &PulseSpec,
    grid: &Grid,
    cfg: &GreedyConfig,
    resume: Option<EigenBasis>,
    mut trainer: F,
) -> Result<(EigenBasis, GreedyReport)>
where
    F: FnMut(usize, &FiberParams) -> Result<EigenSnapshot>,
{
    cfg.fit.validate()?;
    let lattice = crate::physics::parameter_lattice(space)?;
    if cfg.n_b == 0 || cfg.n_b > lattice.len() {
        return Err(invalid(format!("N_b = {} must lie in 1..={}", cfg.n_b, lattice.len())));
    }
    let coeffs = lattice
        .iter()
        .map(|p| derive_coefficients(p, pulse, grid))
        .collect::<Result<Vec<_>>>()?;
    let initial = generate_pulse(pulse, grid)?;

    let mut basis = EigenBasis::new(cfg.n_b)?;
    if let Some(partial) = resume {
        if partial.len() > cfg.n_b {
            return Err(invalid(format!("resumed basis has {} snapshots, N_b = {}", partial.len(), cfg.n_b)));
        }
        for (idx, snap) in partial.indices().iter().zip(partial.snapshots()) {
            if *idx >= lattice.len() {
                return Err(invalid(format!("resumed basis refers to lattice index {idx}")));
            }
            if snap.grid() != grid {
                return Err(Error::DimensionMismatch("resumed basis was built on a different grid".into()));
            }
            basis.push(*idx, snap.clone())?;
        }
        info!("resuming greedy build with {} snapshots", basis.len());
    }

    let mut report = GreedyReport::default();
    if basis.is_empty() {
        let seed = cfg.seed_index.unwrap_or_else(|| space.central_index());
        if seed >= lattice.len() {
            return Err(invalid(format!("seed index {seed} outside the lattice")));
        }
        info!("round 1: training at seed index {seed}");
        basis.push(seed, trainer(seed, &lattice[seed])?)?;
        report.rounds.push(GreedyRound { round: 1, chosen: seed, worst_loss: None, candidates: vec![], fallbacks: vec![] });
    }

    let mut warm: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let start_for = |warm: &BTreeMap<usize, Vec<f64>>, idx: usize| -> Option<Vec<f64>> {
        if cfg.fit.warm_start {
            warm.get(&idx).cloned()
        } else {
            None
        }
    };

    while basis.len() < cfg.n_b {
        let round = basis.len() + 1;
        let remaining: Vec<usize> = (0..lattice.len()).filter(|i| !basis.contains(*i)).collect();
        let fits = fit_all(&basis, &lattice, &coeffs, &initial, &cfg.fit, &remaining, |i| start_for(&warm, i))?;
        let candidates: Vec<(usize, f64)> = fits.iter().map(|(i, s)| (*i, s.loss)).collect();
        for (i, s) in fits {
            warm.insert(i, s.coefficients);
        }

        // worst first, ties to the lowest index
        let mut order = candidates.clone();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let worst_loss = order.first().map(|c| c.1);
        info!("round {round}: worst candidate {:?}", order.first());

        let mut fallbacks = Vec::new();
        let mut chosen = None;
        for &(idx, _) in &order {
            match trainer(idx, &lattice[idx]) {
                Ok(snap) => {
                    basis.push(idx, snap)?;
                    chosen = Some(idx);
                    break;
                }
                Err(e) => {
                    warn!("training at lattice index {idx} failed ({e}); trying the next-worst candidate");
                    fallbacks.push((idx, e.to_string()));
                }
            }
        }
        let chosen = chosen.ok_or_else(|| {
            Error::NonFinite(format!("round {round}: training failed at every remaining candidate"))
        })?;
        report.rounds.push(GreedyRound { round, chosen, worst_loss, candidates, fallbacks });
    }

    let others: Vec<usize> = (0..lattice.len()).filter(|i| !basis.contains(*i)).collect();
    let fits = fit_all(&basis, &lattice, &coeffs, &initial, &cfg.fit, &others, |i| start_for(&warm, i))?;
    report.final_worst = fits.iter().map(|(_, s)| s.loss).reduce(f64::max);
    // an eigen point is represented by its own snapshot alone
    let mut fits = fits;
    for (m, &idx) in basis.indices().iter().enumerate() {
        let mut c = vec![0.0; basis.len()];
        c[m] = 1.0;
        let loss = rbm_loss(&basis, &c, &coeffs[idx], &initial)?;
        fits.push((idx, CoefficientSet { coefficients: c, params: lattice[idx], loss, iterations: 0 }));
    }
    report.coefficients = fits.into_iter().collect();
    Ok((basis, report))
}

/// Greedy selection training every eigen network with `layers`, `seed` and `train_cfg`.
pub fn greedy_build(
    space: &ParameterSpace,
    pulse: &PulseSpec,
    grid: &Grid,
    layers: &[usize],
    seed: u64,
    train_cfg: &TrainConfig,
    cfg: &GreedyConfig,
) -> Result<(EigenBasis, GreedyReport)> {
    greedy_build_with(space, pulse, grid, cfg, None, |_, params| {
        Ok(train_eigen(params, pulse, grid, layers, seed, train_cfg)?.snapshot)
    })
}

/// What [`predict`] needs to fit coefficients for a point it has not seen.
#[derive(Debug, Clone)]
pub struct FitOnDemand {
    pub pulse: PulseSpec,
    pub fit: FitConfig,
}

/// Field at `target`: the stored fit when the point is in `map`, otherwise a
/// fresh fit if `on_demand` is given.
pub fn predict(
    basis: &EigenBasis,
    map: &BTreeMap<usize, CoefficientSet>,
    target: &FiberParams,
    on_demand: Option<&FitOnDemand>,
) -> Result<Field2D> {
    if let Some(set) = map.values().find(|s| s.params == *target) {
        return Ok(combine(basis, &set.coefficients)?.with_params(*target));
    }
    let Some(demand) = on_demand else {
        return Err(Error::UnknownParameter(format!("{target:?}")));
    };
    let grid = *basis.grid().ok_or_else(|| invalid("empty basis"))?;
    let coeffs = derive_coefficients(target, &demand.pulse, &grid)?;
    let initial = generate_pulse(&demand.pulse, &grid)?;
    let set = fit_coefficients(basis, target, &coeffs, &initial, &demand.fit, None)?;
    Ok(combine(basis, &set.coefficients)?.with_params(*target))
}
