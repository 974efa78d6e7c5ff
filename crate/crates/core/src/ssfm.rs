//! Symmetric split-step Fourier solver for the normalized NLSE.
//!
//! Each segment of length Δζ applies half a linear step in the frequency
//! domain, the full nonlinear phase rotation in the time domain, then the
//! second linear half step.
//!
//! The forward transform uses the `e^{-iωt}` kernel, so `∂/∂t ↔ +iω` and the
//! linear operator reads
//! `ĥ(ω) = -κ1A2 - i (κ1A3/κ2²) ω² + i (κ1A4/κ2³) ω³`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::Field2D;
use crate::physics::{EquationTerms, Grid, NormalizedCoefficients};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsfmConfig {
    /// Computing segments per unit of normalized distance.
    pub steps_per_unit_zeta: usize,
    /// Keep every k-th ζ grid line in the output.
    pub record_every: usize,
}

impl Default for SsfmConfig {
    fn default() -> Self {
        Self { steps_per_unit_zeta: 1000, record_every: 1 }
    }
}

impl SsfmConfig {
    fn validate(&self, grid: &Grid) -> Result<()> {
        let lines = grid.zeta_points - 1;
        if self.record_every == 0 || !lines.is_multiple_of(self.record_every) {
            return Err(invalid(format!(
                "record_every = {} must divide the {lines} ζ intervals",
                self.record_every
            )));
        }
        if self.steps_per_unit_zeta < lines || !self.steps_per_unit_zeta.is_multiple_of(lines) {
            return Err(invalid(format!(
                "steps_per_unit_zeta = {} must be a positive multiple of the {lines} ζ intervals",
                self.steps_per_unit_zeta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    /// Inverse transform including the 1/N factor.
    Inverse,
}

/// Discrete Fourier transform of a power-of-two length vector.
pub fn dft(x: &[Complex64], direction: Direction) -> Result<Vec<Complex64>> {
    let n = x.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let mut planner = FftPlanner::new();
    let mut buf = x.to_vec();
    match direction {
        Direction::Forward => planner.plan_fft_forward(n).process(&mut buf),
        Direction::Inverse => {
            planner.plan_fft_inverse(n).process(&mut buf);
            let scale = 1.0 / n as f64;
            buf.iter_mut().for_each(|z| *z *= scale);
        }
    }
    Ok(buf)
}

/// Angular frequencies of the FFT bins for `n` samples spaced `dt` apart.
pub fn angular_frequencies(n: usize, dt: f64) -> Vec<f64> {
    let span = n as f64 * dt;
    (0..n)
        .map(|k| {
            let k = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
            2.0 * PI * k / span
        })
        .collect()
}

/// Per-frequency factor `exp(ĥ(ω) Δζ / 2)` for one half segment.
#[derive(Debug, Clone)]
pub struct SpectralOperator {
    factors: Vec<Complex64>,
}

impl SpectralOperator {
    pub fn new(terms: &EquationTerms, n: usize, dt: f64, dzeta: f64) -> Self {
        let half = 0.5 * dzeta / terms.zeta;
        let factors = angular_frequencies(n, dt)
            .into_iter()
            .map(|w| {
                let h = Complex64::new(
                    -terms.attenuation,
                    -terms.dispersion2 * w * w + terms.dispersion3 * w * w * w,
                );
                (h * half).exp()
            })
            .collect();
        Self { factors }
    }

    pub fn factors(&self) -> &[Complex64] {
        &self.factors
    }
}

/// Reusable propagator for one coefficient set and grid.
pub struct Propagator {
    grid: Grid,
    cfg: SsfmConfig,
    terms: EquationTerms,
    linear: SpectralOperator,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    dzeta: f64,
}

impl Propagator {
    pub fn new(coeffs: &NormalizedCoefficients, grid: &Grid, cfg: &SsfmConfig) -> Result<Self> {
        grid.validate()?;
        cfg.validate(grid)?;
        let n = grid.t_points;
        if !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        let terms = coeffs.terms();
        if terms.zeta == 0.0 {
            return Err(invalid("A1 must be non-zero"));
        }
        let dzeta = 1.0 / cfg.steps_per_unit_zeta as f64;
        let mut planner = FftPlanner::new();
        Ok(Self {
            grid: *grid,
            cfg: *cfg,
            terms,
            linear: SpectralOperator::new(&terms, n, grid.dt(), dzeta),
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            dzeta,
        })
    }

    /// Output grid: every `record_every`-th ζ line of the input grid.
    pub fn output_grid(&self) -> Grid {
        Grid {
            zeta_points: (self.grid.zeta_points - 1) / self.cfg.record_every + 1,
            ..self.grid
        }
    }

    fn linear_half_step(&self, psi: &mut [Complex64], scratch: &mut [Complex64]) {
        self.forward.process_with_scratch(psi, scratch);
        let scale = 1.0 / psi.len() as f64;
        for (z, f) in psi.iter_mut().zip(self.linear.factors()) {
            *z *= f * scale;
        }
        self.inverse.process_with_scratch(psi, scratch);
    }

    fn nonlinear_step(&self, psi: &mut [Complex64]) {
        let k = self.terms.nonlinear * self.dzeta / self.terms.zeta;
        if k == 0.0 {
            return;
        }
        for z in psi.iter_mut() {
            *z *= Complex64::from_polar(1.0, k * z.norm_sqr());
        }
    }

    pub fn run(&self, initial: &[Complex64]) -> Result<Field2D> {
        if initial.len() != self.grid.t_points {
            return Err(Error::DimensionMismatch(format!(
                "initial field has {} samples, oracle grid has {}",
                initial.len(),
                self.grid.t_points
            )));
        }
        let out_grid = self.output_grid();
        let mut field = Field2D::zeros(out_grid);
        field.set_row(0, initial);

        let segments_per_row =
            self.cfg.steps_per_unit_zeta / (out_grid.zeta_points - 1);
        let mut psi = initial.to_vec();
        let scratch_len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
        for seg in 0..self.cfg.steps_per_unit_zeta {
            self.linear_half_step(&mut psi, &mut scratch);
            self.nonlinear_step(&mut psi);
            self.linear_half_step(&mut psi, &mut scratch);
            if psi.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::Blowup { segment: seg });
            }
            if (seg + 1) % segments_per_row == 0 {
                field.set_row((seg + 1) / segments_per_row, &psi);
            }
        }
        Ok(field)
    }
}

/// Propagates `initial` over ζ ∈ [0, 1].
pub fn propagate(
    initial: &[Complex64],
    coeffs: &NormalizedCoefficients,
    grid: &Grid,
    cfg: &SsfmConfig,
) -> Result<Field2D> {
    Propagator::new(coeffs, grid, cfg)?.run(initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{derive_coefficients, generate_pulse, FiberParams, PulseShape, PulseSpec};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rms_width(row: &[Complex64], grid: &Grid) -> f64 {
        let t = grid.t_values();
        let p: Vec<f64> = row.iter().map(|z| z.norm_sqr()).collect();
        let norm: f64 = p.iter().sum();
        let mean: f64 = t.iter().zip(&p).map(|(t, p)| t * p).sum::<f64>() / norm;
        (t.iter().zip(&p).map(|(t, p)| (t - mean).powi(2) * p).sum::<f64>() / norm).sqrt()
    }

    #[test]
    fn dft_of_impulse_is_flat() {
        let x = [1.0, 0.0, 0.0, 0.0].map(|r| Complex64::new(r, 0.0));
        let y = dft(&x, Direction::Forward).unwrap();
        assert!(y.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn dft_round_trip_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Complex64> =
            (0..256).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let spec = dft(&x, Direction::Forward).unwrap();
        let back = dft(&spec, Direction::Inverse).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
        let lhs: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let rhs: f64 = spec.iter().map(|z| z.norm_sqr()).sum::<f64>() / x.len() as f64;
        assert!((lhs - rhs).abs() / lhs < 1e-10);

        // naive DFT as an independent check of the sign convention
        let n = x.len();
        for k in [0usize, 1, 17, 200] {
            let direct: Complex64 = x
                .iter()
                .enumerate()
                .map(|(j, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / n as f64))
                .sum();
            assert!((direct - spec[k]).norm() < 1e-10);
        }
    }

    #[test]
    fn dft_rejects_non_power_of_two() {
        let x = vec![Complex64::new(1.0, 0.0); 100];
        assert!(matches!(dft(&x, Direction::Forward), Err(Error::NotPowerOfTwo(100))));
    }

    #[test]
    fn spectral_operator_never_amplifies() {
        let terms = NormalizedCoefficients::dimensionless(0.3, -0.5, 0.2, 0.0, 2.0, 5.0).terms();
        let op = SpectralOperator::new(&terms, 1024, 2.0 / 1023.0, 1e-3);
        assert!(op.factors().iter().all(|f| f.norm() <= 1.0));
    }

    #[test]
    fn attenuation_only_matches_exponential_law() {
        let grid = Grid::oracle(101, 100e3).unwrap();
        let params = FiberParams {
            alpha: 4.605e-5,
            beta2: -1e-26,
            beta3: 0.0,
            n2: 1e-21,
            a_eff: 8e-11,
            lambda0: 1.55e-6,
        };
        let pulse = PulseSpec::single(PulseShape::Gaussian);
        let mut c = derive_coefficients(&params, &pulse, &grid).unwrap();
        c.a3 = 0.0;
        c.a4 = 0.0;
        c.a5 = 0.0;
        let psi0 = generate_pulse(&pulse, &grid).unwrap();
        let field = propagate(&psi0, &c, &grid, &SsfmConfig::default()).unwrap();
        let ratio = field.row_energy(100) / field.row_energy(0);
        assert_relative_eq!(ratio, (-4.605f64).exp(), max_relative = 1e-10);
        assert_relative_eq!(ratio, 0.01, max_relative = 1e-3);
    }

    #[test]
    fn gaussian_broadens_by_sqrt2_after_one_dispersion_length() {
        let grid = Grid::oracle(11, 1.0).unwrap();
        for a3 in [0.5, -0.5] {
            let c = NormalizedCoefficients::dimensionless(0.0, a3, 0.0, 0.0, 1.0, 5.0);
            let psi0 = generate_pulse(&PulseSpec::single(PulseShape::Gaussian), &grid).unwrap();
            let field = propagate(&psi0, &c, &grid, &SsfmConfig { steps_per_unit_zeta: 100, record_every: 1 }).unwrap();
            let growth = rms_width(field.row(10), &grid) / rms_width(field.row(0), &grid);
            assert!((growth / 2f64.sqrt() - 1.0).abs() < 5e-3, "growth {growth}");
        }
    }

    #[test]
    fn fundamental_soliton_keeps_its_peak() {
        let grid = Grid::oracle(101, 1.0).unwrap();
        let c = NormalizedCoefficients::dimensionless(0.0, 0.5, 0.0, 1.0, 1.0, 5.0);
        let psi0 = generate_pulse(&PulseSpec::single(PulseShape::Sech), &grid).unwrap();
        let field = propagate(&psi0, &c, &grid, &SsfmConfig::default()).unwrap();
        let peak0 = field.row(0).iter().map(|z| z.norm()).fold(0.0, f64::max);
        for j in 0..grid.zeta_points {
            let peak = field.row(j).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!((peak / peak0 - 1.0).abs() < 1e-2, "row {j}: {peak}");
        }
    }

    #[test]
    fn lossless_propagation_conserves_energy() {
        let grid = Grid::oracle(101, 1.0).unwrap();
        let c = NormalizedCoefficients::dimensionless(0.0, -0.5, 0.3, 2.0, 3.0, 5.0);
        let psi0 = generate_pulse(&PulseSpec::single(PulseShape::SuperGaussian), &grid).unwrap();
        let field = propagate(&psi0, &c, &grid, &SsfmConfig::default()).unwrap();
        let e0 = field.row_energy(0);
        for j in 0..grid.zeta_points {
            assert!((field.row_energy(j) - e0).abs() / e0 < 1e-6);
        }
    }

    #[test]
    fn first_row_is_bit_identical_to_input() {
        let grid = Grid::oracle(11, 1.0).unwrap();
        let c = NormalizedCoefficients::dimensionless(0.1, 0.5, 0.0, 1.0, 1.0, 5.0);
        let psi0 = generate_pulse(&PulseSpec::single(PulseShape::Sech), &grid).unwrap();
        let field = propagate(&psi0, &c, &grid, &SsfmConfig { steps_per_unit_zeta: 10, record_every: 1 }).unwrap();
        assert_eq!(field.row(0), psi0.as_slice());
    }

    #[test]
    fn halving_the_step_converges_at_second_order() {
        let grid = Grid::oracle(3, 1.0).unwrap();
        let c = NormalizedCoefficients::dimensionless(0.2, -0.5, 0.1, 4.0, 2.0, 5.0);
        let psi0 = generate_pulse(&PulseSpec::single(PulseShape::Gaussian), &grid).unwrap();
        let run = |steps| {
            propagate(&psi0, &c, &grid, &SsfmConfig { steps_per_unit_zeta: steps, record_every: 1 })
                .unwrap()
                .row(2)
                .to_vec()
        };
        let dist = |a: &[Complex64], b: &[Complex64]| {
            a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
        };
        let (f1, f2, f3) = (run(200), run(400), run(800));
        let (d1, d2) = (dist(&f1, &f2), dist(&f2, &f3));
        assert!(d2 < d1);
        let order = (d1 / d2).log2();
        assert!((order - 2.0).abs() < 0.3, "order {order}");
    }

    #[test]
    fn record_every_thins_output() {
        let grid = Grid::oracle(11, 1.0).unwrap();
        let c = NormalizedCoefficients::dimensionless(0.1, 0.5, 0.0, 0.0, 1.0, 5.0);
        let psi0 = generate_pulse(&PulseSpec::single(PulseShape::Gaussian), &grid).unwrap();
        let cfg = SsfmConfig { steps_per_unit_zeta: 100, record_every: 5 };
        let field = propagate(&psi0, &c, &grid, &cfg).unwrap();
        assert_eq!(field.grid.zeta_points, 3);
        let bad = SsfmConfig { steps_per_unit_zeta: 15, record_every: 1 };
        assert!(propagate(&psi0, &c, &grid, &bad).is_err());
    }

    #[test]
    fn blowup_reports_segment() {
        let grid = Grid::oracle(11, 1.0).unwrap();
        let c = NormalizedCoefficients::dimensionless(0.0, 0.5, 0.0, 1e306, 1.0, 5.0);
        let mut psi0 = generate_pulse(&PulseSpec::single(PulseShape::Gaussian), &grid).unwrap();
        psi0[512] = Complex64::new(1e10, 0.0);
        let err = propagate(&psi0, &c, &grid, &SsfmConfig { steps_per_unit_zeta: 10, record_every: 1 })
            .unwrap_err();
        assert!(matches!(err, Error::Blowup { segment: 0 }), "{err}");
    }
}
