//! Physical and normalized quantities of single-mode fiber propagation.
//!
//! The propagation model is the normalized nonlinear Schrödinger equation
//!
//! ```text
//! i A1 ψ_ζ + i κ1 A2 ψ + κ1 A3 ψ_tt / κ2² + i κ1 A4 ψ_ttt / κ2³ + κ1 A5 |ψ|² ψ = 0
//! ```
//!
//! on `t ∈ [-1, 1]`, `ζ ∈ [0, 1]`, where `z = L_max ζ`, `T = T_max t` and the
//! physical envelope is `Ψ = √P0 ψ`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default 1/e half-width T0 = 1/√10 ns.
pub fn default_t0() -> f64 {
    1e-9 / 10f64.sqrt()
}

/// One physical transmission condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberParams {
    /// Power attenuation (1/m).
    pub alpha: f64,
    /// Second-order propagation constant (s²/m).
    pub beta2: f64,
    /// Third-order propagation constant (s³/m).
    pub beta3: f64,
    /// Nonlinear refractive index (m²/W).
    pub n2: f64,
    /// Effective area (m²).
    pub a_eff: f64,
    /// Central wavelength (m).
    pub lambda0: f64,
}

impl FiberParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta2, self.beta3, self.n2, self.a_eff, self.lambda0];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(invalid("fiber parameters must be finite"));
        }
        if self.alpha < 0.0 {
            return Err(invalid(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if self.a_eff <= 0.0 {
            return Err(invalid(format!("a_eff must be > 0, got {}", self.a_eff)));
        }
        if self.lambda0 <= 0.0 {
            return Err(invalid(format!("lambda0 must be > 0, got {}", self.lambda0)));
        }
        if self.beta2 == 0.0 {
            return Err(invalid("beta2 = 0 leaves the dispersion length undefined"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseShape {
    Gaussian,
    Sech,
    #[serde(rename = "supergaussian")]
    SuperGaussian,
}

impl PulseShape {
    pub fn name(self) -> &'static str {
        match self {
            PulseShape::Gaussian => "gaussian",
            PulseShape::Sech => "sech",
            PulseShape::SuperGaussian => "supergaussian",
        }
    }

    /// Normalized amplitude at `x = (T - T_k) / T0`.
    fn amplitude(self, x: f64, order: u32) -> f64 {
        match self {
            PulseShape::Gaussian => (-0.5 * x * x).exp(),
            PulseShape::Sech => 1.0 / x.cosh(),
            PulseShape::SuperGaussian => (-0.5 * x.powi(2 * order as i32)).exp(),
        }
    }
}

impl fmt::Display for PulseShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PulseShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "gaussian" => Ok(PulseShape::Gaussian),
            "sech" => Ok(PulseShape::Sech),
            "supergaussian" => Ok(PulseShape::SuperGaussian),
            other => Err(invalid(format!("unsupported pulse shape '{other}'"))),
        }
    }
}

/// Input pulse train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub shape: PulseShape,
    /// Super-Gaussian order; ignored by the other shapes.
    pub order: u32,
    /// 1/e half-width T0 (s).
    pub t0: f64,
    /// Peak power P0 used for normalization (W).
    pub p0: f64,
    /// Peak times (s); one entry per pulse.
    pub peak_offsets: Vec<f64>,
    /// Half time-window T_max (s).
    pub t_max: f64,
}

impl PulseSpec {
    /// Single pulse centred in a ±5 T0 window, 1 mW peak.
    pub fn single(shape: PulseShape) -> Self {
        let t0 = default_t0();
        Self {
            shape,
            order: if shape == PulseShape::SuperGaussian { 4 } else { 1 },
            t0,
            p0: 1e-3,
            peak_offsets: vec![0.0],
            t_max: 5.0 * t0,
        }
    }

    /// Four pulses at ±1.5 T0 and ±4.5 T0 in a ±15 T0 window.
    pub fn multi(shape: PulseShape) -> Self {
        let t0 = default_t0();
        Self {
            peak_offsets: [-4.5, -1.5, 1.5, 4.5].iter().map(|k| k * t0).collect(),
            t_max: 15.0 * t0,
            ..Self::single(shape)
        }
    }

    pub fn num_pulses(&self) -> usize {
        self.peak_offsets.len()
    }

    /// κ2 = T_max / T0.
    pub fn kappa2(&self) -> f64 {
        self.t_max / self.t0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(invalid("pulse t0 must be positive"));
        }
        if !(self.p0 > 0.0 && self.p0.is_finite()) {
            return Err(invalid("pulse p0 must be positive"));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(invalid("pulse t_max must be positive"));
        }
        if self.order < 1 {
            return Err(invalid("super-Gaussian order must be >= 1"));
        }
        if self.peak_offsets.is_empty() {
            return Err(invalid("at least one pulse is required"));
        }
        for &off in &self.peak_offsets {
            if !(off.abs() + self.t0 < self.t_max) {
                return Err(invalid(format!(
                    "pulse peak at {off:e} s does not fit in the ±{:e} s window",
                    self.t_max
                )));
            }
        }
        Ok(())
    }

    /// Physical envelope Ψ(T, 0) in √W at physical time `time` (s).
    pub fn physical_amplitude(&self, time: f64) -> f64 {
        let psi: f64 = self
            .peak_offsets
            .iter()
            .map(|off| self.shape.amplitude((time - off) / self.t0, self.order))
            .sum();
        self.p0.sqrt() * psi
    }
}

/// Uniform sampling of the normalized `(t, ζ)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub t_points: usize,
    pub zeta_points: usize,
    /// Physical fiber length L_max (m).
    pub l_max: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Self { t_points: 100, zeta_points: 101, l_max: 100e3 }
    }
}

impl Grid {
    pub fn new(t_points: usize, zeta_points: usize, l_max: f64) -> Result<Self> {
        let grid = Self { t_points, zeta_points, l_max };
        grid.validate()?;
        Ok(grid)
    }

    /// 2^10 time samples for the split-step reference solver.
    pub fn oracle(zeta_points: usize, l_max: f64) -> Result<Self> {
        Self::new(1 << 10, zeta_points, l_max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_points < 2 || self.zeta_points < 2 {
            return Err(invalid(format!(
                "grid needs at least 2x2 points, got {}x{}",
                self.t_points, self.zeta_points
            )));
        }
        if !(self.l_max > 0.0 && self.l_max.is_finite()) {
            return Err(invalid("l_max must be positive"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.t_points * self.zeta_points
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dt(&self) -> f64 {
        2.0 / (self.t_points - 1) as f64
    }

    pub fn dzeta(&self) -> f64 {
        1.0 / (self.zeta_points - 1) as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        if i + 1 == self.t_points {
            1.0
        } else {
            -1.0 + i as f64 * self.dt()
        }
    }

    pub fn zeta(&self, j: usize) -> f64 {
        if j + 1 == self.zeta_points {
            1.0
        } else {
            j as f64 * self.dzeta()
        }
    }

    pub fn t_values(&self) -> Vec<f64> {
        (0..self.t_points).map(|i| self.t(i)).collect()
    }

    pub fn zeta_values(&self) -> Vec<f64> {
        (0..self.zeta_points).map(|j| self.zeta(j)).collect()
    }

    /// Flat index of `(t_i, ζ_j)`; time runs fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.t_points + i
    }
}

/// Dimensionless coefficients of the normalized equation plus the physical
/// scales they were derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    /// L_max / L_D.
    pub kappa1: f64,
    /// T_max / T0.
    pub kappa2: f64,
    /// Dispersion length (m).
    pub l_d: f64,
    /// Nonlinear length (m).
    pub l_nl: f64,
    /// Nonlinear coefficient γ (1/(W·m)).
    pub gamma: f64,
    /// Central angular frequency (rad/s).
    pub omega_c: f64,
}

/// The five multipliers that actually appear in the equation once κ1 and κ2
/// are folded in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquationTerms {
    /// A1, multiplies ψ_ζ.
    pub zeta: f64,
    /// κ1 A2.
    pub attenuation: f64,
    /// κ1 A3 / κ2².
    pub dispersion2: f64,
    /// κ1 A4 / κ2³.
    pub dispersion3: f64,
    /// κ1 A5.
    pub nonlinear: f64,
}

impl NormalizedCoefficients {
    /// Builds coefficients directly from dimensionless values. Physical scales
    /// are filled with unit placeholders (`l_d = 1`, `l_nl = 1/a5`).
    pub fn dimensionless(a2: f64, a3: f64, a4: f64, a5: f64, kappa1: f64, kappa2: f64) -> Self {
        Self {
            a1: 1.0,
            a2,
            a3,
            a4,
            a5,
            kappa1,
            kappa2,
            l_d: 1.0,
            l_nl: if a5 > 0.0 { 1.0 / a5 } else { f64::INFINITY },
            gamma: 0.0,
            omega_c: 0.0,
        }
    }

    pub fn terms(&self) -> EquationTerms {
        EquationTerms {
            zeta: self.a1,
            attenuation: self.kappa1 * self.a2,
            dispersion2: self.kappa1 * self.a3 / self.kappa2.powi(2),
            dispersion3: self.kappa1 * self.a4 / self.kappa2.powi(3),
            nonlinear: self.kappa1 * self.a5,
        }
    }
}

/// Maps physical fiber, pulse and grid settings onto the normalized equation.
///
/// `L_D = T0² / |β2|` so that L_D stays positive for both dispersion regimes;
/// the sign of β2 lives in `A3 = -sign(β2)/2`.
pub fn derive_coefficients(
    params: &FiberParams,
    pulse: &PulseSpec,
    grid: &Grid,
) -> Result<NormalizedCoefficients> {
    params.validate()?;
    pulse.validate()?;
    grid.validate()?;
    if !(params.n2 > 0.0) {
        return Err(invalid(format!("n2 must be > 0, got {:e}", params.n2)));
    }

    let t0 = pulse.t0;
    let l_d = t0 * t0 / params.beta2.abs();
    let omega_c = 2.0 * PI * SPEED_OF_LIGHT / params.lambda0;
    let gamma = params.n2 * omega_c / (SPEED_OF_LIGHT * params.a_eff);
    let l_nl = 1.0 / (gamma * pulse.p0);

    Ok(NormalizedCoefficients {
        a1: 1.0,
        a2: params.alpha * l_d / 2.0,
        a3: -params.beta2.signum() / 2.0,
        a4: -params.beta3 * l_d / (6.0 * t0.powi(3)),
        a5: l_d / l_nl,
        kappa1: grid.l_max / l_d,
        kappa2: pulse.kappa2(),
        l_d,
        l_nl,
        gamma,
        omega_c,
    })
}

/// Normalized input field ψ(t, ζ = 0) on the grid's time axis.
pub fn generate_pulse(pulse: &PulseSpec, grid: &Grid) -> Result<Vec<Complex64>> {
    pulse.validate()?;
    grid.validate()?;
    let kappa2 = pulse.kappa2();
    let taus: Vec<f64> = pulse.peak_offsets.iter().map(|off| off / pulse.t0).collect();
    Ok(grid
        .t_values()
        .into_iter()
        .map(|t| {
            let x = kappa2 * t;
            let re: f64 = taus.iter().map(|tau| pulse.shape.amplitude(x - tau, pulse.order)).sum();
            Complex64::new(re, 0.0)
        })
        .collect())
}

/// Inclusive uniform axis `[lo, hi]` with `points` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, points: usize) -> Self {
        Self { lo, hi, points }
    }

    pub fn fixed(value: f64) -> Self {
        Self { lo: value, hi: value, points: 1 }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.points == 0 {
            return Err(invalid(format!("{name} axis needs a positive point count")));
        }
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return Err(invalid(format!("{name} axis bounds must be finite")));
        }
        if self.lo > self.hi {
            return Err(invalid(format!(
                "{name} axis range is reversed ({:e} > {:e})",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn value(&self, k: usize) -> f64 {
        if self.points == 1 {
            self.lo
        } else if k + 1 == self.points {
            self.hi
        } else {
            self.lo + k as f64 * (self.hi - self.lo) / (self.points - 1) as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.value(k)).collect()
    }
}

/// Swept axes (α, β2, n2) and fixed scalars of the fiber parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub alpha: Axis,
    pub beta2: Axis,
    pub n2: Axis,
    pub beta3: f64,
    pub a_eff: f64,
    pub lambda0: f64,
}

impl Default for ParameterSpace {
    /// 10 × 10 × 10 lattice. The n2 lower bound is +2.6e-22; the sample
    /// points 5.98e-21 and 8.84e-21 sit on this grid, a negative bound would not.
    fn default() -> Self {
        Self {
            alpha: Axis::new(0.0, 4.605e-5, 10),
            beta2: Axis::new(-2e-26, 2e-26, 10),
            n2: Axis::new(2.6e-22, 2.6e-20, 10),
            beta3: -2e-38,
            a_eff: 8e-11,
            lambda0: 1.55e-6,
        }
    }
}

impl ParameterSpace {
    pub fn validate(&self) -> Result<()> {
        self.alpha.validate("alpha")?;
        self.beta2.validate("beta2")?;
        self.n2.validate("n2")
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.alpha.points, self.beta2.points, self.n2.points]
    }

    pub fn size(&self) -> usize {
        self.shape().iter().product()
    }

    /// Row-major flat index, α outermost and n2 innermost.
    pub fn flat_index(&self, ia: usize, ib: usize, inl: usize) -> usize {
        (ia * self.beta2.points + ib) * self.n2.points + inl
    }

    pub fn axis_indices(&self, index: usize) -> [usize; 3] {
        let inl = index % self.n2.points;
        let rest = index / self.n2.points;
        [rest / self.beta2.points, rest % self.beta2.points, inl]
    }

    /// Lattice point in the middle of every axis.
    pub fn central_index(&self) -> usize {
        let [a, b, n] = self.shape();
        self.flat_index((a - 1) / 2, (b - 1) / 2, (n - 1) / 2)
    }

    /// True if the point sits on the boundary of any swept axis with more than one point.
    pub fn is_boundary(&self, index: usize) -> bool {
        self.axis_indices(index)
            .iter()
            .zip(self.shape())
            .any(|(&k, n)| n > 1 && (k == 0 || k + 1 == n))
    }

    pub fn point(&self, index: usize) -> FiberParams {
        let [ia, ib, inl] = self.axis_indices(index);
        self.with_swept(self.alpha.value(ia), self.beta2.value(ib), self.n2.value(inl))
    }

    /// Fiber with the given swept values and this space's fixed ones.
    pub fn with_swept(&self, alpha: f64, beta2: f64, n2: f64) -> FiberParams {
        FiberParams {
            alpha,
            beta2,
            beta3: self.beta3,
            n2,
            a_eff: self.a_eff,
            lambda0: self.lambda0,
        }
    }
}

/// Enumerates the Cartesian product of the swept axes in row-major order.
pub fn parameter_lattice(space: &ParameterSpace) -> Result<Vec<FiberParams>> {
    space.validate()?;
    Ok((0..space.size()).map(|k| space.point(k)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fig5_config1() -> FiberParams {
        FiberParams {
            alpha: 0.0,
            beta2: 6.67e-27,
            beta3: -2e-38,
            n2: 8.84e-21,
            a_eff: 8e-11,
            lambda0: 1.55e-6,
        }
    }

    #[test]
    fn dispersion_length_for_anomalous_fiber() {
        let params = FiberParams { beta2: -1.111e-26, ..fig5_config1() };
        let pulse = PulseSpec::single(PulseShape::Gaussian);
        let c = derive_coefficients(&params, &pulse, &Grid::default()).unwrap();
        // T0² = 1e-19 s²
        assert_relative_eq!(c.l_d, 1e-19 / 1.111e-26, max_relative = 1e-12);
        assert_relative_eq!(c.l_d, 9.0009e6, max_relative = 1e-4);
        assert_relative_eq!(c.kappa1, 1.111e-2, max_relative = 1e-9);
        assert_eq!(c.a3, 0.5);
        assert_eq!(c.a1, 1.0);
        assert_relative_eq!(c.kappa2, 5.0, max_relative = 1e-14);
    }

    #[test]
    fn coefficient_formulas() {
        let p = FiberParams { alpha: 2e-5, beta2: 1.5e-26, ..fig5_config1() };
        let pulse = PulseSpec::single(PulseShape::Sech);
        let c = derive_coefficients(&p, &pulse, &Grid::default()).unwrap();
        let t0 = pulse.t0;
        let l_d = t0 * t0 / 1.5e-26;
        let gamma = p.n2 * 2.0 * PI / (p.lambda0 * p.a_eff);
        assert_relative_eq!(c.a2, 2e-5 * l_d / 2.0, max_relative = 1e-12);
        assert_eq!(c.a3, -0.5);
        assert_relative_eq!(c.a4, 2e-38 * l_d / (6.0 * t0.powi(3)), max_relative = 1e-12);
        assert_relative_eq!(c.gamma, gamma, max_relative = 1e-12);
        assert_relative_eq!(c.a5, l_d * gamma * 1e-3, max_relative = 1e-12);
        assert!(c.l_nl > 0.0 && c.kappa1 > 0.0);
    }

    #[test]
    fn rejects_zero_beta2_and_nonpositive_n2() {
        let pulse = PulseSpec::single(PulseShape::Gaussian);
        let grid = Grid::default();
        let zero = FiberParams { beta2: 0.0, ..fig5_config1() };
        assert!(derive_coefficients(&zero, &pulse, &grid).is_err());
        let neg = FiberParams { n2: -2.6e-22, ..fig5_config1() };
        assert!(derive_coefficients(&neg, &pulse, &grid).is_err());
        let none = FiberParams { n2: 0.0, ..fig5_config1() };
        assert!(derive_coefficients(&none, &pulse, &grid).is_err());
    }

    #[test]
    fn doubling_power_doubles_a5_only() {
        let p = fig5_config1();
        let grid = Grid::default();
        let pulse = PulseSpec::single(PulseShape::Gaussian);
        let strong = PulseSpec { p0: 2.0 * pulse.p0, ..pulse.clone() };
        let a = derive_coefficients(&p, &pulse, &grid).unwrap();
        let b = derive_coefficients(&p, &strong, &grid).unwrap();
        assert_relative_eq!(b.l_nl, a.l_nl / 2.0, max_relative = 1e-14);
        assert_relative_eq!(b.a5, 2.0 * a.a5, max_relative = 1e-14);
        assert_eq!((a.a1, a.a2, a.a3, a.a4), (b.a1, b.a2, b.a3, b.a4));
    }

    #[test]
    fn pulse_shape_values() {
        let grid = Grid::new(101, 2, 1e5).unwrap();
        let g = generate_pulse(&PulseSpec::single(PulseShape::Gaussian), &grid).unwrap();
        assert_eq!(g[50], Complex64::new(1.0, 0.0));

        // κ2 t = 1 at t = 0.2
        let sg = generate_pulse(&PulseSpec::single(PulseShape::SuperGaussian), &grid).unwrap();
        assert_relative_eq!(sg[60].re, (-0.5f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(sg[60].re, 0.6065, max_relative = 1e-4);

        let s = generate_pulse(&PulseSpec::single(PulseShape::Sech), &grid).unwrap();
        assert_relative_eq!(s[0].norm(), 1.0 / 5f64.cosh(), max_relative = 1e-12);
        assert_relative_eq!(s[100].norm(), 1.35e-2, max_relative = 2e-3);
    }

    #[test]
    fn supergaussian_order_one_is_gaussian() {
        let grid = Grid::default();
        let mut sg = PulseSpec::single(PulseShape::SuperGaussian);
        sg.order = 1;
        let a = generate_pulse(&sg, &grid).unwrap();
        let b = generate_pulse(&PulseSpec::single(PulseShape::Gaussian), &grid).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pulse_energy_positive_for_every_shape() {
        let grid = Grid::default();
        for shape in [PulseShape::Gaussian, PulseShape::Sech, PulseShape::SuperGaussian] {
            for spec in [PulseSpec::single(shape), PulseSpec::multi(shape)] {
                let psi = generate_pulse(&spec, &grid).unwrap();
                let energy: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dt();
                assert!(energy > 0.0, "{shape}");
            }
        }
    }

    #[test]
    fn multi_pulse_sums_peaks() {
        let grid = Grid::new(301, 2, 1e5).unwrap();
        let spec = PulseSpec::multi(PulseShape::Sech);
        assert_eq!(spec.num_pulses(), 4);
        let psi = generate_pulse(&spec, &grid).unwrap();
        // t = 1.5 / 15 → index 150 + 15
        let expected: f64 = [-4.5f64, -1.5, 1.5, 4.5].iter().map(|tau| 1.0 / (1.5 - tau).cosh()).sum();
        assert_relative_eq!(psi[165].re, expected, max_relative = 1e-12);
    }

    #[test]
    fn unsupported_shape_name() {
        assert!("triangle".parse::<PulseShape>().is_err());
        assert_eq!("Super-Gaussian".parse::<PulseShape>().unwrap(), PulseShape::SuperGaussian);
    }

    #[test]
    fn pulse_outside_window_rejected() {
        let mut spec = PulseSpec::single(PulseShape::Gaussian);
        spec.peak_offsets = vec![4.5 * spec.t0];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn denormalized_pulse_matches_physical_units() {
        let grid = Grid::default();
        for spec in [PulseSpec::single(PulseShape::Gaussian), PulseSpec::multi(PulseShape::SuperGaussian)] {
            let psi = generate_pulse(&spec, &grid).unwrap();
            for (i, t) in grid.t_values().into_iter().enumerate() {
                let physical = spec.physical_amplitude(t * spec.t_max);
                let denorm = spec.p0.sqrt() * psi[i].re;
                if physical.abs() > 1e-300 {
                    assert!(((denorm - physical) / physical).abs() < 1e-12, "t = {t}");
                }
            }
        }
    }

    #[test]
    fn grid_endpoints() {
        let grid = Grid::default();
        assert_eq!(grid.zeta(0), 0.0);
        assert_eq!(grid.zeta(100), 1.0);
        assert_eq!(grid.t(0), -1.0);
        assert_eq!(grid.t(99), 1.0);
        assert!(Grid::new(1, 5, 1.0).is_err());
    }

    #[test]
    fn default_lattice_has_1000_points() {
        let lattice = parameter_lattice(&ParameterSpace::default()).unwrap();
        assert_eq!(lattice.len(), 1000);
        assert!(lattice.iter().all(|p| p.beta2 != 0.0));
    }

    #[test]
    fn lattice_contains_published_sample_points() {
        let space = ParameterSpace::default();
        let alphas = space.alpha.values();
        assert_relative_eq!(alphas[5], 2.5584e-5, max_relative = 1e-4);
        assert_relative_eq!(alphas[8], 4.0934e-5, max_relative = 1e-4);
        let betas = space.beta2.values();
        assert_relative_eq!(betas[6], 6.67e-27, max_relative = 1e-3);
        assert_relative_eq!(betas[2], -1.11e-26, max_relative = 1e-3);
        let n2 = space.n2.values();
        assert_relative_eq!(n2[2], 5.98e-21, max_relative = 1e-3);
        assert_relative_eq!(n2[3], 8.84e-21, max_relative = 1e-3);
        assert_eq!(n2[9], 2.6e-20);
    }

    #[test]
    fn lattice_errors() {
        let mut space = ParameterSpace::default();
        space.alpha.points = 0;
        assert!(parameter_lattice(&space).is_err());
        let space = ParameterSpace { n2: Axis::new(1e-20, 1e-21, 3), ..ParameterSpace::default() };
        assert!(parameter_lattice(&space).is_err());
    }

    #[test]
    fn central_and_boundary_indices() {
        let space = ParameterSpace {
            alpha: Axis::new(0.0, 1e-5, 3),
            beta2: Axis::new(-1e-26, 2e-26, 3),
            n2: Axis::new(1e-21, 1e-20, 3),
            ..ParameterSpace::default()
        };
        assert_eq!(space.central_index(), 13);
        assert!(!space.is_boundary(13));
        assert!(space.is_boundary(0));
        assert!(space.is_boundary(14));
    }

    proptest! {
        #[test]
        fn lattice_index_round_trip(a in 1usize..6, b in 1usize..6, n in 1usize..6, seed in 0usize..1000) {
            let space = ParameterSpace {
                alpha: Axis::new(0.0, 1.0, a),
                beta2: Axis::new(1.0, 2.0, b),
                n2: Axis::new(1.0, 3.0, n),
                ..ParameterSpace::default()
            };
            let k = seed % space.size();
            let [ia, ib, inl] = space.axis_indices(k);
            prop_assert_eq!(space.flat_index(ia, ib, inl), k);
        }

        #[test]
        fn symmetric_even_beta2_axis_never_hits_zero(half in 1usize..20, hi in 1e-27f64..1e-25) {
            let axis = Axis::new(-hi, hi, 2 * half);
            prop_assert!(axis.values().iter().all(|&b| b != 0.0));
        }
    }
}
