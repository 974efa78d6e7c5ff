//! Residual of the normalized NLSE
//!
//! ```text
//! i A1 ψ_ζ + i κ1A2 ψ + (κ1A3/κ2²) ψ_tt + i (κ1A4/κ2³) ψ_ttt + κ1A5 |ψ|² ψ = 0
//! ```
//!
//! With `ψ = u + i v` the real and imaginary parts are
//!
//! ```text
//! r_R = -A1 v_ζ - κ1A2 v + (κ1A3/κ2²) u_tt - (κ1A4/κ2³) v_ttt + κ1A5 (u² + v²) u
//! r_I =  A1 u_ζ + κ1A2 u + (κ1A3/κ2²) v_tt + (κ1A4/κ2³) u_ttt + κ1A5 (u² + v²) v
//! ```

use num_complex::Complex64;

use crate::autodiff::{Jet, NodeId, Slot, Tape};
use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::physics::{EquationTerms, NormalizedCoefficients};

/// `(r_R, r_I)` from the jets of `(ψ_R, ψ_I)` at one point.
pub fn nlse_residual(jets: &[Jet; 2], terms: &EquationTerms) -> [f64; 2] {
    let [u, v] = jets;
    let nl = terms.nonlinear * (u.value * u.value + v.value * v.value);
    let r_re = -terms.zeta * v.d_zeta - terms.attenuation * v.value + terms.dispersion2 * u.d_tt
        - terms.dispersion3 * v.d_ttt
        + nl * u.value;
    let r_im = terms.zeta * u.d_zeta + terms.attenuation * u.value + terms.dispersion2 * v.d_tt
        + terms.dispersion3 * u.d_ttt
        + nl * v.value;
    [r_re, r_im]
}

/// The same residual written on complex samples of ψ and its derivatives.
#[inline]
pub fn residual_complex(
    psi: Complex64,
    psi_zeta: Complex64,
    psi_tt: Complex64,
    psi_ttt: Complex64,
    terms: &EquationTerms,
) -> Complex64 {
    let i = Complex64::i();
    i * (psi_zeta * terms.zeta + psi * terms.attenuation + psi_ttt * terms.dispersion3)
        + psi_tt * terms.dispersion2
        + psi * (terms.nonlinear * psi.norm_sqr())
}

/// Records `(r_R, r_I)` on `tape` from the network output nodes.
pub fn record_residual(tape: &mut Tape, out: [NodeId; 2], terms: &EquationTerms) -> [NodeId; 2] {
    let [u_node, v_node] = out;
    let u = tape.slot(u_node, Slot::Value);
    let v = tape.slot(v_node, Slot::Value);
    let uu = tape.mul(u, u);
    let vv = tape.mul(v, v);
    let mag = tape.add(uu, vv);
    let mag = tape.scale(mag, terms.nonlinear);

    let mut channel = |own: NodeId, own_node: NodeId, other: NodeId, other_node: NodeId, sign: f64| {
        let other_zeta = tape.slot(other_node, Slot::Zeta);
        let other_ttt = tape.slot(other_node, Slot::TTT);
        let own_tt = tape.slot(own_node, Slot::TT);
        let a = tape.scale(other_zeta, sign * terms.zeta);
        let b = tape.scale(other, sign * terms.attenuation);
        let c = tape.scale(own_tt, terms.dispersion2);
        let d = tape.scale(other_ttt, sign * terms.dispersion3);
        let e = tape.mul(mag, own);
        let ab = tape.add(a, b);
        let cd = tape.add(c, d);
        let abcd = tape.add(ab, cd);
        tape.add(abcd, e)
    };
    // r_R: own channel u, the ζ, attenuation and third-order terms act on v with a minus sign.
    let r_re = channel(u, u_node, v, v_node, -1.0);
    // r_I: own channel v, those terms act on u with a plus sign.
    let r_im = channel(v, v_node, u, u_node, 1.0);
    [r_re, r_im]
}

const D2: [f64; 7] = [1.0 / 90.0, -3.0 / 20.0, 3.0 / 2.0, -49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];
const D3: [f64; 9] = [
    -7.0 / 240.0,
    0.3,
    -169.0 / 120.0,
    61.0 / 30.0,
    0.0,
    -61.0 / 30.0,
    169.0 / 120.0,
    -0.3,
    7.0 / 240.0,
];
/// Fourth-order central first derivative.
const Z1: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];

fn stencil(row: &[Complex64], i: usize, weights: &[f64]) -> Complex64 {
    let half = weights.len() / 2;
    weights
        .iter()
        .enumerate()
        .map(|(k, w)| row[i + k - half] * *w)
        .sum()
}

/// Mean squared NLSE residual of a sampled field, with all derivatives
/// taken by central finite differences.
///
/// Derivatives in t use sixth-order stencils and ψ_ζ a fourth-order one, so
/// only points at least 4 samples from the t edges and 2 from the ζ edges
/// are included.
pub fn finite_difference_residual(field: &Field2D, coeffs: &NormalizedCoefficients) -> Result<f64> {
    let grid = &field.grid;
    if grid.t_points < 9 || grid.zeta_points < 5 {
        return Err(Error::DimensionMismatch(format!(
            "finite-difference residual needs at least 9x5 samples, got {}x{}",
            grid.t_points, grid.zeta_points
        )));
    }
    let terms = coeffs.terms();
    let (dt, dz) = (grid.dt(), grid.dzeta());
    let mut total = 0.0;
    let mut count = 0usize;
    for j in 2..grid.zeta_points - 2 {
        let row = field.row(j);
        let rows: [&[Complex64]; 5] = std::array::from_fn(|k| field.row(j + k - 2));
        for i in 4..grid.t_points - 4 {
            let psi_zeta: Complex64 =
                rows.iter().zip(Z1).map(|(r, w)| r[i] * w).sum::<Complex64>() / dz;
            let psi_tt = stencil(row, i, &D2) / (dt * dt);
            let psi_ttt = stencil(row, i, &D3) / (dt * dt * dt);
            let r = residual_complex(row[i], psi_zeta, psi_tt, psi_ttt, &terms);
            total += r.norm_sqr();
            count += 1;
        }
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_terms(rng: &mut ChaCha8Rng) -> EquationTerms {
        EquationTerms {
            zeta: 1.0,
            attenuation: rng.gen_range(0.0..2.0),
            dispersion2: rng.gen_range(-1.0..1.0),
            dispersion3: rng.gen_range(-1.0..1.0),
            nonlinear: rng.gen_range(0.0..3.0),
        }
    }

    fn random_jet(rng: &mut ChaCha8Rng) -> Jet {
        Jet {
            value: rng.gen_range(-1.0..1.0),
            d_t: rng.gen_range(-1.0..1.0),
            d_tt: rng.gen_range(-1.0..1.0),
            d_ttt: rng.gen_range(-1.0..1.0),
            d_zeta: rng.gen_range(-1.0..1.0),
        }
    }

    #[test]
    fn zero_field_zero_residual() {
        let terms = random_terms(&mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(nlse_residual(&[Jet::ZERO, Jet::ZERO], &terms), [0.0, 0.0]);
    }

    #[test]
    fn attenuation_solution_is_exact() {
        let coeffs = NormalizedCoefficients::dimensionless(0.8, 0.0, 0.0, 0.0, 1.5, 1.0);
        let terms = coeffs.terms();
        for zeta in [0.0, 0.3, 1.0] {
            let k = coeffs.kappa1 * coeffs.a2;
            let u = Jet { value: (-k * zeta).exp(), d_zeta: -k * (-k * zeta).exp(), ..Jet::ZERO };
            let [r, i] = nlse_residual(&[u, Jet::ZERO], &terms);
            assert!(r.abs() < 1e-10 && i.abs() < 1e-10);
        }
    }

    #[test]
    fn three_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut tape = Tape::new();
        for _ in 0..100 {
            let terms = random_terms(&mut rng);
            let jets = [random_jet(&mut rng), random_jet(&mut rng)];
            let real = nlse_residual(&jets, &terms);

            let c = |f: fn(&Jet) -> f64| Complex64::new(f(&jets[0]), f(&jets[1]));
            let z = residual_complex(c(|j| j.value), c(|j| j.d_zeta), c(|j| j.d_tt), c(|j| j.d_ttt), &terms);

            tape.clear();
            let u = tape.leaf(jets[0]);
            let v = tape.leaf(jets[1]);
            let [tr, ti] = record_residual(&mut tape, [u, v], &terms);

            for (a, b) in [(real[0], z.re), (real[1], z.im), (real[0], tape.value(tr).value), (real[1], tape.value(ti).value)] {
                assert!((a - b).abs() < 1e-13, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn fd_residual_of_exact_plane_wave_is_small() {
        // ψ = exp(i(k t - ω ζ)) solves the equation when
        // ω = d2 k² - d3 k³ - nl with no attenuation.
        let coeffs = NormalizedCoefficients::dimensionless(0.0, -0.5, 0.02, 0.3, 1.0, 1.0);
        let terms = coeffs.terms();
        let k = std::f64::consts::PI;
        let omega = terms.dispersion2 * k * k - terms.dispersion3 * k.powi(3) - terms.nonlinear;
        let grid = Grid::new(257, 201, 1.0).unwrap();
        let mut f = Field2D::zeros(grid);
        for j in 0..grid.zeta_points {
            for i in 0..grid.t_points {
                f.set(i, j, Complex64::from_polar(1.0, k * grid.t(i) - omega * grid.zeta(j)));
            }
        }
        let ms = finite_difference_residual(&f, &coeffs).unwrap();
        assert!(ms < 1e-8, "{ms}");

        let detuned = NormalizedCoefficients::dimensionless(0.0, -0.5, 0.02, 0.6, 1.0, 1.0);
        assert!(finite_difference_residual(&f, &detuned).unwrap() > 1e-2);
    }
}
