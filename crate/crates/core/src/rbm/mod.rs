//! Reduced-basis layer on top of the eigen snapshots.
//!
//! A prediction at any parameter point is the real linear combination
//! `Φ = Σ_m c_m (ψ_Rm + i ψ_Im)` of the stored snapshot fields. The
//! coefficients are fitted by plain gradient descent on the same
//! residual-plus-initial-condition loss the networks were trained on, but
//! evaluated with the target point's coefficients and the stored derivative
//! arrays, so no network is evaluated.

mod fit;
mod greedy;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use fit::{fit_coefficients, rbm_gradient, rbm_loss, FitConfig, RbmProblem};
pub use greedy::{greedy_build, greedy_build_with, predict, FitOnDemand, GreedyConfig, GreedyReport, GreedyRound};

use crate::error::{invalid, Error, Result};
use crate::field::Field2D;
use crate::physics::{FiberParams, Grid};
use crate::pinn::{DerivativeFields, EigenSnapshot};

/// Ordered eigen snapshots and the lattice indices they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    snapshots: Vec<EigenSnapshot>,
    indices: Vec<usize>,
    capacity: usize,
}

impl EigenBasis {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(invalid("basis capacity must be at least 1"));
        }
        Ok(Self { snapshots: Vec::new(), indices: Vec::new(), capacity })
    }

    pub fn push(&mut self, index: usize, snapshot: EigenSnapshot) -> Result<()> {
        if self.indices.contains(&index) {
            return Err(invalid(format!("lattice index {index} is already in the basis")));
        }
        if self.snapshots.len() == self.capacity {
            return Err(invalid(format!("basis is full ({} snapshots)", self.capacity)));
        }
        if let Some(first) = self.snapshots.first() {
            if first.grid() != snapshot.grid() {
                return Err(Error::DimensionMismatch("snapshot grid differs from the basis grid".into()));
            }
        }
        snapshot.validate()?;
        self.snapshots.push(snapshot);
        self.indices.push(index);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn snapshots(&self) -> &[EigenSnapshot] {
        &self.snapshots
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.contains(&index)
    }

    pub fn position(&self, index: usize) -> Option<usize> {
        self.indices.iter().position(|&i| i == index)
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.snapshots.first().map(|s| s.grid())
    }
}

/// Fitted coefficients for one target parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub coefficients: Vec<f64>,
    pub params: FiberParams,
    pub loss: f64,
    pub iterations: usize,
}

fn check_len(basis: &EigenBasis, c: &[f64]) -> Result<()> {
    if basis.is_empty() {
        return Err(invalid("empty basis"));
    }
    if c.len() != basis.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for a basis of {}",
            c.len(),
            basis.len()
        )));
    }
    Ok(())
}

/// `Σ_m c_m` times every stored array of snapshot m.
pub fn combine_fields(basis: &EigenBasis, c: &[f64]) -> Result<DerivativeFields> {
    check_len(basis, c)?;
    let grid = *basis.grid().expect("non-empty basis");
    let mix = |pick: fn(&DerivativeFields) -> &Vec<Complex64>| -> Vec<Complex64> {
        (0..grid.len())
            .map(|k| basis.snapshots.iter().zip(c).map(|(s, cm)| pick(&s.fields)[k] * *cm).sum())
            .collect()
    };
    Ok(DerivativeFields {
        grid,
        psi: mix(|f| &f.psi),
        zeta: mix(|f| &f.zeta),
        tt: mix(|f| &f.tt),
        ttt: mix(|f| &f.ttt),
    })
}

/// The combined field `Φ = Σ_m c_m ψ_m`.
pub fn combine(basis: &EigenBasis, c: &[f64]) -> Result<Field2D> {
    let fields = combine_fields(basis, c)?;
    Field2D::from_data(fields.grid, fields.psi)
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn indicator_combination_copies_snapshot() {
        let basis = random_basis(3, 1);
        let f = combine_fields(&basis, &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(f, basis.snapshots()[1].fields);
        let zero = combine(&basis, &[0.0; 3]).unwrap();
        assert!(zero.data().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn halves_of_identical_snapshots() {
        let one = random_basis(1, 4);
        let mut two = EigenBasis::new(2).unwrap();
        two.push(0, one.snapshots()[0].clone()).unwrap();
        two.push(1, one.snapshots()[0].clone()).unwrap();
        let f = combine_fields(&two, &[0.5, 0.5]).unwrap();
        for (a, b) in f.psi.iter().zip(&one.snapshots()[0].fields.psi) {
            assert!((a - b).norm() <= 1e-15 * b.norm().max(1.0));
        }
    }

    #[test]
    fn combination_is_linear() {
        let basis = random_basis(4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let a: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let (fa, fb, fs) = (
                combine_fields(&basis, &a).unwrap(),
                combine_fields(&basis, &b).unwrap(),
                combine_fields(&basis, &sum).unwrap(),
            );
            for k in 0..fs.psi.len() {
                assert!((fa.psi[k] + fb.psi[k] - fs.psi[k]).norm() < 1e-12);
                assert!((fa.ttt[k] + fb.ttt[k] - fs.ttt[k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn basis_rules() {
        let basis = random_basis(2, 3);
        assert!(combine(&basis, &[1.0]).is_err());
        let mut b = EigenBasis::new(2).unwrap();
        b.push(5, basis.snapshots()[0].clone()).unwrap();
        assert!(b.push(5, basis.snapshots()[1].clone()).is_err());
        b.push(6, basis.snapshots()[1].clone()).unwrap();
        assert!(b.push(7, basis.snapshots()[1].clone()).is_err());
        assert!(EigenBasis::new(0).is_err());
        assert!(combine(&EigenBasis::new(1).unwrap(), &[]).is_err());
    }
}
