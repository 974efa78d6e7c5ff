//! Accuracy statistics, the MAC-count complexity model and a small timing
//! harness.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::Field2D;
use crate::io::fmt_f64;
use crate::physics::{FiberParams, ParameterSpace, PulseShape};
use crate::rbm::{CoefficientSet, EigenBasis};

fn comparable(predicted: &Field2D, oracle: &Field2D) -> Result<Field2D> {
    if predicted.grid.l_max != oracle.grid.l_max {
        return Err(Error::DimensionMismatch(format!(
            "fields cover different fiber lengths ({} m vs {} m)",
            predicted.grid.l_max, oracle.grid.l_max
        )));
    }
    let resampled = predicted.resample(&oracle.grid);
    if resampled.data().len() != oracle.data().len() {
        return Err(Error::DimensionMismatch("grid mismatch after interpolation".into()));
    }
    Ok(resampled)
}

/// Mean of `|ψ_pred − ψ_oracle|²` over the oracle grid, after bilinear
/// interpolation of the prediction onto it.
pub fn mse_vs_oracle(predicted: &Field2D, oracle: &Field2D) -> Result<f64> {
    let p = comparable(predicted, oracle)?;
    let n = oracle.data().len() as f64;
    Ok(p.data().iter().zip(oracle.data()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / n)
}

/// Mean of `(|ψ_pred| − |ψ_oracle|)²` over the oracle grid.
pub fn amplitude_mse(predicted: &Field2D, oracle: &Field2D) -> Result<f64> {
    let p = comparable(predicted, oracle)?;
    let n = oracle.data().len() as f64;
    Ok(p.data().iter().zip(oracle.data()).map(|(a, b)| (a.norm() - b.norm()).powi(2)).sum::<f64>() / n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEntry {
    pub index: usize,
    pub params: FiberParams,
    pub loss: f64,
    pub amplitude_mse: Option<f64>,
}

/// Per-parameter accuracy for one pulse shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub shape: PulseShape,
    pub entries: Vec<ErrorEntry>,
    pub mean_loss: f64,
    /// log10 of `mean_loss`.
    pub log10_mean_loss: f64,
    /// Lattice index with the largest loss.
    pub worst_index: usize,
    pub mean_amplitude_mse: Option<f64>,
    /// Share of the eigen points lying on the lattice boundary.
    pub boundary_fraction: f64,
}

/// Population mean in index order, so recomputing it from the exported
/// values gives the same bits.
fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Summarizes the fitted losses of every lattice point.
///
/// `amplitude` optionally maps lattice indices to amplitude MSE against the
/// reference solver.
pub fn loss_statistics(
    map: &BTreeMap<usize, CoefficientSet>,
    basis: &EigenBasis,
    space: &ParameterSpace,
    shape: PulseShape,
    amplitude: &BTreeMap<usize, f64>,
) -> Result<ErrorReport> {
    if map.is_empty() {
        return Err(invalid("no fitted parameters to summarize"));
    }
    let entries: Vec<ErrorEntry> = map
        .iter()
        .map(|(&index, set)| ErrorEntry {
            index,
            params: set.params,
            loss: set.loss,
            amplitude_mse: amplitude.get(&index).copied(),
        })
        .collect();
    let mean_loss = mean(entries.iter().map(|e| e.loss));
    let worst_index = entries
        .iter()
        .fold(None::<&ErrorEntry>, |w, e| match w {
            Some(w) if w.loss >= e.loss => Some(w),
            _ => Some(e),
        })
        .map(|e| e.index)
        .expect("non-empty");
    let mean_amplitude_mse =
        (!amplitude.is_empty()).then(|| mean(entries.iter().filter_map(|e| e.amplitude_mse)));
    let on_boundary = basis.indices().iter().filter(|&&i| space.is_boundary(i)).count();
    let boundary_fraction =
        if basis.is_empty() { 0.0 } else { on_boundary as f64 / basis.len() as f64 };
    Ok(ErrorReport {
        shape,
        entries,
        mean_loss,
        log10_mean_loss: mean_loss.log10(),
        worst_index,
        mean_amplitude_mse,
        boundary_fraction,
    })
}

impl ErrorReport {
    /// `index,alpha,beta2,n2,loss,amplitude_mse` (empty MSE when not measured).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,alpha,beta2,n2,loss,amplitude_mse")?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                e.index,
                fmt_f64(e.params.alpha),
                fmt_f64(e.params.beta2),
                fmt_f64(e.params.n2),
                fmt_f64(e.loss),
                e.amplitude_mse.map(fmt_f64).unwrap_or_default()
            )?;
        }
        Ok(())
    }

    /// Scatter data `alpha,beta2,n2,log10_loss`.
    pub fn write_scatter_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "alpha,beta2,n2,log10_loss")?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_f64(e.params.alpha),
                fmt_f64(e.params.beta2),
                fmt_f64(e.params.n2),
                fmt_f64(e.loss.log10())
            )?;
        }
        Ok(())
    }
}

/// Inputs of the MAC-count model.
///
/// `t_total = n · m_t · m_c` is the number of (condition, time, distance)
/// points to be produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComplexityModel {
    /// Number of transmission conditions.
    pub n: u64,
    pub m_t: u64,
    pub m_c: u64,
    /// Hidden layers.
    pub k: u64,
    /// Neurons per hidden layer.
    pub p: u64,
    pub n_b: u64,
    pub l_max: f64,
    /// Length of one split-step segment.
    pub l_u: f64,
    /// MACs of the linear step per segment.
    pub n_dispersion: u64,
    /// MACs of the nonlinear step per segment.
    pub n_nonlinear: u64,
}

impl Default for ComplexityModel {
    /// 1000 conditions on a 100 × 101 grid, four hidden layers of 100,
    /// ten eigen solutions, 100 km of fiber in 100 m segments.
    fn default() -> Self {
        Self::with_grid(1000, 100, 101, 4, 100, 10, 100e3, 100.0)
    }
}

impl ComplexityModel {
    /// Uses `n_dispersion = 6 m_t` and `n_nonlinear = 10 m_t`.
    #[allow(clippy::too_many_arguments)]
    pub fn with_grid(n: u64, m_t: u64, m_c: u64, k: u64, p: u64, n_b: u64, l_max: f64, l_u: f64) -> Self {
        Self { n, m_t, m_c, k, p, n_b, l_max, l_u, n_dispersion: 6 * m_t, n_nonlinear: 10 * m_t }
    }

    pub fn t_total(&self) -> u64 {
        self.n * self.m_t * self.m_c
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [self.n, self.m_t, self.m_c, self.k, self.p, self.n_b, self.n_dispersion, self.n_nonlinear];
        if counts.contains(&0) {
            return Err(invalid(format!("all counts must be positive: {self:?}")));
        }
        if !(self.l_u > 0.0 && self.l_max > 0.0) {
            return Err(invalid("lengths must be positive"));
        }
        if self.l_u > self.l_max {
            return Err(invalid(format!("segment length {} exceeds fiber length {}", self.l_u, self.l_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacCounts {
    pub c_ssfm: f64,
    pub c_f: f64,
    /// Network part of the reduced model: the eigen networks are evaluated
    /// once on the `m_t · m_c` grid.
    pub c_pf: f64,
    /// Cost of forming the combination, `2 N_b` per output point, summed
    /// over all `t_total` points. Reported separately from `c_pf`.
    pub c_pf_combination: f64,
}

impl MacCounts {
    pub fn pf_over_f(&self) -> f64 {
        self.c_pf / self.c_f
    }

    pub fn pf_over_ssfm(&self) -> f64 {
        self.c_pf / self.c_ssfm
    }
}

pub fn mac_counts(model: &ComplexityModel) -> Result<MacCounts> {
    model.validate()?;
    let m = model.m_t as u128 * model.m_c as u128;
    let t = model.t_total() as u128;
    let (k, p, n_b) = (model.k as u128, model.p as u128, model.n_b as u128);
    let per_network = 2 * p + (k - 1) * p * p;
    let c_f = t * per_network;
    let c_pf = m * n_b * per_network;
    let segments = model.l_max / model.l_u;
    let per_segment = 4.0 * model.m_t as f64 * (model.m_t as f64).log2()
        + model.n_dispersion as f64
        + model.n_nonlinear as f64;
    Ok(MacCounts {
        c_ssfm: t as f64 * segments * per_segment,
        c_f: c_f as f64,
        c_pf: c_pf as f64,
        c_pf_combination: (2 * n_b * t) as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub stage: String,
    pub samples: Vec<f64>,
    pub median: f64,
}

fn median(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// A named piece of work for [`timing_harness`].
pub type Stage<'a> = (&'a str, Box<dyn FnMut() + 'a>);

/// Runs every stage `runs` times and records wall-clock seconds.
pub fn timing_harness(stages: Vec<Stage<'_>>, runs: usize) -> Result<Vec<TimingRow>> {
    if runs == 0 {
        return Err(invalid("timing needs at least one run"));
    }
    Ok(stages
        .into_iter()
        .map(|(name, mut f)| {
            let samples: Vec<f64> = (0..runs)
                .map(|_| {
                    let start = Instant::now();
                    f();
                    start.elapsed().as_secs_f64()
                })
                .collect();
            TimingRow { stage: name.to_owned(), median: median(&samples), samples }
        })
        .collect())
}

pub fn write_timing_csv<W: Write>(mut w: W, rows: &[TimingRow]) -> Result<()> {
    writeln!(w, "stage,median_seconds,runs")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.stage, fmt_f64(r.median), r.samples.len())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_f64;
    use crate::physics::Grid;
    use num_complex::Complex64;

    fn field(grid: Grid, f: impl Fn(f64, f64) -> Complex64) -> Field2D {
        let mut out = Field2D::zeros(grid);
        for j in 0..grid.zeta_points {
            for i in 0..grid.t_points {
                out.set(i, j, f(grid.t(i), grid.zeta(j)));
            }
        }
        out
    }

    #[test]
    fn mse_basics() {
        let g = Grid::new(32, 9, 1e5).unwrap();
        let a = field(g, |t, z| Complex64::new((-(t * t) * 10.0).exp(), z));
        let b = field(g, |t, z| Complex64::new((-(t * t) * 10.0).exp() + 0.3, z));
        assert_eq!(mse_vs_oracle(&a, &a).unwrap(), 0.0);
        assert!((mse_vs_oracle(&a, &b).unwrap() - 0.09).abs() < 1e-15);
        assert_eq!(mse_vs_oracle(&a, &b).unwrap(), mse_vs_oracle(&b, &a).unwrap());
        let other = field(Grid::new(32, 9, 5e4).unwrap(), |_, _| Complex64::new(0.0, 0.0));
        assert!(mse_vs_oracle(&a, &other).is_err());
    }

    #[test]
    fn interpolated_prediction_compares_on_oracle_grid() {
        let coarse = Grid::new(17, 5, 1e5).unwrap();
        let fine = Grid::new(65, 17, 1e5).unwrap();
        let f = |t: f64, z: f64| Complex64::new(1.0 + 0.5 * t - 0.25 * z, t * z);
        assert!(mse_vs_oracle(&field(coarse, f), &field(fine, f)).unwrap() < 1e-28);
        assert!(amplitude_mse(&field(coarse, f), &field(fine, f)).unwrap() < 1e-3);
    }

    fn set(params: FiberParams, loss: f64) -> CoefficientSet {
        CoefficientSet { coefficients: vec![1.0], params, loss, iterations: 0 }
    }

    #[test]
    fn statistics_and_csv_agree() {
        let space = ParameterSpace::default();
        let mut map = BTreeMap::new();
        for (k, loss) in [(0usize, 1e-4), (55, 3.3e-5), (999, 2.7e-3), (456, 1.0 / 7.0)] {
            map.insert(k, set(space.point(k), loss));
        }
        let basis = EigenBasis::new(1).unwrap();
        let report = loss_statistics(&map, &basis, &space, PulseShape::Gaussian, &BTreeMap::new()).unwrap();
        assert_eq!(report.worst_index, 456);
        let losses: Vec<f64> = report.entries.iter().map(|e| e.loss).collect();
        let (lo, hi) = (losses.iter().cloned().fold(f64::MAX, f64::min), losses.iter().cloned().fold(0.0, f64::max));
        assert!(lo <= report.mean_loss && report.mean_loss <= hi);

        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let reread: Vec<f64> = text.lines().skip(1).map(|l| parse_f64(l.split(',').nth(4).unwrap()).unwrap()).collect();
        let (sum, n) = reread.iter().fold((0.0, 0), |(s, n), v| (s + v, n + 1));
        assert_eq!((sum / n as f64).to_bits(), report.mean_loss.to_bits());

        let mut scatter = Vec::new();
        report.write_scatter_csv(&mut scatter).unwrap();
        assert!(String::from_utf8(scatter).unwrap().starts_with("alpha,beta2,n2,log10_loss\n"));
    }

    #[test]
    fn single_parameter_mean_is_its_loss() {
        let space = ParameterSpace::default();
        let map = BTreeMap::from([(3usize, set(space.point(3), 0.0123))]);
        let r = loss_statistics(&map, &EigenBasis::new(1).unwrap(), &space, PulseShape::Sech, &BTreeMap::new()).unwrap();
        assert_eq!(r.mean_loss, 0.0123);
    }

    #[test]
    fn defaults_give_one_percent_of_the_network_model() {
        let c = mac_counts(&ComplexityModel::default()).unwrap();
        assert_eq!(c.pf_over_f(), 0.01);
        let r = c.pf_over_ssfm();
        assert!(r > 1.13e-4 / 3.0 && r < 1.13e-4 * 3.0, "{r}");
    }

    #[test]
    fn degenerate_and_linear_scaling() {
        let mut m = ComplexityModel::default();
        m.n_b = m.n;
        assert_eq!(mac_counts(&m).unwrap().pf_over_f(), 1.0);

        let base = ComplexityModel::default();
        let c1 = mac_counts(&base).unwrap();
        let c2 = mac_counts(&ComplexityModel { n_b: 2 * base.n_b, ..base }).unwrap();
        assert_eq!(c2.c_pf, 2.0 * c1.c_pf);
        let c3 = mac_counts(&ComplexityModel { n: 3 * base.n, ..base }).unwrap();
        assert_eq!(c3.c_f, 3.0 * c1.c_f);
    }

    #[test]
    fn segment_longer_than_fiber_rejected() {
        let m = ComplexityModel { l_u: 2e5, ..ComplexityModel::default() };
        assert!(mac_counts(&m).is_err());
    }

    #[test]
    fn timing_single_run_and_csv() {
        let mut counter = 0;
        let rows = timing_harness(vec![("count", Box::new(|| counter += 1))], 1).unwrap();
        assert_eq!(rows[0].samples.len(), 1);
        assert_eq!(rows[0].median, rows[0].samples[0]);
        let mut buf = Vec::new();
        write_timing_csv(&mut buf, &rows).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("stage,median_seconds,runs\ncount,"));
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), 2.5);
        assert!(timing_harness(vec![], 0).is_err());
    }
}
