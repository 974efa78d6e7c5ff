//! Complex fields sampled on a `(t, ζ)` grid.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! u32 t_points
//! u32 zeta_points
//! f64 re, f64 im   × t_points·zeta_points, row-major with t fastest
//! ```

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::physics::{FiberParams, Grid};

#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    pub grid: Grid,
    /// Parameters that produced the field, when known.
    pub params: Option<FiberParams>,
    data: Vec<Complex64>,
}

impl Field2D {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, params: None, data: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_data(grid: Grid, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "field has {} samples, grid {}x{} needs {}",
                data.len(),
                grid.t_points,
                grid.zeta_points,
                grid.len()
            )));
        }
        Ok(Self { grid, params: None, data })
    }

    pub fn with_params(mut self, params: FiberParams) -> Self {
        self.params = Some(params);
        self
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[self.grid.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        let k = self.grid.index(i, j);
        self.data[k] = v;
    }

    pub fn row(&self, j: usize) -> &[Complex64] {
        let n = self.grid.t_points;
        &self.data[j * n..(j + 1) * n]
    }

    pub fn set_row(&mut self, j: usize, values: &[Complex64]) {
        let n = self.grid.t_points;
        self.data[j * n..(j + 1) * n].copy_from_slice(values);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Energy Σ|ψ|²Δt of row `j`.
    pub fn row_energy(&self, j: usize) -> f64 {
        self.row(j).iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dt()
    }

    /// Bilinear interpolation onto `target`. Both grids cover the same
    /// normalized rectangle, so only the sample counts differ.
    pub fn resample(&self, target: &Grid) -> Field2D {
        if *target == self.grid {
            return self.clone();
        }
        let src = &self.grid;
        let locate = |x: f64, lo: f64, step: f64, n: usize| -> (usize, f64) {
            let pos = ((x - lo) / step).clamp(0.0, (n - 1) as f64);
            let k = (pos.floor() as usize).min(n - 2);
            (k, pos - k as f64)
        };
        let ts: Vec<(usize, f64)> = target
            .t_values()
            .into_iter()
            .map(|t| locate(t, -1.0, src.dt(), src.t_points))
            .collect();
        let mut out = Field2D::zeros(*target);
        out.params = self.params;
        for j in 0..target.zeta_points {
            let (zj, wz) = locate(target.zeta(j), 0.0, src.dzeta(), src.zeta_points);
            for (i, &(ti, wt)) in ts.iter().enumerate() {
                let a = self.get(ti, zj) * (1.0 - wt) + self.get(ti + 1, zj) * wt;
                let b = self.get(ti, zj + 1) * (1.0 - wt) + self.get(ti + 1, zj + 1) * wt;
                out.set(i, j, a * (1.0 - wz) + b * wz);
            }
        }
        out
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.grid.t_points as u32).to_le_bytes())?;
        w.write_all(&(self.grid.zeta_points as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 16);
        for z in &self.data {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Reads the binary layout. `l_max` is not stored in the file and must
    /// be supplied by the caller.
    pub fn read_binary<R: Read>(mut r: R, l_max: f64) -> Result<Self> {
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let t_points = u32::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let zeta_points = u32::from_le_bytes(word) as usize;
        let grid = Grid::new(t_points, zeta_points, l_max)
            .map_err(|e| Error::Format(format!("bad field header: {e}")))?;
        let mut bytes = vec![0u8; grid.len() * 16];
        r.read_exact(&mut bytes)
            .map_err(|e| Error::Format(format!("truncated field file: {e}")))?;
        let data = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        Field2D::from_data(grid, data)
    }

    /// CSV with header `t,zeta,re,im,abs`, one row per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,zeta,re,im,abs")?;
        for j in 0..self.grid.zeta_points {
            let zeta = self.grid.zeta(j);
            for i in 0..self.grid.t_points {
                let z = self.get(i, j);
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    fmt_f64(self.grid.t(i)),
                    fmt_f64(zeta),
                    fmt_f64(z.re),
                    fmt_f64(z.im),
                    fmt_f64(z.norm())
                )?;
            }
        }
        Ok(())
    }
}
