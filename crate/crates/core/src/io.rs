//! Artifact persistence: number formatting, CSV tables and the basis
//! directory.
//!
//! A basis directory holds `manifest.json` and four field files per eigen
//! solution (`eigen_<index>_psi.bin`, `_psi_zeta.bin`, `_psi_tt.bin`,
//! `_psi_ttt.bin`) in the [`Field2D`] binary layout.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::physics::{FiberParams, Grid, NormalizedCoefficients, ParameterSpace, PulseSpec};
use crate::pinn::{DerivativeFields, EigenSnapshot};
use crate::rbm::{CoefficientSet, EigenBasis};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Shortest-safe decimal form: 17 significant digits, so parsing the text
/// back gives the identical `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Format(format!("not a number: {s:?}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::Format(format!("not an index: {s:?}")))
}

/// Data lines of a CSV stream after checking the header.
fn csv_rows<R: Read>(r: R, header_prefix: &str) -> Result<Vec<Vec<String>>> {
    let mut lines = BufReader::new(r).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if !header.starts_with(header_prefix) {
        return Err(Error::Format(format!("expected header starting with {header_prefix:?}, got {header:?}")));
    }
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if !line.trim().is_empty() {
            rows.push(line.split(',').map(str::to_owned).collect());
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeRow {
    pub index: usize,
    pub alpha: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub n2: f64,
}

pub fn write_lattice_csv<W: Write>(mut w: W, space: &ParameterSpace) -> Result<()> {
    space.validate()?;
    writeln!(w, "index,alpha,beta2,beta3,n2")?;
    for k in 0..space.size() {
        let p = space.point(k);
        writeln!(w, "{k},{},{},{},{}", fmt_f64(p.alpha), fmt_f64(p.beta2), fmt_f64(p.beta3), fmt_f64(p.n2))?;
    }
    Ok(())
}

pub fn read_lattice_csv<R: Read>(r: R) -> Result<Vec<LatticeRow>> {
    csv_rows(r, "index,alpha,beta2,beta3,n2")?
        .iter()
        .map(|row| {
            if row.len() != 5 {
                return Err(Error::Format(format!("lattice row has {} fields", row.len())));
            }
            Ok(LatticeRow {
                index: parse_usize(&row[0])?,
                alpha: parse_f64(&row[1])?,
                beta2: parse_f64(&row[2])?,
                beta3: parse_f64(&row[3])?,
                n2: parse_f64(&row[4])?,
            })
        })
        .collect()
}

/// `index,c_1..c_p,loss`, one row per fitted lattice point.
pub fn write_coefficient_csv<W: Write>(mut w: W, map: &BTreeMap<usize, CoefficientSet>) -> Result<()> {
    let p = map.values().map(|s| s.coefficients.len()).max().unwrap_or(0);
    let cols: Vec<String> = (1..=p).map(|m| format!("c_{m}")).collect();
    writeln!(w, "index,{}{}loss", cols.join(","), if p > 0 { "," } else { "" })?;
    for (idx, set) in map {
        let mut line = idx.to_string();
        for c in &set.coefficients {
            line.push(',');
            line.push_str(&fmt_f64(*c));
        }
        line.push(',');
        line.push_str(&fmt_f64(set.loss));
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Rows of `(index, coefficients, loss)`.
pub fn read_coefficient_csv<R: Read>(r: R) -> Result<Vec<(usize, Vec<f64>, f64)>> {
    csv_rows(r, "index,")?
        .iter()
        .map(|row| {
            if row.len() < 2 {
                return Err(Error::Format("coefficient row too short".into()));
            }
            let values = row[1..].iter().map(|s| parse_f64(s)).collect::<Result<Vec<_>>>()?;
            let (loss, coeffs) = values.split_last().expect("at least one value");
            Ok((parse_usize(&row[0])?, coeffs.to_vec(), *loss))
        })
        .collect()
}

/// Rows of `(epoch, loss)` from a loss-history CSV.
pub fn read_loss_csv<R: Read>(r: R) -> Result<Vec<(usize, f64)>> {
    csv_rows(r, "epoch,loss")?
        .iter()
        .map(|row| match row.as_slice() {
            [e, l] => Ok((parse_usize(e)?, parse_f64(l)?)),
            _ => Err(Error::Format("loss row must have 2 fields".into())),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub params: FiberParams,
    pub coeffs: NormalizedCoefficients,
    pub loss: f64,
    pub epochs: usize,
}

/// Describes a basis directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisManifest {
    pub seed: u64,
    pub n_b: usize,
    pub layers: Vec<usize>,
    pub pulse: PulseSpec,
    pub grid: Grid,
    pub space: ParameterSpace,
    pub entries: Vec<ManifestEntry>,
}

const FIELD_SUFFIXES: [&str; 4] = ["psi", "psi_zeta", "psi_tt", "psi_ttt"];

fn field_path(dir: &Path, index: usize, suffix: &str) -> std::path::PathBuf {
    dir.join(format!("eigen_{index:04}_{suffix}.bin"))
}

fn write_field_file(path: &Path, grid: Grid, data: &[Complex64]) -> Result<()> {
    let field = Field2D::from_data(grid, data.to_vec())?;
    let mut w = BufWriter::new(File::create(path)?);
    field.write_binary(&mut w)?;
    w.flush()?;
    Ok(())
}

fn read_field_file(path: &Path, grid: &Grid) -> Result<Vec<Complex64>> {
    let file = File::open(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let field = Field2D::read_binary(BufReader::new(file), grid.l_max)?;
    if field.grid != *grid {
        return Err(Error::Format(format!("{}: grid differs from the manifest", path.display())));
    }
    Ok(field.data().to_vec())
}

/// Writes the four field files of one snapshot.
pub fn write_snapshot(dir: &Path, index: usize, snap: &EigenSnapshot) -> Result<()> {
    fs::create_dir_all(dir)?;
    let f = &snap.fields;
    for (suffix, data) in FIELD_SUFFIXES.iter().zip([&f.psi, &f.zeta, &f.tt, &f.ttt]) {
        write_field_file(&field_path(dir, index, suffix), f.grid, data)?;
    }
    Ok(())
}

pub fn manifest_entry(index: usize, snap: &EigenSnapshot) -> ManifestEntry {
    ManifestEntry { index, params: snap.params, coeffs: snap.coeffs, loss: snap.loss, epochs: snap.epochs }
}

pub fn write_manifest(dir: &Path, manifest: &BasisManifest) -> Result<()> {
    fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Format(e.to_string()))?;
    // write then rename so an interrupted run never leaves a half-written manifest
    let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
    fs::write(&tmp, text + "\n")?;
    fs::rename(tmp, dir.join(MANIFEST_FILE))?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<BasisManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("corrupt manifest {}: {e}", path.display())))
}

/// Loads every snapshot listed in the manifest.
pub fn read_basis(dir: &Path) -> Result<(EigenBasis, BasisManifest)> {
    let manifest = read_manifest(dir)?;
    let mut basis = EigenBasis::new(manifest.n_b.max(manifest.entries.len()).max(1))?;
    for e in &manifest.entries {
        let mut arrays = FIELD_SUFFIXES
            .iter()
            .map(|s| read_field_file(&field_path(dir, e.index, s), &manifest.grid))
            .collect::<Result<Vec<_>>>()?
            .into_iter();
        let mut next = || arrays.next().expect("four arrays");
        let fields = DerivativeFields { grid: manifest.grid, psi: next(), zeta: next(), tt: next(), ttt: next() };
        let snap = EigenSnapshot { params: e.params, coeffs: e.coeffs, fields, loss: e.loss, epochs: e.epochs };
        basis.push(e.index, snap).map_err(|err| Error::Format(format!("manifest entry {}: {err}", e.index)))?;
    }
    Ok((basis, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{Axis, PulseShape};
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn formatted_floats_round_trip(x in proptest::num::f64::ANY) {
            let back = parse_f64(&fmt_f64(x)).unwrap();
            prop_assert!(back == x || (x.is_nan() && back.is_nan()));
            if x == 0.0 { prop_assert_eq!(back.is_sign_negative(), x.is_sign_negative()); }
        }
    }

    #[test]
    fn lattice_csv_round_trips() {
        let space = ParameterSpace { alpha: Axis::new(0.0, 1e-5, 2), ..ParameterSpace::default() };
        let mut buf = Vec::new();
        write_lattice_csv(&mut buf, &space).unwrap();
        let rows = read_lattice_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 200);
        for row in rows {
            let p = space.point(row.index);
            assert_eq!((row.alpha, row.beta2, row.beta3, row.n2), (p.alpha, p.beta2, p.beta3, p.n2));
        }
        let err = read_lattice_csv(&b"index,alpha,beta2,beta3,n2\n0,1\n"[..]).unwrap_err();
        assert!(err.to_string().contains("fields"));
    }

    #[test]
    fn coefficient_csv_round_trips() {
        let params = ParameterSpace::default().point(0);
        let mut map = BTreeMap::new();
        map.insert(3, CoefficientSet { coefficients: vec![0.1, -2.5e-7], params, loss: 1.0 / 3.0, iterations: 9 });
        map.insert(7, CoefficientSet { coefficients: vec![1.0, 0.0], params, loss: 1e-300, iterations: 1 });
        let mut buf = Vec::new();
        write_coefficient_csv(&mut buf, &map).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("index,c_1,c_2,loss\n"));
        let rows = read_coefficient_csv(buf.as_slice()).unwrap();
        assert_eq!(rows[0], (3, vec![0.1, -2.5e-7], 1.0 / 3.0));
        assert_eq!(rows[1], (7, vec![1.0, 0.0], 1e-300));
    }

    #[test]
    fn basis_directory_round_trips_and_rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::new(6, 4, 1e5).unwrap();
        let space = ParameterSpace::default();
        let pulse = PulseSpec::single(PulseShape::Sech);
        let mut basis = EigenBasis::new(3).unwrap();
        let mut entries = Vec::new();
        for (m, idx) in [12usize, 500].into_iter().enumerate() {
            let mut fields = DerivativeFields::zeros(grid);
            for (k, z) in fields.ttt.iter_mut().enumerate() {
                *z = Complex64::new(k as f64 + m as f64, -(k as f64) / 7.0);
            }
            let params = space.point(idx);
            let coeffs = crate::physics::derive_coefficients(&params, &pulse, &grid).unwrap();
            let snap = EigenSnapshot { params, coeffs, fields, loss: 0.25 + m as f64, epochs: 10 };
            write_snapshot(dir.path(), idx, &snap).unwrap();
            entries.push(manifest_entry(idx, &snap));
            basis.push(idx, snap).unwrap();
        }
        let manifest = BasisManifest { seed: 1, n_b: 3, layers: vec![2, 4, 2], pulse, grid, space, entries };
        write_manifest(dir.path(), &manifest).unwrap();

        let (back, m) = read_basis(dir.path()).unwrap();
        assert_eq!(m, manifest);
        assert_eq!(back, basis);

        fs::write(dir.path().join(MANIFEST_FILE), "{ not json").unwrap();
        assert!(matches!(read_basis(dir.path()), Err(Error::Format(_))));
    }
}
