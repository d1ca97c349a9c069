//! Published reference matrices of the four-port prototype antenna and the
//! stand-in calibration dataset generated from them.
//!
//! The raw field-simulation data of the prototype is not available. The
//! canonical stand-in dataset is the wavefield reconstruction `H Ψ(ϑ)` from
//! the published 4×13 sampling matrix, evaluated on a uniform grid over the
//! field of view.

use num_complex::Complex64;
use serde::Deserialize;

use crate::ait::{partition_fov, AitModel};
use crate::emf::EmfDataset;
use crate::grid::AngleGrid;
use crate::ula::{Axis, VirtualUlaConfig};
use crate::wm::{basis_matrix, WmModel};
use crate::{CMatrix, Error, Result};

const AIT_JSON: &str = include_str!("../fixtures/ait_mapping.json");
const WM_JSON: &str = include_str!("../fixtures/wm_sampling.json");

/// Label attached to datasets produced by [`synthesize_dataset`].
pub const SYNTHETIC_LABEL: &str = "RHCP (WM reconstruction of the 4-port prototype)";

/// Parses a printed complex literal such as `-0.3379929-0.02271694i`.
pub fn parse_complex(text: &str) -> Result<Complex64> {
    let s = text.trim();
    let body = s
        .strip_suffix('i')
        .or_else(|| s.strip_suffix('j'))
        .ok_or_else(|| Error::Ingest(format!("complex literal {s:?} lacks an imaginary unit")))?;
    // Split at the last sign that is not the leading one or an exponent sign.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| {
            (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E')
        })
        .ok_or_else(|| Error::Ingest(format!("cannot split complex literal {s:?}")))?;
    let parse = |t: &str| {
        t.parse::<f64>()
            .map_err(|e| Error::Ingest(format!("bad number {t:?} in {s:?}: {e}")))
    };
    Ok(Complex64::new(parse(&body[..split])?, parse(&body[split..])?))
}

/// Inverse of [`parse_complex`] using shortest round-trip formatting.
pub fn format_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}i", z.re, sign, z.im.abs())
}

#[derive(Deserialize)]
struct AitRaw {
    element_count: usize,
    spacing: f64,
    axis: Axis,
    sector_size_deg: f64,
    overlap_deg: f64,
    matrices: Vec<Vec<Vec<String>>>,
}

#[derive(Deserialize)]
struct WmRaw {
    ports: usize,
    coefficients: usize,
    matrix: Vec<Vec<String>>,
}

/// The eleven published 4×4 sector mapping matrices together with the
/// virtual-array setup they belong to.
#[derive(Debug, Clone)]
pub struct AitFixture {
    pub ula: VirtualUlaConfig,
    pub sector_size: f64,
    pub overlap: f64,
    pub matrices: Vec<CMatrix>,
    printed: Vec<Vec<Vec<String>>>,
}

impl AitFixture {
    /// Printed text of `G_sector[row, col]` (all indices 1-based).
    pub fn printed(&self, sector: usize, row: usize, col: usize) -> Option<&str> {
        self.printed
            .get(sector.checked_sub(1)?)?
            .get(row.checked_sub(1)?)?
            .get(col.checked_sub(1)?)
            .map(String::as_str)
    }

    /// Model built from the published matrices, overlaps resolved by the
    /// nearest-sector rule (no calibration data involved).
    pub fn model(&self) -> Result<AitModel> {
        let plan = partition_fov(self.sector_size, self.overlap)?;
        AitModel::from_matrices(self.ula, plan, self.matrices.clone(), None)
    }
}

/// The published 4×13 sampling matrix, columns in ascending `u = -6…6`.
#[derive(Debug, Clone)]
pub struct WmFixture {
    pub model: WmModel,
    printed: Vec<Vec<String>>,
}

impl WmFixture {
    /// Printed text of `H[row, col]` (1-based).
    pub fn printed(&self, row: usize, col: usize) -> Option<&str> {
        self.printed
            .get(row.checked_sub(1)?)?
            .get(col.checked_sub(1)?)
            .map(String::as_str)
    }
}

fn parse_matrix(rows: &[Vec<String>], nrows: usize, ncols: usize) -> Result<CMatrix> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Schema(format!("fixture matrix is not {nrows}x{ncols}")));
    }
    let mut m = CMatrix::zeros(nrows, ncols);
    for (i, r) in rows.iter().enumerate() {
        for (j, t) in r.iter().enumerate() {
            m[(i, j)] = parse_complex(t)?;
        }
    }
    Ok(m)
}

pub fn ait_fixture() -> Result<AitFixture> {
    let raw: AitRaw = serde_json::from_str(AIT_JSON)?;
    let ula = VirtualUlaConfig::new(raw.element_count, raw.spacing, raw.axis)?;
    let matrices = raw
        .matrices
        .iter()
        .map(|m| parse_matrix(m, raw.element_count, m.first().map_or(0, Vec::len)))
        .collect::<Result<Vec<_>>>()?;
    Ok(AitFixture {
        ula,
        sector_size: raw.sector_size_deg,
        overlap: raw.overlap_deg,
        matrices,
        printed: raw.matrices,
    })
}

pub fn wm_fixture() -> Result<WmFixture> {
    let raw: WmRaw = serde_json::from_str(WM_JSON)?;
    let h = parse_matrix(&raw.matrix, raw.ports, raw.coefficients)?;
    Ok(WmFixture {
        model: WmModel::new(h)?,
        printed: raw.matrix,
    })
}

/// The published wavefield model of the prototype.
pub fn reference_wm_model() -> WmModel {
    wm_fixture().expect("bundled WM fixture is valid").model
}

/// Canonical stand-in calibration dataset: `H Ψ(ϑ)` on the field-of-view
/// grid with the given step (180 must be divisible by it).
pub fn synthesize_dataset(grid_step: f64) -> Result<EmfDataset> {
    let grid = AngleGrid::fov(grid_step)?;
    let model = reference_wm_model();
    let psi = basis_matrix(grid.angles(), model.coefficient_count())?;
    let e = model.sampling_matrix() * psi;
    EmfDataset::new(grid, e, SYNTHETIC_LABEL)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_printed_literals() {
        let z = parse_complex("-0.3379929-0.02271694i").unwrap();
        assert_eq!(z, Complex64::new(-0.3379929, -0.02271694));
        let z = parse_complex("-1.825524+0.00023299i").unwrap();
        assert_eq!(z, Complex64::new(-1.825524, 0.00023299));
        let z = parse_complex("1e-3-2E+1i").unwrap();
        assert_eq!(z, Complex64::new(1e-3, -20.0));
        assert!(parse_complex("1.0").is_err());
        assert!(parse_complex("abc+1i").is_err());
    }

    #[test]
    fn fixture_shapes() {
        let a = ait_fixture().unwrap();
        assert_eq!(a.matrices.len(), 11);
        assert!(a.matrices.iter().all(|g| g.shape() == (4, 4)));
        let w = wm_fixture().unwrap();
        assert_eq!(w.model.sampling_matrix().shape(), (4, 13));
    }

    #[test]
    fn synthesized_grid_sizes() {
        let ds = synthesize_dataset(5.0).unwrap();
        assert_eq!((ds.port_count(), ds.grid().len()), (4, 37));
        assert_eq!(synthesize_dataset(1.0).unwrap().grid().len(), 181);
        assert!(matches!(synthesize_dataset(7.0), Err(Error::Arg(_))));
    }
}
