//! Wavefield modeling: the antenna response is expanded on a truncated
//! Fourier basis, `a(θ) = H Ψ(θ)` with `[Ψ(θ)]_u = e^{juθ}/√(2π)` for
//! `u = -(U-1)/2 … (U-1)/2`, and the M×U sampling matrix `H` is fitted by
//! least squares to calibration data.

use std::f64::consts::PI;

use log::{debug, warn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::emf::EmfDataset;
use crate::grid::to_rad;
use crate::linalg::{least_squares, Inversion};
use crate::{AntennaResponse, CMatrix, CVector, Error, Result};

/// Gram condition numbers above this are logged as a warning.
pub const CONDITION_WARN: f64 = 1e8;

fn check_odd(coefficients: usize) -> Result<()> {
    if coefficients == 0 || coefficients.is_multiple_of(2) {
        return Err(Error::Arg(format!(
            "coefficient count must be odd and positive, got {coefficients}"
        )));
    }
    Ok(())
}

/// Basis indices `u` in ascending order.
pub fn basis_indices(coefficients: usize) -> Result<Vec<i64>> {
    check_odd(coefficients)?;
    let half = (coefficients as i64 - 1) / 2;
    Ok((-half..=half).collect())
}

/// `Ψ(θ)` for one angle.
pub fn fourier_basis(theta_deg: f64, coefficients: usize) -> Result<CVector> {
    let u = basis_indices(coefficients)?;
    Ok(basis_column(&u, to_rad(theta_deg)))
}

/// U×P matrix `Ψ(ϑ)`.
pub fn basis_matrix(angles_deg: &[f64], coefficients: usize) -> Result<CMatrix> {
    let u = basis_indices(coefficients)?;
    let mut psi = CMatrix::zeros(coefficients, angles_deg.len());
    for (p, &a) in angles_deg.iter().enumerate() {
        psi.set_column(p, &basis_column(&u, to_rad(a)));
    }
    Ok(psi)
}

fn basis_column(u: &[i64], theta_rad: f64) -> CVector {
    let norm = 1.0 / (2.0 * PI).sqrt();
    CVector::from_iterator(
        u.len(),
        u.iter()
            .map(|&k| Complex64::from_polar(norm, k as f64 * theta_rad)),
    )
}

/// Fitted wavefield model.
#[derive(Debug, Clone, PartialEq)]
pub struct WmModel {
    sampling: CMatrix,
}

/// Diagnostics from [`fit_wm`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WmFitReport {
    pub coefficients: usize,
    pub rank: usize,
    pub gram_condition: f64,
    pub approximation_error: f64,
}

impl WmModel {
    /// Wraps an M×U sampling matrix; U must be odd.
    pub fn new(sampling: CMatrix) -> Result<Self> {
        check_odd(sampling.ncols())?;
        if sampling.nrows() == 0 {
            return Err(Error::Arg("sampling matrix needs at least one port".into()));
        }
        if sampling.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Arg("non-finite sampling matrix".into()));
        }
        Ok(Self { sampling })
    }

    /// M×U sampling matrix, columns in ascending `u`.
    pub fn sampling_matrix(&self) -> &CMatrix {
        &self.sampling
    }

    pub fn coefficient_count(&self) -> usize {
        self.sampling.ncols()
    }

    pub fn basis_indices(&self) -> Vec<i64> {
        basis_indices(self.coefficient_count()).expect("odd by construction")
    }

    /// `H Ψ(θ)`, defined for every θ and 360°-periodic.
    pub fn interpolate(&self, theta_deg: f64) -> CVector {
        let u = self.basis_indices();
        &self.sampling * basis_column(&u, to_rad(theta_deg))
    }

    /// Per-|u| maximum over ports (and over ±u) of `|H[m,u]|`, for
    /// |u| = 0 … (U-1)/2.
    pub fn coefficient_decay(&self) -> Vec<(usize, f64)> {
        let half = (self.coefficient_count() - 1) / 2;
        (0..=half)
            .map(|k| {
                let cols = [half - k, half + k];
                let mag = cols
                    .iter()
                    .flat_map(|&c| self.sampling.column(c).iter().map(|z| z.norm()).collect::<Vec<_>>())
                    .fold(0.0, f64::max);
                (k, mag)
            })
            .collect()
    }

    /// Relative approximation error `‖HΨ(ϑ) − E(ϑ)‖_F / ‖E(ϑ)‖_F` over the
    /// dataset grid.
    pub fn error(&self, ds: &EmfDataset) -> Result<f64> {
        if ds.port_count() != self.sampling.nrows() {
            return Err(Error::Schema(format!(
                "model has {} ports, dataset {}",
                self.sampling.nrows(),
                ds.port_count()
            )));
        }
        let e = ds.responses();
        let denom = e.norm();
        if denom == 0.0 {
            return Err(Error::DegenerateData("dataset has zero norm".into()));
        }
        let psi = basis_matrix(ds.angles(), self.coefficient_count())?;
        Ok((&self.sampling * psi - e).norm() / denom)
    }
}

impl AntennaResponse for WmModel {
    fn ports(&self) -> usize {
        self.sampling.nrows()
    }

    fn response(&self, theta_deg: f64) -> Result<CVector> {
        Ok(self.interpolate(theta_deg))
    }
}

/// `Ĥ = E Ψᴴ (Ψ Ψᴴ)⁻¹`; fails if the Gram matrix is singular.
pub fn fit_wm(ds: &EmfDataset, coefficients: usize) -> Result<WmModel> {
    fit_wm_with(ds, coefficients, Inversion::Strict).map(|(m, _)| m)
}

/// [`fit_wm`] with an explicit singularity policy and a fit report.
pub fn fit_wm_with(
    ds: &EmfDataset,
    coefficients: usize,
    inversion: Inversion,
) -> Result<(WmModel, WmFitReport)> {
    let psi = basis_matrix(ds.angles(), coefficients)?;
    // H Ψ ≈ E  ⇔  Ψᴴ Hᴴ ≈ Eᴴ
    let sol = least_squares(&psi.adjoint(), &ds.responses().adjoint(), inversion)?;
    if sol.gram_condition > CONDITION_WARN {
        warn!(
            "WM fit with U={coefficients}: Gram condition {:.3e} exceeds {CONDITION_WARN:.0e}",
            sol.gram_condition
        );
    } else {
        debug!("WM fit with U={coefficients}: Gram condition {:.3e}", sol.gram_condition);
    }
    let model = WmModel::new(sol.solution.adjoint())?;
    let approximation_error = model.error(ds)?;
    Ok((
        model,
        WmFitReport {
            coefficients,
            rank: sol.rank,
            gram_condition: sol.gram_condition,
            approximation_error,
        },
    ))
}

/// Serialized form: `h[m]` is row m as `[re, im]` pairs in ascending u.
#[derive(Debug, Serialize, Deserialize)]
struct WmFile {
    family: String,
    ports: usize,
    coefficients: usize,
    h: Vec<Vec<[f64; 2]>>,
}

impl WmModel {
    pub fn to_json_string(&self) -> Result<String> {
        let h = self
            .sampling
            .row_iter()
            .map(|r| r.iter().map(|z| [z.re, z.im]).collect())
            .collect();
        Ok(serde_json::to_string_pretty(&WmFile {
            family: "wm".into(),
            ports: self.sampling.nrows(),
            coefficients: self.coefficient_count(),
            h,
        })?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let f: WmFile = serde_json::from_str(text)?;
        if f.family != "wm" {
            return Err(Error::Schema(format!("expected a wm model, found {:?}", f.family)));
        }
        if f.h.len() != f.ports || f.h.iter().any(|r| r.len() != f.coefficients) {
            return Err(Error::Schema("sampling matrix shape disagrees with header".into()));
        }
        let m = CMatrix::from_fn(f.ports, f.coefficients, |i, j| {
            Complex64::new(f.h[i][j][0], f.h[i][j][1])
        });
        Self::new(m)
    }
}
