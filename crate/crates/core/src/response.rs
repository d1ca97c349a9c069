use crate::{CMatrix, CVector, Error, Result};

/// Anything that yields the complex M-port response `a(θ)` of the antenna.
///
/// Implementations must be deterministic: the same angle always gives the
/// same vector.
pub trait AntennaResponse: Sync {
    /// Number of ports M.
    fn ports(&self) -> usize;

    /// Response vector for a single angle in degrees.
    fn response(&self, theta_deg: f64) -> Result<CVector>;

    /// M×P response matrix, one column per angle.
    fn response_matrix(&self, angles_deg: &[f64]) -> Result<CMatrix> {
        if angles_deg.is_empty() {
            return Err(Error::Arg("empty angle list".into()));
        }
        let mut out = CMatrix::zeros(self.ports(), angles_deg.len());
        for (p, &theta) in angles_deg.iter().enumerate() {
            out.set_column(p, &self.response(theta)?);
        }
        Ok(out)
    }
}

impl<T: AntennaResponse + ?Sized> AntennaResponse for &T {
    fn ports(&self) -> usize {
        (**self).ports()
    }

    fn response(&self, theta_deg: f64) -> Result<CVector> {
        (**self).response(theta_deg)
    }
}

impl<T: AntennaResponse + ?Sized + Send> AntennaResponse for Box<T> {
    fn ports(&self) -> usize {
        (**self).ports()
    }

    fn response(&self, theta_deg: f64) -> Result<CVector> {
        (**self).response(theta_deg)
    }
}
