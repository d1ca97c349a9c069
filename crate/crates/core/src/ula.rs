//! Virtual uniform linear array on the x or z axis, centered on the origin.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::to_rad;
use crate::{CMatrix, CVector, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[serde(alias = "X")]
    X,
    #[serde(alias = "Z")]
    Z,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Z => "z",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "x" | "X" => Ok(Axis::X),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(Error::Arg(format!("unknown axis {other:?}, expected x or z"))),
        }
    }
}

/// Geometry of the virtual array. Spacing is in wavelengths; `wavelength`
/// is informational only since all phases depend on `spacing` alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualUlaConfig {
    pub element_count: usize,
    pub spacing: f64,
    pub axis: Axis,
    #[serde(default = "unit_wavelength")]
    pub wavelength: f64,
}

fn unit_wavelength() -> f64 {
    1.0
}

impl VirtualUlaConfig {
    pub fn new(element_count: usize, spacing: f64, axis: Axis) -> Result<Self> {
        let cfg = Self {
            element_count,
            spacing,
            axis,
            wavelength: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.element_count == 0 {
            return Err(Error::Arg("virtual array needs at least one element".into()));
        }
        if !(self.spacing > 0.0 && self.spacing <= 0.5) {
            return Err(Error::Arg(format!(
                "spacing {} wavelengths outside (0, 0.5]",
                self.spacing
            )));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::Arg("wavelength must be positive".into()));
        }
        Ok(())
    }

    /// Element positions along the axis in wavelengths,
    /// `(n - (N-1)/2)·d`.
    pub fn positions(&self) -> Vec<f64> {
        let center = (self.element_count as f64 - 1.0) / 2.0;
        (0..self.element_count)
            .map(|n| (n as f64 - center) * self.spacing)
            .collect()
    }
}

/// `a_v(θ)` with entries `exp(j·k·(x_n sinθ + z_n cosθ))`.
pub fn steering_vector(cfg: &VirtualUlaConfig, theta_deg: f64) -> CVector {
    let t = to_rad(theta_deg);
    let proj = match cfg.axis {
        Axis::X => t.sin(),
        Axis::Z => t.cos(),
    };
    // k·position with positions in wavelengths: k = 2π.
    CVector::from_iterator(
        cfg.element_count,
        cfg.positions()
            .into_iter()
            .map(|p| Complex64::from_polar(1.0, 2.0 * PI * p * proj)),
    )
}

/// N×P matrix whose columns are steering vectors at `angles_deg`.
pub fn steering_matrix(cfg: &VirtualUlaConfig, angles_deg: &[f64]) -> Result<CMatrix> {
    if angles_deg.is_empty() {
        return Err(Error::Arg("empty angle list".into()));
    }
    let mut a = CMatrix::zeros(cfg.element_count, angles_deg.len());
    for (p, &theta) in angles_deg.iter().enumerate() {
        a.set_column(p, &steering_vector(cfg, theta));
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(n: usize, d: f64, axis: Axis) -> VirtualUlaConfig {
        VirtualUlaConfig::new(n, d, axis).unwrap()
    }

    #[test]
    fn broadside_identity_cases() {
        let one = Complex64::new(1.0, 0.0);
        for n in 1..6 {
            let v = steering_vector(&cfg(n, 0.3, Axis::X), 0.0);
            assert!(v.iter().all(|z| (z - one).norm() < 1e-15));
            for theta in [-90.0, 90.0] {
                let v = steering_vector(&cfg(n, 0.3, Axis::Z), theta);
                assert!(v.iter().all(|z| (z - one).norm() < 1e-15));
            }
        }
    }

    #[test]
    fn two_element_z_axis_quarter_wave() {
        let v = steering_vector(&cfg(2, 0.25, Axis::Z), 0.0);
        let q = PI / 4.0;
        assert!((v[0] - Complex64::from_polar(1.0, -q)).norm() < 1e-15);
        assert!((v[1] - Complex64::from_polar(1.0, q)).norm() < 1e-15);
    }

    #[test]
    fn positions_are_centered() {
        assert_eq!(cfg(4, 0.25, Axis::Z).positions(), vec![-0.375, -0.125, 0.125, 0.375]);
        assert_eq!(cfg(1, 0.5, Axis::X).positions(), vec![0.0]);
    }

    #[test]
    fn invalid_configs() {
        assert!(VirtualUlaConfig::new(0, 0.25, Axis::Z).is_err());
        assert!(VirtualUlaConfig::new(4, 0.6, Axis::Z).is_err());
        assert!(VirtualUlaConfig::new(4, 0.0, Axis::Z).is_err());
        assert!("y".parse::<Axis>().is_err());
    }

    #[test]
    fn steering_matrix_shapes() {
        let c = cfg(4, 0.25, Axis::Z);
        let single = steering_matrix(&c, &[12.5]).unwrap();
        assert_eq!(single.column(0), steering_vector(&c, 12.5));
        assert!(matches!(steering_matrix(&c, &[]), Err(Error::Arg(_))));

        let m = steering_matrix(&c, &[-40.0, 40.0]).unwrap();
        assert_eq!(m.column(0), m.column(1));

        let grid: Vec<f64> = (0..37).map(|k| -90.0 + 5.0 * k as f64).collect();
        let m = steering_matrix(&c, &grid).unwrap();
        assert_eq!(m.shape(), (4, 37));
        assert!(m.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn unit_modulus(n in 1usize..16, d in 0.01f64..0.5, theta in -180.0f64..180.0, x in any::<bool>()) {
            let axis = if x { Axis::X } else { Axis::Z };
            let v = steering_vector(&cfg(n, d, axis), theta);
            for z in v.iter() {
                prop_assert!((z.norm() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn matrix_columns_match_vectors(n in 1usize..8, angles in proptest::collection::vec(-90.0f64..90.0, 1..12)) {
            let c = cfg(n, 0.25, Axis::Z);
            let m = steering_matrix(&c, &angles).unwrap();
            for (p, &a) in angles.iter().enumerate() {
                prop_assert_eq!(m.column(p).into_owned(), steering_vector(&c, a));
            }
        }

        #[test]
        fn z_axis_is_even_and_x_axis_mirrors(n in 1usize..8, theta in -90.0f64..90.0) {
            let z = cfg(n, 0.25, Axis::Z);
            let a = steering_vector(&z, theta);
            let b = steering_vector(&z, -theta);
            prop_assert!((a - b).norm() < 1e-12);

            let x = cfg(n, 0.25, Axis::X);
            let a = steering_vector(&x, theta);
            let b = steering_vector(&x, 180.0 - theta);
            prop_assert!((a - b).norm() < 1e-12);
        }
    }
}
