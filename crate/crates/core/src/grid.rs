//! Uniform co-elevation angle grids.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, ANGLE_EPS, FOV_MAX_DEG, FOV_MIN_DEG};

/// Converts degrees to radians. All trigonometry in the crate goes through
/// here.
#[inline]
pub fn to_rad(deg: f64) -> f64 {
    deg.to_radians()
}

/// Strictly increasing, uniformly spaced angles inside [-90°, 90°].
///
/// A single-angle grid has step 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridHeader", into = "GridHeader")]
pub struct AngleGrid {
    start: f64,
    step: f64,
    angles: Vec<f64>,
}

/// Compact description of a grid, used in file headers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub start_deg: f64,
    pub step_deg: f64,
    pub count: usize,
}

impl TryFrom<GridHeader> for AngleGrid {
    type Error = Error;

    fn try_from(h: GridHeader) -> Result<Self> {
        AngleGrid::uniform(h.start_deg, h.step_deg, h.count)
    }
}

impl From<AngleGrid> for GridHeader {
    fn from(g: AngleGrid) -> Self {
        g.header()
    }
}

impl AngleGrid {
    /// `count` angles `start + k·step`.
    pub fn uniform(start: f64, step: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Grid("grid must contain at least one angle".into()));
        }
        if !start.is_finite() || !step.is_finite() {
            return Err(Error::Grid("non-finite grid parameters".into()));
        }
        if count > 1 && step <= 0.0 {
            return Err(Error::Grid(format!("step must be positive, got {step}")));
        }
        let step = if count == 1 { 0.0 } else { step };
        let angles: Vec<f64> = (0..count).map(|k| start + k as f64 * step).collect();
        let last = *angles.last().unwrap();
        if start < FOV_MIN_DEG - ANGLE_EPS || last > FOV_MAX_DEG + ANGLE_EPS {
            return Err(Error::Grid(format!(
                "grid [{start}, {last}] leaves the field of view [-90, 90]"
            )));
        }
        Ok(Self {
            start,
            step,
            angles,
        })
    }

    /// Full field of view [-90°, 90°] at the given step; 180 must be an
    /// integer multiple of `step`.
    pub fn fov(step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Arg(format!("grid step must be positive, got {step}")));
        }
        let n = (FOV_MAX_DEG - FOV_MIN_DEG) / step;
        if (n - n.round()).abs() > 1e-9 {
            return Err(Error::Arg(format!(
                "180 deg is not divisible by grid step {step}"
            )));
        }
        Self::uniform(FOV_MIN_DEG, step, n.round() as usize + 1)
    }

    /// Validates an arbitrary list of angles as a uniform grid.
    pub fn from_angles(angles: &[f64]) -> Result<Self> {
        match angles {
            [] => Err(Error::Grid("grid must contain at least one angle".into())),
            [a] => Self::uniform(*a, 0.0, 1),
            [a, b, ..] => {
                let step = b - a;
                if step <= 0.0 {
                    return Err(Error::Grid("angles must be strictly increasing".into()));
                }
                for (k, w) in angles.windows(2).enumerate() {
                    if w[1] <= w[0] {
                        return Err(Error::Grid(format!(
                            "angles not strictly increasing at index {}",
                            k + 1
                        )));
                    }
                    if ((w[1] - w[0]) - step).abs() > 1e-6 {
                        return Err(Error::Grid(format!(
                            "non-uniform spacing: {} -> {} differs from step {step}",
                            w[0], w[1]
                        )));
                    }
                }
                let grid = Self::uniform(*a, step, angles.len())?;
                Ok(grid)
            }
        }
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn header(&self) -> GridHeader {
        GridHeader {
            start_deg: self.start,
            step_deg: self.step,
            count: self.angles.len(),
        }
    }

    /// Index of the grid point equal to `theta` (within 1e-9°), if any.
    pub fn index_of(&self, theta: f64) -> Option<usize> {
        if self.step == 0.0 {
            return ((theta - self.start).abs() <= ANGLE_EPS).then_some(0);
        }
        let k = ((theta - self.start) / self.step).round();
        if k < 0.0 || k >= self.angles.len() as f64 {
            return None;
        }
        let k = k as usize;
        ((self.angles[k] - theta).abs() <= ANGLE_EPS).then_some(k)
    }

    /// Indices of grid points inside the closed interval [lo, hi].
    pub fn indices_within(&self, lo: f64, hi: f64) -> Vec<usize> {
        self.angles
            .iter()
            .enumerate()
            .filter(|(_, &a)| a >= lo - ANGLE_EPS && a <= hi + ANGLE_EPS)
            .map(|(i, _)| i)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fov_grid_at_five_degrees() {
        let g = AngleGrid::fov(5.0).unwrap();
        assert_eq!(g.len(), 37);
        assert_eq!(g.angles()[0], -90.0);
        assert_eq!(g.angles()[36], 90.0);
        assert_eq!(g.index_of(10.0), Some(20));
        assert_eq!(g.index_of(12.5), None);
    }

    #[test]
    fn fov_rejects_non_dividing_step() {
        assert!(matches!(AngleGrid::fov(7.0), Err(Error::Arg(_))));
        assert_eq!(AngleGrid::fov(1.0).unwrap().len(), 181);
    }

    #[test]
    fn non_uniform_and_unordered_rejected() {
        assert!(matches!(
            AngleGrid::from_angles(&[0.0, 5.0, 15.0]),
            Err(Error::Grid(_))
        ));
        assert!(matches!(
            AngleGrid::from_angles(&[0.0, 5.0, 5.0]),
            Err(Error::Grid(_))
        ));
        assert!(matches!(
            AngleGrid::from_angles(&[80.0, 90.0, 100.0]),
            Err(Error::Grid(_))
        ));
    }

    #[test]
    fn single_angle_grid() {
        let g = AngleGrid::from_angles(&[30.0]).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.step(), 0.0);
        assert_eq!(g.index_of(30.0), Some(0));
    }

    #[test]
    fn header_round_trip() {
        let g = AngleGrid::fov(5.0).unwrap();
        let back = AngleGrid::try_from(g.header()).unwrap();
        assert_eq!(g, back);
    }
}
