//! Sweep configuration files (TOML).
//!
//! ```toml
//! [experiment]
//! snr_db = 20.0
//! snapshots = 1000
//! mc_runs = 100
//! seed = 1
//!
//! [experiment.estimator]
//! family = "ait"
//! elements = 4
//! spacing = 0.25
//! axis = "z"
//! sector_size = 30.0
//! overlap = 15.0
//!
//! [[sweep]]
//! name = "rmse_vs_sector"
//! kind = "sector_size"
//! values = [[30.0, 15.0], [60.0, 30.0]]
//! ```

use std::path::Path;

use mmant::sim::{AitParams, ExperimentConfig, Sweep, XiSweep};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    /// Calibration data; the synthesized stand-in dataset when absent.
    #[serde(default)]
    pub data: Option<String>,
    /// Grid step of the synthesized dataset.
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    pub experiment: Option<ExperimentConfig>,
    #[serde(default)]
    pub sweep: Vec<RmseSweep>,
    #[serde(default)]
    pub xi_sweep: Vec<XiSweepEntry>,
}

fn default_grid_step() -> f64 {
    5.0
}

#[derive(Debug, Clone, Deserialize)]
pub struct RmseSweep {
    pub name: String,
    /// Overrides the experiment SNR for this sweep.
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(flatten)]
    pub sweep: Sweep,
}

#[derive(Debug, Clone, Deserialize)]
pub struct XiSweepEntry {
    pub name: String,
    #[serde(default)]
    pub base: Option<AitParams>,
    #[serde(flatten)]
    pub sweep: XiSweep,
}

impl SweepFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| mmant::Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let f: SweepFile = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if f.sweep.is_empty() && f.xi_sweep.is_empty() {
            return Err(CliError::Config("configuration defines no sweeps".into()));
        }
        if !f.sweep.is_empty() && f.experiment.is_none() {
            return Err(CliError::Config("RMSE sweeps need an [experiment] table".into()));
        }
        let mut names: Vec<&str> = f
            .sweep
            .iter()
            .map(|s| s.name.as_str())
            .chain(f.xi_sweep.iter().map(|s| s.name.as_str()))
            .collect();
        for n in &names {
            if n.is_empty() || !n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(CliError::Config(format!("sweep name {n:?} is not a plain file stem")));
            }
        }
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Config("sweep names must be unique".into()));
        }
        Ok(f)
    }
}
