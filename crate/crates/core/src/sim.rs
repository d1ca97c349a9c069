//! Snapshot synthesis and Monte Carlo RMSE experiments.
//!
//! Received signals are always generated from quantized calibration data
//! (truth angles on the calibration grid); the estimator uses a fitted model
//! that interpolates continuously.
//!
//! SNR is the mean-over-ports received signal power divided by the per-port
//! noise variance. Signals and noise are circular complex Gaussian.
//!
//! Every (angle, run) pair draws from its own ChaCha stream derived from the
//! experiment seed, so results do not depend on scheduling.

use log::info;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ait::{self, partition_fov};
use crate::doa::{MlEstimator, SearchConfig, SnapshotBatch, Truth};
use crate::emf::EmfDataset;
use crate::fixtures::reference_wm_model;
use crate::linalg::Inversion;
use crate::ula::{Axis, VirtualUlaConfig};
use crate::wm::fit_wm_with;
use crate::{AntennaResponse, CMatrix, Error, Result};

/// Monte Carlo runs per angle used by default.
pub const DESK_MC_RUNS: usize = 100;
/// Monte Carlo runs per angle of the full-scale experiments.
pub const FULL_MC_RUNS: usize = 1000;

/// Compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut k = KahanSum::default();
        for x in iter {
            k.add(x);
        }
        k
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Per-port noise variance for the given SNR and response columns.
pub fn noise_variance(a: &CMatrix, snr_db: f64) -> f64 {
    let power = a.iter().map(|z| z.norm_sqr()).sum::<f64>() / a.len() as f64;
    power / 10f64.powf(snr_db / 10.0)
}

/// `y(k) = A(θ) x(k) + n(k)` for sources at `angles` (on the dataset grid).
/// `snr_db = None` (or infinite) disables noise.
pub fn synth_snapshots_with<R: Rng + ?Sized>(
    truth: &EmfDataset,
    angles: &[f64],
    snr_db: Option<f64>,
    snapshots: usize,
    rng: &mut R,
) -> Result<SnapshotBatch> {
    if snapshots == 0 {
        return Err(Error::Arg("need at least one snapshot".into()));
    }
    if angles.is_empty() {
        return Err(Error::Arg("need at least one source angle".into()));
    }
    // Grid-only lookup: off-grid angles are a GridError.
    let a = truth.response_matrix(angles)?;
    let (m, q) = a.shape();
    let sigma2 = match snr_db {
        Some(s) if s.is_finite() => Some(noise_variance(&a, s)),
        Some(s) if s < 0.0 => return Err(Error::Arg("SNR of -inf dB".into())),
        _ => None,
    };
    let mut y = CMatrix::zeros(m, snapshots);
    let mut x = crate::CVector::zeros(q);
    for k in 0..snapshots {
        for xi in x.iter_mut() {
            *xi = complex_normal(rng, 1.0);
        }
        let mut col = &a * &x;
        if let Some(s2) = sigma2 {
            for z in col.iter_mut() {
                *z += complex_normal(rng, s2);
            }
        }
        y.set_column(k, &col);
    }
    SnapshotBatch::new(
        y,
        Some(Truth {
            angles_deg: angles.to_vec(),
            snr_db: sigma2.and(snr_db),
        }),
    )
}

/// Single-source snapshots from a seeded generator.
pub fn synth_snapshots(
    truth: &EmfDataset,
    theta_deg: f64,
    snr_db: Option<f64>,
    snapshots: usize,
    seed: u64,
) -> Result<SnapshotBatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synth_snapshots_with(truth, &[theta_deg], snr_db, snapshots, &mut rng)
}

/// Generator for run `run` at angle index `angle_index`.
pub fn run_rng(seed: u64, angle_index: usize, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((angle_index as u64) << 32) | run as u64);
    rng
}

/// Root mean squared error of `estimates` around `truth`, degrees.
pub fn rmse(estimates: &[f64], truth: f64) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::Arg("no estimates".into()));
    }
    let sq: KahanSum = estimates.iter().map(|e| (e - truth).powi(2)).collect();
    Ok((sq.total() / estimates.len() as f64).sqrt())
}

/// Virtual-array and sectorization parameters of an AIT model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AitParams {
    pub elements: usize,
    pub spacing: f64,
    pub axis: Axis,
    pub sector_size: f64,
    pub overlap: f64,
}

impl Default for AitParams {
    /// Four elements on the z axis at λ/4, 30° sectors with 15° overlap.
    fn default() -> Self {
        Self {
            elements: 4,
            spacing: 0.25,
            axis: Axis::Z,
            sector_size: 30.0,
            overlap: 15.0,
        }
    }
}

impl AitParams {
    pub fn fit(&self, ds: &EmfDataset) -> Result<ait::AitModel> {
        let ula = VirtualUlaConfig::new(self.elements, self.spacing, self.axis)?;
        let plan = partition_fov(self.sector_size, self.overlap)?;
        ait::fit(ds, &ula, &plan)
    }
}

/// Which model the estimator searches with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Ait(AitParams),
    Wm { coefficients: usize },
    /// The published wavefield model itself (the generator of the
    /// stand-in dataset).
    Reference,
}

impl ModelSpec {
    pub fn build(&self, ds: &EmfDataset) -> Result<Box<dyn AntennaResponse + Send + Sync>> {
        Ok(match self {
            ModelSpec::Ait(p) => Box::new(p.fit(ds)?),
            ModelSpec::Wm { coefficients } => {
                Box::new(fit_wm_with(ds, *coefficients, Inversion::PseudoInverse)?.0)
            }
            ModelSpec::Reference => Box::new(reference_wm_model()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Truth angles; `None` means every angle of the truth grid.
    #[serde(default)]
    pub truth_angles: Option<Vec<f64>>,
    pub snr_db: f64,
    pub snapshots: usize,
    pub mc_runs: usize,
    pub seed: u64,
    pub estimator: ModelSpec,
    #[serde(default)]
    pub search: SearchConfig,
}

impl ExperimentConfig {
    /// Single-source experiment at 20 dB with 1000 snapshots and the
    /// desk-scale run count.
    pub fn new(estimator: ModelSpec) -> Self {
        Self {
            truth_angles: None,
            snr_db: 20.0,
            snapshots: 1000,
            mc_runs: DESK_MC_RUNS,
            seed: 1,
            estimator,
            search: SearchConfig::default(),
        }
    }

    fn validate(&self, ds: &EmfDataset) -> Result<Vec<f64>> {
        if self.mc_runs == 0 || self.snapshots == 0 {
            return Err(Error::Arg("mc_runs and snapshots must be at least 1".into()));
        }
        if self.search.sources != 1 {
            return Err(Error::Arg("Monte Carlo experiments are single-source".into()));
        }
        let angles = match &self.truth_angles {
            Some(a) if a.is_empty() => return Err(Error::Arg("empty truth angle list".into())),
            Some(a) => a.clone(),
            None => ds.angles().to_vec(),
        };
        for &a in &angles {
            if ds.grid().index_of(a).is_none() {
                return Err(Error::Grid(format!("truth angle {a} is not on the calibration grid")));
            }
        }
        Ok(angles)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleRmse {
    pub theta: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseResult {
    pub per_angle: Vec<AngleRmse>,
    pub mean_rmse: f64,
    pub config: ExperimentConfig,
}

/// Monte Carlo RMSE of the configured estimator over the truth angles.
pub fn run_experiment(ds: &EmfDataset, cfg: &ExperimentConfig) -> Result<RmseResult> {
    let angles = cfg.validate(ds)?;
    let model = cfg.estimator.build(ds)?;
    run_with_model(ds, cfg, &angles, model.as_ref())
}

fn run_with_model(
    ds: &EmfDataset,
    cfg: &ExperimentConfig,
    angles: &[f64],
    model: &(dyn AntennaResponse + Send + Sync),
) -> Result<RmseResult> {
    let est = MlEstimator::new(model, cfg.search)?;
    let runs = cfg.mc_runs;
    let estimates: Vec<f64> = (0..angles.len() * runs)
        .into_par_iter()
        .map(|i| {
            let (ai, run) = (i / runs, i % runs);
            let mut rng = run_rng(cfg.seed, ai, run);
            let batch = synth_snapshots_with(ds, &[angles[ai]], Some(cfg.snr_db), cfg.snapshots, &mut rng)?;
            Ok(est.estimate(&batch)?[0])
        })
        .collect::<Result<_>>()?;
    let per_angle = angles
        .iter()
        .zip(estimates.chunks(runs))
        .map(|(&theta, e)| Ok(AngleRmse { theta, rmse: rmse(e, theta)? }))
        .collect::<Result<Vec<_>>>()?;
    let mean: KahanSum = per_angle.iter().map(|a| a.rmse).collect();
    Ok(RmseResult {
        mean_rmse: mean.total() / per_angle.len() as f64,
        per_angle,
        config: cfg.clone(),
    })
}

/// Parameter varied by [`run_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum Sweep {
    ElementCount(Vec<usize>),
    Spacing(Vec<f64>),
    /// `[sector size, overlap]` pairs, degrees.
    SectorSize(Vec<[f64; 2]>),
    WmCoefficients(Vec<usize>),
    Snr(Vec<f64>),
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Sweep::ElementCount(_) => "element_count",
            Sweep::Spacing(_) => "spacing",
            Sweep::SectorSize(_) => "sector_size",
            Sweep::WmCoefficients(_) => "wm_coefficients",
            Sweep::Snr(_) => "snr",
        }
    }

    fn len(&self) -> usize {
        match self {
            Sweep::ElementCount(v) | Sweep::WmCoefficients(v) => v.len(),
            Sweep::Spacing(v) | Sweep::Snr(v) => v.len(),
            Sweep::SectorSize(v) => v.len(),
        }
    }

    /// Configurations for each sweep point, with the swept value.
    pub fn expand(&self, base: &ExperimentConfig) -> Result<Vec<(f64, ExperimentConfig)>> {
        if self.len() == 0 {
            return Err(Error::Arg(format!("{} sweep has no values", self.name())));
        }
        let ait = match base.estimator {
            ModelSpec::Ait(p) => Some(p),
            _ => None,
        };
        let need_ait = || {
            ait.ok_or_else(|| Error::Arg(format!("{} sweep requires an AIT estimator model", self.name())))
        };
        let with = |est: ModelSpec| ExperimentConfig {
            estimator: est,
            ..base.clone()
        };
        Ok(match self {
            Sweep::ElementCount(v) => {
                let p = need_ait()?;
                v.iter()
                    .map(|&n| (n as f64, with(ModelSpec::Ait(AitParams { elements: n, ..p }))))
                    .collect()
            }
            Sweep::Spacing(v) => {
                let p = need_ait()?;
                v.iter()
                    .map(|&d| (d, with(ModelSpec::Ait(AitParams { spacing: d, ..p }))))
                    .collect()
            }
            Sweep::SectorSize(v) => {
                let p = need_ait()?;
                v.iter()
                    .map(|&[s, o]| {
                        (s, with(ModelSpec::Ait(AitParams { sector_size: s, overlap: o, ..p })))
                    })
                    .collect()
            }
            Sweep::WmCoefficients(v) => {
                if !matches!(base.estimator, ModelSpec::Wm { .. }) {
                    return Err(Error::Arg("wm_coefficients sweep requires a WM estimator model".into()));
                }
                v.iter()
                    .map(|&u| (u as f64, with(ModelSpec::Wm { coefficients: u })))
                    .collect()
            }
            Sweep::Snr(v) => v
                .iter()
                .map(|&s| {
                    (s, ExperimentConfig {
                        snr_db: s,
                        ..base.clone()
                    })
                })
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub parameter: f64,
    pub result: RmseResult,
}

/// Runs the experiment at every sweep value. Deterministic under the seed;
/// all points share the same noise streams.
pub fn run_sweep(ds: &EmfDataset, base: &ExperimentConfig, sweep: &Sweep) -> Result<Vec<SweepPoint>> {
    sweep
        .expand(base)?
        .into_iter()
        .map(|(parameter, cfg)| {
            let result = run_experiment(ds, &cfg)?;
            info!("{} = {parameter}: mean RMSE {:.4e} deg", sweep.name(), result.mean_rmse);
            Ok(SweepPoint { parameter, result })
        })
        .collect()
}

/// Parameter varied by [`transformation_error_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum XiSweep {
    ElementCount(Vec<usize>),
    Spacing(Vec<f64>),
    Orientation(Vec<Axis>),
}

impl XiSweep {
    pub fn name(&self) -> &'static str {
        match self {
            XiSweep::ElementCount(_) => "xi_element_count",
            XiSweep::Spacing(_) => "xi_spacing",
            XiSweep::Orientation(_) => "xi_orientation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiPoint {
    pub parameter: String,
    pub mean_xi: f64,
}

/// Noise-free mean transformation error of AIT fits around `base`.
pub fn transformation_error_sweep(ds: &EmfDataset, base: &AitParams, sweep: &XiSweep) -> Result<Vec<XiPoint>> {
    let points: Vec<(String, AitParams)> = match sweep {
        XiSweep::ElementCount(v) => v
            .iter()
            .map(|&n| (n.to_string(), AitParams { elements: n, ..*base }))
            .collect(),
        XiSweep::Spacing(v) => v
            .iter()
            .map(|&d| (d.to_string(), AitParams { spacing: d, ..*base }))
            .collect(),
        XiSweep::Orientation(v) => v
            .iter()
            .map(|&a| (a.to_string(), AitParams { axis: a, ..*base }))
            .collect(),
    };
    if points.is_empty() {
        return Err(Error::Arg(format!("{} sweep has no values", sweep.name())));
    }
    points
        .into_iter()
        .map(|(parameter, p)| {
            let mean_xi = p.fit(ds)?.mean_transformation_error(ds)?;
            Ok(XiPoint { parameter, mean_xi })
        })
        .collect()
}
