//! Coherent deterministic maximum-likelihood DoA estimation.
//!
//! With the source signals concentrated out by least squares, the estimate
//! minimises `tr[Π⊥_{A(θ)} R̂]` over candidate angles, where `R̂` is the
//! sample covariance and `Π⊥` projects onto the orthogonal complement of the
//! candidate response columns.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{check_full_column_rank, projectors, trace_re};
use crate::{AntennaResponse, CMatrix, CVector, Error, Result, FOV_MAX_DEG, FOV_MIN_DEG};

/// Ground truth carried along with synthetic snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub angles_deg: Vec<f64>,
    /// `None` for noise-free data.
    pub snr_db: Option<f64>,
}

/// M×K snapshot matrix, one column per snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotBatch {
    y: CMatrix,
    truth: Option<Truth>,
}

impl SnapshotBatch {
    pub fn new(y: CMatrix, truth: Option<Truth>) -> Result<Self> {
        if y.ncols() == 0 || y.nrows() == 0 {
            return Err(Error::Arg("snapshot batch needs at least one port and one snapshot".into()));
        }
        if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Arg("non-finite snapshot value".into()));
        }
        Ok(Self { y, truth })
    }

    pub fn snapshots(&self) -> &CMatrix {
        &self.y
    }

    pub fn ports(&self) -> usize {
        self.y.nrows()
    }

    pub fn len(&self) -> usize {
        self.y.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.y.ncols() == 0
    }

    pub fn truth(&self) -> Option<&Truth> {
        self.truth.as_ref()
    }

    /// Reads `snapshot,port,re,im` rows (1-based indices); every
    /// (snapshot, port) cell must appear exactly once.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let rows: Vec<SnapshotRow> = rdr
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Ingest(e.to_string()))?;
        let k = rows.iter().map(|r| r.snapshot).max().unwrap_or(0);
        let m = rows.iter().map(|r| r.port).max().unwrap_or(0);
        if rows.iter().any(|r| r.snapshot == 0 || r.port == 0) {
            return Err(Error::Ingest("snapshots and ports are numbered from 1".into()));
        }
        if rows.len() != k * m {
            return Err(Error::Ingest(format!(
                "{} rows for {k} snapshots of {m} ports",
                rows.len()
            )));
        }
        let mut y = CMatrix::zeros(m, k);
        let mut seen = vec![false; k * m];
        for r in &rows {
            let i = (r.snapshot - 1) * m + r.port - 1;
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Ingest(format!("duplicate cell snapshot {} port {}", r.snapshot, r.port)));
            }
            y[(r.port - 1, r.snapshot - 1)] = Complex64::new(r.re, r.im);
        }
        Self::new(y, None).map_err(|e| match e {
            Error::Arg(msg) => Error::Ingest(msg),
            e => e,
        })
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for (k, col) in self.y.column_iter().enumerate() {
            for (m, z) in col.iter().enumerate() {
                w.serialize(SnapshotRow {
                    snapshot: k + 1,
                    port: m + 1,
                    re: z.re,
                    im: z.im,
                })?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Ingest(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()?).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotRow {
    snapshot: usize,
    port: usize,
    re: f64,
    im: f64,
}

/// Sample covariance `R̂`; Hermitian by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CovEstimate {
    r: CMatrix,
}

impl CovEstimate {
    /// Wraps a matrix after checking it is square and Hermitian within
    /// 1e-12 (relative to its norm).
    pub fn new(r: CMatrix) -> Result<Self> {
        if !r.is_square() {
            return Err(Error::Arg("covariance must be square".into()));
        }
        let scale = r.norm().max(1.0);
        if (&r - r.adjoint()).norm() > 1e-12 * scale {
            return Err(Error::Arg("covariance is not Hermitian".into()));
        }
        Ok(Self { r })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.r
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.r)
    }
}

/// `R̂ = (1/K) Σ y(k) y(k)ᴴ`.
pub fn sample_covariance(batch: &SnapshotBatch) -> CovEstimate {
    let y = batch.snapshots();
    let mut r = (y * y.adjoint()) / Complex64::new(batch.len() as f64, 0.0);
    // Symmetrise rounding noise so the Hermitian invariant holds exactly.
    let rh = r.adjoint();
    r = (r + rh) * Complex64::new(0.5, 0.0);
    CovEstimate { r }
}

/// Projector onto the column space of `a` (M×Q) and its orthogonal
/// complement.
pub fn projection(a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    projectors(a)
}

/// `tr(Π⊥_A R̂)`; the imaginary part is discarded.
pub fn ml_objective(r: &CovEstimate, a: &CMatrix) -> Result<f64> {
    if a.nrows() != r.matrix().nrows() {
        return Err(Error::Schema(format!(
            "candidate has {} rows, covariance is {}x{}",
            a.nrows(),
            r.matrix().nrows(),
            r.matrix().nrows()
        )));
    }
    let (_, perp) = projectors(a)?;
    Ok(trace_re(&(perp * r.matrix())))
}

/// Least-squares signal estimate `x̂(k) = (AᴴA)⁻¹ Aᴴ y(k)`, Q×K.
pub fn ls_signal_estimate(batch: &SnapshotBatch, a: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != batch.ports() {
        return Err(Error::Schema(format!(
            "response has {} rows, snapshots have {} ports",
            a.nrows(),
            batch.ports()
        )));
    }
    check_full_column_rank(a)?;
    let chol = (a.adjoint() * a)
        .cholesky()
        .ok_or_else(|| Error::Singularity("Gram matrix not positive definite".into()))?;
    Ok(chol.solve(&(a.adjoint() * batch.snapshots())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Grid step of the global single-source scan, degrees.
    pub coarse_step: f64,
    /// Final bracket width of the refinement, degrees.
    pub refine_tolerance: f64,
    /// Number of sources Q.
    pub sources: usize,
    /// Grid step of the two-source scan, degrees.
    pub pair_step: f64,
    /// Cap on alternating refinement sweeps for two sources.
    pub max_sweeps: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            coarse_step: 0.5,
            refine_tolerance: 0.01,
            sources: 1,
            pair_step: 2.0,
            max_sweeps: 50,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self, ports: usize) -> Result<()> {
        if !(self.refine_tolerance > 0.0 && self.refine_tolerance < self.coarse_step) {
            return Err(Error::Arg(format!(
                "need 0 < refine tolerance ({}) < coarse step ({})",
                self.refine_tolerance, self.coarse_step
            )));
        }
        if !(self.pair_step > self.refine_tolerance) {
            return Err(Error::Arg("pair step must exceed the refine tolerance".into()));
        }
        if self.sources == 0 || self.sources >= ports {
            return Err(Error::Arg(format!(
                "source count {} must satisfy 0 < Q < M = {ports}",
                self.sources
            )));
        }
        if self.sources > 2 {
            return Err(Error::Arg(format!(
                "search implemented for up to two sources, got {}",
                self.sources
            )));
        }
        Ok(())
    }
}

fn scan_grid(step: f64) -> Vec<f64> {
    let n = ((FOV_MAX_DEG - FOV_MIN_DEG) / step).floor() as usize;
    let mut g: Vec<f64> = (0..=n).map(|k| FOV_MIN_DEG + k as f64 * step).collect();
    if FOV_MAX_DEG - g[n] > 1e-9 {
        g.push(FOV_MAX_DEG);
    }
    g
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section minimisation of `f` on `[lo, hi]` down to width `tol`.
/// Returns the best point evaluated.
fn golden_section(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// ML estimator bound to one antenna model; caches the model response on
/// the coarse scan grid so repeated estimates are cheap.
pub struct MlEstimator<'a, P: AntennaResponse + ?Sized> {
    model: &'a P,
    cfg: SearchConfig,
    coarse: Vec<(f64, CVector)>,
}

impl<'a, P: AntennaResponse + ?Sized> MlEstimator<'a, P> {
    pub fn new(model: &'a P, cfg: SearchConfig) -> Result<Self> {
        cfg.validate(model.ports())?;
        let step = if cfg.sources == 1 { cfg.coarse_step } else { cfg.pair_step };
        let coarse = scan_grid(step)
            .into_iter()
            .map(|t| Ok((t, model.response(t)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { model, cfg, coarse })
    }

    pub fn config(&self) -> &SearchConfig {
        &self.cfg
    }

    /// Single-source objective `tr R̂ − aᴴR̂a / aᴴa`, equal to
    /// `tr(Π⊥_a R̂)`; `+∞` for a zero response.
    fn objective_one(r: &CMatrix, trace: f64, a: &CVector) -> f64 {
        let na = a.norm_squared();
        if na == 0.0 {
            return f64::INFINITY;
        }
        trace - a.dotc(&(r * a)).re / na
    }

    fn objective_many(&self, r: &CovEstimate, angles: &[f64]) -> f64 {
        self.model
            .response_matrix(angles)
            .and_then(|a| ml_objective(r, &a))
            .unwrap_or(f64::INFINITY)
    }

    /// Estimated angles, sorted ascending.
    pub fn estimate(&self, batch: &SnapshotBatch) -> Result<Vec<f64>> {
        if batch.ports() != self.model.ports() {
            return Err(Error::Schema(format!(
                "snapshots have {} ports, model has {}",
                batch.ports(),
                self.model.ports()
            )));
        }
        let r = sample_covariance(batch);
        self.estimate_from_covariance(&r)
    }

    pub fn estimate_from_covariance(&self, r: &CovEstimate) -> Result<Vec<f64>> {
        match self.cfg.sources {
            1 => self.estimate_one(r).map(|t| vec![t]),
            _ => self.estimate_two(r),
        }
    }

    fn estimate_one(&self, r: &CovEstimate) -> Result<f64> {
        let rm = r.matrix();
        let tr = r.trace();
        let (mut best_t, mut best_f) = (f64::NAN, f64::INFINITY);
        for (t, a) in &self.coarse {
            let f = Self::objective_one(rm, tr, a);
            if f < best_f {
                best_t = *t;
                best_f = f;
            }
        }
        if !best_f.is_finite() {
            return Err(Error::Singularity("model response vanishes on the whole scan grid".into()));
        }
        let lo = (best_t - self.cfg.coarse_step).max(FOV_MIN_DEG);
        let hi = (best_t + self.cfg.coarse_step).min(FOV_MAX_DEG);
        let (t, f) = golden_section(
            |t| match self.model.response(t) {
                Ok(a) => Self::objective_one(rm, tr, &a),
                Err(_) => f64::INFINITY,
            },
            lo,
            hi,
            self.cfg.refine_tolerance,
        );
        Ok(if f < best_f { t } else { best_t })
    }

    fn estimate_two(&self, r: &CovEstimate) -> Result<Vec<f64>> {
        let step = self.cfg.pair_step;
        let mut best = ([f64::NAN; 2], f64::INFINITY);
        for i in 0..self.coarse.len() {
            for j in i + 1..self.coarse.len() {
                let mut a = CMatrix::zeros(self.model.ports(), 2);
                a.set_column(0, &self.coarse[i].1);
                a.set_column(1, &self.coarse[j].1);
                let f = ml_objective(r, &a).unwrap_or(f64::INFINITY);
                if f < best.1 {
                    best = ([self.coarse[i].0, self.coarse[j].0], f);
                }
            }
        }
        if !best.1.is_finite() {
            return Err(Error::Singularity("no admissible source pair on the scan grid".into()));
        }
        let (mut theta, mut f_best) = best;
        for _ in 0..self.cfg.max_sweeps {
            let before = theta;
            for i in 0..2 {
                let other = theta[1 - i];
                let lo = (theta[i] - step).max(FOV_MIN_DEG);
                let hi = (theta[i] + step).min(FOV_MAX_DEG);
                let (t, f) = golden_section(
                    |t| {
                        let mut pair = [0.0; 2];
                        pair[i] = t;
                        pair[1 - i] = other;
                        self.objective_many(r, &pair)
                    },
                    lo,
                    hi,
                    self.cfg.refine_tolerance,
                );
                if f < f_best {
                    theta[i] = t;
                    f_best = f;
                }
            }
            let moved = (theta[0] - before[0]).abs().max((theta[1] - before[1]).abs());
            if moved < self.cfg.refine_tolerance {
                break;
            }
        }
        theta.sort_by(|a, b| a.total_cmp(b));
        Ok(theta.to_vec())
    }
}

/// One-shot estimate; see [`MlEstimator`] for repeated use.
pub fn estimate_doa<P: AntennaResponse + ?Sized>(
    batch: &SnapshotBatch,
    model: &P,
    cfg: &SearchConfig,
) -> Result<Vec<f64>> {
    MlEstimator::new(model, *cfg)?.estimate(batch)
}
