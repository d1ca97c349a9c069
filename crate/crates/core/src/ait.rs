//! Array interpolation: the field of view is split into (possibly
//! overlapping) sectors and, per sector, a mapping matrix `G_l` (N×M) is
//! fitted so that `G_lᴴ a_v(θ)` reproduces the antenna response from the
//! virtual ULA steering vector `a_v(θ)`.
//!
//! Where sectors overlap, each mode (column) independently takes the
//! candidate sector's column that fits the calibration samples in the
//! overlap best. No new coefficients are computed there.
//!
//! Runtime lookup splits the field of view at every sector edge into
//! spans. A span covered by a single sector uses that sector's matrix; an
//! overlap span uses the per-mode column mix. Span boundaries belong to the
//! span on their left (the first span is closed at -90°).

use log::{debug, info};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emf::EmfDataset;
use crate::linalg::{least_squares, Inversion};
use crate::ula::{steering_matrix, steering_vector, VirtualUlaConfig};
use crate::{AntennaResponse, CMatrix, CVector, Error, Result, ANGLE_EPS, FOV_MAX_DEG, FOV_MIN_DEG};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.lo - ANGLE_EPS && theta <= self.hi + ANGLE_EPS
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// A piece of the field of view between consecutive sector edges, with the
/// sectors covering it.
#[derive(Debug, Clone, PartialEq)]
pub struct Span {
    pub interval: Interval,
    pub sectors: Vec<usize>,
}

impl Span {
    pub fn is_overlap(&self) -> bool {
        self.sectors.len() > 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorPlan {
    sector_size: f64,
    overlap: f64,
    sectors: Vec<Interval>,
    spans: Vec<Span>,
}

/// Tiles [-90°, 90°] with sectors of `sector_size` advancing by
/// `sector_size - overlap`.
pub fn partition_fov(sector_size: f64, overlap: f64) -> Result<SectorPlan> {
    let fov = FOV_MAX_DEG - FOV_MIN_DEG;
    if !(sector_size > 0.0 && sector_size <= fov) {
        return Err(Error::Plan(format!("sector size {sector_size} outside (0, 180]")));
    }
    if !(overlap >= 0.0 && overlap < sector_size) {
        return Err(Error::Plan(format!(
            "overlap {overlap} must lie in [0, sector size {sector_size})"
        )));
    }
    let stride = sector_size - overlap;
    let steps = (fov - sector_size) / stride;
    if (steps - steps.round()).abs() > 1e-9 {
        return Err(Error::Plan(format!(
            "sectors of {sector_size} deg with stride {stride} deg do not tile the field of view"
        )));
    }
    let count = steps.round() as usize + 1;
    let sectors: Vec<Interval> = (0..count)
        .map(|l| {
            let lo = FOV_MIN_DEG + l as f64 * stride;
            Interval {
                lo,
                hi: lo + sector_size,
            }
        })
        .collect();

    let mut edges: Vec<f64> = sectors.iter().flat_map(|s| [s.lo, s.hi]).collect();
    edges.sort_by(|a, b| a.total_cmp(b));
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let spans = edges
        .windows(2)
        .map(|w| {
            let interval = Interval { lo: w[0], hi: w[1] };
            let covering = sectors
                .iter()
                .enumerate()
                .filter(|(_, s)| s.lo <= interval.lo + 1e-9 && s.hi >= interval.hi - 1e-9)
                .map(|(l, _)| l)
                .collect();
            Span {
                interval,
                sectors: covering,
            }
        })
        .collect();

    Ok(SectorPlan {
        sector_size,
        overlap,
        sectors,
        spans,
    })
}

impl SectorPlan {
    pub fn sector_size(&self) -> f64 {
        self.sector_size
    }

    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    pub fn sectors(&self) -> &[Interval] {
        &self.sectors
    }

    pub fn len(&self) -> usize {
        self.sectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sectors.is_empty()
    }

    pub fn spans(&self) -> &[Span] {
        &self.spans
    }

    /// Spans shared by more than one sector.
    pub fn overlap_regions(&self) -> impl Iterator<Item = &Span> {
        self.spans.iter().filter(|s| s.is_overlap())
    }

    /// Span containing `theta`; boundaries go to the left span.
    pub fn span_index(&self, theta: f64) -> Result<usize> {
        if !(FOV_MIN_DEG - ANGLE_EPS..=FOV_MAX_DEG + ANGLE_EPS).contains(&theta) {
            return Err(Error::Domain(theta));
        }
        Ok(self
            .spans
            .iter()
            .position(|s| theta <= s.interval.hi + ANGLE_EPS)
            .unwrap_or(self.spans.len() - 1))
    }
}

/// Least-squares fit of one sector.
#[derive(Debug, Clone)]
pub struct SectorFit {
    pub coefficients: CMatrix,
    pub rank: usize,
    pub gram_condition: f64,
}

/// `Ĝ = (A_v A_vᴴ)⁻¹ A_v Eᴴ` for `E` (M×P) and `A_v` (N×P), i.e. the
/// minimiser of `‖GᴴA_v − E‖_F`.
pub fn fit_sector(e: &CMatrix, a_v: &CMatrix, inversion: Inversion) -> Result<SectorFit> {
    if e.ncols() != a_v.ncols() {
        return Err(Error::Schema(format!(
            "{} response samples but {} steering vectors",
            e.ncols(),
            a_v.ncols()
        )));
    }
    let sol = least_squares(&a_v.adjoint(), &e.adjoint(), inversion)?;
    Ok(SectorFit {
        coefficients: sol.solution,
        rank: sol.rank,
        gram_condition: sol.gram_condition,
    })
}

/// Squared error of mode `m` when column `m` of `g` maps `a_v` onto `e`.
fn column_cost(g: &CMatrix, m: usize, a_v: &CMatrix, e: &CMatrix) -> f64 {
    let col = g.column(m);
    a_v.column_iter()
        .zip(e.row(m).iter())
        .map(|(a, target)| (col.dotc(&a) - target).norm_sqr())
        .sum()
}

/// For every mode, the index into `candidates` whose column fits best on
/// the overlap samples. Ties go to the earlier candidate.
pub fn resolve_columns(candidates: &[&CMatrix], a_v: &CMatrix, e: &CMatrix) -> Result<Vec<usize>> {
    if a_v.ncols() == 0 {
        return Err(Error::Plan("overlap region contains no calibration samples".into()));
    }
    if candidates.is_empty() {
        return Err(Error::Arg("no candidate matrices".into()));
    }
    let modes = e.nrows();
    Ok((0..modes)
        .map(|m| {
            let mut best = (0, f64::INFINITY);
            for (c, g) in candidates.iter().enumerate() {
                let cost = column_cost(g, m, a_v, e);
                if cost < best.1 {
                    best = (c, cost);
                }
            }
            best.0
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OverlapChoice {
    A,
    B,
}

/// Per-mode choice between two neighbouring sectors' matrices over the
/// calibration samples at `samples` (degrees, on the dataset grid).
pub fn resolve_overlap(
    g_a: &CMatrix,
    g_b: &CMatrix,
    samples: &[f64],
    ds: &EmfDataset,
    ula: &VirtualUlaConfig,
) -> Result<Vec<OverlapChoice>> {
    if samples.is_empty() {
        return Err(Error::Plan("overlap region contains no calibration samples".into()));
    }
    let e = ds.response_matrix(samples)?;
    let a_v = steering_matrix(ula, samples)?;
    Ok(resolve_columns(&[g_a, g_b], &a_v, &e)?
        .into_iter()
        .map(|i| if i == 0 { OverlapChoice::A } else { OverlapChoice::B })
        .collect())
}

/// A span of the runtime lookup: column `m` comes from sector
/// `columns[m]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSpan {
    pub interval: Interval,
    pub columns: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorReport {
    pub interval: Interval,
    pub samples: usize,
    pub rank: usize,
    pub gram_condition: f64,
    pub transformation_error: f64,
}

#[derive(Debug, Clone)]
pub struct AitModel {
    ula: VirtualUlaConfig,
    plan: SectorPlan,
    coefficients: Vec<CMatrix>,
    resolved: Vec<ResolvedSpan>,
}

/// Fits every sector, resolves overlaps and builds the runtime lookup.
/// Rank-deficient sectors fall back to the pseudo-inverse.
pub fn fit(ds: &EmfDataset, ula: &VirtualUlaConfig, plan: &SectorPlan) -> Result<AitModel> {
    fit_with_report(ds, ula, plan).map(|(m, _)| m)
}

pub fn fit_with_report(
    ds: &EmfDataset,
    ula: &VirtualUlaConfig,
    plan: &SectorPlan,
) -> Result<(AitModel, Vec<SectorReport>)> {
    ula.validate()?;
    let fits: Vec<(SectorFit, usize)> = plan
        .sectors()
        .par_iter()
        .map(|s| {
            let idx = ds.grid().indices_within(s.lo, s.hi);
            if idx.is_empty() {
                return Err(Error::Plan(format!(
                    "sector [{}, {}] contains no calibration samples",
                    s.lo, s.hi
                )));
            }
            let angles: Vec<f64> = idx.iter().map(|&i| ds.angles()[i]).collect();
            let a_v = steering_matrix(ula, &angles)?;
            let fit = fit_sector(&ds.columns(&idx), &a_v, Inversion::PseudoInverse)?;
            if fit.rank < ula.element_count {
                debug!(
                    "sector [{}, {}]: rank {} < {}, using pseudo-inverse",
                    s.lo, s.hi, fit.rank, ula.element_count
                );
            }
            Ok((fit, idx.len()))
        })
        .collect::<Result<_>>()?;

    let coefficients: Vec<CMatrix> = fits.iter().map(|(f, _)| f.coefficients.clone()).collect();
    let resolved = resolve_spans(ds, ula, plan, &coefficients)?;
    let model = AitModel {
        ula: *ula,
        plan: plan.clone(),
        coefficients,
        resolved,
    };
    let reports = fits
        .iter()
        .enumerate()
        .map(|(l, (f, samples))| {
            Ok(SectorReport {
                interval: plan.sectors()[l],
                samples: *samples,
                rank: f.rank,
                gram_condition: f.gram_condition,
                transformation_error: model.transformation_error(ds, l)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    info!(
        "AIT fit: {} sectors, mean transformation error {:.4e}",
        plan.len(),
        reports.iter().map(|r| r.transformation_error).sum::<f64>() / reports.len() as f64
    );
    Ok((model, reports))
}

fn resolve_spans(
    ds: &EmfDataset,
    ula: &VirtualUlaConfig,
    plan: &SectorPlan,
    coefficients: &[CMatrix],
) -> Result<Vec<ResolvedSpan>> {
    let modes = ds.port_count();
    plan.spans()
        .iter()
        .map(|span| {
            let columns = if span.is_overlap() {
                let idx = ds.grid().indices_within(span.interval.lo, span.interval.hi);
                let angles: Vec<f64> = idx.iter().map(|&i| ds.angles()[i]).collect();
                if angles.is_empty() {
                    return Err(Error::Plan(format!(
                        "overlap [{}, {}] contains no calibration samples",
                        span.interval.lo, span.interval.hi
                    )));
                }
                let a_v = steering_matrix(ula, &angles)?;
                let cands: Vec<&CMatrix> = span.sectors.iter().map(|&l| &coefficients[l]).collect();
                resolve_columns(&cands, &a_v, &ds.columns(&idx))?
                    .into_iter()
                    .map(|c| span.sectors[c])
                    .collect()
            } else {
                vec![span.sectors[0]; modes]
            };
            Ok(ResolvedSpan {
                interval: span.interval,
                columns,
            })
        })
        .collect()
}

impl AitModel {
    /// Assembles a model from given sector matrices, e.g. published ones.
    ///
    /// With a dataset, overlaps are resolved against it; without one, each
    /// overlap span takes all columns from the covering sector whose centre
    /// is nearest the span midpoint (ties to the left).
    pub fn from_matrices(
        ula: VirtualUlaConfig,
        plan: SectorPlan,
        coefficients: Vec<CMatrix>,
        ds: Option<&EmfDataset>,
    ) -> Result<Self> {
        ula.validate()?;
        if coefficients.len() != plan.len() {
            return Err(Error::Schema(format!(
                "{} matrices for {} sectors",
                coefficients.len(),
                plan.len()
            )));
        }
        let modes = coefficients[0].ncols();
        for g in &coefficients {
            if g.nrows() != ula.element_count || g.ncols() != modes {
                return Err(Error::Schema(format!(
                    "mapping matrix is {}x{}, expected {}x{}",
                    g.nrows(),
                    g.ncols(),
                    ula.element_count,
                    modes
                )));
            }
            if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Arg("non-finite mapping coefficient".into()));
            }
        }
        let resolved = match ds {
            Some(ds) => {
                if ds.port_count() != modes {
                    return Err(Error::Schema(format!(
                        "matrices map {modes} modes, dataset has {} ports",
                        ds.port_count()
                    )));
                }
                resolve_spans(ds, &ula, &plan, &coefficients)?
            }
            None => plan
                .spans()
                .iter()
                .map(|span| {
                    let mid = span.interval.midpoint();
                    let mut best = span.sectors[0];
                    for &l in &span.sectors[1..] {
                        let d = (plan.sectors()[l].midpoint() - mid).abs();
                        if d < (plan.sectors()[best].midpoint() - mid).abs() - 1e-12 {
                            best = l;
                        }
                    }
                    ResolvedSpan {
                        interval: span.interval,
                        columns: vec![best; modes],
                    }
                })
                .collect(),
        };
        Ok(Self {
            ula,
            plan,
            coefficients,
            resolved,
        })
    }

    pub fn ula(&self) -> &VirtualUlaConfig {
        &self.ula
    }

    pub fn plan(&self) -> &SectorPlan {
        &self.plan
    }

    /// Sector mapping matrices `G_l`, one per sector.
    pub fn coefficients(&self) -> &[CMatrix] {
        &self.coefficients
    }

    pub fn resolved_map(&self) -> &[ResolvedSpan] {
        &self.resolved
    }

    /// Column provenance for every overlap span.
    pub fn overlap_choices(&self) -> impl Iterator<Item = &ResolvedSpan> {
        self.plan
            .spans()
            .iter()
            .zip(&self.resolved)
            .filter(|(s, _)| s.is_overlap())
            .map(|(_, r)| r)
    }

    pub fn modes(&self) -> usize {
        self.coefficients[0].ncols()
    }

    /// Interpolated response `G_effᴴ a_v(θ)`.
    pub fn interpolate(&self, theta_deg: f64) -> Result<CVector> {
        let span = self.plan.span_index(theta_deg)?;
        Ok(self.eval_span(span, theta_deg))
    }

    fn eval_span(&self, span: usize, theta_deg: f64) -> CVector {
        let a_v = steering_vector(&self.ula, theta_deg);
        let cols = &self.resolved[span].columns;
        CVector::from_iterator(
            cols.len(),
            cols.iter()
                .enumerate()
                .map(|(m, &l)| self.coefficients[l].column(m).dotc(&a_v)),
        )
    }

    /// `ξ_l = ‖G_lᴴA_v(ϑ_l) − E(ϑ_l)‖_F / ‖E(ϑ_l)‖_F` over the calibration
    /// samples of sector `sector`.
    pub fn transformation_error(&self, ds: &EmfDataset, sector: usize) -> Result<f64> {
        self.check_ports(ds)?;
        let s = self
            .plan
            .sectors()
            .get(sector)
            .ok_or_else(|| Error::Arg(format!("sector index {sector} out of range")))?;
        let idx = ds.grid().indices_within(s.lo, s.hi);
        if idx.is_empty() {
            return Err(Error::Plan(format!(
                "sector [{}, {}] contains no calibration samples",
                s.lo, s.hi
            )));
        }
        let angles: Vec<f64> = idx.iter().map(|&i| ds.angles()[i]).collect();
        let e = ds.columns(&idx);
        let denom = e.norm();
        if denom == 0.0 {
            return Err(Error::DegenerateData(format!(
                "sector [{}, {}] has zero response",
                s.lo, s.hi
            )));
        }
        let a_v = steering_matrix(&self.ula, &angles)?;
        let mapped = self.coefficients[sector].adjoint() * a_v;
        Ok((mapped - e).norm() / denom)
    }

    /// Arithmetic mean of the per-sector transformation errors.
    pub fn mean_transformation_error(&self, ds: &EmfDataset) -> Result<f64> {
        let xs = (0..self.plan.len())
            .map(|l| self.transformation_error(ds, l))
            .collect::<Result<Vec<_>>>()?;
        Ok(xs.iter().sum::<f64>() / xs.len() as f64)
    }

    /// Relative error of the resolved (runtime) model over the whole grid.
    pub fn resolved_error(&self, ds: &EmfDataset) -> Result<f64> {
        self.check_ports(ds)?;
        let denom = ds.responses().norm();
        if denom == 0.0 {
            return Err(Error::DegenerateData("dataset has zero norm".into()));
        }
        let a = self.response_matrix(ds.angles())?;
        Ok((a - ds.responses()).norm() / denom)
    }

    /// Gain on both sides of every interior span boundary, per port.
    pub fn boundary_jumps(&self) -> Vec<BoundaryJump> {
        const H: f64 = 1e-6;
        let mut out = Vec::new();
        for i in 0..self.resolved.len().saturating_sub(1) {
            let b = self.resolved[i].interval.hi;
            let left = self.eval_span(i, b - H);
            let right = self.eval_span(i + 1, b + H);
            let mean_gain = 0.5
                * (left.iter().map(|z| z.norm_sqr()).sum::<f64>()
                    + right.iter().map(|z| z.norm_sqr()).sum::<f64>())
                / left.len() as f64;
            for m in 0..left.len() {
                out.push(BoundaryJump {
                    angle: b,
                    port: m + 1,
                    left_gain: left[m].norm_sqr(),
                    right_gain: right[m].norm_sqr(),
                    mean_gain,
                });
            }
        }
        out
    }

    fn check_ports(&self, ds: &EmfDataset) -> Result<()> {
        if ds.port_count() != self.modes() {
            return Err(Error::Schema(format!(
                "model maps {} modes, dataset has {} ports",
                self.modes(),
                ds.port_count()
            )));
        }
        Ok(())
    }
}

/// Gain either side of a span boundary for one port; `mean_gain` is the
/// mean over ports at the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryJump {
    pub angle: f64,
    pub port: usize,
    pub left_gain: f64,
    pub right_gain: f64,
    pub mean_gain: f64,
}

impl BoundaryJump {
    /// Gain step relative to the mean port gain at the boundary.
    pub fn relative(&self) -> f64 {
        (self.left_gain - self.right_gain).abs() / self.mean_gain
    }
}

impl AntennaResponse for AitModel {
    fn ports(&self) -> usize {
        self.modes()
    }

    fn response(&self, theta_deg: f64) -> Result<CVector> {
        self.interpolate(theta_deg)
    }
}

/// Serialized model: matrices are sector → row → `[re, im]` pairs.
#[derive(Debug, Serialize, Deserialize)]
struct AitFile {
    family: String,
    ula: VirtualUlaConfig,
    sector_size: f64,
    overlap: f64,
    ports: usize,
    matrices: Vec<Vec<Vec<[f64; 2]>>>,
    resolved_map: Vec<ResolvedSpan>,
}

impl AitModel {
    pub fn to_json_string(&self) -> Result<String> {
        let matrices = self
            .coefficients
            .iter()
            .map(|g| {
                g.row_iter()
                    .map(|r| r.iter().map(|z| [z.re, z.im]).collect())
                    .collect()
            })
            .collect();
        Ok(serde_json::to_string_pretty(&AitFile {
            family: "ait".into(),
            ula: self.ula,
            sector_size: self.plan.sector_size(),
            overlap: self.plan.overlap(),
            ports: self.modes(),
            matrices,
            resolved_map: self.resolved.clone(),
        })?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let f: AitFile = serde_json::from_str(text)?;
        if f.family != "ait" {
            return Err(Error::Schema(format!("expected an ait model, found {:?}", f.family)));
        }
        let plan = partition_fov(f.sector_size, f.overlap)?;
        let n = f.ula.element_count;
        let coefficients = f
            .matrices
            .iter()
            .map(|rows| {
                if rows.len() != n || rows.iter().any(|r| r.len() != f.ports) {
                    return Err(Error::Schema("mapping matrix shape disagrees with header".into()));
                }
                Ok(CMatrix::from_fn(n, f.ports, |i, j| {
                    Complex64::new(rows[i][j][0], rows[i][j][1])
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut model = Self::from_matrices(f.ula, plan, coefficients, None)?;
        if f.resolved_map.len() != model.resolved.len() {
            return Err(Error::Schema("resolved map does not match the sector plan".into()));
        }
        for (span, r) in model.plan.spans().iter().zip(&f.resolved_map) {
            let same = (span.interval.lo - r.interval.lo).abs() < 1e-9
                && (span.interval.hi - r.interval.hi).abs() < 1e-9;
            if !same
                || r.columns.len() != f.ports
                || r.columns.iter().any(|l| !span.sectors.contains(l))
            {
                return Err(Error::Schema(format!(
                    "resolved span [{}, {}] inconsistent with the sector plan",
                    r.interval.lo, r.interval.hi
                )));
            }
        }
        model.resolved = f.resolved_map;
        Ok(model)
    }
}
