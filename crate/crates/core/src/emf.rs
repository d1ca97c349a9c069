//! Quantized calibration data: complex field responses of M ports on a
//! uniform angle grid.
//!
//! Two on-disk formats share one row schema `(theta_deg, port, re, im)` with
//! ports numbered from 1:
//!
//! - CSV with header `theta_deg,port,re,im`; an optional first line
//!   `# polarization=<label>` carries the polarization label.
//! - JSON `{ "polarization", "grid": {start_deg, step_deg, count}, "ports",
//!   "rows": [{theta_deg, port, re, im}, ...] }`.
//!
//! Values are written with shortest round-trip formatting, so
//! load → save → load is bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::{AngleGrid, GridHeader};
use crate::{AntennaResponse, CMatrix, CVector, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmfFormat {
    Csv,
    Json,
}

impl EmfFormat {
    /// Picks the format from a file extension (`.json` → JSON, anything
    /// else → CSV).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => EmfFormat::Json,
            _ => EmfFormat::Csv,
        }
    }
}

/// Field responses of M ports on an angle grid; `responses` is M×P with one
/// row per port.
#[derive(Debug, Clone, PartialEq)]
pub struct EmfDataset {
    grid: AngleGrid,
    responses: CMatrix,
    polarization: String,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct Row {
    theta_deg: f64,
    port: usize,
    re: f64,
    im: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonFile {
    polarization: String,
    grid: GridHeader,
    ports: usize,
    rows: Vec<Row>,
}

impl EmfDataset {
    pub fn new(grid: AngleGrid, responses: CMatrix, polarization: impl Into<String>) -> Result<Self> {
        if responses.ncols() != grid.len() {
            return Err(Error::Schema(format!(
                "response matrix has {} columns, grid has {} angles",
                responses.ncols(),
                grid.len()
            )));
        }
        if responses.nrows() == 0 {
            return Err(Error::Schema("dataset needs at least one port".into()));
        }
        if responses.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Ingest("non-finite response value".into()));
        }
        for (m, row) in responses.row_iter().enumerate() {
            if row.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
                return Err(Error::DegenerateData(format!(
                    "port {} has an all-zero response",
                    m + 1
                )));
            }
        }
        Ok(Self {
            grid,
            responses,
            polarization: polarization.into(),
        })
    }

    pub fn grid(&self) -> &AngleGrid {
        &self.grid
    }

    pub fn angles(&self) -> &[f64] {
        self.grid.angles()
    }

    /// M×P matrix `E(ϑ)`.
    pub fn responses(&self) -> &CMatrix {
        &self.responses
    }

    pub fn polarization(&self) -> &str {
        &self.polarization
    }

    pub fn port_count(&self) -> usize {
        self.responses.nrows()
    }

    /// Columns of `E` at the given grid indices.
    pub fn columns(&self, indices: &[usize]) -> CMatrix {
        self.responses.select_columns(indices)
    }

    /// Gain `|ε_m(ϑ_p)|²` of a port (1-based) over the grid.
    pub fn gain_pattern(&self, port: usize) -> Result<Vec<f64>> {
        if port == 0 || port > self.port_count() {
            return Err(Error::Arg(format!(
                "port {port} out of range 1..={}",
                self.port_count()
            )));
        }
        Ok(self
            .responses
            .row(port - 1)
            .iter()
            .map(|z| z.norm_sqr())
            .collect())
    }

    /// Same as [`gain_pattern`](Self::gain_pattern) in dB; zero gain maps to
    /// `-inf`.
    pub fn gain_pattern_db(&self, port: usize) -> Result<Vec<f64>> {
        Ok(self.gain_pattern(port)?.into_iter().map(to_db).collect())
    }

    pub fn load(path: impl AsRef<Path>, format: EmfFormat) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match format {
            EmfFormat::Csv => Self::from_csv_str(&text),
            EmfFormat::Json => Self::from_json_str(&text),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>, format: EmfFormat) -> Result<()> {
        let path = path.as_ref();
        let text = match format {
            EmfFormat::Csv => self.to_csv_string()?,
            EmfFormat::Json => self.to_json_string()?,
        };
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut polarization = String::from("unspecified");
        let first = BufReader::new(text.as_bytes()).lines().next();
        if let Some(Ok(line)) = first {
            if let Some(rest) = line.trim().strip_prefix('#') {
                if let Some(label) = rest.trim().strip_prefix("polarization=") {
                    polarization = label.trim().to_string();
                }
            }
        }
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let rows = rdr
            .deserialize::<Row>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Ingest(e.to_string()))?;
        Self::from_rows(&rows, None, polarization)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: JsonFile = serde_json::from_str(text).map_err(|e| Error::Ingest(e.to_string()))?;
        let grid = AngleGrid::try_from(file.grid)?;
        let ds = Self::from_rows(&file.rows, Some(&grid), file.polarization)?;
        if ds.port_count() != file.ports {
            return Err(Error::Ingest(format!(
                "header declares {} ports, rows carry {}",
                file.ports,
                ds.port_count()
            )));
        }
        Ok(ds)
    }

    fn from_rows(rows: &[Row], header: Option<&AngleGrid>, polarization: String) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Ingest("no data rows".into()));
        }
        // Angles keyed by their bit pattern after canonicalising -0.0.
        let key = |a: f64| (a + 0.0).to_bits();
        let mut angles: BTreeMap<u64, f64> = BTreeMap::new();
        let mut max_port = 0;
        for r in rows {
            if !r.theta_deg.is_finite() {
                return Err(Error::Ingest("non-finite angle".into()));
            }
            if r.port == 0 {
                return Err(Error::Ingest("ports are numbered from 1".into()));
            }
            max_port = max_port.max(r.port);
            angles.insert(key(r.theta_deg), r.theta_deg);
        }
        let mut sorted: Vec<f64> = angles.into_values().collect();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let grid = match header {
            Some(h) => {
                if h.len() != sorted.len() || sorted.iter().any(|&a| h.index_of(a).is_none()) {
                    return Err(Error::Ingest(
                        "row angles do not match the grid header".into(),
                    ));
                }
                h.clone()
            }
            None => AngleGrid::from_angles(&sorted)?,
        };
        let nan = Complex64::new(f64::NAN, f64::NAN);
        let mut e = CMatrix::from_element(max_port, grid.len(), nan);
        for r in rows {
            let p = grid
                .index_of(r.theta_deg)
                .ok_or_else(|| Error::Ingest(format!("angle {} not on grid", r.theta_deg)))?;
            let cell = &mut e[(r.port - 1, p)];
            if !cell.re.is_nan() || !cell.im.is_nan() {
                return Err(Error::Ingest(format!(
                    "duplicate row for port {} at {} deg",
                    r.port, r.theta_deg
                )));
            }
            *cell = Complex64::new(r.re, r.im);
        }
        for m in 0..max_port {
            for p in 0..grid.len() {
                let z = e[(m, p)];
                if z.re.is_nan() && z.im.is_nan() {
                    return Err(Error::Ingest(format!(
                        "missing response for port {} at {} deg",
                        m + 1,
                        grid.angles()[p]
                    )));
                }
            }
        }
        Self::new(grid, e, polarization)
    }

    fn rows(&self) -> Vec<Row> {
        let mut rows = Vec::with_capacity(self.responses.len());
        for (p, &theta) in self.grid.angles().iter().enumerate() {
            for m in 0..self.port_count() {
                let z = self.responses[(m, p)];
                rows.push(Row {
                    theta_deg: theta,
                    port: m + 1,
                    re: z.re,
                    im: z.im,
                });
            }
        }
        rows
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut out = format!("# polarization={}\n", self.polarization);
        let mut wtr = csv::Writer::from_writer(Vec::new());
        for r in self.rows() {
            wtr.serialize(r)?;
        }
        let bytes = wtr
            .into_inner()
            .map_err(|e| Error::Ingest(e.to_string()))?;
        out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
        Ok(out)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let file = JsonFile {
            polarization: self.polarization.clone(),
            grid: self.grid.header(),
            ports: self.port_count(),
            rows: self.rows(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }
}

/// Grid-only lookup: angles off the calibration grid are a [`Error::Grid`].
impl AntennaResponse for EmfDataset {
    fn ports(&self) -> usize {
        self.port_count()
    }

    fn response(&self, theta_deg: f64) -> Result<CVector> {
        let p = self.grid.index_of(theta_deg).ok_or_else(|| {
            Error::Grid(format!("{theta_deg} deg is not a calibration angle"))
        })?;
        Ok(self.responses.column(p).into_owned())
    }
}

/// `10·log10(g)`, with `-inf` for zero gain.
pub fn to_db(gain: f64) -> f64 {
    if gain > 0.0 {
        10.0 * gain.log10()
    } else {
        f64::NEG_INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn csv_for(angles: &[f64], ports: usize, skip: Option<(usize, f64)>) -> String {
        let mut s = String::from("theta_deg,port,re,im\n");
        for &a in angles {
            for m in 1..=ports {
                if skip == Some((m, a)) {
                    continue;
                }
                s.push_str(&format!("{a},{m},{},{}\n", a / 90.0 + m as f64, -(m as f64)));
            }
        }
        s
    }

    #[test]
    fn loads_full_fov_csv() {
        let grid = AngleGrid::fov(5.0).unwrap();
        let ds = EmfDataset::from_csv_str(&csv_for(grid.angles(), 4, None)).unwrap();
        assert_eq!(ds.port_count(), 4);
        assert_eq!(ds.grid().len(), 37);
        assert_eq!(ds.responses()[(2, 0)], c(-1.0 + 3.0, -3.0));
    }

    #[test]
    fn loads_minimal_csv() {
        let ds = EmfDataset::from_csv_str("theta_deg,port,re,im\n10,1,0.5,0.25\n").unwrap();
        assert_eq!(ds.port_count(), 1);
        assert_eq!(ds.grid().len(), 1);
    }

    #[test]
    fn missing_cell_is_ingest_error() {
        let grid = AngleGrid::fov(5.0).unwrap();
        let text = csv_for(grid.angles(), 4, Some((3, 10.0)));
        assert!(matches!(EmfDataset::from_csv_str(&text), Err(Error::Ingest(_))));
    }

    #[test]
    fn duplicate_row_is_ingest_error() {
        let text = "theta_deg,port,re,im\n0,1,1,0\n0,1,1,0\n";
        assert!(matches!(EmfDataset::from_csv_str(text), Err(Error::Ingest(_))));
    }

    #[test]
    fn non_uniform_grid_is_grid_error() {
        let text = csv_for(&[0.0, 5.0, 15.0], 2, None);
        assert!(matches!(EmfDataset::from_csv_str(&text), Err(Error::Grid(_))));
    }

    #[test]
    fn gain_of_unit_response_is_one() {
        let grid = AngleGrid::fov(30.0).unwrap();
        let e = CMatrix::from_element(1, grid.len(), c(1.0, 0.0));
        let ds = EmfDataset::new(grid, e, "RHCP").unwrap();
        assert!(ds.gain_pattern(1).unwrap().iter().all(|&g| g == 1.0));
        assert!(ds.gain_pattern_db(1).unwrap().iter().all(|&g| g == 0.0));
        assert!(matches!(ds.gain_pattern(2), Err(Error::Arg(_))));
        assert!(matches!(ds.gain_pattern(0), Err(Error::Arg(_))));
    }

    #[test]
    fn zero_entry_gives_negative_infinity_db() {
        let grid = AngleGrid::from_angles(&[0.0, 5.0]).unwrap();
        let e = CMatrix::from_row_slice(1, 2, &[c(0.0, 0.0), c(0.0, 2.0)]);
        let ds = EmfDataset::new(grid, e, "RHCP").unwrap();
        assert_eq!(ds.gain_pattern(1).unwrap(), vec![0.0, 4.0]);
        let db = ds.gain_pattern_db(1).unwrap();
        assert_eq!(db[0], f64::NEG_INFINITY);
    }

    #[test]
    fn response_lookup_is_grid_only() {
        let grid = AngleGrid::fov(5.0).unwrap();
        let ds = EmfDataset::from_csv_str(&csv_for(grid.angles(), 2, None)).unwrap();
        assert_eq!(ds.response(45.0).unwrap()[1], c(0.5 + 2.0, -2.0));
        assert!(matches!(ds.response(47.0), Err(Error::Grid(_))));
    }

    #[test]
    fn polarization_label_survives_csv() {
        let grid = AngleGrid::from_angles(&[0.0]).unwrap();
        let ds = EmfDataset::new(grid, CMatrix::from_element(1, 1, c(1.0, 1.0)), "RHCP").unwrap();
        let back = EmfDataset::from_csv_str(&ds.to_csv_string().unwrap()).unwrap();
        assert_eq!(back.polarization(), "RHCP");
    }

    #[test]
    fn json_header_mismatch_rejected() {
        let grid = AngleGrid::fov(90.0).unwrap();
        let ds = EmfDataset::new(grid, CMatrix::from_element(2, 3, c(1.0, 0.0)), "RHCP").unwrap();
        let text = ds.to_json_string().unwrap().replace("\"count\": 3", "\"count\": 2");
        assert!(EmfDataset::from_json_str(&text).is_err());
    }
}
