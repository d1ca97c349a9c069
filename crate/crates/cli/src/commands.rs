use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use mmant::ait::{self, partition_fov, AitModel};
use mmant::doa::{MlEstimator, SearchConfig, SnapshotBatch};
use mmant::emf::EmfFormat;
use mmant::fixtures::synthesize_dataset;
use mmant::grid::AngleGrid;
use mmant::linalg::Inversion;
use mmant::sim::{self, run_experiment, run_rng, synth_snapshots_with, transformation_error_sweep, AitParams};
use mmant::ula::VirtualUlaConfig;
use mmant::wm::{fit_wm_with, WmModel};
use mmant::{AntennaResponse, CVector, EmfDataset};

use crate::config::SweepFile;
use crate::fmt::{sig9, Table};
use crate::{CliError, DoaArgs, Family, FitArgs};

type Result<T = ()> = std::result::Result<T, CliError>;

fn check_input(path: &Path) -> Result {
    if !path.is_file() {
        return Err(mmant::Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file")).into());
    }
    Ok(())
}

fn check_output(path: &Path) -> Result {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => return Ok(()),
    };
    if !parent.is_dir() {
        return Err(mmant::Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
        )
        .into());
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Result {
    fs::write(path, text).map_err(|e| mmant::Error::io(path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn load_dataset(path: &Path) -> Result<EmfDataset> {
    Ok(EmfDataset::load(path, EmfFormat::from_path(path))?)
}

/// A model file of either family.
enum Model {
    Ait(AitModel),
    Wm(WmModel),
}

impl Model {
    fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| mmant::Error::io(path, e))?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(mmant::Error::from)?;
        match v.get("family").and_then(|f| f.as_str()) {
            Some("ait") => Ok(Model::Ait(AitModel::from_json_str(&text)?)),
            Some("wm") => Ok(Model::Wm(WmModel::from_json_str(&text)?)),
            other => Err(mmant::Error::Schema(format!("unknown model family {other:?}")).into()),
        }
    }

    fn provider(&self) -> &(dyn AntennaResponse + Send + Sync) {
        match self {
            Model::Ait(m) => m,
            Model::Wm(m) => m,
        }
    }
}

pub fn synthesize(grid_step: f64, out: &Path) -> Result {
    check_output(out)?;
    let ds = synthesize_dataset(grid_step)?;
    ds.save(out, EmfFormat::from_path(out))?;
    println!("{} angles, {} ports -> {}", ds.angles().len(), ds.port_count(), out.display());
    Ok(())
}

pub fn fit(args: &FitArgs) -> Result {
    check_input(&args.data)?;
    check_output(&args.out)?;
    if let Some(r) = &args.report {
        check_output(r)?;
    }
    let ait_flags = args.elements.is_some()
        || args.spacing.is_some()
        || args.axis.is_some()
        || args.sector_size.is_some()
        || args.overlap.is_some();
    match args.model {
        Family::Wm if ait_flags => {
            return Err(CliError::Usage("AIT parameters given for a WM fit".into()));
        }
        Family::Ait if args.coeffs.is_some() => {
            return Err(CliError::Usage("--coeffs applies to WM fits only".into()));
        }
        _ => {}
    }
    let ds = load_dataset(&args.data)?;
    let (model_json, report) = match args.model {
        Family::Ait => {
            let d = AitParams::default();
            let ula = VirtualUlaConfig::new(
                args.elements.unwrap_or(d.elements),
                args.spacing.unwrap_or(d.spacing),
                args.axis.unwrap_or(d.axis),
            )?;
            let plan = partition_fov(args.sector_size.unwrap_or(d.sector_size), args.overlap.unwrap_or(d.overlap))?;
            let (model, sectors) = ait::fit_with_report(&ds, &ula, &plan)?;
            let mut t = Table::new(&["sector", "lo_deg", "hi_deg", "samples", "rank", "gram_condition", "xi"]);
            for (l, s) in sectors.iter().enumerate() {
                t.row(&[
                    (l + 1).to_string(),
                    sig9(s.interval.lo),
                    sig9(s.interval.hi),
                    s.samples.to_string(),
                    s.rank.to_string(),
                    sig9(s.gram_condition),
                    sig9(s.transformation_error),
                ]);
            }
            let mean = sectors.iter().map(|s| s.transformation_error).sum::<f64>() / sectors.len() as f64;
            info!("mean transformation error {}", sig9(mean));
            (model.to_json_string()?, t.into_string())
        }
        Family::Wm => {
            let u = args.coeffs.unwrap_or(13);
            let (model, rep) = fit_wm_with(&ds, u, Inversion::Strict)?;
            let mut t = Table::new(&["coefficients", "rank", "gram_condition", "xi"]);
            t.row(&[
                rep.coefficients.to_string(),
                rep.rank.to_string(),
                sig9(rep.gram_condition),
                sig9(rep.approximation_error),
            ]);
            (model.to_json_string()?, t.into_string())
        }
    };
    write(&args.out, &model_json)?;
    match &args.report {
        Some(p) => write(p, &report)?,
        None => print!("{report}"),
    }
    Ok(())
}

pub fn interpolate(model: &Path, grid_step: f64, out: &Path) -> Result {
    check_input(model)?;
    check_output(out)?;
    let model = Model::load(model)?;
    let grid = AngleGrid::fov(grid_step)?;
    let p = model.provider();
    let mut t = Table::new(&["theta_deg", "port", "re", "im", "gain_db"]);
    for &theta in grid.angles() {
        let a: CVector = p.response(theta)?;
        for (m, z) in a.iter().enumerate() {
            t.row(&[
                sig9(theta),
                (m + 1).to_string(),
                sig9(z.re),
                sig9(z.im),
                sig9(mmant::emf::to_db(z.norm_sqr())),
            ]);
        }
    }
    write(out, &t.into_string())
}

pub fn error(model: &Path, data: &Path, out: Option<&Path>) -> Result {
    check_input(model)?;
    check_input(data)?;
    if let Some(o) = out {
        check_output(o)?;
    }
    let model = Model::load(model)?;
    let ds = load_dataset(data)?;
    let text = match &model {
        Model::Ait(m) => {
            let mut t = Table::new(&["sector", "lo_deg", "hi_deg", "xi"]);
            for (l, s) in m.plan().sectors().iter().enumerate() {
                t.row(&[(l + 1).to_string(), sig9(s.lo), sig9(s.hi), sig9(m.transformation_error(&ds, l)?)]);
            }
            t.row(&["mean".into(), String::new(), String::new(), sig9(m.mean_transformation_error(&ds)?)]);
            t.row(&["resolved".into(), String::new(), String::new(), sig9(m.resolved_error(&ds)?)]);
            t.into_string()
        }
        Model::Wm(m) => {
            let mut t = Table::new(&["coefficients", "xi"]);
            t.row(&[m.coefficient_count().to_string(), sig9(m.error(&ds)?)]);
            t.into_string()
        }
    };
    match out {
        Some(o) => write(o, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn doa(args: &DoaArgs) -> Result {
    check_input(&args.model)?;
    check_output(&args.out)?;
    if let Some(p) = args.input.as_ref().or(args.data.as_ref()) {
        check_input(p)?;
    }
    let model = Model::load(&args.model)?;
    let cfg = SearchConfig {
        sources: args.sources,
        ..SearchConfig::default()
    };
    let est = MlEstimator::new(model.provider(), cfg)?;

    if let Some(input) = &args.input {
        let batch = SnapshotBatch::load(input)?;
        let theta = est.estimate(&batch)?;
        let mut t = Table::new(&["source", "estimate_deg"]);
        for (q, th) in theta.iter().enumerate() {
            t.row(&[(q + 1).to_string(), sig9(*th)]);
        }
        return write(&args.out, &t.into_string());
    }

    if args.theta.len() != args.sources {
        return Err(CliError::Usage(format!(
            "{} --theta values for {} sources (or pass --input)",
            args.theta.len(),
            args.sources
        )));
    }
    let ds = match &args.data {
        Some(p) => load_dataset(p)?,
        None => synthesize_dataset(args.grid_step)?,
    };
    let mut truth = args.theta.clone();
    truth.sort_by(f64::total_cmp);
    let runs = args.runs.unwrap_or(1);
    let seed = args.seed.unwrap_or(1);
    if runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let mut t = Table::new(&["run", "source", "truth_deg", "estimate_deg"]);
    let mut per_source: Vec<Vec<f64>> = vec![Vec::with_capacity(runs); truth.len()];
    for run in 0..runs {
        let mut rng = run_rng(seed, 0, run);
        let batch = synth_snapshots_with(&ds, &truth, args.snr_db, args.snapshots, &mut rng)?;
        let theta = est.estimate(&batch)?;
        for (q, (th, tr)) in theta.iter().zip(&truth).enumerate() {
            t.row(&[(run + 1).to_string(), (q + 1).to_string(), sig9(*tr), sig9(*th)]);
            per_source[q].push(*th);
        }
    }
    write(&args.out, &t.into_string())?;
    for (q, (e, tr)) in per_source.iter().zip(&truth).enumerate() {
        println!("source {} truth {} rmse_deg {}", q + 1, sig9(*tr), sig9(sim::rmse(e, *tr)?));
    }
    Ok(())
}

pub fn sweep(config: &Path, out_dir: &Path) -> Result {
    check_input(config)?;
    let cfg = SweepFile::load(config)?;
    fs::create_dir_all(out_dir).map_err(|e| mmant::Error::io(out_dir, e))?;
    let ds = match &cfg.data {
        Some(p) => {
            let p = resolve_relative(config, p);
            check_input(&p)?;
            load_dataset(&p)?
        }
        None => synthesize_dataset(cfg.grid_step)?,
    };

    let mut first_error: Option<CliError> = None;
    let mut record = |name: &str, e: CliError| -> Result {
        eprintln!("sweep {name}: {e}");
        write(&out_dir.join(format!("{name}.FAILED")), &format!("{e}\n"))?;
        first_error.get_or_insert(e);
        Ok(())
    };

    for s in &cfg.sweep {
        let mut base = cfg.experiment.clone().expect("validated on load");
        if let Some(snr) = s.snr_db {
            base.snr_db = snr;
        }
        let mut summary = Table::new(&["parameter", "snr_db", "mean_rmse_deg"]);
        let mut detail = Table::new(&["parameter", "theta_deg", "rmse_deg"]);
        let outcome = s.sweep.expand(&base).map_err(CliError::from).and_then(|points| {
            for (parameter, c) in points {
                let r = run_experiment(&ds, &c)?;
                info!("{} {}: mean RMSE {}", s.name, sig9(parameter), sig9(r.mean_rmse));
                summary.row(&[sig9(parameter), sig9(c.snr_db), sig9(r.mean_rmse)]);
                for a in &r.per_angle {
                    detail.row(&[sig9(parameter), sig9(a.theta), sig9(a.rmse)]);
                }
            }
            Ok(())
        });
        write(&out_dir.join(format!("{}.csv", s.name)), &summary.into_string())?;
        write(&out_dir.join(format!("{}_per_angle.csv", s.name)), &detail.into_string())?;
        if let Err(e) = outcome {
            record(&s.name, e)?;
        }
    }

    for s in &cfg.xi_sweep {
        let base = s.base.unwrap_or_default();
        match transformation_error_sweep(&ds, &base, &s.sweep) {
            Ok(points) => {
                let mut t = Table::new(&["parameter", "mean_xi"]);
                for p in points {
                    t.row(&[p.parameter, sig9(p.mean_xi)]);
                }
                write(&out_dir.join(format!("{}.csv", s.name)), &t.into_string())?;
            }
            Err(e) => record(&s.name, e.into())?,
        }
    }

    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Paths inside a config file are relative to the file.
fn resolve_relative(config: &Path, p: &str) -> PathBuf {
    let p = PathBuf::from(p);
    if p.is_absolute() {
        return p;
    }
    config.parent().map(|d| d.join(&p)).unwrap_or(p)
}
