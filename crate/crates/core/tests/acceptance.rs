//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails.

use std::time::{Duration, Instant};

use mmant::ait::{fit_sector, partition_fov, resolve_columns};
use mmant::doa::{projection, MlEstimator, SearchConfig};
use mmant::fixtures::{ait_fixture, reference_wm_model, synthesize_dataset, wm_fixture};
use mmant::linalg::Inversion;
use mmant::sim::{
    run_experiment, run_sweep, synth_snapshots, transformation_error_sweep, AitParams, ExperimentConfig, ModelSpec,
    Sweep, XiSweep,
};
use mmant::ula::{steering_matrix, Axis, VirtualUlaConfig};
use mmant::wm::fit_wm;
use mmant::{CMatrix, Complex64, EmfDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn dataset() -> EmfDataset {
    synthesize_dataset(5.0).expect("synthesized dataset")
}

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

fn wm_round_trip() -> Outcome {
    let ds = dataset();
    let h = fit_wm(&ds, 13).map_err(|e| e.to_string())?;
    let h0 = reference_wm_model();
    let err = (h.sampling_matrix() - h0.sampling_matrix()).norm() / h0.sampling_matrix().norm();
    check(err <= 1e-8, format!("relative Frobenius error {err:.3e}"))
}

fn ait_accuracy() -> Outcome {
    let ds = dataset();
    let z = AitParams::default().fit(&ds).and_then(|m| m.mean_transformation_error(&ds));
    let x = AitParams { axis: Axis::X, ..Default::default() }
        .fit(&ds)
        .and_then(|m| m.mean_transformation_error(&ds));
    let (z, x) = (z.map_err(|e| e.to_string())?, x.map_err(|e| e.to_string())?);
    check(
        z <= 5e-3 && x > z && x / z >= 3.0,
        format!("mean xi z-axis {z:.4e}, x-axis {x:.4e}, ratio {:.3}", x / z),
    )
}

fn spacing_insensitivity() -> Outcome {
    let ds = dataset();
    let pts = transformation_error_sweep(&ds, &AitParams::default(), &XiSweep::Spacing(vec![0.1, 0.2, 0.3, 0.4, 0.5]))
        .map_err(|e| e.to_string())?;
    let lo = pts.iter().map(|p| p.mean_xi).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.mean_xi).fold(0.0, f64::max);
    check(hi / lo < 2.0, format!("max/min mean xi {:.4}", hi / lo))
}

fn element_plateau() -> Outcome {
    let ds = dataset();
    let pts = transformation_error_sweep(&ds, &AitParams::default(), &XiSweep::ElementCount(vec![4, 6, 8, 10, 12]))
        .map_err(|e| e.to_string())?;
    let xi: Vec<f64> = pts.iter().map(|p| p.mean_xi).collect();
    let monotone = xi.windows(2).all(|w| w[1] <= 1.05 * w[0]);
    let gain = (xi[3] - xi[4]) / xi[3];
    check(
        monotone && gain < 0.2,
        format!("mean xi {:?}, N=10->12 improvement {gain:.2e}", xi.iter().map(|v| format!("{v:.4e}")).collect::<Vec<_>>()),
    )
}

fn noise_free_exactness() -> Outcome {
    let ds = dataset();
    let model = reference_wm_model();
    let est = MlEstimator::new(&model, SearchConfig::default()).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for &t in ds.angles() {
        let batch = synth_snapshots(&ds, t, None, 100, 1).map_err(|e| e.to_string())?;
        let got = est.estimate(&batch).map_err(|e| e.to_string())?;
        worst = worst.max((got[0] - t).abs());
    }
    check(worst <= 0.01, format!("worst deviation {worst:.3e} deg over {} angles", ds.angles().len()))
}

fn rmse_order() -> Outcome {
    let ds = dataset();
    let r = run_experiment(&ds, &ExperimentConfig::new(ModelSpec::Wm { coefficients: 13 })).map_err(|e| e.to_string())?;
    check(
        r.mean_rmse > 0.0 && r.mean_rmse <= 0.5,
        format!("mean RMSE {:.4e} deg (K=1000, 100 runs, 20 dB)", r.mean_rmse),
    )
}

fn coefficient_knee() -> Outcome {
    let ds = dataset();
    let base = ExperimentConfig::new(ModelSpec::Wm { coefficients: 13 });
    let pts = run_sweep(&ds, &base, &Sweep::WmCoefficients(vec![9, 13, 15])).map_err(|e| e.to_string())?;
    let (r9, r13, r15) = (pts[0].result.mean_rmse, pts[1].result.mean_rmse, pts[2].result.mean_rmse);
    check(
        r9 > r13 && (r15 - r13).abs() < 0.2 * r13,
        format!("mean RMSE U=9 {r9:.4e}, U=13 {r13:.4e}, U=15 {r15:.4e}"),
    )
}

fn sector_degradation() -> Outcome {
    let ds = dataset();
    let base = ExperimentConfig::new(ModelSpec::Ait(AitParams::default()));
    let pts = run_sweep(&ds, &base, &Sweep::SectorSize(vec![[30.0, 15.0], [60.0, 30.0]])).map_err(|e| e.to_string())?;
    let (r30, r60) = (pts[0].result.mean_rmse, pts[1].result.mean_rmse);
    check(r60 > r30, format!("mean RMSE 30deg {r30:.4e}, 60deg {r60:.4e}"))
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst_proj = 0.0f64;
    for _ in 0..100 {
        let a = random_matrix(&mut rng, 4, 2);
        let (pi, perp) = projection(&a).map_err(|e| e.to_string())?;
        worst_proj = worst_proj.max((&pi * &pi - &pi).norm()).max((&perp * &a).norm());
    }
    let ula = VirtualUlaConfig::new(4, 0.25, Axis::Z).map_err(|e| e.to_string())?;
    let mut worst_ne = 0.0f64;
    for s in partition_fov(30.0, 15.0).map_err(|e| e.to_string())?.sectors() {
        let angles: Vec<f64> = (0..=6).map(|i| s.lo + 5.0 * i as f64).collect();
        let a_v = steering_matrix(&ula, &angles).map_err(|e| e.to_string())?;
        let e = random_matrix(&mut rng, 4, angles.len());
        let g = fit_sector(&e, &a_v, Inversion::Strict).map_err(|e| e.to_string())?.coefficients;
        let rhs = &a_v * e.adjoint();
        worst_ne = worst_ne.max((&a_v * a_v.adjoint() * g - &rhs).norm() / rhs.norm());
    }
    let mut brute_ok = 0;
    for _ in 0..100 {
        let (g_a, g_b) = (random_matrix(&mut rng, 3, 4), random_matrix(&mut rng, 3, 4));
        let (a_v, e) = (random_matrix(&mut rng, 3, 5), random_matrix(&mut rng, 4, 5));
        let got = resolve_columns(&[&g_a, &g_b], &a_v, &e).map_err(|e| e.to_string())?;
        let best = (0..16usize)
            .min_by(|&p, &q| {
                let cost = |mask: usize| {
                    let g = CMatrix::from_fn(3, 4, |i, j| if mask >> j & 1 == 1 { g_b[(i, j)] } else { g_a[(i, j)] });
                    (g.adjoint() * &a_v - &e).norm()
                };
                cost(p).total_cmp(&cost(q))
            })
            .unwrap();
        if got.iter().enumerate().all(|(j, &c)| c == best >> j & 1) {
            brute_ok += 1;
        }
    }
    let ds = dataset();
    let xi: Vec<f64> = (0..13)
        .map(|k| fit_wm(&ds, 2 * k + 1).and_then(|m| m.error(&ds)))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let nested = xi.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let cfg = ExperimentConfig {
        truth_angles: Some(vec![-30.0, 0.0, 45.0]),
        snapshots: 100,
        mc_runs: 10,
        ..ExperimentConfig::new(ModelSpec::Wm { coefficients: 13 })
    };
    let bytes = |c: &ExperimentConfig| {
        run_experiment(&ds, c)
            .map_err(|e| e.to_string())
            .and_then(|r| serde_json::to_vec(&r).map_err(|e| e.to_string()))
    };
    let identical = bytes(&cfg)? == bytes(&cfg)?;
    check(
        worst_proj <= 1e-10 && worst_ne <= 1e-9 && brute_ok == 100 && nested && identical,
        format!(
            "projector {worst_proj:.1e}, normal equations {worst_ne:.1e}, brute force {brute_ok}/100, \
             nested monotone {nested}, identical reruns {identical}"
        ),
    )
}

fn fixture_integrity() -> Outcome {
    let a = ait_fixture().map_err(|e| e.to_string())?;
    let w = wm_fixture().map_err(|e| e.to_string())?;
    let spots = [
        (a.printed(1, 1, 1), "-0.3379929-0.02271694i"),
        (a.printed(6, 3, 4), "0.3838582+0.1305691i"),
        (a.printed(11, 4, 4), "-0.460818+0.6157851i"),
        (w.printed(1, 1), "0.01235-0.001501i"),
        (w.printed(4, 13), "-0.001222-0.01641i"),
        (w.printed(1, 12), "0.06771+0.06359i"),
        (w.printed(1, 5), "-0.8519-0.8543i"),
    ];
    let hits = spots.iter().filter(|(got, want)| *got == Some(*want)).count();
    let parsed = (a.matrices[0][(0, 0)] - Complex64::new(-0.3379929, -0.02271694)).norm() == 0.0;
    check(
        hits == spots.len() && parsed && a.matrices.len() == 11,
        format!("{hits}/{} printed entries match, {} mapping matrices", spots.len(), a.matrices.len()),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("WM exact round-trip", wm_round_trip, Duration::from_secs(1)),
        ("AIT accuracy and orientation ratio", ait_accuracy, Duration::from_secs(5)),
        ("spacing insensitivity", spacing_insensitivity, Duration::from_secs(10)),
        ("element-count plateau", element_plateau, Duration::from_secs(10)),
        ("noise-free estimator exactness", noise_free_exactness, Duration::from_secs(30)),
        ("RMSE order at 20 dB", rmse_order, Duration::from_secs(300)),
        ("coefficient-count knee", coefficient_knee, Duration::from_secs(600)),
        ("sector-size degradation", sector_degradation, Duration::from_secs(600)),
        ("property suites", property_suites, Duration::from_secs(60)),
        ("fixture integrity", fixture_integrity, Duration::from_secs(1)),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = run();
        let took = t.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if took <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; over time budget {budget:?}")),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<36} {}  {detail} [{:.2?}]",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            took
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
