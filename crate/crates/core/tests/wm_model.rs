mod common;

use common::{random_matrix, rel, rng};
use mmant::fixtures::{reference_wm_model, synthesize_dataset, wm_fixture};
use mmant::grid::AngleGrid;
use mmant::linalg::Inversion;
use mmant::wm::{basis_matrix, fit_wm, fit_wm_with, fourier_basis, WmModel};
use mmant::{CMatrix, Complex64, EmfDataset, Error};

fn noisy_dataset() -> EmfDataset {
    // Synthesized data plus a perturbation outside every truncated span.
    let ds = synthesize_dataset(5.0).unwrap();
    let mut r = rng(99);
    let e = ds.responses() + random_matrix(&mut r, 4, ds.angles().len()) * Complex64::new(0.05, 0.0);
    EmfDataset::new(ds.grid().clone(), e, "perturbed").unwrap()
}

#[test]
fn basis_on_full_circle_is_orthonormal() {
    let angles: Vec<f64> = (0..72).map(|k| -180.0 + 5.0 * k as f64).collect();
    for u in [1, 13, 35, 71] {
        let psi = basis_matrix(&angles, u).unwrap();
        let gram = &psi * psi.adjoint() * Complex64::new(2.0 * std::f64::consts::PI / 72.0, 0.0);
        let eye = CMatrix::identity(u, u);
        assert!((gram - eye).norm() < 1e-12, "U={u}");
    }
}

#[test]
fn basis_values() {
    let b = fourier_basis(0.0, 13).unwrap();
    assert_eq!(b.len(), 13);
    for z in b.iter() {
        assert!((z - Complex64::new(0.3989422804014327, 0.0)).norm() < 1e-15);
    }
    assert!(matches!(fourier_basis(0.0, 12), Err(Error::Arg(_))));
    let one = fourier_basis(73.0, 1).unwrap();
    assert!((one[0] - Complex64::new(0.3989422804014327, 0.0)).norm() < 1e-15);
}

#[test]
fn exact_round_trip_recovers_published_matrix() {
    let ds = synthesize_dataset(5.0).unwrap();
    let m = fit_wm(&ds, 13).unwrap();
    let h0 = reference_wm_model();
    assert!(rel(m.sampling_matrix(), h0.sampling_matrix()) < 1e-8);
    assert!(m.error(&ds).unwrap() < 1e-10);
}

#[test]
fn constant_data_fits_a_single_coefficient() {
    let grid = AngleGrid::fov(5.0).unwrap();
    let c = Complex64::new(0.7, -0.2);
    let e = CMatrix::from_element(1, grid.len(), c);
    let ds = EmfDataset::new(grid, e, "const").unwrap();
    let m = fit_wm(&ds, 1).unwrap();
    let want = c * (2.0 * std::f64::consts::PI).sqrt();
    assert!((m.sampling_matrix()[(0, 0)] - want).norm() < 1e-12);
}

#[test]
fn residual_is_orthogonal_to_the_basis() {
    let ds = noisy_dataset();
    for u in [5, 9, 13] {
        let m = fit_wm(&ds, u).unwrap();
        let psi = basis_matrix(ds.angles(), u).unwrap();
        let resid = m.sampling_matrix() * &psi - ds.responses();
        let g = resid * psi.adjoint();
        assert!(g.norm() / (ds.responses() * psi.adjoint()).norm() < 1e-9, "U={u}");
    }
}

#[test]
fn refitting_own_evaluations_is_idempotent() {
    let ds = noisy_dataset();
    let m = fit_wm(&ds, 11).unwrap();
    let psi = basis_matrix(ds.angles(), 11).unwrap();
    let own = EmfDataset::new(ds.grid().clone(), m.sampling_matrix() * psi, "own").unwrap();
    let again = fit_wm(&own, 11).unwrap();
    assert!(rel(again.sampling_matrix(), m.sampling_matrix()) < 1e-10);
}

#[test]
fn nested_bases_never_increase_the_error() {
    for ds in [synthesize_dataset(5.0).unwrap(), noisy_dataset()] {
        let xi: Vec<f64> = (0..13)
            .map(|k| fit_wm(&ds, 2 * k + 1).unwrap().error(&ds).unwrap())
            .collect();
        for w in xi.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{xi:?}");
        }
    }
}

#[test]
fn coefficient_sweep_drops_fast_then_flattens() {
    let ds = synthesize_dataset(5.0).unwrap();
    let xi: Vec<f64> = (5..=35)
        .step_by(2)
        .map(|u| fit_wm_with(&ds, u, Inversion::PseudoInverse).unwrap().1.approximation_error)
        .collect();
    for w in xi.windows(2) {
        assert!(w[1] <= w[0] + 1e-6, "{xi:?}");
    }
    assert!(xi[0] / xi[3] > 10.0);
    assert!(xi[4] < 1e-6);
    let frozen = [0.11417087207571792, 0.04419723706855641, 0.01240380323891834, 0.002208136104161735];
    for (a, b) in xi.iter().zip(frozen) {
        assert!((a - b).abs() < 1e-9 * b, "{a} vs {b}");
    }
}

#[test]
fn wide_bases_need_the_pseudo_inverse() {
    let ds = synthesize_dataset(5.0).unwrap();
    assert!(matches!(fit_wm(&ds, 35), Err(Error::Singularity(_))));
    let (_, rep) = fit_wm_with(&ds, 35, Inversion::PseudoInverse).unwrap();
    assert!(rep.rank < 35);
}

#[test]
fn interpolation_values() {
    let h = reference_wm_model();
    let at0 = h.interpolate(0.0);
    let row1: Complex64 = h.sampling_matrix().row(0).iter().sum();
    assert!((at0[0] - row1 / (2.0 * std::f64::consts::PI).sqrt()).norm() < 1e-12);
    assert!((h.interpolate(33.0) - h.interpolate(393.0)).norm() < 1e-12);
    let zero = WmModel::new(CMatrix::zeros(2, 5)).unwrap();
    assert_eq!(zero.interpolate(12.0).norm(), 0.0);
}

#[test]
fn published_coefficients_decay() {
    let fx = wm_fixture().unwrap();
    let h = fx.model.sampling_matrix();
    // Port 1: |u|=5 entry is far below the |u|=2 entry.
    assert!(h[(0, 11)].norm() < h[(0, 4)].norm());
    let decay = fx.model.coefficient_decay();
    assert_eq!(decay.len(), 7);
    assert!(decay[6].1 < decay[2].1);
}

#[test]
fn decay_of_random_matrix_matches_column_maxima() {
    let mut r = rng(3);
    let h = random_matrix(&mut r, 3, 7);
    let decay = WmModel::new(h.clone()).unwrap().coefficient_decay();
    for (k, mag) in decay {
        let want = [3 - k, 3 + k]
            .iter()
            .flat_map(|&c| (0..3).map(move |m| (m, c)))
            .map(|(m, c)| h[(m, c)].norm())
            .fold(0.0, f64::max);
        assert_eq!(mag, want);
    }
    let mut spike = CMatrix::zeros(2, 5);
    spike[(1, 4)] = Complex64::new(0.0, 2.0);
    let d = WmModel::new(spike).unwrap().coefficient_decay();
    assert_eq!(d, vec![(0, 0.0), (1, 0.0), (2, 2.0)]);
}

#[test]
fn zero_data_is_degenerate() {
    let ds = synthesize_dataset(5.0).unwrap();
    assert!(matches!(WmModel::new(CMatrix::zeros(4, 4)), Err(Error::Arg(_))));
    let m = reference_wm_model();
    let three = WmModel::new(CMatrix::zeros(3, 13)).unwrap();
    assert!(matches!(three.error(&ds), Err(Error::Schema(_))));
    assert!(m.error(&ds).unwrap() < 1e-12);
}

#[test]
fn json_round_trip() {
    let m = reference_wm_model();
    let back = WmModel::from_json_str(&m.to_json_string().unwrap()).unwrap();
    assert_eq!(back.sampling_matrix(), m.sampling_matrix());
}
