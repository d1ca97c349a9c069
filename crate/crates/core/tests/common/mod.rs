#![allow(dead_code)]

use mmant::{CMatrix, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm()
}

/// Orthonormal basis of the column space by modified Gram-Schmidt.
pub fn orthonormal_basis(a: &CMatrix) -> CMatrix {
    let mut q = a.clone();
    for j in 0..q.ncols() {
        for i in 0..j {
            let qi = q.column(i).clone_owned();
            let proj = qi.dotc(&q.column(j));
            let mut cj = q.column_mut(j);
            cj -= qi * proj;
        }
        let n = q.column(j).norm();
        let mut cj = q.column_mut(j);
        cj /= Complex64::new(n, 0.0);
    }
    q
}
