//! Small complex least-squares helpers shared by the models and the
//! estimator.

use num_complex::Complex64;

use crate::{CMatrix, Error, Result};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-10;

/// What to do when the normal equations are (numerically) singular.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Inversion {
    /// Fail with [`Error::Singularity`].
    #[default]
    Strict,
    /// Drop the null directions and return the minimum-norm solution.
    PseudoInverse,
}

#[derive(Debug, Clone)]
pub struct LsSolution {
    pub solution: CMatrix,
    /// Numerical rank of the design matrix.
    pub rank: usize,
    /// Condition number of the Gram matrix `DᴴD` (infinite when rank
    /// deficient).
    pub gram_condition: f64,
}

/// Solves `min ‖D·X − B‖_F` through the SVD of the design matrix `D`.
///
/// For full-rank `D` this equals `(DᴴD)⁻¹DᴴB`; the SVD route avoids
/// squaring the condition number.
pub fn least_squares(design: &CMatrix, rhs: &CMatrix, inversion: Inversion) -> Result<LsSolution> {
    if design.nrows() != rhs.nrows() {
        return Err(Error::Schema(format!(
            "design has {} rows, right-hand side {}",
            design.nrows(),
            rhs.nrows()
        )));
    }
    let n = design.ncols();
    let svd = design.clone().svd(true, true);
    let sigma = &svd.singular_values;
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return Err(Error::Singularity("design matrix is zero".into()));
    }
    let rank = sigma.iter().filter(|&&s| s >= RANK_TOL * smax).count();
    let smin = if sigma.len() < n {
        0.0
    } else {
        sigma.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let gram_condition = (smax / smin).powi(2);
    if rank < n && inversion == Inversion::Strict {
        return Err(Error::Singularity(format!(
            "normal equations have rank {rank} < {n} (Gram condition {gram_condition:.3e})"
        )));
    }
    let u = svd.u.as_ref().expect("svd computed with U");
    let v_t = svd.v_t.as_ref().expect("svd computed with Vᴴ");
    // X = V Σ⁺ Uᴴ B
    let mut ub = u.adjoint() * rhs;
    for (i, mut row) in ub.row_iter_mut().enumerate() {
        let s = sigma[i];
        let inv = if s >= RANK_TOL * smax { 1.0 / s } else { 0.0 };
        row *= Complex64::new(inv, 0.0);
    }
    let solution = v_t.adjoint() * ub;
    Ok(LsSolution {
        solution,
        rank,
        gram_condition,
    })
}

/// Orthogonal projector onto the column space of `a`,
/// `Π = A(AᴴA)⁻¹Aᴴ`, and its complement `I − Π`.
///
/// Fails when the smallest singular value of `a` is below
/// [`RANK_TOL`] times the largest.
pub fn projectors(a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    check_full_column_rank(a)?;
    let gram = a.adjoint() * a;
    let inv = gram
        .cholesky()
        .ok_or_else(|| Error::Singularity("Gram matrix not positive definite".into()))?
        .inverse();
    let pi = a * inv * a.adjoint();
    let m = a.nrows();
    let perp = CMatrix::identity(m, m) - &pi;
    Ok((pi, perp))
}

/// Errors unless `a` has full column rank under [`RANK_TOL`].
pub fn check_full_column_rank(a: &CMatrix) -> Result<()> {
    let q = a.ncols();
    if q == 0 || a.nrows() < q {
        return Err(Error::Singularity(format!(
            "{}x{} matrix cannot have full column rank",
            a.nrows(),
            q
        )));
    }
    let sigma = a.singular_values();
    let smax = sigma.max();
    let smin = sigma.min();
    if !(smax > 0.0) || smin < RANK_TOL * smax {
        return Err(Error::Singularity(format!(
            "matrix is rank deficient (σmin/σmax = {:.3e})",
            if smax > 0.0 { smin / smax } else { 0.0 }
        )));
    }
    Ok(())
}

/// Real part of the trace; the imaginary part is discarded.
pub fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}
