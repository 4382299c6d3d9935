use nalgebra::SymmetricEigen;

use super::{ensure_finite, ensure_square, sym, Matrix};
use crate::error::{Error, Result};

/// Eigenvalues at or below `SPD_EIGEN_FLOOR × λ_max` are treated as zero by the
/// SPD-only modes.
pub const SPD_EIGEN_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetricFunction {
    Exp,
    SqrtSpd,
    InvSqrtSpd,
    LogSpd,
}

/// Apply a scalar function to a symmetric matrix through its eigendecomposition.
pub fn symmetric_matrix_function(s: &Matrix, mode: SymmetricFunction) -> Result<Matrix> {
    let eig = decompose(s)?;
    if mode != SymmetricFunction::Exp {
        check_spd(&eig.eigenvalues)?;
    }
    let f = |x: f64| match mode {
        SymmetricFunction::Exp => x.exp(),
        SymmetricFunction::SqrtSpd => x.sqrt(),
        SymmetricFunction::InvSqrtSpd => 1.0 / x.sqrt(),
        SymmetricFunction::LogSpd => x.ln(),
    };
    Ok(recompose(&eig, f))
}

/// `(S^{1/2}, S^{-1/2})` from a single eigendecomposition.
pub fn spd_sqrt_pair(s: &Matrix) -> Result<(Matrix, Matrix)> {
    let eig = decompose(s)?;
    check_spd(&eig.eigenvalues)?;
    Ok((recompose(&eig, f64::sqrt), recompose(&eig, |x| 1.0 / x.sqrt())))
}

fn decompose(s: &Matrix) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    ensure_square(s, "symmetric matrix function")?;
    ensure_finite(s, "symmetric matrix function")?;
    Ok(sym(s).symmetric_eigen())
}

fn check_spd(eigenvalues: &nalgebra::DVector<f64>) -> Result<()> {
    let max = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = SPD_EIGEN_FLOOR * max.max(0.0);
    if eigenvalues.is_empty() || (max > 0.0 && min > floor) {
        Ok(())
    } else {
        Err(Error::NotPositiveDefinite { min_eig: min, floor })
    }
}

fn recompose(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> Matrix {
    let mut scaled = eig.eigenvectors.clone();
    for (mut col, &lambda) in scaled.column_iter_mut().zip(eig.eigenvalues.iter()) {
        col *= f(lambda);
    }
    sym(&(scaled * eig.eigenvectors.transpose()))
}
