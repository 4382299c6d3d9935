//! Dense linear-algebra kernels: Schur-based Lyapunov/Sylvester solvers,
//! symmetric matrix functions, a general matrix exponential and the
//! Kronecker-vectorisation reference solver.

mod expm;
mod kron;
mod schur;
mod sylvester;
mod symfun;

pub use expm::expm;
pub use kron::{solve_sylvester_kronecker, KRONECKER_MAX_UNKNOWN_PRODUCT};
pub use schur::SchurForm;
pub use sylvester::{solve_lyapunov, solve_lyapunov_schur, solve_sylvester, solve_sylvester_schur};
pub use symfun::{spd_sqrt_pair, symmetric_matrix_function, SymmetricFunction, SPD_EIGEN_FLOOR};

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

/// Real dense matrix used throughout the crate.
pub type Matrix = DMatrix<f64>;
pub(crate) type CMatrix = DMatrix<Complex<f64>>;

/// `(A + Aᵀ) / 2`
pub fn sym(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

/// `(A - Aᵀ) / 2`
pub fn skew(a: &Matrix) -> Matrix {
    (a - a.transpose()) * 0.5
}

/// `tr(Aᵀ B)`, the Frobenius inner product.
pub fn frobenius_inner(a: &Matrix, b: &Matrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `tr(A B)` without forming the product.
pub fn trace_of_product(a: &Matrix, b: &Matrix) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub(crate) fn ensure_finite(a: &Matrix, what: &'static str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn ensure_square(a: &Matrix, what: &'static str) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::dims(
            what,
            "square matrix",
            format!("{}x{}", a.nrows(), a.ncols()),
        ))
    }
}

pub(crate) fn ensure_shape(a: &Matrix, rows: usize, cols: usize, what: &'static str) -> Result<()> {
    if a.shape() == (rows, cols) {
        Ok(())
    } else {
        Err(Error::dims(
            what,
            format!("{rows}x{cols}"),
            format!("{}x{}", a.nrows(), a.ncols()),
        ))
    }
}

/// Relative Frobenius asymmetry `‖A - Aᵀ‖ / ‖A‖` (0 for the zero matrix).
pub fn asymmetry(a: &Matrix) -> f64 {
    let norm = a.norm();
    if norm == 0.0 {
        0.0
    } else {
        (a - a.transpose()).norm() / norm
    }
}

/// Largest real part over the spectrum of a square matrix.
pub fn max_real_eigenvalue(a: &Matrix) -> Result<f64> {
    Ok(SchurForm::new(a)?.max_real_eigenvalue())
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn min_symmetric_eigenvalue(a: &Matrix) -> f64 {
    if a.is_empty() {
        return f64::INFINITY;
    }
    sym(a)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn to_complex(a: &Matrix) -> CMatrix {
    a.map(|x| Complex::new(x, 0.0))
}
