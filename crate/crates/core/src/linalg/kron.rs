use super::{ensure_finite, ensure_shape, ensure_square, Matrix};
use crate::error::{Error, Result};

/// Largest `n·r` accepted by [`solve_sylvester_kronecker`]; the dense system has
/// `(n·r)²` entries and costs `O((n·r)³)`.
pub const KRONECKER_MAX_UNKNOWN_PRODUCT: usize = 64;

/// Reference solver for `A X + X B + C = 0` via the vectorised system
/// `(I ⊗ A + Bᵀ ⊗ I) vec(X) = -vec(C)`.
///
/// Only used to cross-check the Schur-based solvers.
pub fn solve_sylvester_kronecker(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    ensure_square(a, "Kronecker left factor")?;
    ensure_square(b, "Kronecker right factor")?;
    let (n, r) = (a.nrows(), b.nrows());
    ensure_shape(c, n, r, "Kronecker right-hand side")?;
    ensure_finite(c, "Kronecker right-hand side")?;
    if n * r > KRONECKER_MAX_UNKNOWN_PRODUCT {
        return Err(Error::InvalidArgument(format!(
            "Kronecker oracle limited to n·r <= {KRONECKER_MAX_UNKNOWN_PRODUCT}, got {}",
            n * r
        )));
    }
    let dim = n * r;
    let idx = |i: usize, j: usize| i + n * j;
    let mut system = Matrix::zeros(dim, dim);
    for j in 0..r {
        for i in 0..n {
            let row = idx(i, j);
            for k in 0..n {
                system[(row, idx(k, j))] += a[(i, k)];
            }
            for l in 0..r {
                system[(row, idx(i, l))] += b[(l, j)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_iterator(dim, c.iter().map(|v| -v));
    let lu = system.lu();
    let sol = lu.solve(&rhs).ok_or(Error::SingularPencil { pivot: 0.0 })?;
    Ok(Matrix::from_column_slice(n, r, sol.as_slice()))
}
