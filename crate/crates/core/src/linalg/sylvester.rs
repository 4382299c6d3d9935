//! Bartels–Stewart solvers on complex Schur forms.
//!
//! `A X + X B + C = 0` becomes `Ta Z + Z Tb + F = 0` with `Z = Qaᴴ X Qb` and
//! `F = Qaᴴ C Qb`. Sweeping the columns of `Z` in the order dictated by the
//! triangle of `Tb` leaves one shifted triangular solve `(Ta + tb_jj I) z_j = rhs`
//! per column. Either factor may be upper or lower triangular, so a single
//! factorisation of `A` serves both `A` and `Aᵀ`.

use nalgebra::Complex;

use super::{ensure_finite, ensure_shape, ensure_square, sym, to_complex, CMatrix, Matrix, SchurForm};
use crate::error::{Error, Result};

type C64 = Complex<f64>;

/// Solve `A X + X B + C = 0` for `X`.
pub fn solve_sylvester(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    ensure_square(a, "Sylvester left factor")?;
    ensure_square(b, "Sylvester right factor")?;
    ensure_shape(c, a.nrows(), b.nrows(), "Sylvester right-hand side")?;
    ensure_finite(c, "Sylvester right-hand side")?;
    solve_sylvester_schur(&SchurForm::new(a)?, &SchurForm::new(b)?, c)
}

/// Solve `A P + P Aᵀ + W = 0`; `A` must be Hurwitz and `W` symmetric.
pub fn solve_lyapunov(a: &Matrix, w: &Matrix) -> Result<Matrix> {
    ensure_square(a, "Lyapunov state matrix")?;
    let form = SchurForm::new(a)?;
    solve_lyapunov_schur(&form, w)
}

/// [`solve_lyapunov`] reusing a factorisation of `A` (upper or lower form).
pub fn solve_lyapunov_schur(a: &SchurForm, w: &Matrix) -> Result<Matrix> {
    ensure_shape(w, a.dim(), a.dim(), "Lyapunov right-hand side")?;
    ensure_finite(w, "Lyapunov right-hand side")?;
    a.ensure_hurwitz()?;
    let p = solve_sylvester_schur(a, &a.transpose(), w)?;
    Ok(sym(&p))
}

/// Solve `A X + X B + C = 0` given Schur forms of `A` and `B`.
pub fn solve_sylvester_schur(a: &SchurForm, b: &SchurForm, c: &Matrix) -> Result<Matrix> {
    let (n, r) = (a.dim(), b.dim());
    ensure_shape(c, n, r, "Sylvester right-hand side")?;
    ensure_finite(c, "Sylvester right-hand side")?;
    if n == 0 || r == 0 {
        return Ok(Matrix::zeros(n, r));
    }

    let f = a.unitary().adjoint() * to_complex(c) * b.unitary();
    let ta = a.triangular();
    let tb = b.triangular();
    let pivot_floor = 64.0 * f64::EPSILON * (a.norm() + b.norm()).max(f64::MIN_POSITIVE);

    let mut z = CMatrix::zeros(n, r);
    let mut rhs = vec![C64::new(0.0, 0.0); n];
    let order: Box<dyn Iterator<Item = usize>> = if b.is_lower() {
        Box::new((0..r).rev())
    } else {
        Box::new(0..r)
    };
    for j in order {
        for (dst, src) in rhs.iter_mut().zip(f.column(j).iter()) {
            *dst = -*src;
        }
        // Columns of Z already solved that couple into column j.
        let coupled: Box<dyn Iterator<Item = usize>> = if b.is_lower() {
            Box::new((j + 1)..r)
        } else {
            Box::new(0..j)
        };
        for i in coupled {
            let coef = tb[(i, j)];
            if coef.re == 0.0 && coef.im == 0.0 {
                continue;
            }
            for (dst, zi) in rhs.iter_mut().zip(z.column(i).iter()) {
                *dst -= coef * zi;
            }
        }
        shifted_triangular_solve(ta, a.is_lower(), tb[(j, j)], &mut rhs, pivot_floor)?;
        z.column_mut(j).copy_from_slice(&rhs);
    }

    let x = a.unitary() * z * b.unitary().adjoint();
    Ok(x.map(|v| v.re))
}

/// In-place solve of `(T + shift I) z = rhs`, column-oriented so that `T` is
/// only read along its contiguous columns.
fn shifted_triangular_solve(
    t: &CMatrix,
    lower: bool,
    shift: C64,
    rhs: &mut [C64],
    pivot_floor: f64,
) -> Result<()> {
    let n = rhs.len();
    let solve_one = |k: usize, rhs: &mut [C64]| -> Result<C64> {
        let pivot = t[(k, k)] + shift;
        if pivot.norm() <= pivot_floor {
            return Err(Error::SingularPencil { pivot: pivot.norm() });
        }
        let zk = rhs[k] / pivot;
        rhs[k] = zk;
        Ok(zk)
    };
    if lower {
        for k in 0..n {
            let zk = solve_one(k, rhs)?;
            let col = t.column(k);
            for i in (k + 1)..n {
                rhs[i] -= col[i] * zk;
            }
        }
    } else {
        for k in (0..n).rev() {
            let zk = solve_one(k, rhs)?;
            let col = t.column(k);
            for i in 0..k {
                rhs[i] -= col[i] * zk;
            }
        }
    }
    Ok(())
}
