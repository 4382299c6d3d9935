use nalgebra::{Complex, Schur};

use super::{ensure_finite, ensure_square, to_complex, CMatrix, Matrix};
use crate::error::{Error, Result};

/// Complex Schur factorisation `A = Q T Qᴴ` with `Q` unitary and `T` triangular.
///
/// `T` is upper triangular for a freshly factored matrix. [`SchurForm::transpose`]
/// yields the factorisation of `Aᵀ` for free, whose triangular factor is lower.
#[derive(Debug, Clone)]
pub struct SchurForm {
    unitary: CMatrix,
    triangular: CMatrix,
    lower: bool,
    norm: f64,
}

impl SchurForm {
    pub fn new(a: &Matrix) -> Result<Self> {
        ensure_square(a, "Schur factorisation")?;
        ensure_finite(a, "Schur factorisation")?;
        let n = a.nrows();
        if n == 0 {
            return Ok(Self {
                unitary: CMatrix::zeros(0, 0),
                triangular: CMatrix::zeros(0, 0),
                lower: false,
                norm: 0.0,
            });
        }
        let (unitary, mut triangular) = Schur::try_new(to_complex(a), f64::EPSILON, 200 * n.max(10))
            .ok_or(Error::NoConvergence)?
            .unpack();
        // nalgebra leaves deflated subdiagonal entries as tiny residue.
        for j in 0..n {
            for i in (j + 1)..n {
                triangular[(i, j)] = Complex::new(0.0, 0.0);
            }
        }
        Ok(Self {
            unitary,
            triangular,
            lower: false,
            norm: a.norm(),
        })
    }

    /// Factorisation of `Aᵀ = conj(Q) Tᵀ conj(Q)ᴴ`.
    pub fn transpose(&self) -> Self {
        Self {
            unitary: self.unitary.map(|z| z.conj()),
            triangular: self.triangular.transpose(),
            lower: !self.lower,
            norm: self.norm,
        }
    }

    pub fn dim(&self) -> usize {
        self.triangular.nrows()
    }

    pub fn is_lower(&self) -> bool {
        self.lower
    }

    /// Frobenius norm of the factored matrix.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn eigenvalues(&self) -> impl Iterator<Item = Complex<f64>> + '_ {
        (0..self.dim()).map(|i| self.triangular[(i, i)])
    }

    pub fn max_real_eigenvalue(&self) -> f64 {
        self.eigenvalues().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn unitary(&self) -> &CMatrix {
        &self.unitary
    }

    pub(crate) fn triangular(&self) -> &CMatrix {
        &self.triangular
    }

    pub(crate) fn ensure_hurwitz(&self) -> Result<()> {
        let max_real = self.max_real_eigenvalue();
        if self.dim() > 0 && max_real >= 0.0 {
            Err(Error::NotStable { max_real })
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstructs_and_transposes() {
        let a = Matrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.5, -3.0, -1.0, 0.0, 0.2, 0.1, -2.0]);
        for form in [SchurForm::new(&a).unwrap(), SchurForm::new(&a).unwrap().transpose()] {
            let target = if form.is_lower() { a.transpose() } else { a.clone() };
            let rebuilt = form.unitary() * form.triangular() * form.unitary().adjoint();
            let err = (rebuilt.map(|z| z.re) - &target).norm();
            assert!(err < 1e-13, "reconstruction error {err:e}");
            assert!(rebuilt.iter().all(|z| z.im.abs() < 1e-13));
        }
    }

    #[test]
    fn eigenvalues_of_rotation_block() {
        let a = Matrix::from_row_slice(2, 2, &[-0.5, 3.0, -3.0, -0.5]);
        let form = SchurForm::new(&a).unwrap();
        for z in form.eigenvalues() {
            assert!((z.re + 0.5).abs() < 1e-12);
            assert!((z.im.abs() - 3.0).abs() < 1e-12);
        }
        assert!(form.ensure_hurwitz().is_ok());
        let unstable = Matrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, -1.0]);
        assert!(matches!(
            SchurForm::new(&unstable).unwrap().ensure_hurwitz(),
            Err(Error::NotStable { .. })
        ));
    }
}
