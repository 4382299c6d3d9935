use super::{ensure_finite, ensure_square, Matrix};
use crate::error::Result;

/// Matrix exponential of a general square matrix by scaling and squaring with a
/// truncated Taylor series. Intended for the small systems of the quadrature
/// oracle, not for the reduction hot path.
pub fn expm(a: &Matrix) -> Result<Matrix> {
    ensure_square(a, "matrix exponential")?;
    ensure_finite(a, "matrix exponential")?;
    let n = a.nrows();
    let norm = a.norm();
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings as i32);
    let mut result = Matrix::identity(n, n);
    let mut term = Matrix::identity(n, n);
    for k in 1..=20 {
        term = &term * &scaled / k as f64;
        result += &term;
        if term.norm() <= f64::EPSILON * result.norm() {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_generator() {
        let theta = 1.3;
        let a = Matrix::from_row_slice(2, 2, &[0.0, -theta, theta, 0.0]);
        let e = expm(&a).unwrap();
        let expected = Matrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        assert!((e - expected).norm() < 1e-14);
    }

    #[test]
    fn jordan_block() {
        let a = Matrix::from_row_slice(2, 2, &[-2.0, 1.0, 0.0, -2.0]);
        let e = expm(&(a * 3.0)).unwrap();
        let d = (-6.0f64).exp();
        let expected = Matrix::from_row_slice(2, 2, &[d, 3.0 * d, 0.0, d]);
        assert!((e - &expected).norm() < 1e-14 * expected.norm().max(1.0));
    }
}
