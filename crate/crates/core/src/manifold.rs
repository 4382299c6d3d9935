//! Geometry of `Skew(r) × Sym₊(r) × ℝ^{r×m} × ℝ^{1×r} × Sym(r)`.
//!
//! The flat factors use the Frobenius metric, identity transport and additive
//! retraction. The SPD factor carries the affine-invariant metric
//! `tr(R⁻¹ ξ R⁻¹ η)`, the exponential map as retraction and its parallel
//! transport `ξ ↦ E ξ Eᵀ`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::linalg::{ensure_shape, frobenius_inner, skew, spd_sqrt_pair, sym, trace_of_product, Matrix};
use crate::model::RomPoint;

/// Exponent clamp for the SPD exponential; `e^600` is still comfortably finite.
const MAX_EXP_ARG: f64 = 600.0;
/// Retracted SPD factors are floored at this fraction of their largest eigenvalue.
const RETRACT_EIGEN_FLOOR: f64 = 1e-12;

/// Tangent vector `(ξ_J, ξ_R, ξ_B, ξ_C, ξ_M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub j: Matrix,
    pub r: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub m: Matrix,
}

/// Unprojected partial derivatives of the smooth extension of a cost, in the
/// same component order as [`TangentVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanGradient {
    pub j: Matrix,
    pub r: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub m: Matrix,
}

impl TangentVector {
    pub fn zeros(order: usize, inputs: usize) -> Self {
        Self {
            j: Matrix::zeros(order, order),
            r: Matrix::zeros(order, order),
            b: Matrix::zeros(order, inputs),
            c: Matrix::zeros(1, order),
            m: Matrix::zeros(order, order),
        }
    }

    pub fn zeros_at(x: &RomPoint) -> Self {
        Self::zeros(x.order(), x.num_inputs())
    }

    /// Builds a tangent vector, projecting each block onto its tangent space.
    pub fn projected(j: Matrix, r: Matrix, b: Matrix, c: Matrix, m: Matrix) -> Self {
        Self {
            j: skew(&j),
            r: sym(&r),
            b,
            c,
            m: sym(&m),
        }
    }

    pub fn components(&self) -> [&Matrix; 5] {
        [&self.j, &self.r, &self.b, &self.c, &self.m]
    }

    fn components_mut(&mut self) -> [&mut Matrix; 5] {
        [&mut self.j, &mut self.r, &mut self.b, &mut self.c, &mut self.m]
    }

    pub fn is_zero(&self) -> bool {
        self.components().iter().all(|c| c.iter().all(|v| *v == 0.0))
    }

    /// `self += alpha · other`
    pub fn axpy(&mut self, alpha: f64, other: &TangentVector) {
        for (dst, src) in self.components_mut().into_iter().zip(other.components()) {
            *dst += src * alpha;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for c in self.components_mut() {
            *c *= alpha;
        }
    }

    /// Frobenius inner product summed over all blocks (the metric at `R = I`).
    pub fn flat_inner(&self, other: &TangentVector) -> f64 {
        self.components()
            .iter()
            .zip(other.components())
            .map(|(a, b)| frobenius_inner(a, b))
            .sum()
    }

    fn check_at(&self, x: &RomPoint) -> Result<()> {
        let (r, m) = (x.order(), x.num_inputs());
        ensure_shape(&self.j, r, r, "tangent J block")?;
        ensure_shape(&self.r, r, r, "tangent R block")?;
        ensure_shape(&self.b, r, m, "tangent B block")?;
        ensure_shape(&self.c, 1, r, "tangent C block")?;
        ensure_shape(&self.m, r, r, "tangent M block")
    }
}

impl Add<&TangentVector> for &TangentVector {
    type Output = TangentVector;
    fn add(self, rhs: &TangentVector) -> TangentVector {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub<&TangentVector> for &TangentVector {
    type Output = TangentVector;
    fn sub(self, rhs: &TangentVector) -> TangentVector {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &TangentVector {
    type Output = TangentVector;
    fn mul(self, alpha: f64) -> TangentVector {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }
}

impl Neg for &TangentVector {
    type Output = TangentVector;
    fn neg(self) -> TangentVector {
        self * -1.0
    }
}

impl Neg for TangentVector {
    type Output = TangentVector;
    fn neg(mut self) -> TangentVector {
        self.scale(-1.0);
        self
    }
}

/// Riemannian metric frozen at one point (caches `R⁻¹`).
#[derive(Debug, Clone)]
pub struct Metric {
    r_inv: Matrix,
}

impl Metric {
    pub fn at(x: &RomPoint) -> Result<Self> {
        let r_inv = x
            .r()
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite {
                min_eig: x.r().symmetric_eigenvalues().min(),
                floor: 0.0,
            })?
            .inverse();
        Ok(Self { r_inv: sym(&r_inv) })
    }

    pub fn inner(&self, xi: &TangentVector, eta: &TangentVector) -> f64 {
        let spd = trace_of_product(&(&self.r_inv * &xi.r), &(&self.r_inv * &eta.r));
        frobenius_inner(&xi.j, &eta.j)
            + spd
            + frobenius_inner(&xi.b, &eta.b)
            + frobenius_inner(&xi.c, &eta.c)
            + frobenius_inner(&xi.m, &eta.m)
    }

    pub fn norm(&self, xi: &TangentVector) -> f64 {
        self.inner(xi, xi).max(0.0).sqrt()
    }
}

/// `⟨ξ, η⟩_x`
pub fn inner_product(x: &RomPoint, xi: &TangentVector, eta: &TangentVector) -> Result<f64> {
    xi.check_at(x)?;
    eta.check_at(x)?;
    Ok(Metric::at(x)?.inner(xi, eta))
}

/// Riesz representative of the Euclidean differential:
/// `(skew(∇_J), R sym(∇_R) R, ∇_B, ∇_C, sym(∇_M))`.
pub fn egrad_to_rgrad(x: &RomPoint, egrad: &EuclideanGradient) -> Result<TangentVector> {
    let as_tangent = TangentVector {
        j: egrad.j.clone(),
        r: egrad.r.clone(),
        b: egrad.b.clone(),
        c: egrad.c.clone(),
        m: egrad.m.clone(),
    };
    as_tangent.check_at(x)?;
    Ok(TangentVector {
        j: skew(&egrad.j),
        r: sym(&(x.r() * sym(&egrad.r) * x.r())),
        b: egrad.b.clone(),
        c: egrad.c.clone(),
        m: sym(&egrad.m),
    })
}

/// Retraction and transport along one tangent direction, sharing the SPD
/// square roots and eigendecomposition.
#[derive(Debug, Clone)]
pub struct Step {
    endpoint: RomPoint,
    /// `E = R^{1/2} exp(½ R^{-1/2} η_R R^{-1/2}) R^{-1/2}`; `None` when `η_R = 0`.
    transport: Option<Matrix>,
}

impl Step {
    pub fn new(x: &RomPoint, eta: &TangentVector) -> Result<Self> {
        eta.check_at(x)?;
        if eta.is_zero() {
            return Ok(Self {
                endpoint: x.clone(),
                transport: None,
            });
        }
        let flat = |base: &Matrix, delta: &Matrix| {
            if delta.iter().all(|v| *v == 0.0) {
                base.clone()
            } else {
                base + delta
            }
        };
        let j = skew(&flat(x.j(), &eta.j));
        let b = flat(x.b(), &eta.b);
        let c = flat(x.c(), &eta.c);
        let m = sym(&flat(x.m(), &eta.m));

        if eta.r.iter().all(|v| *v == 0.0) {
            return Ok(Self {
                endpoint: RomPoint::from_parts(j, x.r().clone(), b, c, m),
                transport: None,
            });
        }
        let (root, inv_root) = spd_sqrt_pair(x.r())?;
        let whitened = sym(&(&inv_root * &eta.r * &inv_root));
        if whitened.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("retraction direction"));
        }
        let eig = whitened.symmetric_eigen();
        let exp_of = |scale: f64| {
            let mut scaled = eig.eigenvectors.clone();
            for (mut col, &lambda) in scaled.column_iter_mut().zip(eig.eigenvalues.iter()) {
                col *= (scale * lambda.min(MAX_EXP_ARG)).exp();
            }
            scaled * eig.eigenvectors.transpose()
        };
        let r_new = floor_spectrum(sym(&(&root * exp_of(1.0) * &root)));
        let e = &root * exp_of(0.5) * &inv_root;
        Ok(Self {
            endpoint: RomPoint::from_parts(j, r_new, b, c, m),
            transport: Some(e),
        })
    }

    pub fn endpoint(&self) -> &RomPoint {
        &self.endpoint
    }

    pub fn into_endpoint(self) -> RomPoint {
        self.endpoint
    }

    /// Parallel transport of `ξ` from `x` to the endpoint.
    pub fn transport(&self, xi: &TangentVector) -> TangentVector {
        match &self.transport {
            None => xi.clone(),
            Some(e) => TangentVector {
                j: xi.j.clone(),
                r: sym(&(e * &xi.r * e.transpose())),
                b: xi.b.clone(),
                c: xi.c.clone(),
                m: xi.m.clone(),
            },
        }
    }
}

/// Keeps a retracted SPD factor numerically positive definite when the step
/// spans more decades than double precision resolves.
fn floor_spectrum(r: Matrix) -> Matrix {
    let eig = SymmetricEigen::new(r.clone());
    let max = eig.eigenvalues.max();
    let floor = RETRACT_EIGEN_FLOOR * max;
    if eig.eigenvalues.min() > floor {
        return r;
    }
    let mut scaled = eig.eigenvectors.clone();
    for (mut col, &lambda) in scaled.column_iter_mut().zip(eig.eigenvalues.iter()) {
        col *= lambda.max(floor);
    }
    sym(&(scaled * eig.eigenvectors.transpose()))
}

/// `R_x(ξ)`
pub fn retract(x: &RomPoint, xi: &TangentVector) -> Result<RomPoint> {
    Ok(Step::new(x, xi)?.into_endpoint())
}

/// `𝒯_η(ξ)`, tangent at `R_x(η)`.
pub fn transport(x: &RomPoint, eta: &TangentVector, xi: &TangentVector) -> Result<TangentVector> {
    xi.check_at(x)?;
    Ok(Step::new(x, eta)?.transport(xi))
}
