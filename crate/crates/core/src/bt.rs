//! Balanced-truncation initial guess and the map to `J − R` coordinates.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::gramians::FomCache;
use crate::linalg::{skew, solve_lyapunov, sym, Matrix, SchurForm, SPD_EIGEN_FLOOR};
use crate::model::{LqoSystem, RomPoint, StateSpaceRom};

/// Singular values below this fraction of the largest are treated as zero.
pub const HANKEL_RANK_TOL: f64 = 1e-12;
/// `R` is considered numerically singular below this fraction of `‖Ã‖_F`.
pub const CANONICAL_SINGULAR_TOL: f64 = 1e-12;
/// Shift applied to a numerically singular `R`, as a fraction of `‖Ã‖_F`.
pub const CANONICAL_REGULARIZATION: f64 = 1e-10;

/// `S = U Uᵀ` from a symmetric eigendecomposition, clipping negative round-off.
fn psd_factor(s: &Matrix) -> Matrix {
    let eig = SymmetricEigen::new(sym(s));
    let mut u = eig.eigenvectors;
    for (mut col, &lambda) in u.column_iter_mut().zip(eig.eigenvalues.iter()) {
        col *= lambda.max(0.0).sqrt();
    }
    u
}

/// Square-root balanced truncation against the controllability Gramian and
/// the quadratic-output observability Gramian. The offset `d` is copied.
pub fn balanced_truncation(cache: &FomCache, r: usize) -> Result<StateSpaceRom> {
    let fom = cache.fom();
    let n = fom.n();
    if r == 0 || r > n {
        return Err(Error::InvalidArgument(format!("reduced order {r} outside 1..={n}")));
    }
    let up = psd_factor(cache.p());
    let uq = psd_factor(cache.q());
    let svd = (uq.transpose() * &up).svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

    let largest = svd.singular_values[order[0]];
    let available = order
        .iter()
        .take_while(|&&i| svd.singular_values[i] > HANKEL_RANK_TOL * largest)
        .count();
    if largest <= 0.0 || available < r {
        return Err(Error::RankDeficient { requested: r, available });
    }

    let mut v = Matrix::zeros(n, r);
    let mut w = Matrix::zeros(n, r);
    for (k, &i) in order.iter().take(r).enumerate() {
        let scale = svd.singular_values[i].sqrt().recip();
        v.set_column(k, &(&up * vt.row(i).transpose() * scale));
        w.set_column(k, &(&uq * u.column(i) * scale));
    }
    let wt = w.transpose();
    Ok(StateSpaceRom {
        a: &wt * fom.a() * &v,
        b: &wt * fom.b(),
        c: fom.c() * &v,
        m: sym(&(v.transpose() * fom.m() * &v)),
        d: fom.d(),
    })
}

/// Result of [`to_canonical_form`].
#[derive(Debug, Clone)]
pub struct CanonicalForm {
    pub point: RomPoint,
    /// State transformation `T = Lᵀ` with `Q̂ = L Lᵀ`, mapping `x̂ ↦ T x̂`.
    pub transform: Matrix,
    /// Multiple of the identity subtracted from `Ã` to keep `R` definite (usually 0).
    pub regularization: f64,
}

/// Rewrites a stable reduced model so that its quadratic-output observability
/// Gramian becomes the identity; then `Ã = J − R` with `J = skew(Ã)` and
/// `R = −sym(Ã) = ½(C̃ᵀC̃ + M̃P̃M̃) ⪰ 0`.
pub fn to_canonical_form(rom: &StateSpaceRom) -> Result<CanonicalForm> {
    let r = rom.a.nrows();
    if r == 0 {
        return Err(Error::InvalidArgument("empty reduced model".into()));
    }
    SchurForm::new(&rom.a)?.ensure_hurwitz()?;
    let phat = solve_lyapunov(&rom.a, &(&rom.b * rom.b.transpose()))?;
    let qhat = solve_lyapunov(&rom.a.transpose(), &(rom.c.transpose() * &rom.c + &rom.m * &phat * &rom.m))?;
    let eigs = qhat.symmetric_eigenvalues();
    let (min_eig, max_eig) = (eigs.min(), eigs.max());
    if !(max_eig > 0.0) || min_eig <= SPD_EIGEN_FLOOR * max_eig {
        return Err(Error::NotDetectable { min_eig });
    }
    let chol = qhat.cholesky().ok_or(Error::NotDetectable { min_eig })?;
    let l = chol.l();
    let lt = l.transpose();
    let l_inv = l
        .clone()
        .solve_lower_triangular(&Matrix::identity(r, r))
        .ok_or(Error::NotDetectable { min_eig })?;
    let l_inv_t = l_inv.transpose();

    let a_t = &lt * &rom.a * &l_inv_t;
    let j = skew(&a_t);
    let mut r_part = -sym(&a_t);
    let scale = a_t.norm();
    let r_min = r_part.symmetric_eigenvalues().min();
    let mut regularization = 0.0;
    if r_min <= CANONICAL_SINGULAR_TOL * scale {
        if r_min <= -CANONICAL_SINGULAR_TOL * scale {
            return Err(Error::NotPositiveDefinite {
                min_eig: r_min,
                floor: -CANONICAL_SINGULAR_TOL * scale,
            });
        }
        regularization = CANONICAL_REGULARIZATION * scale;
        for i in 0..r {
            r_part[(i, i)] += regularization;
        }
    }
    let point = RomPoint::new(
        j,
        r_part,
        &lt * &rom.b,
        &rom.c * &l_inv_t,
        sym(&(&l_inv * &rom.m * &l_inv_t)),
    )?;
    Ok(CanonicalForm {
        point,
        transform: lt,
        regularization,
    })
}

/// The full-order model itself in canonical coordinates (the global minimiser
/// at `r = n`).
pub fn canonical_copy(fom: &LqoSystem) -> Result<CanonicalForm> {
    to_canonical_form(&StateSpaceRom {
        a: fom.a().clone(),
        b: fom.b().clone(),
        c: fom.c().clone(),
        m: fom.m().clone(),
        d: fom.d(),
    })
}
