//! Full-order and reduced LQO systems and the error system between them.
//!
//! An LQO system is `ẋ = A x + B u`, `x(0) = 0`, with the single output
//! `y = C x + xᵀ M x + d`. The constant `d` never enters an H2 quantity: it is
//! copied to every reduced model, so it cancels in `y - ŷ`.

mod io;
mod simulate;

pub use io::{read_matrix_market, write_matrix_market, SystemHeader};
pub use simulate::{
    linf_bound_check, rk4_stable_step, simulate_output, InputSignal, LinfReport, Trajectory,
};

use std::borrow::Cow;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, ensure_finite, ensure_shape, ensure_square, skew, sym, Matrix, SchurForm};

/// Relative tolerance for claimed (skew-)symmetry.
pub const STRUCTURE_TOL: f64 = 1e-12;

/// Read access to the matrices of any LQO realisation.
pub trait Realization {
    fn state_matrix(&self) -> Cow<'_, Matrix>;
    fn input_map(&self) -> &Matrix;
    fn output_row(&self) -> &Matrix;
    fn quadratic_output(&self) -> &Matrix;
    fn offset(&self) -> f64 {
        0.0
    }
    fn order(&self) -> usize {
        self.input_map().nrows()
    }
    fn inputs(&self) -> usize {
        self.input_map().ncols()
    }
}

/// Full-order single-output LQO system with a Hurwitz state matrix.
#[derive(Debug, Clone)]
pub struct LqoSystem {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    m: Matrix,
    d: f64,
    schur: Arc<SchurForm>,
}

impl LqoSystem {
    /// Validates dimensions and stability; `m` is replaced by its symmetric part.
    /// `c` must be a single row: multi-output systems are not representable.
    pub fn new(a: Matrix, b: Matrix, c: Matrix, m: Matrix, d: f64) -> Result<Self> {
        ensure_square(&a, "state matrix")?;
        let n = a.nrows();
        if n == 0 {
            return Err(Error::InvalidArgument("system order must be positive".into()));
        }
        if b.nrows() != n {
            return Err(Error::dims("input map", format!("{n} rows"), b.nrows()));
        }
        ensure_shape(&c, 1, n, "output row (single output only)")?;
        ensure_shape(&m, n, n, "quadratic output matrix")?;
        for (mat, what) in [(&a, "state matrix"), (&b, "input map"), (&c, "output row"), (&m, "quadratic output matrix")] {
            ensure_finite(mat, what)?;
        }
        if !d.is_finite() {
            return Err(Error::NonFinite("output offset"));
        }
        let schur = SchurForm::new(&a)?;
        schur.ensure_hurwitz()?;
        Ok(Self {
            m: sym(&m),
            a,
            b,
            c,
            d,
            schur: Arc::new(schur),
        })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn m(&self) -> &Matrix {
        &self.m
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// Cached complex Schur form of `A`.
    pub fn schur(&self) -> &Arc<SchurForm> {
        &self.schur
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_inputs(&self) -> usize {
        self.b.ncols()
    }
}

impl Realization for LqoSystem {
    fn state_matrix(&self) -> Cow<'_, Matrix> {
        Cow::Borrowed(&self.a)
    }
    fn input_map(&self) -> &Matrix {
        &self.b
    }
    fn output_row(&self) -> &Matrix {
        &self.c
    }
    fn quadratic_output(&self) -> &Matrix {
        &self.m
    }
    fn offset(&self) -> f64 {
        self.d
    }
}

/// Reduced model in the structured form `Â = J - R` with `J` skew-symmetric,
/// `R` symmetric positive definite and `M` symmetric: a point of
/// `Skew(r) × Sym₊(r) × ℝ^{r×m} × ℝ^{1×r} × Sym(r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RomPoint {
    pub(crate) j: Matrix,
    pub(crate) r: Matrix,
    pub(crate) b: Matrix,
    pub(crate) c: Matrix,
    pub(crate) m: Matrix,
}

impl RomPoint {
    pub fn new(j: Matrix, r: Matrix, b: Matrix, c: Matrix, m: Matrix) -> Result<Self> {
        ensure_square(&j, "ROM skew part")?;
        let order = j.nrows();
        ensure_shape(&r, order, order, "ROM dissipation")?;
        if b.nrows() != order {
            return Err(Error::dims("ROM input map", format!("{order} rows"), b.nrows()));
        }
        ensure_shape(&c, 1, order, "ROM output row")?;
        ensure_shape(&m, order, order, "ROM quadratic output")?;
        for (mat, what) in [(&j, "ROM skew part"), (&r, "ROM dissipation"), (&b, "ROM input map"), (&c, "ROM output row"), (&m, "ROM quadratic output")] {
            ensure_finite(mat, what)?;
        }
        let skewness = if j.norm() == 0.0 { 0.0 } else { (&j + j.transpose()).norm() / j.norm() };
        if skewness > STRUCTURE_TOL {
            return Err(Error::InvalidArgument(format!("J is not skew-symmetric ({skewness:e})")));
        }
        for (mat, what) in [(&r, "R"), (&m, "M")] {
            let asym = asymmetry(mat);
            if asym > STRUCTURE_TOL {
                return Err(Error::InvalidArgument(format!("{what} is not symmetric ({asym:e})")));
            }
        }
        let r = sym(&r);
        if order > 0 && r.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite {
                min_eig: r.symmetric_eigenvalues().min(),
                floor: 0.0,
            });
        }
        Ok(Self::from_parts(skew(&j), r, b, c, sym(&m)))
    }

    /// No validation; callers guarantee the structure.
    pub(crate) fn from_parts(j: Matrix, r: Matrix, b: Matrix, c: Matrix, m: Matrix) -> Self {
        Self { j, r, b, c, m }
    }

    pub fn j(&self) -> &Matrix {
        &self.j
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn m(&self) -> &Matrix {
        &self.m
    }

    /// `Â = J - R`
    pub fn a_hat(&self) -> Matrix {
        &self.j - &self.r
    }

    pub fn order(&self) -> usize {
        self.j.nrows()
    }

    pub fn num_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn to_state_space(&self, d: f64) -> StateSpaceRom {
        StateSpaceRom {
            a: self.a_hat(),
            b: self.b.clone(),
            c: self.c.clone(),
            m: self.m.clone(),
            d,
        }
    }
}

/// Reduced model in plain state-space form, e.g. straight out of balanced truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceRom {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub m: Matrix,
    pub d: f64,
}

impl Realization for StateSpaceRom {
    fn state_matrix(&self) -> Cow<'_, Matrix> {
        Cow::Borrowed(&self.a)
    }
    fn input_map(&self) -> &Matrix {
        &self.b
    }
    fn output_row(&self) -> &Matrix {
        &self.c
    }
    fn quadratic_output(&self) -> &Matrix {
        &self.m
    }
    fn offset(&self) -> f64 {
        self.d
    }
}

/// Augmented realisation whose output is `y - ŷ`:
/// `Ae = diag(A, Â)`, `Be = [B; B̂]`, `Ce = [C, -Ĉ]`, `Me = diag(M, -M̂)`.
#[derive(Debug, Clone)]
pub struct ErrorSystem {
    pub ae: Matrix,
    pub be: Matrix,
    pub ce: Matrix,
    pub me: Matrix,
}

/// Error system between a full-order model and a structured reduced model.
pub fn assemble_error_system(fom: &LqoSystem, rom: &RomPoint) -> Result<ErrorSystem> {
    ErrorSystem::from_parts(fom, &rom.a_hat(), rom.b(), rom.c(), rom.m())
}

impl ErrorSystem {
    pub fn from_state_space(fom: &LqoSystem, rom: &StateSpaceRom) -> Result<Self> {
        Self::from_parts(fom, &rom.a, &rom.b, &rom.c, &rom.m)
    }

    fn from_parts(fom: &LqoSystem, a: &Matrix, b: &Matrix, c: &Matrix, m: &Matrix) -> Result<Self> {
        if b.ncols() != fom.num_inputs() {
            return Err(Error::dims("reduced input map", format!("{} inputs", fom.num_inputs()), b.ncols()));
        }
        let r = a.nrows();
        ensure_shape(a, r, r, "reduced state matrix")?;
        ensure_shape(b, r, fom.num_inputs(), "reduced input map")?;
        ensure_shape(c, 1, r, "reduced output row")?;
        ensure_shape(m, r, r, "reduced quadratic output")?;
        let n = fom.n();
        let total = n + r;
        let mut ae = Matrix::zeros(total, total);
        ae.view_mut((0, 0), (n, n)).copy_from(fom.a());
        ae.view_mut((n, n), (r, r)).copy_from(a);
        let mut be = Matrix::zeros(total, fom.num_inputs());
        be.view_mut((0, 0), (n, fom.num_inputs())).copy_from(fom.b());
        be.view_mut((n, 0), (r, fom.num_inputs())).copy_from(b);
        let mut ce = Matrix::zeros(1, total);
        ce.view_mut((0, 0), (1, n)).copy_from(fom.c());
        ce.view_mut((0, n), (1, r)).copy_from(&(-c));
        let mut me = Matrix::zeros(total, total);
        me.view_mut((0, 0), (n, n)).copy_from(fom.m());
        me.view_mut((n, n), (r, r)).copy_from(&(-m));
        Ok(Self { ae, be, ce, me })
    }

    /// The error system as a standalone LQO system (fails if `Â` is not Hurwitz).
    pub fn to_lqo(&self) -> Result<LqoSystem> {
        LqoSystem::new(self.ae.clone(), self.be.clone(), self.ce.clone(), self.me.clone(), 0.0)
    }
}

impl Realization for ErrorSystem {
    fn state_matrix(&self) -> Cow<'_, Matrix> {
        Cow::Borrowed(&self.ae)
    }
    fn input_map(&self) -> &Matrix {
        &self.be
    }
    fn output_row(&self) -> &Matrix {
        &self.ce
    }
    fn quadratic_output(&self) -> &Matrix {
        &self.me
    }
}

impl Realization for RomPoint {
    fn state_matrix(&self) -> Cow<'_, Matrix> {
        Cow::Owned(self.a_hat())
    }
    fn input_map(&self) -> &Matrix {
        &self.b
    }
    fn output_row(&self) -> &Matrix {
        &self.c
    }
    fn quadratic_output(&self) -> &Matrix {
        &self.m
    }
}
