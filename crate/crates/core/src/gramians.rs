//! Gramians, the H2 norm and the H2-error objective with its gradient.
//!
//! For a full-order model `(A, B, C, M)` the Gramians solve
//!
//! ```text
//! A P + P Aᵀ + B Bᵀ = 0
//! Aᵀ Q + Q A + Cᵀ C + M P M = 0
//! ```
//!
//! and `‖Σ‖²_H2 = tr(Bᵀ Q B)`. Against a reduced model with `Â = J − R` the
//! squared error splits into `tr(BᵀQB) + 2 tr(BᵀYB̂) + tr(B̂ᵀQ̂B̂)` where only the
//! coupling blocks depend on the reduced model:
//!
//! ```text
//! A X + X Âᵀ + B B̂ᵀ = 0                 Â P̂ + P̂ Âᵀ + B̂ B̂ᵀ = 0
//! Aᵀ Y + Y Â − Cᵀ Ĉ − M X M̂ = 0         Âᵀ Q̂ + Q̂ Â + Ĉᵀ Ĉ + M̂ P̂ M̂ = 0
//! Aᵀ K + K Â − Cᵀ Ĉ − 2 M X M̂ = 0       Âᵀ L + L Â + Ĉᵀ Ĉ + 2 M̂ P̂ M̂ = 0
//! ```
//!
//! `K` and `L` are the adjoint solves needed only for the gradient.

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::linalg::{
    expm, frobenius_inner, solve_lyapunov_schur, solve_sylvester_schur, sym, trace_of_product, Matrix, SchurForm,
};
use crate::manifold::{egrad_to_rgrad, EuclideanGradient, TangentVector};
use crate::model::{LqoSystem, RomPoint, StateSpaceRom};

/// Required decay `‖e^{A T}‖_F` for the quadrature oracle horizon.
pub const ORACLE_DECAY: f64 = 1e-8;

/// Reduced-model-independent data: Gramians of the full-order model, the
/// Schur forms of `A` and `Aᵀ`, and the constant `tr(BᵀQB)`.
#[derive(Debug, Clone)]
pub struct FomCache {
    fom: LqoSystem,
    schur_t: SchurForm,
    p: Matrix,
    q: Matrix,
    trace_bqb: f64,
}

pub fn build_fom_cache(fom: &LqoSystem) -> Result<FomCache> {
    let schur = fom.schur();
    let schur_t = schur.transpose();
    let p = solve_lyapunov_schur(schur, &(fom.b() * fom.b().transpose()))?;
    let w = fom.c().transpose() * fom.c() + fom.m() * &p * fom.m();
    let q = solve_lyapunov_schur(&schur_t, &sym(&w))?;
    let trace_bqb = frobenius_inner(fom.b(), &(&q * fom.b()));
    Ok(FomCache {
        fom: fom.clone(),
        schur_t,
        p,
        q,
        trace_bqb,
    })
}

impl FomCache {
    pub fn fom(&self) -> &LqoSystem {
        &self.fom
    }

    pub fn p(&self) -> &Matrix {
        &self.p
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn trace_bqb(&self) -> f64 {
        self.trace_bqb
    }

    pub fn h2_norm(&self) -> f64 {
        self.trace_bqb.max(0.0).sqrt()
    }
}

/// `sqrt(tr(BᵀQB))`
pub fn h2_norm(fom: &LqoSystem) -> Result<f64> {
    Ok(build_fom_cache(fom)?.h2_norm())
}

/// H2 norm from the Volterra kernels `h₁(σ) = C e^{Aσ} B` and
/// `h₂(σ₁, σ₂) = vec(Bᵀ e^{Aᵀσ₁} M e^{Aσ₂} B)` by the trapezoidal rule on
/// `[0, horizon]`. The double integral factors as `tr((M S)²)` with
/// `S = ∫ e^{Aσ} B Bᵀ e^{Aᵀσ} dσ` accumulated on the same grid.
pub fn h2_norm_quadrature_oracle(fom: &LqoSystem, horizon: f64, dt: f64) -> Result<f64> {
    if !(horizon > 0.0 && dt > 0.0 && dt <= horizon) {
        return Err(Error::InvalidArgument(format!("need 0 < dt <= horizon, got dt={dt}, horizon={horizon}")));
    }
    let decay = expm(&(fom.a() * horizon))?.norm();
    if decay > ORACLE_DECAY {
        return Err(Error::HorizonTooShort {
            decay,
            required: ORACLE_DECAY,
        });
    }
    let steps = (horizon / dt).round().max(1.0) as usize;
    let h = horizon / steps as f64;
    let phi = expm(&(fom.a() * h))?;
    let n = fom.n();
    let mut g = fom.b().clone();
    let mut linear = 0.0;
    let mut s = Matrix::zeros(n, n);
    for k in 0..=steps {
        let w = if k == 0 || k == steps { 0.5 * h } else { h };
        linear += w * (fom.c() * &g).norm_squared();
        s.gemm(w, &g, &g.transpose(), 1.0);
        g = &phi * g;
    }
    let ms = fom.m() * &s;
    let quadratic = trace_of_product(&ms, &ms);
    Ok((linear + quadratic).max(0.0).sqrt())
}

/// Borrowed reduced realization `(Â, B̂, Ĉ, M̂)`.
struct Reduced<'a> {
    a: &'a Matrix,
    b: &'a Matrix,
    c: &'a Matrix,
    m: &'a Matrix,
}

/// Blocks needed by the cost alone.
#[derive(Debug, Clone)]
pub struct CostBlocks {
    pub x: Matrix,
    pub y: Matrix,
    pub phat: Matrix,
    pub qhat: Matrix,
    schur_hat: SchurForm,
}

/// All coupling blocks of the error-system Gramians plus the adjoint pair.
#[derive(Debug, Clone)]
pub struct ErrorGramianBlocks {
    pub x: Matrix,
    pub y: Matrix,
    pub phat: Matrix,
    pub qhat: Matrix,
    pub k: Matrix,
    pub l: Matrix,
}

fn check_inputs(cache: &FomCache, inputs: usize) -> Result<()> {
    if inputs != cache.fom.num_inputs() {
        return Err(Error::dims("reduced input count", cache.fom.num_inputs(), inputs));
    }
    Ok(())
}

fn cost_blocks_of(cache: &FomCache, rom: &Reduced<'_>) -> Result<CostBlocks> {
    let fom = &cache.fom;
    let schur_hat = SchurForm::new(rom.a)?;
    schur_hat.ensure_hurwitz()?;
    let schur_hat_t = schur_hat.transpose();
    let x = solve_sylvester_schur(fom.schur(), &schur_hat_t, &(fom.b() * rom.b.transpose()))?;
    let phat = solve_lyapunov_schur(&schur_hat, &(rom.b * rom.b.transpose()))?;
    let ctc = fom.c().transpose() * rom.c;
    let y = solve_sylvester_schur(&cache.schur_t, &schur_hat, &(-(&ctc + fom.m() * &x * rom.m)))?;
    let qhat_rhs = rom.c.transpose() * rom.c + rom.m * &phat * rom.m;
    let qhat = solve_lyapunov_schur(&schur_hat_t, &sym(&qhat_rhs))?;
    Ok(CostBlocks {
        x,
        y,
        phat,
        qhat,
        schur_hat,
    })
}

fn cost_of(cache: &FomCache, b_hat: &Matrix, blocks: &CostBlocks) -> f64 {
    let cross = frobenius_inner(cache.fom.b(), &(&blocks.y * b_hat));
    let reduced = frobenius_inner(b_hat, &(&blocks.qhat * b_hat));
    cache.trace_bqb + 2.0 * cross + reduced
}

fn complete_blocks(cache: &FomCache, rom: &Reduced<'_>, cost: CostBlocks) -> Result<ErrorGramianBlocks> {
    let fom = &cache.fom;
    let ctc = fom.c().transpose() * rom.c;
    let k_rhs = -(ctc + fom.m() * &cost.x * rom.m * 2.0);
    let k = solve_sylvester_schur(&cache.schur_t, &cost.schur_hat, &k_rhs)?;
    let l_rhs = rom.c.transpose() * rom.c + rom.m * &cost.phat * rom.m * 2.0;
    let l = solve_lyapunov_schur(&cost.schur_hat.transpose(), &sym(&l_rhs))?;
    Ok(ErrorGramianBlocks {
        x: cost.x,
        y: cost.y,
        phat: cost.phat,
        qhat: cost.qhat,
        k,
        l,
    })
}

/// Cost-path blocks `(X, Y, P̂, Q̂)` at a reduced point.
pub fn cost_blocks(cache: &FomCache, rom: &RomPoint) -> Result<CostBlocks> {
    check_inputs(cache, rom.num_inputs())?;
    let a_hat = rom.a_hat();
    cost_blocks_of(cache, &Reduced { a: &a_hat, b: rom.b(), c: rom.c(), m: rom.m() })
}

pub fn error_gramian_blocks(cache: &FomCache, rom: &RomPoint) -> Result<ErrorGramianBlocks> {
    check_inputs(cache, rom.num_inputs())?;
    let a_hat = rom.a_hat();
    let view = Reduced { a: &a_hat, b: rom.b(), c: rom.c(), m: rom.m() };
    let cost = cost_blocks_of(cache, &view)?;
    complete_blocks(cache, &view, cost)
}

/// Squared H2 error `tr(BᵀQB) + 2 tr(BᵀYB̂) + tr(B̂ᵀQ̂B̂)`.
pub fn cost_function(cache: &FomCache, rom: &RomPoint, blocks: &ErrorGramianBlocks) -> f64 {
    let cross = frobenius_inner(cache.fom.b(), &(&blocks.y * rom.b()));
    let reduced = frobenius_inner(rom.b(), &(&blocks.qhat * rom.b()));
    cache.trace_bqb + 2.0 * cross + reduced
}

/// Partial derivatives of the cost with `G = KᵀX + LP̂`:
/// `(2G, −2G, 2(KᵀB + LB̂), 2(ĈP̂ − CX), 2(P̂M̂P̂ − XᵀMX))`.
pub fn euclidean_gradient(cache: &FomCache, rom: &RomPoint, blocks: &ErrorGramianBlocks) -> EuclideanGradient {
    let fom = &cache.fom;
    let kt = blocks.k.transpose();
    let g = &kt * &blocks.x + &blocks.l * &blocks.phat;
    EuclideanGradient {
        j: &g * 2.0,
        r: &g * -2.0,
        b: (&kt * fom.b() + &blocks.l * rom.b()) * 2.0,
        c: (rom.c() * &blocks.phat - fom.c() * &blocks.x) * 2.0,
        m: (&blocks.phat * rom.m() * &blocks.phat - blocks.x.transpose() * fom.m() * &blocks.x) * 2.0,
    }
}

pub fn riemannian_gradient(cache: &FomCache, rom: &RomPoint, blocks: &ErrorGramianBlocks) -> Result<TangentVector> {
    egrad_to_rgrad(rom, &euclidean_gradient(cache, rom, blocks))
}

/// H2 error between the full-order model and a reduced model given in plain
/// state-space form (not necessarily canonical).
pub fn h2_error_state_space(cache: &FomCache, rom: &StateSpaceRom) -> Result<f64> {
    check_inputs(cache, rom.b.ncols())?;
    let view = Reduced { a: &rom.a, b: &rom.b, c: &rom.c, m: &rom.m };
    let blocks = cost_blocks_of(cache, &view)?;
    Ok(cost_of(cache, &rom.b, &blocks).max(0.0).sqrt())
}

/// H2 error at a manifold point.
pub fn h2_error(cache: &FomCache, rom: &RomPoint) -> Result<f64> {
    Ok(cost_of(cache, rom.b(), &cost_blocks(cache, rom)?).max(0.0).sqrt())
}

/// A smooth cost on the reduced-model manifold.
pub trait Objective {
    fn cost(&self, x: &RomPoint) -> Result<f64>;
    /// Cost and Riemannian gradient at `x`.
    fn cost_and_gradient(&self, x: &RomPoint) -> Result<(f64, TangentVector)>;
}

/// Squared H2 error against a fixed full-order model.
///
/// Remembers the cost-path blocks of the most recent [`Objective::cost`]
/// call, so the gradient at an accepted line-search point only adds the two
/// adjoint solves.
#[derive(Debug)]
pub struct H2Objective<'a> {
    cache: &'a FomCache,
    last: RefCell<Option<(RomPoint, CostBlocks)>>,
}

impl<'a> H2Objective<'a> {
    pub fn new(cache: &'a FomCache) -> Self {
        Self {
            cache,
            last: RefCell::new(None),
        }
    }

    pub fn cache(&self) -> &FomCache {
        self.cache
    }
}

impl Objective for H2Objective<'_> {
    fn cost(&self, x: &RomPoint) -> Result<f64> {
        let blocks = cost_blocks(self.cache, x)?;
        let f = cost_of(self.cache, x.b(), &blocks);
        *self.last.borrow_mut() = Some((x.clone(), blocks));
        Ok(f)
    }

    fn cost_and_gradient(&self, x: &RomPoint) -> Result<(f64, TangentVector)> {
        check_inputs(self.cache, x.num_inputs())?;
        let cached = match self.last.borrow_mut().take() {
            Some((point, blocks)) if &point == x => Some(blocks),
            _ => None,
        };
        let cost = match cached {
            Some(blocks) => blocks,
            None => cost_blocks(self.cache, x)?,
        };
        let a_hat = x.a_hat();
        let view = Reduced { a: &a_hat, b: x.b(), c: x.c(), m: x.m() };
        let blocks = complete_blocks(self.cache, &view, cost)?;
        let f = cost_function(self.cache, x, &blocks);
        Ok((f, riemannian_gradient(self.cache, x, &blocks)?))
    }
}
