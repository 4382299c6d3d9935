//! C ABI for `lqo-rom`.
//!
//! Models are opaque handles created by `lqo_system_*` / `lqo_reduce` and
//! released with the matching `*_free`. Every fallible call returns an
//! [`LqoStatus`]; on failure, [`lqo_last_error`] describes what went wrong on
//! the calling thread. Matrices cross the boundary as dense row-major arrays.
//! Panics never unwind into C: they surface as `LQO_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use lqo_rom::benchmark::{build_advection_diffusion, reduce_order, BenchmarkConfig};
use lqo_rom::gramians::{build_fom_cache, h2_error, FomCache};
use lqo_rom::optimizer::{OptimizerConfig, TerminationReason};
use lqo_rom::{Error, Matrix, RomPoint};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LqoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    /// The state matrix has an eigenvalue with non-negative real part.
    NotStable = 4,
    /// A factorisation or solve broke down (singular, indefinite, no convergence).
    NumericalFailure = 5,
    /// The line search could not find an acceptable step.
    OptimizationFailed = 6,
    Io = 7,
    Panic = 8,
}

/// Why the optimiser stopped.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LqoTermination {
    RelativeGradient = 0,
    CostChange = 1,
    MaxIterations = 2,
    Stationary = 3,
    LineSearchFailed = 4,
    EvaluationFailed = 5,
}

/// Optimiser settings; obtain defaults from [`lqo_optimizer_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LqoOptimizerOptions {
    pub memory_size: usize,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub cautious_coefficient: f64,
    pub tol_rel_grad: f64,
    pub tol_f_change: f64,
    pub tol_abs_grad: f64,
    pub max_iterations: usize,
    pub max_backtracks: usize,
}

impl From<&OptimizerConfig> for LqoOptimizerOptions {
    fn from(c: &OptimizerConfig) -> Self {
        Self {
            memory_size: c.memory_size,
            armijo_c1: c.armijo_c1,
            backtrack_factor: c.backtrack_factor,
            cautious_coefficient: c.cautious_coefficient,
            tol_rel_grad: c.tol_rel_grad,
            tol_f_change: c.tol_f_change,
            tol_abs_grad: c.tol_abs_grad,
            max_iterations: c.max_iterations,
            max_backtracks: c.max_backtracks,
        }
    }
}

impl From<&LqoOptimizerOptions> for OptimizerConfig {
    fn from(o: &LqoOptimizerOptions) -> Self {
        Self {
            memory_size: o.memory_size,
            armijo_c1: o.armijo_c1,
            backtrack_factor: o.backtrack_factor,
            cautious_coefficient: o.cautious_coefficient,
            tol_rel_grad: o.tol_rel_grad,
            tol_f_change: o.tol_f_change,
            tol_abs_grad: o.tol_abs_grad,
            max_iterations: o.max_iterations,
            max_backtracks: o.max_backtracks,
        }
    }
}

/// Outcome of [`lqo_reduce`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LqoReduceSummary {
    /// H2 error of the balanced-truncation starting model.
    pub h2_bt: f64,
    /// H2 error of the optimised model.
    pub h2_opt: f64,
    pub iterations: usize,
    pub termination: LqoTermination,
    /// Shift added to make the truncated model's dissipation positive definite.
    pub regularization: f64,
}

/// Full-order model with its Gramians; opaque to C.
pub struct LqoSystem {
    cache: FomCache,
}

/// Reduced model in `J − R` form; opaque to C.
pub struct LqoRom {
    point: RomPoint,
    d: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(LqoStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::NotStable { .. } => LqoStatus::NotStable,
            Error::DimensionMismatch { .. } => LqoStatus::DimensionMismatch,
            Error::NonFinite(_)
            | Error::InvalidArgument(_)
            | Error::InvalidInitialPoint(_)
            | Error::GridMismatch
            | Error::HorizonTooShort { .. } => LqoStatus::InvalidArgument,
            Error::SingularPencil { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::UnstableIntegration { .. }
            | Error::RankDeficient { .. }
            | Error::NotDetectable { .. }
            | Error::NoConvergence => LqoStatus::NumericalFailure,
            Error::LineSearchFailed { .. } => LqoStatus::OptimizationFailed,
            Error::Io { .. } | Error::Parse { .. } => LqoStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(LqoStatus::NullPointer, format!("{what} is null"))
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> LqoStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => LqoStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {message}"));
            LqoStatus::Panic
        }
    }
}

unsafe fn read_matrix(data: *const f64, rows: usize, cols: usize, what: &str) -> Result<Matrix, Failure> {
    if data.is_null() {
        return Err(null(what));
    }
    let slice = std::slice::from_raw_parts(data, rows * cols);
    Ok(Matrix::from_row_slice(rows, cols, slice))
}

unsafe fn write_matrix(dst: *mut f64, src: &Matrix) {
    if dst.is_null() {
        return;
    }
    let out = std::slice::from_raw_parts_mut(dst, src.len());
    for (i, row) in src.row_iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[i * src.ncols() + j] = *v;
        }
    }
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

fn system_from(fom: lqo_rom::LqoSystem) -> Result<LqoSystem, Failure> {
    Ok(LqoSystem {
        cache: build_fom_cache(&fom)?,
    })
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next `lqo_*` call on the same thread.
#[no_mangle]
pub extern "C" fn lqo_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds `ẋ = A x + B u`, `y = C x + xᵀ M x + d` from row-major arrays:
/// `a` and `m` are `n × n`, `b` is `n × inputs`, `c` has `n` entries.
/// Fails with `LQO_STATUS_NOT_STABLE` unless `A` is Hurwitz.
///
/// # Safety
/// Array pointers must reference the stated number of doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lqo_system_new(
    n: usize,
    inputs: usize,
    a: *const f64,
    b: *const f64,
    c: *const f64,
    m: *const f64,
    d: f64,
    out: *mut *mut LqoSystem,
) -> LqoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if n == 0 || inputs == 0 {
            return Err(Failure(LqoStatus::InvalidArgument, "n and inputs must be positive".into()));
        }
        let fom = lqo_rom::LqoSystem::new(
            read_matrix(a, n, n, "a")?,
            read_matrix(b, n, inputs, "b")?,
            read_matrix(c, 1, n, "c")?,
            read_matrix(m, n, n, "m")?,
            d,
        )?;
        store(out, system_from(fom)?);
        Ok(())
    })
}

/// The advection–diffusion benchmark on `n` interior nodes.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lqo_system_advection_diffusion(n: usize, alpha: f64, beta: f64, out: *mut *mut LqoSystem) -> LqoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let config = BenchmarkConfig {
            n,
            alpha,
            beta,
            r_list: Vec::new(),
            ..BenchmarkConfig::default()
        };
        config.validate()?;
        store(out, system_from(build_advection_diffusion(&config)?)?);
        Ok(())
    })
}

/// Loads a system saved by `lqo-rom export` (a directory of Matrix Market files).
///
/// # Safety
/// `dir` must be a NUL-terminated UTF-8 path; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lqo_system_load(dir: *const c_char, out: *mut *mut LqoSystem) -> LqoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if dir.is_null() {
            return Err(null("dir"));
        }
        let dir = CStr::from_ptr(dir)
            .to_str()
            .map_err(|_| Failure(LqoStatus::InvalidArgument, "path is not UTF-8".into()))?;
        store(out, system_from(lqo_rom::LqoSystem::load(Path::new(dir))?)?);
        Ok(())
    })
}

/// # Safety
/// `system` must come from an `lqo_system_*` constructor and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn lqo_system_free(system: *mut LqoSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// State dimension and number of inputs.
///
/// # Safety
/// `system` must be a live handle; `n` and `inputs` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn lqo_system_dims(system: *const LqoSystem, n: *mut usize, inputs: *mut usize) -> LqoStatus {
    guard(|| {
        let fom = system.as_ref().ok_or_else(|| null("system"))?.cache.fom();
        if !n.is_null() {
            *n = fom.n();
        }
        if !inputs.is_null() {
            *inputs = fom.num_inputs();
        }
        Ok(())
    })
}

/// # Safety
/// `system` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lqo_system_h2_norm(system: *const LqoSystem, out: *mut f64) -> LqoStatus {
    guard(|| {
        let system = system.as_ref().ok_or_else(|| null("system"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = system.cache.h2_norm();
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn lqo_optimizer_options_default() -> LqoOptimizerOptions {
    LqoOptimizerOptions::from(&OptimizerConfig::default())
}

/// Reduces `system` to order `r`: balanced truncation, then Riemannian
/// LRBFGS on the H2 error. `options` may be NULL for the defaults and
/// `summary` may be NULL. On success `*rom` owns a new handle.
///
/// # Safety
/// `system` must be a live handle; `rom` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lqo_reduce(
    system: *const LqoSystem,
    r: usize,
    options: *const LqoOptimizerOptions,
    rom: *mut *mut LqoRom,
    summary: *mut LqoReduceSummary,
) -> LqoStatus {
    guard(|| {
        if rom.is_null() {
            return Err(null("rom"));
        }
        *rom = ptr::null_mut();
        let system = system.as_ref().ok_or_else(|| null("system"))?;
        let config = options.as_ref().map_or_else(OptimizerConfig::default, OptimizerConfig::from);
        config.validate()?;
        let reduction = reduce_order(&system.cache, r, &config)?;
        if let Some(summary) = summary.as_mut() {
            *summary = LqoReduceSummary {
                h2_bt: reduction.h2_bt,
                h2_opt: reduction.h2_opt,
                iterations: reduction.run.iterations(),
                termination: match reduction.run.termination {
                    TerminationReason::RelativeGradient => LqoTermination::RelativeGradient,
                    TerminationReason::CostChange => LqoTermination::CostChange,
                    TerminationReason::MaxIterations => LqoTermination::MaxIterations,
                    TerminationReason::Stationary => LqoTermination::Stationary,
                    TerminationReason::LineSearchFailed => LqoTermination::LineSearchFailed,
                    TerminationReason::EvaluationFailed(_) => LqoTermination::EvaluationFailed,
                },
                regularization: reduction.regularization,
            };
        }
        store(
            rom,
            LqoRom {
                point: reduction.run.x,
                d: system.cache.fom().d(),
            },
        );
        Ok(())
    })
}

/// # Safety
/// `rom` must come from [`lqo_reduce`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn lqo_rom_free(rom: *mut LqoRom) {
    if !rom.is_null() {
        drop(Box::from_raw(rom));
    }
}

/// Reduced order and number of inputs.
///
/// # Safety
/// `rom` must be a live handle; `r` and `inputs` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn lqo_rom_dims(rom: *const LqoRom, r: *mut usize, inputs: *mut usize) -> LqoStatus {
    guard(|| {
        let rom = rom.as_ref().ok_or_else(|| null("rom"))?;
        if !r.is_null() {
            *r = rom.point.order();
        }
        if !inputs.is_null() {
            *inputs = rom.point.num_inputs();
        }
        Ok(())
    })
}

/// Copies the state-space form `Â = J − R, B̂, Ĉ, M̂, d` into row-major
/// buffers (`r × r`, `r × inputs`, `r`, `r × r`). Any output may be NULL.
///
/// # Safety
/// `rom` must be a live handle; non-NULL buffers must hold the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn lqo_rom_state_space(
    rom: *const LqoRom,
    a: *mut f64,
    b: *mut f64,
    c: *mut f64,
    m: *mut f64,
    d: *mut f64,
) -> LqoStatus {
    guard(|| {
        let rom = rom.as_ref().ok_or_else(|| null("rom"))?;
        let p = &rom.point;
        write_matrix(a, &p.a_hat());
        write_matrix(b, p.b());
        write_matrix(c, p.c());
        write_matrix(m, p.m());
        if !d.is_null() {
            *d = rom.d;
        }
        Ok(())
    })
}

/// Copies the skew-symmetric `J` and the positive definite `R` (both `r × r`, row-major).
///
/// # Safety
/// `rom` must be a live handle; non-NULL buffers must hold `r × r` doubles.
#[no_mangle]
pub unsafe extern "C" fn lqo_rom_factors(rom: *const LqoRom, j: *mut f64, r: *mut f64) -> LqoStatus {
    guard(|| {
        let rom = rom.as_ref().ok_or_else(|| null("rom"))?;
        write_matrix(j, rom.point.j());
        write_matrix(r, rom.point.r());
        Ok(())
    })
}

/// H2 norm of the error system between `system` and `rom`.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lqo_h2_error(system: *const LqoSystem, rom: *const LqoRom, out: *mut f64) -> LqoStatus {
    guard(|| {
        let system = system.as_ref().ok_or_else(|| null("system"))?;
        let rom = rom.as_ref().ok_or_else(|| null("rom"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = h2_error(&system.cache, &rom.point)?;
        Ok(())
    })
}
