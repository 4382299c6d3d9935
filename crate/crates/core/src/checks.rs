//! Randomised self-checks of the numerical kernels, shared by the CLI
//! `check` command and the acceptance tests. Every check draws its instances
//! from a fixed seed sequence, so reruns are identical.

use std::fmt;

use serde::Serialize;

use crate::error::Result;
use crate::gramians::{
    build_fom_cache, cost_function, error_gramian_blocks, euclidean_gradient, h2_error, h2_norm, h2_norm_quadrature_oracle,
    riemannian_gradient,
};
use crate::linalg::{frobenius_inner, min_symmetric_eigenvalue, skew, solve_lyapunov, solve_sylvester, solve_sylvester_kronecker, sym};
use crate::manifold::{inner_product, retract, Step, TangentVector};
use crate::model::{assemble_error_system, RomPoint};
use crate::random::{random_lqo_system, random_matrix, random_rom_point, random_skew, random_stable, random_symmetric, seeded, TestRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Gradients,
    Traces,
    Manifold,
    Oracle,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Gradients, Suite::Traces, Suite::Manifold, Suite::Oracle];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Gradients => "gradients",
            Suite::Traces => "traces",
            Suite::Manifold => "manifold",
            Suite::Oracle => "oracle",
        })
    }
}

/// Result of one named check: the worst observed error over all cases
/// against its tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(name: &'static str, errors: &[f64], tolerance: f64) -> Self {
        let worst = if errors.iter().any(|e| e.is_nan()) {
            f64::NAN
        } else {
            errors.iter().copied().fold(0.0, f64::max)
        };
        Self {
            name,
            cases: errors.len(),
            worst,
            tolerance,
            passed: !errors.is_empty() && worst <= tolerance,
        }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: worst {:.3e} (tolerance {:.1e}, {} cases)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance,
            self.cases
        )
    }
}

/// Seeds per check. Suites scale their own case counts from it.
#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub seeds: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { seeds: 20 }
    }
}

pub fn run_suite(suite: Suite, options: CheckOptions) -> Result<Vec<CheckOutcome>> {
    let seeds = options.seeds.max(1) as u64;
    match suite {
        Suite::Gradients => gradients(seeds),
        Suite::Traces => traces(seeds),
        Suite::Manifold => manifold(seeds),
        Suite::Oracle => oracle(seeds),
    }
}

const FD_STEP: f64 = 1e-5;

fn central_difference(f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    Ok((f(FD_STEP)? - f(-FD_STEP)?) / (2.0 * FD_STEP))
}

fn random_tangent(rng: &mut TestRng, r: usize, m: usize) -> TangentVector {
    TangentVector {
        j: random_skew(rng, r),
        r: random_symmetric(rng, r),
        b: random_matrix(rng, r, m),
        c: random_matrix(rng, 1, r),
        m: random_symmetric(rng, r),
    }
}

/// Euclidean partials against central differences of `t ↦ f(R_x(tξ))` with
/// `ξ` confined to one block, and the Riemannian directional derivative.
fn gradients(seeds: u64) -> Result<Vec<CheckOutcome>> {
    let (n, m, r) = (8, 2, 3);
    let mut partial_errors = Vec::new();
    let mut directional_errors = Vec::new();
    for seed in 0..seeds {
        let mut rng = seeded(1000 + seed);
        let fom = random_lqo_system(&mut rng, n, m);
        let cache = build_fom_cache(&fom)?;
        let x = random_rom_point(&mut rng, r, m);
        let blocks = error_gramian_blocks(&cache, &x)?;
        let egrad = euclidean_gradient(&cache, &x, &blocks);
        let cost_along = |xi: &TangentVector| {
            let xi = xi.clone();
            let (cache, x) = (&cache, &x);
            move |t: f64| Ok(h2_error(cache, &retract(x, &(&xi * t))?)?.powi(2))
        };

        // Tangent projection of each partial; the first direction is the
        // projected partial itself, the second a random tangent block.
        let projected = [skew(&egrad.j), sym(&egrad.r), egrad.b.clone(), egrad.c.clone(), sym(&egrad.m)];
        let random = random_tangent(&mut rng, r, m);
        for (block, proj) in projected.iter().enumerate() {
            let rand_block = random.components()[block].clone();
            for dir in [proj.clone(), rand_block] {
                let mut xi = TangentVector::zeros(r, m);
                match block {
                    0 => xi.j = dir.clone(),
                    1 => xi.r = dir.clone(),
                    2 => xi.b = dir.clone(),
                    3 => xi.c = dir.clone(),
                    _ => xi.m = dir.clone(),
                }
                let exact = frobenius_inner(proj, &dir);
                let fd = central_difference(cost_along(&xi))?;
                let scale = proj.norm() * dir.norm();
                partial_errors.push(if scale > 0.0 { (fd - exact).abs() / scale } else { fd.abs() });
            }
        }

        let rgrad = riemannian_gradient(&cache, &x, &blocks)?;
        let xi = random_tangent(&mut rng, r, m);
        let exact = inner_product(&x, &rgrad, &xi)?;
        let fd = central_difference(cost_along(&xi))?;
        directional_errors.push((fd - exact).abs() / exact.abs().max(f64::MIN_POSITIVE));
    }
    Ok(vec![
        CheckOutcome::new("euclidean partials vs central differences", &partial_errors, 1e-5),
        CheckOutcome::new("riemannian directional derivative", &directional_errors, 1e-5),
    ])
}

/// Trace identity of paired Sylvester equations and cost equivalence with
/// the assembled error system.
fn traces(seeds: u64) -> Result<Vec<CheckOutcome>> {
    let mut identity_errors = Vec::new();
    for seed in 0..(seeds * 5 / 2).max(1) {
        let mut rng = seeded(2000 + seed);
        let n = 2 + (seed as usize % 11);
        let r = 1 + (seed as usize % 6);
        let a = random_stable(&mut rng, n);
        let b = random_stable(&mut rng, r);
        let x = random_matrix(&mut rng, n, r);
        let y = random_matrix(&mut rng, n, r);
        // A P + P B + X = 0 and Aᵀ Q + Q Bᵀ + Y = 0 ⇒ tr(YᵀP) = tr(XᵀQ).
        let p = solve_sylvester(&a, &b, &x)?;
        let q = solve_sylvester(&a.transpose(), &b.transpose(), &y)?;
        let lhs = frobenius_inner(&y, &p);
        let rhs = frobenius_inner(&x, &q);
        identity_errors.push((lhs - rhs).abs() / (1.0 + lhs.abs()));
    }

    let mut cost_errors = Vec::new();
    for seed in 0..seeds {
        let mut rng = seeded(3000 + seed);
        let n = 4 + (seed as usize % 17);
        let r = 1 + (seed as usize % 5);
        let fom = random_lqo_system(&mut rng, n, 2);
        let cache = build_fom_cache(&fom)?;
        let x = random_rom_point(&mut rng, r, 2);
        let blocks = error_gramian_blocks(&cache, &x)?;
        let f = cost_function(&cache, &x, &blocks);
        let direct = build_fom_cache(&assemble_error_system(&fom, &x)?.to_lqo()?)?.trace_bqb();
        cost_errors.push((f - direct).abs() / direct.abs());
    }
    Ok(vec![
        CheckOutcome::new("sylvester trace identity", &identity_errors, 1e-10),
        CheckOutcome::new("cost vs assembled error system", &cost_errors, 1e-10),
    ])
}

/// Retraction at zero, transport isometry and SPD preservation.
fn manifold(seeds: u64) -> Result<Vec<CheckOutcome>> {
    let count = (seeds * 5 / 2).max(1);
    let mut zero_errors = Vec::new();
    let mut isometry_errors = Vec::new();
    let mut spd_errors = Vec::new();
    for seed in 0..count {
        let mut rng = seeded(4000 + seed);
        let r = 2 + (seed as usize % 7);
        let x = random_rom_point(&mut rng, r, 2);
        let same = retract(&x, &TangentVector::zeros_at(&x))?;
        zero_errors.push(if same == x { 0.0 } else { 1.0 });

        let eta = random_tangent(&mut rng, r, 2);
        let xi = random_tangent(&mut rng, r, 2);
        let zeta = random_tangent(&mut rng, r, 2);
        let step = Step::new(&x, &eta)?;
        let before = inner_product(&x, &xi, &zeta)?;
        let after = inner_product(step.endpoint(), &step.transport(&xi), &step.transport(&zeta))?;
        isometry_errors.push((before - after).abs() / before.abs().max(1.0));

        let mut big = TangentVector::zeros_at(&x);
        let dir = random_symmetric(&mut rng, r);
        let size = 1e3 * (1.0 + seed as f64) / count as f64;
        big.r = &dir * (size / dir.norm());
        let y = retract(&x, &big)?;
        let ok = y.r().iter().all(|v| v.is_finite()) && min_symmetric_eigenvalue(y.r()) > 0.0;
        spd_errors.push(if ok { 0.0 } else { 1.0 });
    }
    Ok(vec![
        CheckOutcome::new("retract(x, 0) == x", &zero_errors, 0.0),
        CheckOutcome::new("transport isometry", &isometry_errors, 1e-10),
        CheckOutcome::new("spd preserved for |xi_R| <= 1e3", &spd_errors, 0.0),
    ])
}

/// Algebraic H2 norm against the kernel quadrature, and the Schur solvers
/// against dense Kronecker solves.
fn oracle(seeds: u64) -> Result<Vec<CheckOutcome>> {
    let mut h2_errors = Vec::new();
    for seed in 0..(seeds / 4).max(1) {
        let mut rng = seeded(5000 + seed);
        let fom = random_lqo_system(&mut rng, 3, 2);
        let algebraic = h2_norm(&fom)?;
        let quadrature = h2_norm_quadrature_oracle(&fom, 50.0, 1e-3)?;
        h2_errors.push((algebraic - quadrature).abs() / algebraic);
    }
    let mut kron_errors = Vec::new();
    for seed in 0..seeds {
        let mut rng = seeded(6000 + seed);
        let n = 2 + (seed as usize % 7);
        let r = 1 + (seed as usize % 5);
        let a = random_stable(&mut rng, n);
        let b = random_stable(&mut rng, r);
        let c = random_matrix(&mut rng, n, r);
        let fast = solve_sylvester(&a, &b, &c)?;
        let dense = solve_sylvester_kronecker(&a, &b, &c)?;
        kron_errors.push((&fast - &dense).norm() / dense.norm());

        let w = &c * c.transpose();
        let fast = solve_lyapunov(&a, &w)?;
        let dense = solve_sylvester_kronecker(&a, &a.transpose(), &w)?;
        kron_errors.push((&fast - &dense).norm() / dense.norm().max(f64::MIN_POSITIVE));
    }
    Ok(vec![
        CheckOutcome::new("h2 norm vs kernel quadrature", &h2_errors, 1e-3),
        CheckOutcome::new("schur solvers vs kronecker", &kron_errors, 1e-9),
    ])
}

/// `R ≻ 0` and `J − R` Hurwitz, verified numerically.
pub fn point_is_valid(x: &RomPoint) -> bool {
    min_symmetric_eigenvalue(x.r()) > 0.0
        && crate::linalg::max_real_eigenvalue(&x.a_hat()).map(|v| v < 0.0).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_passes_on_a_few_seeds() {
        for suite in Suite::ALL {
            for outcome in run_suite(suite, CheckOptions { seeds: 4 }).unwrap() {
                assert!(outcome.passed, "{suite}: {outcome}");
            }
        }
    }

    #[test]
    fn empty_error_list_never_passes() {
        assert!(!CheckOutcome::new("none", &[], 1.0).passed);
        assert!(!CheckOutcome::new("nan", &[f64::NAN], 1.0).passed);
    }
}
