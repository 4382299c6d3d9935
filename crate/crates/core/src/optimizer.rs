//! Limited-memory Riemannian BFGS with Armijo backtracking and cautious
//! curvature updates.
//!
//! Curvature pairs are stored as tangent vectors and carried along every
//! accepted step by the isometric transport of [`crate::manifold::Step`], so
//! their inner products (and the cached `ρ = 1/⟨y, s⟩`) stay valid.

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gramians::Objective;
use crate::linalg::min_symmetric_eigenvalue;
use crate::manifold::{Metric, Step, TangentVector};
use crate::model::RomPoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Number of curvature pairs kept for the two-loop recursion.
    pub memory_size: usize,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub cautious_coefficient: f64,
    /// Stop once `‖grad f(x_k)‖ / ‖grad f(x_0)‖` drops below this.
    pub tol_rel_grad: f64,
    /// Stop once `|f_k − f_{k+1}|` drops below this.
    pub tol_f_change: f64,
    /// Stop immediately if the gradient norm is already below this (stationary start).
    pub tol_abs_grad: f64,
    pub max_iterations: usize,
    pub max_backtracks: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            memory_size: 10,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
            cautious_coefficient: 1e-4,
            tol_rel_grad: 1e-2,
            tol_f_change: 1e-8,
            tol_abs_grad: 1e-10,
            max_iterations: 1000,
            max_backtracks: 50,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        let problem = if !open_unit(self.armijo_c1) {
            Some("armijo_c1 must lie in (0, 1)")
        } else if !open_unit(self.backtrack_factor) {
            Some("backtrack_factor must lie in (0, 1)")
        } else if !(self.cautious_coefficient > 0.0) {
            Some("cautious_coefficient must be positive")
        } else if !(self.tol_rel_grad > 0.0 && self.tol_f_change > 0.0 && self.tol_abs_grad >= 0.0) {
            Some("tolerances must be positive")
        } else {
            None
        };
        match problem {
            Some(msg) => Err(Error::InvalidArgument(msg.into())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePair {
    pub s: TangentVector,
    pub y: TangentVector,
    /// `1 / ⟨y, s⟩`
    pub rho: f64,
}

/// Bounded FIFO of curvature pairs, oldest first.
#[derive(Debug, Clone, Default)]
pub struct LbfgsMemory {
    pairs: VecDeque<CurvaturePair>,
    capacity: usize,
}

impl LbfgsMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            pairs: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Stores a pair with `⟨y, s⟩ = sy > 0`, evicting the oldest at capacity.
    pub fn push(&mut self, s: TangentVector, y: TangentVector, sy: f64) {
        if self.capacity == 0 || !(sy > 0.0) {
            return;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back(CurvaturePair { s, y, rho: 1.0 / sy });
    }

    pub fn pairs(&self) -> impl DoubleEndedIterator<Item = &CurvaturePair> + ExactSizeIterator {
        self.pairs.iter()
    }

    /// Moves every stored pair to the endpoint of `step`.
    pub fn transport(&mut self, step: &Step) {
        for pair in &mut self.pairs {
            pair.s = step.transport(&pair.s);
            pair.y = step.transport(&pair.y);
        }
    }
}

/// `−H grad`, with `H` the limited-memory inverse Hessian approximation at `x`.
pub fn two_loop_direction(memory: &LbfgsMemory, grad: &TangentVector, x: &RomPoint) -> Result<TangentVector> {
    Ok(two_loop_with_metric(memory, grad, &Metric::at(x)?))
}

fn two_loop_with_metric(memory: &LbfgsMemory, grad: &TangentVector, metric: &Metric) -> TangentVector {
    let mut q = grad.clone();
    let mut alphas = Vec::with_capacity(memory.len());
    for pair in memory.pairs().rev() {
        let alpha = pair.rho * metric.inner(&pair.s, &q);
        q.axpy(-alpha, &pair.y);
        alphas.push(alpha);
    }
    let gamma = match memory.pairs().last() {
        Some(last) => {
            let yy = metric.inner(&last.y, &last.y);
            if yy > 0.0 {
                1.0 / (last.rho * yy)
            } else {
                1.0
            }
        }
        None => 1.0,
    };
    q.scale(gamma);
    for (pair, alpha) in memory.pairs().zip(alphas.into_iter().rev()) {
        let beta = pair.rho * metric.inner(&pair.y, &q);
        q.axpy(alpha - beta, &pair.s);
    }
    -q
}

/// Accepted line-search step.
#[derive(Debug, Clone)]
pub struct LineSearchStep {
    pub step: f64,
    pub backtracks: usize,
    pub f_new: f64,
    /// Retraction along `step · η` (endpoint plus transport).
    pub geometry: Step,
}

/// Backtracking over `t ∈ {1, δ, δ², …}` until
/// `f(R_x(tη)) ≤ f(x) + c₁ t ⟨grad f(x), η⟩_x`. Evaluation failures (for
/// example a numerically singular solve at a wild trial point) count as
/// rejections.
pub fn armijo_backtrack(
    x: &RomPoint,
    eta: &TangentVector,
    f_x: f64,
    grad: &TangentVector,
    mut evaluate_f: impl FnMut(&RomPoint) -> Result<f64>,
    config: &OptimizerConfig,
) -> Result<LineSearchStep> {
    let slope = Metric::at(x)?.inner(grad, eta);
    armijo_with_slope(x, eta, f_x, slope, &mut evaluate_f, config)
}

fn armijo_with_slope(
    x: &RomPoint,
    eta: &TangentVector,
    f_x: f64,
    slope: f64,
    evaluate_f: &mut dyn FnMut(&RomPoint) -> Result<f64>,
    config: &OptimizerConfig,
) -> Result<LineSearchStep> {
    if !(slope < 0.0) {
        return Err(Error::InvalidArgument(format!("not a descent direction (slope {slope:e})")));
    }
    let mut t = 1.0;
    for backtracks in 0..=config.max_backtracks {
        if let Ok(geometry) = Step::new(x, &(eta * t)) {
            if let Ok(f_new) = evaluate_f(geometry.endpoint()) {
                if f_new.is_finite() && f_new <= f_x + config.armijo_c1 * t * slope {
                    return Ok(LineSearchStep {
                        step: t,
                        backtracks,
                        f_new,
                        geometry,
                    });
                }
            }
        }
        t *= config.backtrack_factor;
    }
    Err(Error::LineSearchFailed {
        backtracks: config.max_backtracks,
    })
}

/// Telemetry for one iterate. Record `k` describes `x_k`; its step fields
/// describe the move from `x_{k−1}` (all zero for `k = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub grad_norm_rel: f64,
    pub step: f64,
    pub backtracks: usize,
    pub pair_accepted: bool,
    /// `⟨grad f(x_{k−1}), η_{k−1}⟩`, kept for auditing the Armijo condition.
    pub slope: f64,
    pub min_eig_r: f64,
    pub max_real_eig: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    RelativeGradient,
    CostChange,
    MaxIterations,
    /// Gradient already negligible at the starting point.
    Stationary,
    LineSearchFailed,
    /// A gradient evaluation failed; the last good iterate is returned.
    EvaluationFailed(String),
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::RelativeGradient => f.write_str("relative_gradient"),
            Self::CostChange => f.write_str("cost_change"),
            Self::MaxIterations => f.write_str("max_iterations"),
            Self::Stationary => f.write_str("stationary"),
            Self::LineSearchFailed => f.write_str("line_search_failed"),
            Self::EvaluationFailed(msg) => write!(f, "evaluation_failed: {msg}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub x: RomPoint,
    pub f: f64,
    pub history: Vec<IterationRecord>,
    pub termination: TerminationReason,
}

impl RunResult {
    /// Number of accepted steps.
    pub fn iterations(&self) -> usize {
        self.history.len().saturating_sub(1)
    }

    /// `true` unless the run stopped because no acceptable step was found.
    pub fn converged(&self) -> bool {
        matches!(
            self.termination,
            TerminationReason::RelativeGradient | TerminationReason::CostChange | TerminationReason::Stationary
        )
    }
}

fn record(k: usize, x: &RomPoint, f: f64, grad_norm: f64, grad_norm0: f64) -> IterationRecord {
    IterationRecord {
        k,
        f,
        grad_norm,
        grad_norm_rel: if grad_norm0 > 0.0 { grad_norm / grad_norm0 } else { 0.0 },
        step: 0.0,
        backtracks: 0,
        pair_accepted: false,
        slope: 0.0,
        min_eig_r: min_symmetric_eigenvalue(x.r()),
        max_real_eig: crate::linalg::max_real_eigenvalue(&x.a_hat()).unwrap_or(f64::NAN),
    }
}

/// Minimises `objective` from `x0`.
pub fn lrbfgs_run(objective: &impl Objective, x0: RomPoint, config: &OptimizerConfig) -> Result<RunResult> {
    config.validate()?;
    let (mut f, mut grad) = objective
        .cost_and_gradient(&x0)
        .map_err(|e| Error::InvalidInitialPoint(e.to_string()))?;
    if !f.is_finite() {
        return Err(Error::InvalidInitialPoint(format!("cost {f} at the initial point")));
    }
    let mut x = x0;
    let mut metric = Metric::at(&x)?;
    let mut grad_norm = metric.norm(&grad);
    let grad_norm0 = grad_norm;
    let mut history = vec![record(0, &x, f, grad_norm, grad_norm0)];
    let mut memory = LbfgsMemory::new(config.memory_size);

    let finish = |x, f, history, termination| Ok(RunResult { x, f, history, termination });
    if grad_norm <= config.tol_abs_grad {
        return finish(x, f, history, TerminationReason::Stationary);
    }

    for k in 0..config.max_iterations {
        let mut eta = two_loop_with_metric(&memory, &grad, &metric);
        let mut slope = metric.inner(&grad, &eta);
        if !(slope < 0.0) {
            memory.clear();
            eta = -&grad;
            slope = -grad_norm * grad_norm;
        }
        let mut evaluate = |p: &RomPoint| objective.cost(p);
        let accepted = match armijo_with_slope(&x, &eta, f, slope, &mut evaluate, config) {
            Ok(step) => step,
            Err(Error::LineSearchFailed { .. }) => return finish(x, f, history, TerminationReason::LineSearchFailed),
            Err(e) => return Err(e),
        };
        let x_new = accepted.geometry.endpoint().clone();
        let (f_new, grad_new) = match objective.cost_and_gradient(&x_new) {
            Ok(v) => v,
            Err(e) => return finish(x, f, history, TerminationReason::EvaluationFailed(e.to_string())),
        };
        let metric_new = Metric::at(&x_new)?;

        let s = accepted.geometry.transport(&(&eta * accepted.step));
        let y = &grad_new - &accepted.geometry.transport(&grad);
        memory.transport(&accepted.geometry);
        let sy = metric_new.inner(&y, &s);
        let ss = metric_new.inner(&s, &s);
        let pair_accepted = sy > 0.0 && ss > 0.0 && sy / ss >= config.cautious_coefficient * grad_norm;
        if pair_accepted {
            memory.push(s, y, sy);
        }

        let grad_norm_new = metric_new.norm(&grad_new);
        let mut rec = record(k + 1, &x_new, f_new, grad_norm_new, grad_norm0);
        rec.step = accepted.step;
        rec.backtracks = accepted.backtracks;
        rec.pair_accepted = pair_accepted;
        rec.slope = slope;
        history.push(rec);

        let f_change = (f - f_new).abs();
        x = x_new;
        f = f_new;
        grad = grad_new;
        grad_norm = grad_norm_new;
        metric = metric_new;

        if grad_norm / grad_norm0 < config.tol_rel_grad {
            return finish(x, f, history, TerminationReason::RelativeGradient);
        }
        if f_change < config.tol_f_change {
            return finish(x, f, history, TerminationReason::CostChange);
        }
    }
    finish(x, f, history, TerminationReason::MaxIterations)
}

/// Writes `k,f,grad_norm_rel,step,backtracks,pair_accepted` rows.
pub fn write_history_csv(out: &mut impl Write, history: &[IterationRecord]) -> std::io::Result<()> {
    writeln!(out, "k,f,grad_norm_rel,step,backtracks,pair_accepted")?;
    for r in history {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{},{}",
            r.k, r.f, r.grad_norm_rel, r.step, r.backtracks, r.pair_accepted as u8
        )?;
    }
    Ok(())
}

pub fn save_history_csv(path: &Path, history: &[IterationRecord]) -> Result<()> {
    let mut buf = Vec::new();
    write_history_csv(&mut buf, history).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bt::canonical_copy;
    use crate::gramians::{build_fom_cache, H2Objective};
    use crate::linalg::{frobenius_inner, Matrix};
    use crate::random::{random_lqo_system, random_matrix, random_rom_point, random_skew, random_spd, seeded};

    fn flat_point(r: usize, m: usize) -> RomPoint {
        RomPoint::new(Matrix::zeros(r, r), Matrix::identity(r, r), Matrix::zeros(r, m), Matrix::zeros(1, r), Matrix::zeros(r, r)).unwrap()
    }

    fn b_only(b: Matrix) -> TangentVector {
        let (r, m) = b.shape();
        let mut v = TangentVector::zeros(r, m);
        v.b = b;
        v
    }

    #[test]
    fn empty_memory_gives_steepest_descent() {
        let mut rng = seeded(41);
        let x = random_rom_point(&mut rng, 3, 2);
        let g = b_only(random_matrix(&mut rng, 3, 2));
        assert_eq!(two_loop_direction(&LbfgsMemory::new(5), &g, &x).unwrap(), -&g);
    }

    #[test]
    fn scalar_two_loop_by_hand() {
        let x = flat_point(1, 1);
        let mut memory = LbfgsMemory::new(3);
        let s = b_only(Matrix::from_element(1, 1, 2.0));
        memory.push(s.clone(), s.clone(), 4.0);
        // With s = y the inverse Hessian is exactly 1 along s: η = −g.
        let g = b_only(Matrix::from_element(1, 1, 3.0));
        let eta = two_loop_direction(&memory, &g, &x).unwrap();
        assert!((eta.b[(0, 0)] + 3.0).abs() < 1e-15);

        // Curvature 4 along the only direction: η = −g / 4.
        let mut memory = LbfgsMemory::new(3);
        memory.push(s.clone(), &s * 4.0, 16.0);
        let eta = two_loop_direction(&memory, &g, &x).unwrap();
        assert!((eta.b[(0, 0)] + 0.75).abs() < 1e-15);
    }

    /// Textbook L-BFGS two-loop on flat vectors.
    fn euclidean_two_loop(pairs: &[(Vec<f64>, Vec<f64>)], g: &[f64]) -> Vec<f64> {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut q = g.to_vec();
        let mut alphas = vec![0.0; pairs.len()];
        for (i, (s, y)) in pairs.iter().enumerate().rev() {
            alphas[i] = dot(s, &q) / dot(y, s);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= alphas[i] * yi);
        }
        let (s, y) = pairs.last().unwrap();
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|qi| *qi *= gamma);
        for (i, (s, y)) in pairs.iter().enumerate() {
            let beta = dot(y, &q) / dot(y, s);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (alphas[i] - beta) * si);
        }
        q.iter().map(|v| -v).collect()
    }

    #[test]
    fn flat_directions_match_euclidean_lbfgs() {
        let mut rng = seeded(42);
        let (r, m) = (3, 2);
        let x = flat_point(r, m);
        // Quadratic cost ½ vec(B)ᵀ H vec(B) with H SPD: y = H s.
        let h = random_spd(&mut rng, r * m);
        let mut memory = LbfgsMemory::new(4);
        let mut flat_pairs = Vec::new();
        for _ in 0..6 {
            let s = random_matrix(&mut rng, r, m);
            let y_vec = &h * nalgebra::DVector::from_column_slice(s.as_slice());
            let y = Matrix::from_column_slice(r, m, y_vec.as_slice());
            let sy = frobenius_inner(&s, &y);
            flat_pairs.push((s.as_slice().to_vec(), y.as_slice().to_vec()));
            memory.push(b_only(s), b_only(y), sy);
        }
        let g = random_matrix(&mut rng, r, m);
        let eta = two_loop_direction(&memory, &b_only(g.clone()), &x).unwrap();
        let oracle = euclidean_two_loop(&flat_pairs[flat_pairs.len() - 4..], g.as_slice());
        for (a, b) in eta.b.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        assert_eq!(memory.len(), 4);
    }

    #[test]
    fn armijo_examples() {
        let x = flat_point(1, 1);
        let config = OptimizerConfig::default();
        // f(B) = ½ b², gradient b, at b = 0 shifted: use x with b = 0 and target 1.
        let f = |p: &RomPoint| Ok(0.5 * (p.b()[(0, 0)] - 1.0).powi(2));
        let grad = b_only(Matrix::from_element(1, 1, -1.0));
        let eta = -&grad;
        let step = armijo_backtrack(&x, &eta, 0.5, &grad, f, &config).unwrap();
        assert_eq!(step.step, 1.0);
        assert_eq!(step.backtracks, 0);
        assert_eq!(step.f_new, 0.0);

        let hopeless = |_: &RomPoint| Ok(1.5);
        assert!(matches!(
            armijo_backtrack(&x, &eta, 0.5, &grad, hopeless, &config),
            Err(Error::LineSearchFailed { backtracks: 50 })
        ));
        assert!(matches!(armijo_backtrack(&x, &grad, 0.5, &grad, f, &config), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn transported_pairs_keep_their_curvature() {
        let mut rng = seeded(43);
        let sys = random_lqo_system(&mut rng, 8, 2);
        let cache = build_fom_cache(&sys).unwrap();
        let objective = H2Objective::new(&cache);
        let x = random_rom_point(&mut rng, 3, 2);
        let (_, g) = objective.cost_and_gradient(&x).unwrap();
        let mut memory = LbfgsMemory::new(3);
        let s = &g * 0.01;
        let y = &g * 0.02;
        let metric = Metric::at(&x).unwrap();
        memory.push(s.clone(), y.clone(), metric.inner(&y, &s));
        let step = Step::new(&x, &(&g * -0.1)).unwrap();
        memory.transport(&step);
        let pair = memory.pairs().next().unwrap();
        let after = Metric::at(step.endpoint()).unwrap().inner(&pair.y, &pair.s);
        assert!((after * pair.rho - 1.0).abs() < 1e-10);
    }

    #[test]
    fn stationary_start_stops_immediately() {
        let mut rng = seeded(44);
        let sys = random_lqo_system(&mut rng, 4, 2);
        let cache = build_fom_cache(&sys).unwrap();
        let copy = canonical_copy(&sys).unwrap().point;
        let config = OptimizerConfig {
            tol_abs_grad: 1e-8,
            ..OptimizerConfig::default()
        };
        let run = lrbfgs_run(&H2Objective::new(&cache), copy, &config).unwrap();
        assert_eq!(run.termination, TerminationReason::Stationary);
        assert_eq!(run.history.len(), 1);
    }

    #[test]
    fn random_instance_from_null_rom() {
        let mut rng = seeded(45);
        let sys = random_lqo_system(&mut rng, 8, 2);
        let cache = build_fom_cache(&sys).unwrap();
        let x0 = RomPoint::new(
            random_skew(&mut rng, 3),
            random_spd(&mut rng, 3),
            Matrix::zeros(3, 2),
            random_matrix(&mut rng, 1, 3) * 0.1,
            Matrix::zeros(3, 3),
        )
        .unwrap();
        let config = OptimizerConfig {
            max_iterations: 200,
            ..OptimizerConfig::default()
        };
        let objective = H2Objective::new(&cache);
        let run = lrbfgs_run(&objective, x0, &config).unwrap();
        let first = run.history[0].f;
        assert!(run.f < first, "{} !< {first}", run.f);
        for pair in run.history.windows(2) {
            let (prev, next) = (&pair[0], &pair[1]);
            assert!(next.f <= prev.f + config.armijo_c1 * next.step * next.slope);
            assert!(next.min_eig_r > 0.0 && next.max_real_eig < 0.0);
        }

        let rerun = lrbfgs_run(&H2Objective::new(&cache), rerun_start(), &config).unwrap();
        let rerun2 = lrbfgs_run(&H2Objective::new(&cache), rerun_start(), &config).unwrap();
        assert_eq!(rerun.history, rerun2.history);
    }

    fn rerun_start() -> RomPoint {
        random_rom_point(&mut seeded(46), 3, 2)
    }

    #[test]
    fn csv_layout() {
        let rec = IterationRecord {
            k: 3,
            f: 0.25,
            grad_norm: 1.0,
            grad_norm_rel: 0.5,
            step: 1.0,
            backtracks: 2,
            pair_accepted: true,
            slope: -1.0,
            min_eig_r: 1.0,
            max_real_eig: -1.0,
        };
        let mut out = Vec::new();
        write_history_csv(&mut out, &[rec]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "k,f,grad_norm_rel,step,backtracks,pair_accepted\n3,2.5e-1,5e-1,1e0,2,1\n");
    }

    #[test]
    fn config_round_trip_and_validation() {
        let config = OptimizerConfig::default();
        let json = serde_json::to_string(&config).unwrap();
        assert_eq!(serde_json::from_str::<OptimizerConfig>(&json).unwrap(), config);
        let bad = OptimizerConfig {
            armijo_c1: 1.5,
            ..config
        };
        assert!(bad.validate().is_err());
    }
}
