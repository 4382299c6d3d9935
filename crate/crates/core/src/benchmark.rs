//! One-dimensional advection–diffusion benchmark with a quadratic output.
//!
//! `v_t − α v_xx + β v_x = 0` on `(0, 1)`, `v(t, 0) = u₀(t)`, `α v_x(t, 1) = u₁(t)`,
//! observed through `y = ½ ∫ (v − 1)² dx`. Discretised on `n` interior nodes
//! with spacing `h = 1/(n+1)`: central differences for diffusion, upwind
//! differences for advection (β > 0), the inflow value entering through the
//! first node and the Neumann flux through a ghost node behind the last one.
//! The output uses the trapezoidal weights `w_i = h` of the interior nodes, so
//! `½ Σ w_i (v_i − 1)² = vᵀ M v + C v + d` with `M = ½ diag(w)`, `C = −wᵀ`
//! and `d = ½ Σ w_i`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bt::{balanced_truncation, to_canonical_form};
use crate::error::{Error, Result};
use crate::gramians::{build_fom_cache, h2_error, h2_error_state_space, FomCache, H2Objective};
use crate::linalg::Matrix;
use crate::model::{
    linf_bound_check, rk4_stable_step, simulate_output, write_matrix_market, InputSignal, LinfReport, LqoSystem, RomPoint, StateSpaceRom, Trajectory,
};
use crate::optimizer::{lrbfgs_run, save_history_csv, IterationRecord, OptimizerConfig, RunResult};

/// Problem and experiment settings. Every field has a default, so `{}` is a
/// valid configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub r_list: Vec<usize>,
    /// Simulation horizon for the time-response data.
    pub horizon: f64,
    /// Requested RK4 step; shortened automatically when it would be unstable.
    pub dt: f64,
    /// Recorded in reports; the pipeline itself draws no random numbers.
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            n: 300,
            alpha: 0.01,
            beta: 1.0,
            r_list: vec![10],
            horizon: 10.0,
            dt: 1e-3,
            seed: 0,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n < 3 {
            return bad(format!("grid size n = {} must be at least 3", self.n));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha = {} must be positive", self.alpha));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta = {} must be non-negative", self.beta));
        }
        if let Some(&r) = self.r_list.iter().find(|&&r| r == 0 || r >= self.n) {
            return bad(format!("reduced order {r} must lie in 1..{}", self.n));
        }
        if !(self.horizon > 0.0 && self.dt > 0.0 && self.dt.is_finite() && self.horizon.is_finite()) {
            return bad(format!("need positive horizon and dt, got {} and {}", self.horizon, self.dt));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0)
    }

    /// Trapezoidal weights of the interior nodes.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        vec![self.spacing(); self.n]
    }
}

pub fn build_advection_diffusion(config: &BenchmarkConfig) -> Result<LqoSystem> {
    config.validate()?;
    let n = config.n;
    let h = config.spacing();
    let diffusion = config.alpha / (h * h);
    let advection = config.beta / h;

    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = -2.0 * diffusion - advection;
        if i > 0 {
            a[(i, i - 1)] = diffusion + advection;
        }
        if i + 1 < n {
            a[(i, i + 1)] = diffusion;
        }
    }
    // Ghost node v_{n+1} = v_n + h u₁ / α folds one diffusion coupling back
    // onto the diagonal.
    a[(n - 1, n - 1)] += diffusion;

    let mut b = Matrix::zeros(n, 2);
    b[(0, 0)] = diffusion + advection;
    b[(n - 1, 1)] = 1.0 / h;

    let w = config.quadrature_weights();
    let c = Matrix::from_fn(1, n, |_, j| -w[j]);
    let m = Matrix::from_fn(n, n, |i, j| if i == j { 0.5 * w[i] } else { 0.0 });
    let d = 0.5 * w.iter().sum::<f64>();
    LqoSystem::new(a, b, c, m, d)
}

/// Configuration file of the `reduce` command: both sections are optional.
///
/// ```json
/// { "benchmark": { "n": 300, "r_list": [6, 10, 14] }, "optimizer": { "max_iterations": 500 } }
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkConfig,
    pub optimizer: OptimizerConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Outcome for one reduced order.
#[derive(Debug, Clone, Serialize)]
pub struct OrderReport {
    pub r: usize,
    pub h2_bt: Option<f64>,
    pub h2_opt: Option<f64>,
    pub iterations: Option<usize>,
    pub termination_reason: Option<String>,
    /// Seconds spent on truncation plus optimisation.
    pub wall_time: f64,
    /// Shift added while mapping the truncated model to `J − R` form.
    pub canonical_regularization: Option<f64>,
    pub linf: Option<LinfReport>,
    pub error: Option<String>,
    #[serde(skip)]
    pub history: Vec<IterationRecord>,
    #[serde(skip)]
    pub rom: Option<RomPoint>,
}

impl OrderReport {
    fn failed(r: usize, wall_time: f64, error: &Error) -> Self {
        Self {
            r,
            h2_bt: None,
            h2_opt: None,
            iterations: None,
            termination_reason: None,
            wall_time,
            canonical_regularization: None,
            linf: None,
            error: Some(error.to_string()),
            history: Vec::new(),
            rom: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub config: BenchmarkConfig,
    pub optimizer: OptimizerConfig,
    pub fom_h2_norm: f64,
    /// RK4 step actually used for the time responses.
    pub simulation_dt: f64,
    pub orders: Vec<OrderReport>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }
}

/// Where and what to write; `None` runs purely in memory.
#[derive(Debug, Clone, Copy, Default)]
pub struct OutputOptions<'a> {
    pub dir: Option<&'a Path>,
    pub emit_plots_data: bool,
}

/// Truncation, canonical form and LRBFGS for every order in `config.r_list`,
/// plus time responses under the benchmark input and the peak-error bound.
/// Orders run on separate threads; a failing order is reported, not fatal.
pub fn run_experiment(config: &BenchmarkConfig, optimizer: &OptimizerConfig, output: OutputOptions<'_>) -> Result<ExperimentReport> {
    let fom = build_advection_diffusion(config)?;
    run_experiment_on(&fom, config, optimizer, output)
}

/// [`run_experiment`] on a given full-order model (grid fields of `config` are ignored).
pub fn run_experiment_on(
    fom: &LqoSystem,
    config: &BenchmarkConfig,
    optimizer: &OptimizerConfig,
    output: OutputOptions<'_>,
) -> Result<ExperimentReport> {
    optimizer.validate()?;
    if let Some(&r) = config.r_list.iter().find(|&&r| r == 0 || r >= fom.n()) {
        return Err(Error::InvalidArgument(format!("reduced order {r} must lie in 1..{}", fom.n())));
    }
    if let Some(dir) = output.dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let cache = build_fom_cache(fom)?;
    let simulation_dt = config.dt.min(rk4_stable_step(fom));
    let input = InputSignal::advection_diffusion_default();
    let y_fom = if config.r_list.is_empty() {
        None
    } else {
        Some(simulate_output(fom, &input, config.horizon, simulation_dt)?)
    };
    let sim = Simulation {
        input: &input,
        y_fom: y_fom.as_ref(),
        horizon: config.horizon,
        dt: simulation_dt,
    };

    let orders: Vec<OrderReport> = std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .r_list
            .iter()
            .map(|&r| {
                let (cache, sim) = (&cache, &sim);
                scope.spawn(move || run_order(cache, r, optimizer, sim, output))
            })
            .collect();
        handles
            .into_iter()
            .zip(&config.r_list)
            .map(|(h, &r)| {
                h.join()
                    .unwrap_or_else(|_| OrderReport::failed(r, 0.0, &Error::InvalidArgument("worker panicked".into())))
            })
            .collect()
    });

    let report = ExperimentReport {
        config: config.clone(),
        optimizer: optimizer.clone(),
        fom_h2_norm: cache.h2_norm(),
        simulation_dt,
        orders,
    };
    if let Some(dir) = output.dir {
        let path = dir.join("summary.json");
        fs::write(&path, report.to_json()).map_err(|e| Error::io(&path, e))?;
    }
    Ok(report)
}

/// Result of reducing to one order: the truncated start and the optimised model.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub bt_rom: StateSpaceRom,
    pub h2_bt: f64,
    /// Shift added while mapping the truncated model to `J − R` form.
    pub regularization: f64,
    pub run: RunResult,
    pub h2_opt: f64,
}

/// Balanced truncation to order `r`, its `J − R` form, then LRBFGS from there.
pub fn reduce_order(cache: &FomCache, r: usize, optimizer: &OptimizerConfig) -> Result<Reduction> {
    let bt_rom = balanced_truncation(cache, r)?;
    let h2_bt = h2_error_state_space(cache, &bt_rom)?;
    let canonical = to_canonical_form(&bt_rom)?;
    let run = lrbfgs_run(&H2Objective::new(cache), canonical.point, optimizer)?;
    let h2_opt = h2_error(cache, &run.x)?;
    Ok(Reduction {
        bt_rom,
        h2_bt,
        regularization: canonical.regularization,
        run,
        h2_opt,
    })
}

struct Simulation<'a> {
    input: &'a InputSignal,
    y_fom: Option<&'a Trajectory>,
    horizon: f64,
    dt: f64,
}

fn run_order(cache: &FomCache, r: usize, optimizer: &OptimizerConfig, sim: &Simulation<'_>, output: OutputOptions<'_>) -> OrderReport {
    let start = Instant::now();
    match run_order_inner(cache, r, optimizer, sim, output, start) {
        Ok(report) => report,
        Err(e) => OrderReport::failed(r, start.elapsed().as_secs_f64(), &e),
    }
}

fn run_order_inner(
    cache: &FomCache,
    r: usize,
    optimizer: &OptimizerConfig,
    sim: &Simulation<'_>,
    output: OutputOptions<'_>,
    start: Instant,
) -> Result<OrderReport> {
    let Reduction {
        bt_rom,
        h2_bt,
        regularization,
        run,
        h2_opt,
    } = reduce_order(cache, r, optimizer)?;
    let wall_time = start.elapsed().as_secs_f64();
    let d = cache.fom().d();
    let opt_rom = run.x.to_state_space(d);

    let mut linf = None;
    if let Some(y_fom) = sim.y_fom {
        let y_bt = simulate_output(&bt_rom, sim.input, sim.horizon, sim.dt)?;
        let y_opt = simulate_output(&opt_rom, sim.input, sim.horizon, sim.dt)?;
        linf = Some(linf_bound_check(h2_opt, sim.input, y_fom, &y_opt)?);
        if let (Some(dir), true) = (output.dir, output.emit_plots_data) {
            let path = dir.join(format!("time_response_r{r}.csv"));
            fs::write(&path, time_response_csv(y_fom, &y_bt, &y_opt)).map_err(|e| Error::io(&path, e))?;
        }
    }
    if let Some(dir) = output.dir {
        save_history_csv(&dir.join(format!("convergence_r{r}.csv")), &run.history)?;
        save_rom(&dir.join(format!("rom_r{r}")), &run.x, d)?;
    }
    Ok(OrderReport {
        r,
        h2_bt: Some(h2_bt),
        h2_opt: Some(h2_opt),
        iterations: Some(run.iterations()),
        termination_reason: Some(run.termination.to_string()),
        wall_time,
        canonical_regularization: Some(regularization),
        linf,
        error: None,
        history: run.history,
        rom: Some(run.x),
    })
}

fn time_response_csv(y: &Trajectory, y_bt: &Trajectory, y_opt: &Trajectory) -> String {
    let mut out = String::from("t,y_fom,y_bt,y_opt,rel_err_bt,rel_err_opt\n");
    for (i, &t) in y.times.iter().enumerate() {
        let (yf, yb, yo) = (y.outputs[i], y_bt.outputs[i], y_opt.outputs[i]);
        let rel = |v: f64| if yf != 0.0 { (yf - v).abs() / yf.abs() } else { (yf - v).abs() };
        let _ = writeln!(out, "{t:e},{yf:e},{yb:e},{yo:e},{:e},{:e}", rel(yb), rel(yo));
    }
    out
}

/// Writes the manifold factors `J.mtx`, `R.mtx` and the state-space form
/// (`A = J − R`, `B`, `C`, `M`, `system.json`) of a reduced model.
pub fn save_rom(dir: &Path, rom: &RomPoint, d: f64) -> Result<()> {
    let ss = rom.to_state_space(d);
    LqoSystem::new(ss.a, ss.b, ss.c, ss.m, ss.d)?.save(dir)?;
    write_matrix_market(&dir.join("J.mtx"), rom.j())?;
    write_matrix_market(&dir.join("R.mtx"), rom.r())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_real_eigenvalue;
    use crate::model::{simulate_output, InputSignal};
    use crate::random::seeded;
    use nalgebra::DVector;
    use rand::Rng;

    fn small(n: usize, alpha: f64) -> BenchmarkConfig {
        BenchmarkConfig {
            n,
            alpha,
            r_list: vec![],
            ..BenchmarkConfig::default()
        }
    }

    #[test]
    fn output_expansion_matches_quadrature() {
        let config = small(40, 0.01);
        let sys = build_advection_diffusion(&config).unwrap();
        let w = config.quadrature_weights();
        let mut rng = seeded(31);
        for _ in 0..10 {
            let v = DVector::from_fn(40, |_, _| rng.gen_range(-2.0..2.0));
            let direct: f64 = 0.5 * v.iter().zip(&w).map(|(vi, wi)| wi * (vi - 1.0f64).powi(2)).sum::<f64>();
            let form = (v.transpose() * sys.m() * &v)[(0, 0)] + (sys.c() * &v)[(0, 0)] + sys.d();
            assert!((direct - form).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn toy_grid_is_hurwitz() {
        let sys = build_advection_diffusion(&small(3, 0.01)).unwrap();
        let h: f64 = 0.25;
        let (dif, adv) = (0.01 / (h * h), 1.0 / h);
        let expected = Matrix::from_row_slice(3, 3, &[
            -2.0 * dif - adv, dif, 0.0,
            dif + adv, -2.0 * dif - adv, dif,
            0.0, dif + adv, -dif - adv,
        ]);
        assert!((sys.a() - expected).norm() < 1e-12);
        assert_eq!(sys.b()[(0, 0)], dif + adv);
        assert_eq!(sys.b()[(2, 1)], 4.0);
        assert!(max_real_eigenvalue(sys.a()).unwrap() < 0.0);
    }

    #[test]
    fn zero_input_gives_the_offset() {
        let sys = build_advection_diffusion(&small(20, 0.01)).unwrap();
        let traj = simulate_output(&sys, &InputSignal::zero(2), 1.0, 1e-3).unwrap();
        assert!(traj.outputs.iter().all(|&y| y == sys.d()));
        assert!((sys.d() - 0.5 * 20.0 / 21.0).abs() < 1e-15);
    }

    fn abscissa(alpha: f64, beta: f64) -> f64 {
        let config = BenchmarkConfig { beta, ..small(60, alpha) };
        max_real_eigenvalue(build_advection_diffusion(&config).unwrap().a()).unwrap()
    }

    #[test]
    fn pure_diffusion_decays_faster_with_alpha() {
        let s: Vec<f64> = [0.001, 0.01, 0.1].iter().map(|&alpha| abscissa(alpha, 0.0)).collect();
        assert!(s[0] > s[1] && s[1] > s[2], "{s:?}");
    }

    #[test]
    fn advection_dominated_decay_follows_the_continuous_rate() {
        // The slowest continuous mode decays like −β²/(4α) − α k²; upwinding
        // adds βh/2 of artificial diffusion. More diffusion means slower decay here.
        let s: Vec<f64> = [0.001, 0.01, 0.1].iter().map(|&alpha| abscissa(alpha, 1.0)).collect();
        assert!(s[0] < s[1] && s[1] < s[2], "{s:?}");
        let alpha_eff = 0.1 + 0.5 / 61.0;
        let predicted = -1.0 / (4.0 * alpha_eff);
        assert!(s[2] < predicted && s[2] > 2.0 * predicted, "{} vs {predicted}", s[2]);
    }

    #[test]
    fn default_step_needs_the_stability_clamp() {
        let sys = build_advection_diffusion(&BenchmarkConfig::default()).unwrap();
        let input = InputSignal::advection_diffusion_default();
        let dt = BenchmarkConfig::default().dt;
        assert!(rk4_stable_step(&sys) < dt);
        assert!(matches!(
            simulate_output(&sys, &input, 2.0, dt),
            Err(Error::UnstableIntegration { .. })
        ));
        let y = simulate_output(&sys, &input, 2.0, rk4_stable_step(&sys)).unwrap();
        assert!(y.outputs.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(BenchmarkConfig::default().validate().is_ok());
        assert!(small(2, 0.01).validate().is_err());
        assert!(small(10, -1.0).validate().is_err());
        let mut bad_order = small(10, 0.01);
        bad_order.r_list = vec![10];
        assert!(bad_order.validate().is_err());
        let parsed: BenchmarkConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(parsed, BenchmarkConfig::default());
        assert!(serde_json::from_str::<BenchmarkConfig>(r#"{"grid": 3}"#).is_err());
    }

    #[test]
    fn empty_order_list_gives_an_empty_report() {
        let config = small(30, 0.01);
        let dir = tempfile::tempdir().unwrap();
        let output = OutputOptions { dir: Some(dir.path()), emit_plots_data: true };
        let report = run_experiment(&config, &OptimizerConfig::default(), output).unwrap();
        assert!(report.orders.is_empty());
        assert!(dir.path().join("summary.json").exists());
    }

    #[test]
    fn small_experiment_writes_everything() {
        let config = BenchmarkConfig {
            r_list: vec![2, 4],
            horizon: 2.0,
            ..small(30, 0.05)
        };
        let optimizer = OptimizerConfig { max_iterations: 40, ..OptimizerConfig::default() };
        let dir = tempfile::tempdir().unwrap();
        let output = OutputOptions { dir: Some(dir.path()), emit_plots_data: true };
        let report = run_experiment(&config, &optimizer, output).unwrap();
        for order in &report.orders {
            assert!(order.error.is_none(), "{:?}", order.error);
            assert!(order.h2_opt.unwrap() <= order.h2_bt.unwrap() * (1.0 + 1e-12));
            assert!(order.linf.as_ref().unwrap().holds);
            for name in [format!("convergence_r{}.csv", order.r), format!("time_response_r{}.csv", order.r)] {
                assert!(dir.path().join(name).exists());
            }
            let rom = LqoSystem::load(&dir.path().join(format!("rom_r{}", order.r))).unwrap();
            assert_eq!(rom.n(), order.r);
        }
        let again = run_experiment(&config, &optimizer, OutputOptions::default()).unwrap();
        let strip = |r: &ExperimentReport| {
            let mut v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
            for o in v["orders"].as_array_mut().unwrap() {
                o["wall_time"] = serde_json::Value::Null;
            }
            v
        };
        assert_eq!(strip(&report), strip(&again));
    }

    #[test]
    fn bad_orders_are_rejected_up_front() {
        let config = BenchmarkConfig { r_list: vec![30], ..small(30, 0.01) };
        assert!(run_experiment(&config, &OptimizerConfig::default(), OutputOptions::default()).is_err());
    }
}
