use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::Realization;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// State norm above which an explicit integration is declared unstable.
const BLOW_UP_LIMIT: f64 = 1e12;

/// Time-dependent input `t ↦ u(t) ∈ ℝᵐ`.
#[derive(Clone)]
pub struct InputSignal {
    inputs: usize,
    eval: Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>,
}

impl fmt::Debug for InputSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InputSignal").field("inputs", &self.inputs).finish_non_exhaustive()
    }
}

impl InputSignal {
    pub fn new(inputs: usize, eval: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Self {
            inputs,
            eval: Arc::new(eval),
        }
    }

    pub fn zero(inputs: usize) -> Self {
        Self::new(inputs, move |_| DVector::zeros(inputs))
    }

    pub fn constant(values: Vec<f64>) -> Self {
        let v = DVector::from_vec(values);
        Self::new(v.len(), move |_| v.clone())
    }

    /// `u(t) = [t² e^{-0.2 t}, 0.5 cos(π t) + 1]` used for the advection-diffusion time responses.
    pub fn advection_diffusion_default() -> Self {
        Self::new(2, |t| {
            DVector::from_vec(vec![
                t * t * (-0.2 * t).exp(),
                0.5 * (std::f64::consts::PI * t).cos() + 1.0,
            ])
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        (self.eval)(t)
    }

    /// `‖u‖_{L2}` over the sample times by the trapezoidal rule.
    pub fn l2_norm(&self, times: &[f64]) -> f64 {
        trapezoid(times, |t| self.eval(t).norm_squared()).sqrt()
    }

    /// `‖u ⊗ u‖_{L2}`; pointwise `|u ⊗ u| = |u|²`.
    pub fn kron_l2_norm(&self, times: &[f64]) -> f64 {
        trapezoid(times, |t| self.eval(t).norm_squared().powi(2)).sqrt()
    }
}

fn trapezoid(times: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let values: Vec<f64> = times.iter().map(|&t| f(t)).collect();
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Output samples on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub outputs: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Largest RK4 step that keeps `dt·λ` inside the stability region for every
/// eigenvalue `λ` of `A`, using `‖A‖_∞` as a bound on the spectral radius.
pub fn rk4_stable_step(sys: &impl Realization) -> f64 {
    let a = sys.state_matrix();
    let norm_inf = a
        .row_iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if norm_inf == 0.0 {
        f64::INFINITY
    } else {
        2.0 / norm_inf
    }
}

/// Sparse-or-dense `x ↦ A x`.
enum StateOperator {
    Dense(Matrix),
    Csr {
        row_ptr: Vec<usize>,
        cols: Vec<usize>,
        vals: Vec<f64>,
    },
}

impl StateOperator {
    fn new(a: &Matrix) -> Self {
        let n = a.nrows();
        let nnz = a.iter().filter(|v| **v != 0.0).count();
        if n < 32 || nnz * 4 > n * n {
            return StateOperator::Dense(a.clone());
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for i in 0..n {
            for j in 0..n {
                let v = a[(i, j)];
                if v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        StateOperator::Csr { row_ptr, cols, vals }
    }

    fn apply(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        match self {
            StateOperator::Dense(a) => a.mul_to(x, out),
            StateOperator::Csr { row_ptr, cols, vals } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (row_ptr[i]..row_ptr[i + 1]).map(|k| vals[k] * x[cols[k]]).sum();
                }
            }
        }
    }
}

/// Integrate from the zero state with classical fixed-step RK4 and sample
/// `y = C x + xᵀ M x + d`.
///
/// The step is shrunk to `horizon / ceil(horizon / dt)` so the grid ends
/// exactly at `horizon`.
pub fn simulate_output(
    sys: &impl Realization,
    u: &InputSignal,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0 && horizon > 0.0 && dt.is_finite() && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need positive finite horizon and step, got horizon={horizon}, dt={dt}"
        )));
    }
    if u.inputs() != sys.inputs() {
        return Err(Error::dims("input signal", sys.inputs(), u.inputs()));
    }
    let steps = (horizon / dt - 1e-9).ceil().max(1.0) as usize;
    let h = horizon / steps as f64;
    let op = StateOperator::new(&sys.state_matrix());
    let b = sys.input_map();
    let c = sys.output_row();
    let m = sys.quadratic_output();
    let d = sys.offset();
    let n = sys.order();

    let output = |x: &DVector<f64>| -> f64 {
        let lin = (c * x)[0];
        lin + x.dot(&(m * x)) + d
    };
    let rhs = |t: f64, x: &DVector<f64>, out: &mut DVector<f64>| {
        op.apply(x, out);
        out.gemv(1.0, b, &u.eval(t), 1.0);
    };

    let mut x = DVector::zeros(n);
    let (mut k1, mut k2, mut k3, mut k4) =
        (DVector::zeros(n), DVector::zeros(n), DVector::zeros(n), DVector::zeros(n));
    let mut stage = DVector::zeros(n);
    let mut times = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    times.push(0.0);
    outputs.push(output(&x));
    for k in 0..steps {
        let t = k as f64 * h;
        rhs(t, &x, &mut k1);
        stage.copy_from(&x);
        stage.axpy(0.5 * h, &k1, 1.0);
        rhs(t + 0.5 * h, &stage, &mut k2);
        stage.copy_from(&x);
        stage.axpy(0.5 * h, &k2, 1.0);
        rhs(t + 0.5 * h, &stage, &mut k3);
        stage.copy_from(&x);
        stage.axpy(h, &k3, 1.0);
        rhs(t + h, &stage, &mut k4);
        x.axpy(h / 6.0, &k1, 1.0);
        x.axpy(h / 3.0, &k2, 1.0);
        x.axpy(h / 3.0, &k3, 1.0);
        x.axpy(h / 6.0, &k4, 1.0);
        let t_next = (k + 1) as f64 * h;
        let norm = x.norm();
        if !(norm <= BLOW_UP_LIMIT) {
            return Err(Error::UnstableIntegration {
                time: t_next,
                limit: BLOW_UP_LIMIT,
            });
        }
        times.push(t_next);
        outputs.push(output(&x));
    }
    Ok(Trajectory { times, outputs })
}

/// Both sides of `sup_t |y - ŷ| ≤ ‖Σe‖_{H2} (‖u‖_{L2} + ‖u⊗u‖_{L2})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinfReport {
    pub sup_error: f64,
    pub bound: f64,
    pub holds: bool,
    pub h2_error: f64,
    pub input_l2: f64,
    pub input_kron_l2: f64,
}

pub fn linf_bound_check(
    h2_error: f64,
    u: &InputSignal,
    y: &Trajectory,
    yhat: &Trajectory,
) -> Result<LinfReport> {
    if y.times != yhat.times || y.outputs.len() != yhat.outputs.len() || y.times.len() != y.outputs.len() {
        return Err(Error::GridMismatch);
    }
    let sup_error = y
        .outputs
        .iter()
        .zip(&yhat.outputs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let input_l2 = u.l2_norm(&y.times);
    let input_kron_l2 = u.kron_l2_norm(&y.times);
    let bound = h2_error * (input_l2 + input_kron_l2);
    Ok(LinfReport {
        sup_error,
        bound,
        holds: sup_error <= bound,
        h2_error,
        input_l2,
        input_kron_l2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assemble_error_system, LqoSystem, RomPoint};
    use crate::random::{random_lqo_system, random_rom_point, seeded};

    fn scalar_system(mq: f64, d: f64) -> LqoSystem {
        LqoSystem::new(
            Matrix::from_element(1, 1, -1.0),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, mq),
            d,
        )
        .unwrap()
    }

    fn closed_form(t: f64) -> f64 {
        let x = 1.0 - (-t).exp();
        x + x * x
    }

    #[test]
    fn zero_input_gives_offset() {
        let sys = scalar_system(1.0, 0.75);
        let traj = simulate_output(&sys, &InputSignal::zero(1), 2.0, 0.01).unwrap();
        assert!(traj.outputs.iter().all(|&y| y == 0.75));
        assert_eq!(traj.len(), 201);
        assert!((traj.times[200] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_step_response_matches_closed_form() {
        let sys = scalar_system(1.0, 0.0);
        let traj = simulate_output(&sys, &InputSignal::constant(vec![1.0]), 5.0, 1e-4).unwrap();
        let err = traj
            .times
            .iter()
            .zip(&traj.outputs)
            .map(|(&t, &y)| (y - closed_form(t)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "max error {err:e}");
    }

    #[test]
    fn fourth_order_convergence() {
        let sys = scalar_system(1.0, 0.0);
        let u = InputSignal::constant(vec![1.0]);
        let err_at = |dt: f64| {
            let traj = simulate_output(&sys, &u, 2.0, dt).unwrap();
            (traj.outputs.last().unwrap() - closed_form(2.0)).abs()
        };
        let ratio = err_at(0.2) / err_at(0.1);
        assert!(ratio >= 8.0, "error ratio {ratio}");
    }

    #[test]
    fn unstable_step_is_detected() {
        let sys = scalar_system(0.0, 0.0);
        let fast = LqoSystem::new(
            Matrix::from_element(1, 1, -1000.0),
            sys.b().clone(),
            sys.c().clone(),
            sys.m().clone(),
            0.0,
        )
        .unwrap();
        assert!(matches!(
            simulate_output(&fast, &InputSignal::constant(vec![1.0]), 10.0, 0.01),
            Err(Error::UnstableIntegration { .. })
        ));
        assert!(rk4_stable_step(&fast) <= 0.002 + 1e-15);
    }

    #[test]
    fn error_system_output_is_difference() {
        for seed in 0..5 {
            let mut rng = seeded(seed);
            let fom = random_lqo_system(&mut rng, 6, 2);
            let rom = random_rom_point(&mut rng, 3, 2);
            let err = assemble_error_system(&fom, &rom).unwrap();
            let u = InputSignal::new(2, |t| DVector::from_vec(vec![(2.0 * t).sin(), 0.5 * (-t).exp()]));
            let dt = 1e-3;
            let y = simulate_output(&fom, &u, 3.0, dt).unwrap();
            let yhat = simulate_output(&rom.to_state_space(fom.d()), &u, 3.0, dt).unwrap();
            let ye = simulate_output(&err, &u, 3.0, dt).unwrap();
            for k in 0..y.len() {
                let diff = y.outputs[k] - yhat.outputs[k];
                assert!((ye.outputs[k] - diff).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn identical_copy_has_zero_error() {
        let mut rng = seeded(9);
        let rom = random_rom_point(&mut rng, 4, 2);
        let fom = LqoSystem::new(rom.a_hat(), rom.b().clone(), rom.c().clone(), rom.m().clone(), 0.0).unwrap();
        let copy = RomPoint::new(rom.j().clone(), rom.r().clone(), rom.b().clone(), rom.c().clone(), rom.m().clone()).unwrap();
        let err = assemble_error_system(&fom, &copy).unwrap();
        let u = InputSignal::constant(vec![1.0, -0.5]);
        let ye = simulate_output(&err, &u, 2.0, 1e-3).unwrap();
        assert!(ye.outputs.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn linf_report_edge_cases() {
        let sys = scalar_system(1.0, 0.0);
        let u = InputSignal::constant(vec![1.0]);
        let y = simulate_output(&sys, &u, 1.0, 0.01).unwrap();
        let report = linf_bound_check(0.3, &u, &y, &y).unwrap();
        assert_eq!(report.sup_error, 0.0);
        assert!(report.holds);
        assert!((report.input_l2 - 1.0).abs() < 1e-12);

        let zero = InputSignal::zero(1);
        let y0 = simulate_output(&sys, &zero, 1.0, 0.01).unwrap();
        let report = linf_bound_check(0.3, &zero, &y0, &y0).unwrap();
        assert_eq!(report.bound, 0.0);
        assert!(report.holds);

        let coarse = simulate_output(&sys, &u, 1.0, 0.1).unwrap();
        assert!(matches!(linf_bound_check(0.3, &u, &y, &coarse), Err(Error::GridMismatch)));
    }
}
