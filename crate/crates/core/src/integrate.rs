//! Time integration of the reduced model.
//!
//! [`Newmark`] advances M q̈ + C q̇ + K q = f(t) + f_NL(q) with the Newmark
//! (β, γ) relations
//!
//! ```text
//! q₁ = q₀ + h v₀ + h² [(½ − β) a₀ + β a₁]
//! v₁ = v₀ + h [(1 − γ) a₀ + γ a₁]
//! ```
//!
//! and enforces the balance at t + h by Newton iteration. The unknown is
//! carried as the new acceleration a₁; since q₁ is affine in a₁ the iterates
//! are those of Newton on q₁ with tangent M/(βh²) + γC/(βh) + K − ∂f_NL/∂q,
//! but the residual avoids the 1/h² cancellation of the displacement form.
//! The cubic spring only adds the rank-one term 3k_NL u_L² s sᵀ to the
//! tangent, so the linear part is factored once per step size and each
//! correction is a Sherman-Morrison update.
//!
//! [`rk4_reference`] integrates the same system in first-order form with the
//! classical Runge-Kutta scheme and serves as an independent check.

use crate::config::NumericsConfig;
use crate::rom::ReducedSystem;
use nalgebra::{Cholesky, DVector, Dyn};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum IntegrationError {
    #[error("mass matrix is not positive definite")]
    SingularMass,
    #[error("effective stiffness is not positive definite for dt = {0}")]
    SingularEffective(f64),
    #[error("newmark_beta = 0 (explicit variant) is not supported by the implicit stepper")]
    ExplicitBeta,
    #[error("Newton iteration did not converge at t = {t} after {iterations} iterations; residual norms {trace:?}")]
    Newton {
        t: f64,
        iterations: usize,
        trace: Vec<f64>,
    },
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
}

/// Displacement, velocity and acceleration at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub q: DVector<f64>,
    pub v: DVector<f64>,
    pub a: DVector<f64>,
}

/// Modal coordinates at every recorded instant.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModalHistory {
    pub q: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
}

/// End-point response on a uniform grid from 0 to T.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// u(L, t) (m)
    pub u_end: Vec<f64>,
    /// u̇(L, t) (m/s)
    pub v_end: Vec<f64>,
    pub modal: Option<ModalHistory>,
    /// Largest number of Newton corrections taken by any step (0 for RK4)
    pub max_newton_iterations: usize,
}

impl Trajectory {
    fn with_capacity(n: usize, modal: bool) -> Self {
        Trajectory {
            times: Vec::with_capacity(n),
            u_end: Vec::with_capacity(n),
            v_end: Vec::with_capacity(n),
            modal: modal.then(ModalHistory::default),
            max_newton_iterations: 0,
        }
    }

    fn record(&mut self, sys: &ReducedSystem, t: f64, q: &DVector<f64>, v: &DVector<f64>) {
        self.times.push(t);
        self.u_end.push(sys.end_footprint.dot(q));
        self.v_end.push(sys.end_footprint.dot(v));
        if let Some(m) = self.modal.as_mut() {
            m.q.push(q.clone());
            m.v.push(v.clone());
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Number of steps of size `dt` covering [0, t_final]; the last one is
/// shortened when `t_final` is not a multiple of `dt`.
pub fn step_count(t_final: f64, dt: f64) -> usize {
    let ratio = t_final / dt;
    let nearest = ratio.round();
    if nearest >= 1.0 && (ratio - nearest).abs() <= 1e-9 * nearest {
        nearest as usize
    } else {
        ratio.ceil().max(1.0) as usize
    }
}

/// Time of grid point `i` out of `steps`.
fn grid_time(i: usize, steps: usize, dt: f64, t_final: f64) -> f64 {
    if i == steps {
        t_final
    } else {
        i as f64 * dt
    }
}

/// Solves M a₀ = f(0) + f_NL(q₀) − C v₀ − K q₀.
pub fn initial_acceleration(sys: &ReducedSystem) -> Result<DVector<f64>, IntegrationError> {
    let chol = Cholesky::new(sys.mass.clone()).ok_or(IntegrationError::SingularMass)?;
    Ok(chol.solve(&balance_rhs(sys, 0.0, &sys.q0, &sys.v0)))
}

/// f(t) + f_NL(q) − C v − K q.
fn balance_rhs(sys: &ReducedSystem, t: f64, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut rhs = DVector::zeros(sys.dim());
    sys.external_force_into(t, &mut rhs);
    sys.add_nonlinear_force(q, &mut rhs);
    rhs.gemv(-1.0, &sys.damping, v, 1.0);
    rhs.gemv(-1.0, &sys.stiffness, q, 1.0);
    rhs
}

/// Factorization of M + γhC + βh²K for one step size h.
struct LinearOperator {
    dt: f64,
    chol: Cholesky<f64, Dyn>,
    /// S⁻¹ s
    w: DVector<f64>,
    /// sᵀ S⁻¹ s
    sw: f64,
}

/// Newmark stepper bound to one reduced system.
pub struct Newmark<'a> {
    sys: &'a ReducedSystem,
    beta: f64,
    gamma: f64,
    tol_rel: f64,
    tol_abs: f64,
    max_iter: usize,
    op: Option<LinearOperator>,
    force_norm: f64,
    // scratch
    resid: DVector<f64>,
    work: DVector<f64>,
    scratch: DVector<f64>,
}

impl<'a> Newmark<'a> {
    pub fn new(sys: &'a ReducedSystem, num: &NumericsConfig) -> Result<Self, IntegrationError> {
        if num.newmark_beta <= 0.0 {
            return Err(IntegrationError::ExplicitBeta);
        }
        let n = sys.dim();
        Ok(Newmark {
            sys,
            beta: num.newmark_beta,
            gamma: num.newmark_gamma,
            tol_rel: num.newton_tol_rel,
            tol_abs: num.newton_tol_abs,
            max_iter: num.newton_max_iter,
            op: None,
            force_norm: sys.force_shape.norm(),
            resid: DVector::zeros(n),
            work: DVector::zeros(n),
            scratch: DVector::zeros(n),
        })
    }

    fn operator(&mut self, dt: f64) -> Result<&LinearOperator, IntegrationError> {
        if self.op.as_ref().is_none_or(|op| op.dt != dt) {
            let sys = self.sys;
            let s = &sys.mass + &sys.damping * (self.gamma * dt) + &sys.stiffness * (self.beta * dt * dt);
            let chol = Cholesky::new(s).ok_or(IntegrationError::SingularEffective(dt))?;
            let w = chol.solve(&sys.end_footprint);
            let sw = sys.end_footprint.dot(&w);
            self.op = Some(LinearOperator { dt, chol, w, sw });
        }
        Ok(self.op.as_ref().unwrap())
    }

    /// Advances `state` in place by `dt`; returns the number of Newton
    /// corrections applied.
    pub fn advance(&mut self, state: &mut State, dt: f64) -> Result<usize, IntegrationError> {
        let (beta, gamma) = (self.beta, self.gamma);
        let bh2 = beta * dt * dt;
        let gh = gamma * dt;
        let t1 = state.t + dt;
        self.operator(dt)?;
        let sys = self.sys;
        let op = self.op.as_ref().unwrap();

        // predictors: q₁ = q̃ + βh² a₁, v₁ = ṽ + γh a₁
        let mut q_pred = state.q.clone();
        q_pred.axpy(dt, &state.v, 1.0);
        q_pred.axpy(dt * dt * (0.5 - beta), &state.a, 1.0);
        let mut v_pred = state.v.clone();
        v_pred.axpy(dt * (1.0 - gamma), &state.a, 1.0);

        // start from q₁ = qₙ
        let mut a1 = (&state.q - &q_pred) / bh2;
        let mut q1 = state.q.clone();
        let mut v1 = v_pred.clone();
        v1.axpy(gh, &a1, 1.0);

        let mut trace = Vec::new();
        let mut iterations = 0;
        loop {
            // R = f(t₁) + f_NL(q₁) − M a₁ − C v₁ − K q₁
            sys.external_force_into(t1, &mut self.resid);
            let u_end = sys.add_nonlinear_force(&q1, &mut self.resid);
            let f_nl = sys.k_cub * u_end.powi(3) * sys.end_footprint.norm();
            self.work.gemv(1.0, &sys.mass, &a1, 0.0);
            let mut scale = self.force_norm + f_nl + self.work.norm();
            self.resid -= &self.work;
            self.work.gemv(1.0, &sys.damping, &v1, 0.0);
            scale += self.work.norm();
            self.resid -= &self.work;
            self.work.gemv(1.0, &sys.stiffness, &q1, 0.0);
            scale += self.work.norm();
            self.resid -= &self.work;

            let r = self.resid.norm();
            trace.push(r);
            if !r.is_finite() {
                return Err(IntegrationError::NonFinite(t1));
            }
            if r <= self.tol_abs + self.tol_rel * scale {
                break;
            }
            if iterations == self.max_iter {
                return Err(IntegrationError::Newton {
                    t: t1,
                    iterations,
                    trace,
                });
            }
            // (S + βh²τ s sᵀ) Δa = R by Sherman-Morrison
            let tau = bh2 * sys.cubic_tangent_coefficient(u_end);
            self.scratch.copy_from(&self.resid);
            op.chol.solve_mut(&mut self.scratch);
            let coef = tau * sys.end_footprint.dot(&self.scratch) / (1.0 + tau * op.sw);
            self.scratch.axpy(-coef, &op.w, 1.0);

            a1 += &self.scratch;
            q1.axpy(bh2, &self.scratch, 1.0);
            v1.axpy(gh, &self.scratch, 1.0);
            iterations += 1;
        }

        state.t = t1;
        state.q = q1;
        state.v = v1;
        state.a = a1;
        Ok(iterations)
    }
}

/// One Newmark step of size `num.dt` from `state`.
pub fn newmark_step(
    state: &State,
    sys: &ReducedSystem,
    num: &NumericsConfig,
) -> Result<State, IntegrationError> {
    let mut stepper = Newmark::new(sys, num)?;
    let mut next = state.clone();
    stepper.advance(&mut next, num.dt)?;
    Ok(next)
}

/// Consistent initial state of `sys` at t = 0.
pub fn initial_state(sys: &ReducedSystem) -> Result<State, IntegrationError> {
    Ok(State {
        t: 0.0,
        q: sys.q0.clone(),
        v: sys.v0.clone(),
        a: initial_acceleration(sys)?,
    })
}

/// Newmark integration over [0, t_final], recording u(L) and u̇(L).
pub fn integrate(
    sys: &ReducedSystem,
    num: &NumericsConfig,
    t_final: f64,
) -> Result<Trajectory, IntegrationError> {
    run_newmark(sys, num, t_final, false)
}

/// As [`integrate`], also keeping the modal coordinates of every step.
pub fn integrate_with_history(
    sys: &ReducedSystem,
    num: &NumericsConfig,
    t_final: f64,
) -> Result<Trajectory, IntegrationError> {
    run_newmark(sys, num, t_final, true)
}

fn run_newmark(
    sys: &ReducedSystem,
    num: &NumericsConfig,
    t_final: f64,
    modal: bool,
) -> Result<Trajectory, IntegrationError> {
    let dt = num.dt;
    let steps = step_count(t_final, dt);
    let mut stepper = Newmark::new(sys, num)?;
    let mut state = initial_state(sys)?;
    let mut out = Trajectory::with_capacity(steps + 1, modal);
    out.record(sys, 0.0, &state.q, &state.v);
    for i in 1..=steps {
        let t_prev = state.t;
        let t_next = grid_time(i, steps, dt, t_final);
        let h = if i == steps { t_next - t_prev } else { dt };
        let iters = stepper.advance(&mut state, h)?;
        state.t = t_next;
        out.max_newton_iterations = out.max_newton_iterations.max(iters);
        out.record(sys, t_next, &state.q, &state.v);
    }
    Ok(out)
}

/// Classical RK4 on the first-order form, recording every step.
pub fn rk4_reference(
    sys: &ReducedSystem,
    dt: f64,
    t_final: f64,
) -> Result<Trajectory, IntegrationError> {
    rk4_reference_strided(sys, dt, t_final, 1)
}

/// Classical RK4 recording every `stride`-th step and the final one.
pub fn rk4_reference_strided(
    sys: &ReducedSystem,
    dt: f64,
    t_final: f64,
    stride: usize,
) -> Result<Trajectory, IntegrationError> {
    let stride = stride.max(1);
    let chol = Cholesky::new(sys.mass.clone()).ok_or(IntegrationError::SingularMass)?;
    let accel = |t: f64, q: &DVector<f64>, v: &DVector<f64>| {
        let mut rhs = balance_rhs(sys, t, q, v);
        chol.solve_mut(&mut rhs);
        rhs
    };
    let steps = step_count(t_final, dt);
    let mut out = Trajectory::with_capacity(steps / stride + 2, false);
    let mut q = sys.q0.clone();
    let mut v = sys.v0.clone();
    let mut t = 0.0;
    out.record(sys, t, &q, &v);
    for i in 1..=steps {
        let t_next = grid_time(i, steps, dt, t_final);
        let h = if i == steps { t_next - t } else { dt };
        let k1q = v.clone();
        let k1v = accel(t, &q, &v);
        let q2 = &q + &k1q * (0.5 * h);
        let v2 = &v + &k1v * (0.5 * h);
        let k2v = accel(t + 0.5 * h, &q2, &v2);
        let q3 = &q + &v2 * (0.5 * h);
        let v3 = &v + &k2v * (0.5 * h);
        let k3v = accel(t + 0.5 * h, &q3, &v3);
        let q4 = &q + &v3 * h;
        let v4 = &v + &k3v * h;
        let k4v = accel(t + h, &q4, &v4);
        q += (k1q + (v2 + v3) * 2.0 + v4) * (h / 6.0);
        v += (k1v + (k2v + k3v) * 2.0 + k4v) * (h / 6.0);
        t = t_next;
        if !q.iter().chain(v.iter()).all(|x| x.is_finite()) {
            return Err(IntegrationError::NonFinite(t));
        }
        if i % stride == 0 || i == steps {
            out.record(sys, t, &q, &v);
        }
    }
    Ok(out)
}

/// ½(vᵀMv + qᵀKq).
pub fn quadratic_energy(sys: &ReducedSystem, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
    0.5 * (v.dot(&(&sys.mass * v)) + q.dot(&(&sys.stiffness * q)))
}
