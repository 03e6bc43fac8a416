//! Time integration of the semi-discrete system
//!
//! ```text
//!   u_tt = k(0)Δu + F_mem − |u_t|^(m−1)u_t + |u|^(p−1)u
//! ```
//!
//! with blow-up-aware adaptive stepping.
//!
//! The step is a velocity-Verlet split: the stiffness k(0)Δ, the hereditary
//! force and the source are explicit kicks; the damping is pointwise
//! implicit. Per node the damping solve is the strictly monotone scalar
//! equation
//!
//! ```text
//!   v + (Δt/2)|v|^(m−1)v = r,
//! ```
//!
//! whose unique root lies in [min(0,r), max(0,r)] and is found by bisection
//! with a Newton polish. The solved value is the midpoint velocity of the
//! damping flow across the step: the step drifts with it and completes the
//! velocity as v⁻ = 2w − v⁺, which keeps the update time-symmetric and the
//! discrete energy identity second order in Δt. Explicit damping is unstable
//! for large |v| near blow-up; the implicit midpoint map is nonexpansive for
//! every Δt.
//!
//! When neither damping nor memory is active the equation is Hamiltonian and
//! the stepper composes three Verlet substeps into a fourth-order symmetric
//! scheme, so the quadratic energy of long conservative runs holds to the
//! composition's order rather than Verlet's.
//!
//! Δt is chosen per step as min(cfl·h/√k(0), dt_max, c_amp/(1+max|u|^((p−1)/2))).
//! Blow-up is declared when max|u| or ‖∇u‖₂ crosses its threshold, when Δt
//! would fall below dt_min, or on any non-finite intermediate.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::energy::Recorder;
use crate::grid::{h1_seminorm, inner_grad, laplacian, Field};
use crate::kernel::KernelSpec;
use crate::memory::{InitialHistory, MemoryError, MemoryMode, MemoryState};

/// Source and damping exponents plus their toggles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Source exponent, 1 ≤ p < 6.
    pub p: f64,
    /// Damping exponent, m ≥ 1.
    pub m: f64,
    #[serde(default = "default_true")]
    pub damping_enabled: bool,
    #[serde(default = "default_true")]
    pub source_enabled: bool,
    /// Permit p(m+1)/m ≥ 6 for deliberately out-of-assumption experiments;
    /// such runs are marked in the output.
    #[serde(default)]
    pub allow_out_of_assumption: bool,
}

fn default_true() -> bool {
    true
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.p.is_finite() && self.p >= 1.0 && self.p < 6.0) {
            return Err(DynamicsError::BadSourceExponent(self.p));
        }
        if !(self.m.is_finite() && self.m >= 1.0) {
            return Err(DynamicsError::BadDampingExponent(self.m));
        }
        if !self.exponent_condition() && !self.allow_out_of_assumption {
            return Err(DynamicsError::ExponentCondition { p: self.p, m: self.m });
        }
        Ok(())
    }

    /// p(m+1)/m < 6.
    pub fn exponent_condition(&self) -> bool {
        self.p * (self.m + 1.0) / self.m < 6.0
    }
}

/// Integration scheme selection. `Auto` resolves to the fourth-order
/// conservative composition when damping and memory are both absent, and to
/// the Verlet split otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Auto,
    Verlet,
    Yoshida4,
}

impl Default for Scheme {
    fn default() -> Self {
        Scheme::Auto
    }
}

/// Step-size control and blow-up thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepControl {
    /// CFL fraction in (0, 1] against the wave speed √k(0).
    pub cfl: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    /// Amplitude safety coefficient c_amp: Δt ≤ c_amp/(1+max|u|^((p−1)/2)).
    /// `None` disables the shrinkage (fixed-step studies).
    pub amplitude_safety: Option<f64>,
    /// Blow-up threshold on max|u|.
    pub max_abs_u: f64,
    /// Blow-up threshold on ‖∇u‖₂.
    pub max_h1: f64,
    pub scheme: Scheme,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            cfl: 0.5,
            dt_max: 1e-2,
            dt_min: 1e-12,
            amplitude_safety: Some(0.05),
            max_abs_u: 1e8,
            max_h1: 1e8,
            scheme: Scheme::Auto,
        }
    }
}

impl StepControl {
    pub fn validate(&self, params: &ModelParams, kernel: &KernelSpec) -> Result<(), DynamicsError> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(DynamicsError::BadControl(format!("cfl must be in (0,1], got {}", self.cfl)));
        }
        if !(self.dt_min > 0.0 && self.dt_min < self.dt_max) {
            return Err(DynamicsError::BadControl(format!(
                "need 0 < dt_min < dt_max, got {} and {}",
                self.dt_min, self.dt_max
            )));
        }
        if let Some(c) = self.amplitude_safety {
            if !(c > 0.0) {
                return Err(DynamicsError::BadControl(format!(
                    "amplitude safety coefficient must be positive, got {c}"
                )));
            }
        }
        if self.scheme == Scheme::Yoshida4
            && (params.damping_enabled || kernel.mode_count() > 0)
        {
            return Err(DynamicsError::BadControl(
                "yoshida4 applies only to the conservative core (damping off, no memory)".into(),
            ));
        }
        Ok(())
    }

    fn resolve_scheme(&self, params: &ModelParams, kernel: &KernelSpec) -> Scheme {
        match self.scheme {
            Scheme::Auto => {
                if !params.damping_enabled && kernel.mode_count() == 0 {
                    Scheme::Yoshida4
                } else {
                    Scheme::Verlet
                }
            }
            other => other,
        }
    }
}

/// Full simulation state at a step boundary.
#[derive(Debug, Clone)]
pub struct State {
    pub t: f64,
    pub u: Field,
    pub v: Field,
    pub memory: MemoryState,
    pub step_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowUpReason {
    AmplitudeThreshold,
    GradientThreshold,
    StepCollapse,
    NonFinite,
}

impl fmt::Display for BlowUpReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BlowUpReason::AmplitudeThreshold => "amplitude_threshold",
            BlowUpReason::GradientThreshold => "gradient_threshold",
            BlowUpReason::StepCollapse => "step_collapse",
            BlowUpReason::NonFinite => "non_finite",
        };
        write!(f, "{s}")
    }
}

/// Raised when the run leaves the resolvable regime. All three trigger
/// quantities are recorded regardless of which one fired.
#[derive(Debug, Clone)]
pub struct BlowUpEvent {
    pub t: f64,
    pub step_count: u64,
    pub reason: BlowUpReason,
    pub max_abs_u: f64,
    pub h1_seminorm: f64,
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub enum DynamicsError {
    BadSourceExponent(f64),
    BadDampingExponent(f64),
    ExponentCondition { p: f64, m: f64 },
    BadControl(String),
    Memory(MemoryError),
}

impl fmt::Display for DynamicsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DynamicsError::BadSourceExponent(p) => write!(f, "source exponent must lie in [1,6), got {p}"),
            DynamicsError::BadDampingExponent(m) => write!(f, "damping exponent must be ≥ 1, got {m}"),
            DynamicsError::ExponentCondition { p, m } => write!(
                f,
                "exponent condition p(m+1)/m < 6 violated (p = {p}, m = {m}); set allow_out_of_assumption to override"
            ),
            DynamicsError::BadControl(msg) => write!(f, "step control: {msg}"),
            DynamicsError::Memory(e) => write!(f, "memory: {e}"),
        }
    }
}

impl std::error::Error for DynamicsError {}

impl From<MemoryError> for DynamicsError {
    fn from(e: MemoryError) -> Self {
        DynamicsError::Memory(e)
    }
}

/// Solve v + c|v|^(m−1)v = r for the unique root (c ≥ 0, m ≥ 1).
///
/// The map v ↦ v + c|v|^(m−1)v is strictly monotone and odd, so the root has
/// the sign of r and lies in [min(0,r), max(0,r)]. Bisection narrows the
/// bracket, Newton polishes to 1e−13 relative.
pub fn solve_damping(r: f64, c: f64, m: f64) -> f64 {
    if r == 0.0 || c == 0.0 {
        return if c == 0.0 { r } else { 0.0 };
    }
    if m == 1.0 {
        return r / (1.0 + c);
    }
    let sign = r.signum();
    let rr = r.abs();
    let f = |w: f64| w + c * w.powf(m) - rr;
    let mut lo = 0.0f64;
    let mut hi = rr;
    for _ in 0..48 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut w = 0.5 * (lo + hi);
    for _ in 0..30 {
        let fw = w + c * w.powf(m) - rr;
        let dfw = 1.0 + c * m * w.powf(m - 1.0);
        let delta = fw / dfw;
        let next = (w - delta).clamp(0.0, rr);
        let done = (next - w).abs() <= 1e-13 * w.abs().max(1e-300);
        w = next;
        if done {
            break;
        }
    }
    sign * w
}

fn source_term(u: &Field, p: f64) -> Field {
    u.map(|x| x.abs().powf(p - 1.0) * x)
}

/// Explicit acceleration: k(0)Δu + F_mem (+ source when enabled).
fn acceleration(
    u: &Field,
    memory: &MemoryState,
    params: &ModelParams,
    kernel: &KernelSpec,
    k0: f64,
) -> Result<Field, MemoryError> {
    let mut acc = laplacian(u).scale(k0);
    if kernel.mode_count() > 0 {
        let f_mem = memory.memory_force(kernel, u.grid())?;
        acc.axpy(1.0, &f_mem);
    }
    if params.source_enabled {
        acc.axpy(1.0, &source_term(u, params.p));
    }
    Ok(acc)
}

fn verlet_substep(
    state: &mut State,
    params: &ModelParams,
    kernel: &KernelSpec,
    k0: f64,
    dt: f64,
    with_dissipation: bool,
) -> Result<(), MemoryError> {
    let a0 = acceleration(&state.u, &state.memory, params, kernel, k0)?;
    let mut v_plus = state.v.clone();
    v_plus.axpy(0.5 * dt, &a0);

    let damping = with_dissipation && params.damping_enabled;
    let w = if damping {
        let c = 0.5 * dt;
        v_plus.map(|r| solve_damping(r, c, params.m))
    } else {
        v_plus.clone()
    };

    let mut u_next = state.u.clone();
    u_next.axpy(dt, &w);
    let grad_sq_next = inner_grad(&u_next, &u_next);
    if with_dissipation {
        state.memory.advance(kernel, &u_next, grad_sq_next, dt)?;
    }

    let mut v_next = if damping {
        // v⁻ = 2w − v⁺ completes the implicit-midpoint damping flow
        w.zip(&v_plus, |wi, vp| 2.0 * wi - vp)
    } else {
        w
    };
    state.u = u_next;
    let a1 = acceleration(&state.u, &state.memory, params, kernel, k0)?;
    v_next.axpy(0.5 * dt, &a1);
    state.v = v_next;
    state.t += dt;
    Ok(())
}

// Yoshida composition coefficients: w1, w0, w1 with w0 = −2^(1/3) w1.
fn yoshida_weights() -> (f64, f64) {
    let cbrt2 = 2.0f64.cbrt();
    let w1 = 1.0 / (2.0 - cbrt2);
    let w0 = -cbrt2 * w1;
    (w1, w0)
}

/// Advance one step of size determined by `ctrl`; returns the Δt taken.
pub fn step(
    state: &mut State,
    params: &ModelParams,
    kernel: &KernelSpec,
    ctrl: &StepControl,
) -> Result<f64, BlowUpEvent> {
    step_capped(state, params, kernel, ctrl, f64::INFINITY)
}

/// Like `step`, but never exceeding `dt_cap` (used to land on the horizon).
pub fn step_capped(
    state: &mut State,
    params: &ModelParams,
    kernel: &KernelSpec,
    ctrl: &StepControl,
    dt_cap: f64,
) -> Result<f64, BlowUpEvent> {
    let k0 = kernel.k0();
    let max_abs = state.u.max_abs();
    let mut dt = ctrl.dt_max.min(ctrl.cfl * state.u.grid().min_spacing() / k0.sqrt());
    if let Some(c_amp) = ctrl.amplitude_safety {
        if params.source_enabled && params.p > 1.0 {
            dt = dt.min(c_amp / (1.0 + max_abs.powf(0.5 * (params.p - 1.0))));
        }
    }
    if dt < ctrl.dt_min {
        return Err(BlowUpEvent {
            t: state.t,
            step_count: state.step_count,
            reason: BlowUpReason::StepCollapse,
            max_abs_u: max_abs,
            h1_seminorm: h1_seminorm(&state.u),
            dt,
        });
    }
    dt = dt.min(dt_cap);

    let scheme = ctrl.resolve_scheme(params, kernel);
    let stepped: Result<(), MemoryError> = match scheme {
        Scheme::Verlet | Scheme::Auto => verlet_substep(state, params, kernel, k0, dt, true),
        Scheme::Yoshida4 => {
            let (w1, w0) = yoshida_weights();
            let t0 = state.t;
            let mut inner = || -> Result<(), MemoryError> {
                verlet_substep(state, params, kernel, k0, w1 * dt, false)?;
                verlet_substep(state, params, kernel, k0, w0 * dt, false)?;
                verlet_substep(state, params, kernel, k0, w1 * dt, false)?;
                // memory is empty here; advance once to keep its clock synced
                let grad_sq = inner_grad(&state.u, &state.u);
                let State { u, memory, .. } = state;
                memory.advance(kernel, u, grad_sq, dt)?;
                state.t = t0 + dt;
                Ok(())
            };
            inner()
        }
    };
    if stepped.is_err() {
        return Err(BlowUpEvent {
            t: state.t,
            step_count: state.step_count,
            reason: BlowUpReason::NonFinite,
            max_abs_u: state.u.max_abs(),
            h1_seminorm: f64::NAN,
            dt,
        });
    }
    state.step_count += 1;

    let max_abs = state.u.max_abs();
    let finite = state.u.is_finite() && state.v.is_finite();
    let h1 = if finite { h1_seminorm(&state.u) } else { f64::NAN };
    let reason = if !finite {
        Some(BlowUpReason::NonFinite)
    } else if max_abs > ctrl.max_abs_u {
        Some(BlowUpReason::AmplitudeThreshold)
    } else if h1 > ctrl.max_h1 {
        Some(BlowUpReason::GradientThreshold)
    } else {
        None
    };
    match reason {
        Some(reason) => Err(BlowUpEvent {
            t: state.t,
            step_count: state.step_count,
            reason,
            max_abs_u: max_abs,
            h1_seminorm: h1,
            dt,
        }),
        None => Ok(dt),
    }
}

/// How a run ended.
#[derive(Debug, Clone)]
pub enum RunOutcome {
    Completed,
    BlewUp {
        event: BlowUpEvent,
        /// Last accepted time plus an extrapolation of the amplitude-growth
        /// fit. Diagnostic only.
        t_obs: f64,
        /// Fitted blow-up rate exponent of max|u| against (T_obs − t), when
        /// the fit is usable. Carries no acceptance weight.
        rate_exponent: Option<f64>,
    },
}

impl RunOutcome {
    pub fn blew_up(&self) -> bool {
        matches!(self, RunOutcome::BlewUp { .. })
    }
}

/// Extrapolate the blow-up time from the tail of the amplitude trace:
/// for a power-law divergence, max|u|^(−(p−1)/2) decays linearly to zero.
fn fit_t_obs(trace: &[(f64, f64)], p: f64, t_last: f64) -> (f64, Option<f64>) {
    let tail: Vec<(f64, f64)> = trace
        .iter()
        .rev()
        .take(25)
        .rev()
        .filter(|(_, a)| *a > 0.0)
        .cloned()
        .collect();
    if tail.len() < 4 || p <= 1.0 {
        return (t_last, None);
    }
    let zs: Vec<(f64, f64)> = tail
        .iter()
        .map(|&(t, a)| (t, a.powf(-0.5 * (p - 1.0))))
        .collect();
    let n = zs.len() as f64;
    let sx: f64 = zs.iter().map(|(t, _)| t).sum();
    let sy: f64 = zs.iter().map(|(_, z)| z).sum();
    let sxx: f64 = zs.iter().map(|(t, _)| t * t).sum();
    let sxy: f64 = zs.iter().map(|(t, z)| t * z).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return (t_last, None);
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    if slope >= 0.0 {
        return (t_last, None);
    }
    let window = tail.last().unwrap().0 - tail.first().unwrap().0;
    let t_est = (-intercept / slope).clamp(t_last, t_last + 10.0 * window.max(1e-12));
    if t_est <= t_last {
        return (t_last, None);
    }
    // rate exponent: log max|u| ≈ C − β log(T_obs − t)
    let ls: Vec<(f64, f64)> = tail
        .iter()
        .filter(|&&(t, _)| t_est - t > 0.0)
        .map(|&(t, a)| ((t_est - t).ln(), a.ln()))
        .collect();
    if ls.len() < 4 {
        return (t_est, None);
    }
    let n = ls.len() as f64;
    let sx: f64 = ls.iter().map(|(x, _)| x).sum();
    let sy: f64 = ls.iter().map(|(_, y)| y).sum();
    let sxx: f64 = ls.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = ls.iter().map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return (t_est, None);
    }
    let beta = -(n * sxy - sx * sy) / denom;
    (t_est, Some(beta))
}

/// Integrate from the initial history to the horizon, invoking the recorder
/// at its cadence. Returns the outcome and the final state (the state that
/// tripped the thresholds, for blow-up runs).
pub fn run(
    history: &InitialHistory,
    params: &ModelParams,
    kernel: &KernelSpec,
    ctrl: &StepControl,
    horizon: f64,
    memory_mode: MemoryMode,
    recorder: &mut Recorder,
) -> Result<(RunOutcome, State), DynamicsError> {
    params.validate()?;
    kernel.validate().map_err(|e| DynamicsError::BadControl(e.to_string()))?;
    ctrl.validate(params, kernel)?;

    let mut state = State {
        t: 0.0,
        u: history.u0(),
        v: history.v0(),
        memory: MemoryState::new(memory_mode, kernel, history),
        step_count: 0,
    };
    recorder.record(state.t, &state.u, &state.v, &state.memory, params, kernel);

    let mut trace: Vec<(f64, f64)> = vec![(0.0, state.u.max_abs())];
    let mut last_recorded = 0u64;
    let t_end = horizon * (1.0 - 1e-14) - 1e-300;
    while state.t < t_end {
        let cap = horizon - state.t;
        match step_capped(&mut state, params, kernel, ctrl, cap) {
            Ok(_) => {
                trace.push((state.t, state.u.max_abs()));
                if state.step_count % recorder.cadence() == 0 {
                    recorder.record(state.t, &state.u, &state.v, &state.memory, params, kernel);
                    last_recorded = state.step_count;
                }
            }
            Err(event) => {
                if state.u.is_finite() && state.v.is_finite() {
                    trace.push((state.t, state.u.max_abs()));
                    recorder.record(state.t, &state.u, &state.v, &state.memory, params, kernel);
                }
                let (t_obs, rate_exponent) = fit_t_obs(&trace, params.p, event.t);
                return Ok((RunOutcome::BlewUp { event, t_obs, rate_exponent }, state));
            }
        }
    }
    if last_recorded != state.step_count {
        recorder.record(state.t, &state.u, &state.v, &state.memory, params, kernel);
    }
    Ok((RunOutcome::Completed, state))
}
