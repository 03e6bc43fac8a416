//! The hereditary term and its history energy, in two interchangeable modes.
//!
//! The equation of motion carries the convolution of the whole past
//! displacement against the memory density μ = −k′:
//!
//! ```text
//!   F_mem(t) = −Δ ∫₀^∞ μ(s) u(t−s) ds,
//!   history_energy(t) = ∫₀^∞ ‖∇(u(t) − u(t−s))‖₂² μ(s) ds.
//! ```
//!
//! For a Prony kernel the convolution splits into one auxiliary field per
//! mode, z_i(t) = ∫₀^∞ μ_i(s) u(t−s) ds with μ_i(s) = (aᵢ/τᵢ)e^(−s/τᵢ),
//! which obeys the local ODE  τᵢ ż_i = aᵢ u − z_i  and is advanced by an
//! exact exponential step with the trapezoidal average of u over the step.
//! A scalar companion q_i(t) = ∫₀^∞ μ_i(s) ‖∇u(t−s)‖₂² ds makes the per-mode
//! history energy available without storing the past:
//!
//! ```text
//!   H_i(t) = aᵢ‖∇u(t)‖₂² − 2⟨∇u(t), ∇z_i(t)⟩ + q_i(t) ≥ 0.
//! ```
//!
//! The quadrature variant keeps a ring buffer of past displacement fields and
//! integrates the same quantities by the trapezoid rule, plus a closed-form
//! tail over s ≥ t where the trajectory is the prescribed initial history
//! u₀(x,θ) = φ(x)·g(θ). It is the literal evaluation of the infinite-past
//! integral and exists to cross-check the Prony reduction.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::grid::{inner_grad, laplacian, Field, Grid};
use crate::kernel::KernelSpec;

/// Time profile g(θ) of the initial history u₀(x,θ) = φ(x)g(θ), θ ≤ 0,
/// normalized so g(0) = 1 and bounded on the negative half-line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeProfile {
    /// g ≡ 1.
    Constant,
    /// g(θ) = e^(rate·θ), rate ≥ 0.
    Ramp { rate: f64 },
    /// g(θ) = 1 + beta·sin(omega·θ).
    Oscillatory { beta: f64, omega: f64 },
}

impl TimeProfile {
    pub fn value(&self, theta: f64) -> f64 {
        debug_assert!(theta <= 0.0);
        match *self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Ramp { rate } => (rate * theta).exp(),
            TimeProfile::Oscillatory { beta, omega } => 1.0 + beta * (omega * theta).sin(),
        }
    }

    pub fn derivative_at_zero(&self) -> f64 {
        match *self {
            TimeProfile::Constant => 0.0,
            TimeProfile::Ramp { rate } => rate,
            TimeProfile::Oscillatory { beta, omega } => beta * omega,
        }
    }

    pub fn validate(&self) -> Result<(), MemoryError> {
        match *self {
            TimeProfile::Constant => Ok(()),
            TimeProfile::Ramp { rate } => {
                if rate.is_finite() && rate >= 0.0 {
                    Ok(())
                } else {
                    Err(MemoryError::UnboundedProfile)
                }
            }
            TimeProfile::Oscillatory { beta, omega } => {
                if beta.is_finite() && omega.is_finite() {
                    Ok(())
                } else {
                    Err(MemoryError::UnboundedProfile)
                }
            }
        }
    }

    /// ∫ₜ^∞ μ_i(s) g(t−s)^pow ds in closed form, for one mode with density
    /// μ_i(s) = (a/τ)e^(−s/τ) and pow ∈ {0, 1, 2}.
    pub fn tail_moment(&self, a: f64, tau: f64, t: f64, pow: u8) -> f64 {
        let base = a * (-t / tau).exp();
        if pow == 0 {
            return base;
        }
        match *self {
            TimeProfile::Constant => base,
            TimeProfile::Ramp { rate } => {
                let k = if pow == 1 { rate } else { 2.0 * rate };
                base / (1.0 + k * tau)
            }
            TimeProfile::Oscillatory { beta, omega } => {
                // substitute r = s − t; g(t−s) = 1 − β sin(ωr)
                let wt = omega * tau;
                let sin_int = wt / (1.0 + wt * wt); // (1/τ)∫₀^∞ e^(−r/τ) sin(ωr) dr · τ⁻¹ scaling folded
                if pow == 1 {
                    base * (1.0 - beta * sin_int)
                } else {
                    let cos2_int = 1.0 / (1.0 + 4.0 * wt * wt);
                    base * (1.0 + 0.5 * beta * beta - 2.0 * beta * sin_int
                        - 0.5 * beta * beta * cos2_int)
                }
            }
        }
    }
}

/// Initial history u₀(x,θ) = φ(x)·g(θ) for θ ≤ 0, plus the velocity at θ = 0.
#[derive(Debug, Clone)]
pub struct InitialHistory {
    shape: Field,
    profile: TimeProfile,
    velocity: Option<Field>,
}

impl InitialHistory {
    pub fn new(shape: Field, profile: TimeProfile) -> Result<Self, MemoryError> {
        profile.validate()?;
        if !shape.is_finite() {
            return Err(MemoryError::NonFiniteShape);
        }
        Ok(InitialHistory { shape, profile, velocity: None })
    }

    /// Override the velocity at t = 0 (default is g′(0)·φ).
    pub fn with_velocity(mut self, v0: Field) -> Self {
        self.velocity = Some(v0);
        self
    }

    pub fn shape(&self) -> &Field {
        &self.shape
    }

    pub fn profile(&self) -> TimeProfile {
        self.profile
    }

    /// Displacement at t = 0: φ·g(0) = φ.
    pub fn u0(&self) -> Field {
        self.shape.clone()
    }

    /// Velocity at t = 0: the override if given, else g′(0)·φ.
    pub fn v0(&self) -> Field {
        match &self.velocity {
            Some(v) => v.clone(),
            None => self.shape.scale(self.profile.derivative_at_zero()),
        }
    }

    /// History displacement at θ ≤ 0.
    pub fn at(&self, theta: f64) -> Field {
        self.shape.scale(self.profile.value(theta))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MemoryError {
    ModeCountMismatch { state: usize, kernel: usize },
    NonPositiveDt(f64),
    UnboundedProfile,
    NonFiniteShape,
}

impl fmt::Display for MemoryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MemoryError::ModeCountMismatch { state, kernel } => {
                write!(f, "memory state carries {state} modes, kernel has {kernel}")
            }
            MemoryError::NonPositiveDt(dt) => write!(f, "memory advance needs dt > 0, got {dt}"),
            MemoryError::UnboundedProfile => write!(f, "history profile unbounded on the past"),
            MemoryError::NonFiniteShape => write!(f, "history shape has non-finite entries"),
        }
    }
}

impl std::error::Error for MemoryError {}

/// Which evaluation mode a simulation uses for the hereditary term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryMode {
    Prony,
    Quadrature,
}

#[derive(Debug, Clone)]
pub struct PronyState {
    t: f64,
    z: Vec<Field>,
    q: Vec<f64>,
    u_sync: Field,
    grad_sq_sync: f64,
}

#[derive(Debug, Clone)]
pub struct QuadratureState {
    t: f64,
    /// (time, displacement) samples, ascending in time; the newest sample is
    /// the current displacement.
    samples: VecDeque<(f64, Field)>,
    history: InitialHistory,
    /// Samples older than this lag are dropped; μ(s_max) < 1e−12 μ(0).
    s_max: f64,
    /// Whether the t = 0 sample is still in the buffer, so the analytic tail
    /// over s ≥ t still applies.
    has_origin: bool,
}

#[derive(Debug, Clone)]
pub enum MemoryState {
    Prony(PronyState),
    Quadrature(QuadratureState),
}

impl MemoryState {
    pub fn new(mode: MemoryMode, kernel: &KernelSpec, history: &InitialHistory) -> Self {
        match mode {
            MemoryMode::Prony => Self::new_prony(kernel, history),
            MemoryMode::Quadrature => Self::new_quadrature(kernel, history),
        }
    }

    /// Auxiliary fields initialized from the analytic history:
    /// z_i(0) = φ·∫₀^∞ μ_i g(−s) ds, q_i(0) = ‖∇φ‖²·∫₀^∞ μ_i g(−s)² ds.
    pub fn new_prony(kernel: &KernelSpec, history: &InitialHistory) -> Self {
        let phi = history.shape();
        let grad_sq_phi = inner_grad(phi, phi);
        let mut z = Vec::with_capacity(kernel.mode_count());
        let mut q = Vec::with_capacity(kernel.mode_count());
        for mode in &kernel.modes {
            let t1 = history.profile().tail_moment(mode.a, mode.tau, 0.0, 1);
            let t2 = history.profile().tail_moment(mode.a, mode.tau, 0.0, 2);
            z.push(phi.scale(t1));
            q.push(grad_sq_phi * t2);
        }
        MemoryState::Prony(PronyState {
            t: 0.0,
            z,
            q,
            u_sync: history.u0(),
            grad_sq_sync: grad_sq_phi,
        })
    }

    pub fn new_quadrature(kernel: &KernelSpec, history: &InitialHistory) -> Self {
        // μ(s) ≤ μ(0)·e^(−s/τ_max), so s_max = τ_max·ln(1e12) guarantees the
        // dropped mass is below 1e−12 of μ(0).
        let s_max = kernel.tau_max().map_or(0.0, |t| t * 1e12f64.ln());
        let mut samples = VecDeque::new();
        samples.push_back((0.0, history.u0()));
        MemoryState::Quadrature(QuadratureState {
            t: 0.0,
            samples,
            history: history.clone(),
            s_max,
            has_origin: true,
        })
    }

    pub fn t(&self) -> f64 {
        match self {
            MemoryState::Prony(s) => s.t,
            MemoryState::Quadrature(s) => s.t,
        }
    }

    pub fn mode(&self) -> MemoryMode {
        match self {
            MemoryState::Prony(_) => MemoryMode::Prony,
            MemoryState::Quadrature(_) => MemoryMode::Quadrature,
        }
    }

    fn check_modes(&self, kernel: &KernelSpec) -> Result<(), MemoryError> {
        if let MemoryState::Prony(s) = self {
            if s.z.len() != kernel.mode_count() {
                return Err(MemoryError::ModeCountMismatch {
                    state: s.z.len(),
                    kernel: kernel.mode_count(),
                });
            }
        }
        Ok(())
    }

    /// The convolution field ∫₀^∞ μ(s) u(t−s) ds at the current time.
    pub fn convolution(&self, kernel: &KernelSpec, grid: &Grid) -> Result<Field, MemoryError> {
        self.check_modes(kernel)?;
        match self {
            MemoryState::Prony(s) => {
                let mut acc = grid.zero_field();
                for zi in &s.z {
                    acc.axpy(1.0, zi);
                }
                Ok(acc)
            }
            MemoryState::Quadrature(s) => {
                let mut acc = grid.zero_field();
                for (weight, _, sample) in quad_points(s) {
                    let mu = kernel.eval_mu(weight.1).expect("nonnegative lag");
                    acc.axpy(weight.0 * mu, sample);
                }
                if s.has_origin {
                    let mut tail = 0.0;
                    for mode in &kernel.modes {
                        tail += s.history.profile().tail_moment(mode.a, mode.tau, s.t, 1);
                    }
                    acc.axpy(tail, s.history.shape());
                }
                Ok(acc)
            }
        }
    }

    /// The hereditary force, with the sign convention
    /// u_tt = k(0)Δu + F_mem − damping + source, i.e. F_mem = −Δ(∫ μ u(t−s)).
    pub fn memory_force(&self, kernel: &KernelSpec, grid: &Grid) -> Result<Field, MemoryError> {
        let conv = self.convolution(kernel, grid)?;
        Ok(laplacian(&conv).scale(-1.0))
    }

    /// Per-mode history energies H_i; their sum is
    /// ∫₀^∞ ‖∇(u_now − u(t−s))‖₂² μ(s) ds.
    pub fn per_mode_energies(
        &self,
        kernel: &KernelSpec,
        u_now: &Field,
    ) -> Result<Vec<f64>, MemoryError> {
        self.check_modes(kernel)?;
        match self {
            MemoryState::Prony(s) => {
                let grad_sq_now = inner_grad(u_now, u_now);
                Ok(kernel
                    .modes
                    .iter()
                    .zip(s.z.iter().zip(&s.q))
                    .map(|(mode, (zi, qi))| {
                        mode.a * grad_sq_now - 2.0 * inner_grad(u_now, zi) + qi
                    })
                    .collect())
            }
            MemoryState::Quadrature(s) => {
                let grad_sq_now = inner_grad(u_now, u_now);
                let phi = s.history.shape();
                let grad_now_phi = inner_grad(u_now, phi);
                let grad_sq_phi = inner_grad(phi, phi);
                // per-sample ‖∇(u_now − u_j)‖² shared across modes
                let mut per_sample = Vec::with_capacity(s.samples.len());
                for (weight, _, sample) in quad_points(s) {
                    let diff = u_now.sub(sample);
                    per_sample.push((weight.0, weight.1, inner_grad(&diff, &diff)));
                }
                Ok(kernel
                    .modes
                    .iter()
                    .map(|mode| {
                        let mut h = 0.0;
                        for &(w, lag, grad_sq_diff) in &per_sample {
                            let mu_i = mode.a / mode.tau * (-lag / mode.tau).exp();
                            h += w * mu_i * grad_sq_diff;
                        }
                        if s.has_origin {
                            let prof = s.history.profile();
                            let t0 = prof.tail_moment(mode.a, mode.tau, s.t, 0);
                            let t1 = prof.tail_moment(mode.a, mode.tau, s.t, 1);
                            let t2 = prof.tail_moment(mode.a, mode.tau, s.t, 2);
                            h += t0 * grad_sq_now - 2.0 * t1 * grad_now_phi + t2 * grad_sq_phi;
                        }
                        h
                    })
                    .collect())
            }
        }
    }

    /// Total history energy ∫₀^∞ ‖∇w(t,s)‖₂² μ(s) ds.
    pub fn history_energy(&self, kernel: &KernelSpec, u_now: &Field) -> Result<f64, MemoryError> {
        Ok(self.per_mode_energies(kernel, u_now)?.iter().sum())
    }

    /// Advance the memory from t to t + dt, with `u_new` the accepted
    /// displacement at t + dt and `grad_sq_new` = ‖∇u_new‖₂².
    ///
    /// Prony: exact exponential integration of τ ż = a u − z with the
    /// trapezoidal average ū of u over the step, and likewise for q.
    /// Quadrature: push the new sample, evict lags beyond s_max.
    pub fn advance(
        &mut self,
        kernel: &KernelSpec,
        u_new: &Field,
        grad_sq_new: f64,
        dt: f64,
    ) -> Result<(), MemoryError> {
        if !(dt > 0.0) {
            return Err(MemoryError::NonPositiveDt(dt));
        }
        self.check_modes(kernel)?;
        match self {
            MemoryState::Prony(s) => {
                let u_bar = s.u_sync.add(u_new).scale(0.5);
                let g_bar = 0.5 * (s.grad_sq_sync + grad_sq_new);
                for (mode, (zi, qi)) in kernel.modes.iter().zip(s.z.iter_mut().zip(&mut s.q)) {
                    let decay = (-dt / mode.tau).exp();
                    let gain = mode.a * (1.0 - decay);
                    for (z, &u) in zi.values_mut().iter_mut().zip(u_bar.values()) {
                        *z = decay * *z + gain * u;
                    }
                    *qi = decay * *qi + gain * g_bar;
                }
                s.u_sync = u_new.clone();
                s.grad_sq_sync = grad_sq_new;
                s.t += dt;
            }
            MemoryState::Quadrature(s) => {
                s.t += dt;
                s.samples.push_back((s.t, u_new.clone()));
                while let Some(&(t_old, _)) = s.samples.front() {
                    if s.t - t_old > s.s_max && s.samples.len() > 2 {
                        s.samples.pop_front();
                        if t_old == 0.0 {
                            s.has_origin = false;
                        }
                    } else {
                        break;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Trapezoid weights over the stored samples, yielding
/// ((weight, lag), time, field) per sample with lag s = t − t_j.
fn quad_points(
    s: &QuadratureState,
) -> impl Iterator<Item = ((f64, f64), f64, &Field)> {
    let times: Vec<f64> = s.samples.iter().map(|(t, _)| *t).collect();
    let t_now = s.t;
    let last = times.len() - 1;
    s.samples.iter().enumerate().map(move |(j, (tj, field))| {
        let w = if last == 0 {
            0.0
        } else if j == 0 {
            0.5 * (times[1] - times[0])
        } else if j == last {
            0.5 * (times[last] - times[last - 1])
        } else {
            0.5 * (times[j + 1] - times[j - 1])
        };
        ((w, t_now - tj), *tj, field)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{norm_l2, Grid};
    use crate::kernel::PronyMode;
    use std::f64::consts::PI;

    fn unit_kernel() -> KernelSpec {
        KernelSpec::new(vec![PronyMode { a: 1.0, tau: 1.0 }]).unwrap()
    }

    fn sine(grid: &Grid, amp: f64) -> Field {
        grid.sample(|x| amp * (PI * x[0]).sin())
    }

    #[test]
    fn zero_history_zero_force() {
        let g = Grid::unit_line(31).unwrap();
        let k = unit_kernel();
        let hist = InitialHistory::new(g.zero_field(), TimeProfile::Constant).unwrap();
        for mode in [MemoryMode::Prony, MemoryMode::Quadrature] {
            let state = MemoryState::new(mode, &k, &hist);
            let f = state.memory_force(&k, &g).unwrap();
            assert_eq!(f.max_abs(), 0.0);
            assert_eq!(state.history_energy(&k, &g.zero_field()).unwrap(), 0.0);
        }
    }

    #[test]
    fn constant_history_force_is_minus_a_lap_phi() {
        let g = Grid::unit_line(63).unwrap();
        let a = 0.7;
        let k = KernelSpec::new(vec![PronyMode { a, tau: 2.0 }]).unwrap();
        let phi = sine(&g, 1.0);
        let hist = InitialHistory::new(phi.clone(), TimeProfile::Constant).unwrap();
        let state = MemoryState::new_prony(&k, &hist);
        let f = state.memory_force(&k, &g).unwrap();
        let expect = laplacian(&phi).scale(-a);
        let diff = f.sub(&expect);
        assert!(diff.max_abs() <= 1e-12 * expect.max_abs());
        // w(0, s) ≡ 0 for constant history
        assert!(state.history_energy(&k, &phi).unwrap().abs() < 1e-12);
    }

    #[test]
    fn history_energy_of_zero_past() {
        // u_now = φ over a zero history: w = φ for every s, so Σ Hᵢ = Σ aᵢ‖∇φ‖².
        let g = Grid::unit_line(63).unwrap();
        let a = 0.9;
        let k = KernelSpec::new(vec![PronyMode { a, tau: 0.5 }]).unwrap();
        let hist = InitialHistory::new(g.zero_field(), TimeProfile::Constant).unwrap();
        let phi = sine(&g, 2.0);
        let expect = a * inner_grad(&phi, &phi);
        for mode in [MemoryMode::Prony, MemoryMode::Quadrature] {
            let state = MemoryState::new(mode, &k, &hist);
            let h = state.history_energy(&k, &phi).unwrap();
            assert!((h - expect).abs() <= 1e-12 * expect, "mode {mode:?}: {h} vs {expect}");
        }
    }

    #[test]
    fn prony_pure_decay() {
        // u ≡ 0 forever: z(t) = a e^(−t/τ) φ exactly.
        let g = Grid::unit_line(31).unwrap();
        let k = KernelSpec::new(vec![PronyMode { a: 1.3, tau: 0.7 }]).unwrap();
        let phi = sine(&g, 1.0);
        let hist = InitialHistory::new(phi.clone(), TimeProfile::Constant).unwrap();
        let mut state = MemoryState::new_prony(&k, &hist);
        let zero = g.zero_field();
        // jump to u = 0 after t = 0; the decay factor is exact per step
        let dt = 0.05;
        let steps = 40;
        // replace the sync field so the trapezoid forcing is exactly zero
        if let MemoryState::Prony(s) = &mut state {
            s.u_sync = zero.clone();
            s.grad_sq_sync = 0.0;
        }
        for _ in 0..steps {
            state.advance(&k, &zero, 0.0, dt).unwrap();
        }
        let t = dt * steps as f64;
        let conv = state.convolution(&k, &g).unwrap();
        let expect = phi.scale(1.3 * (-t / 0.7f64).exp());
        assert!(conv.sub(&expect).max_abs() <= 1e-12 * expect.max_abs());
    }

    #[test]
    fn prony_fixed_point_and_single_step() {
        let g = Grid::unit_line(31).unwrap();
        let a = 0.8;
        let tau = 1.4;
        let k = KernelSpec::new(vec![PronyMode { a, tau }]).unwrap();
        let phi = sine(&g, 1.0);
        // start from zero memory, constant forcing u ≡ φ
        let hist = InitialHistory::new(g.zero_field(), TimeProfile::Constant).unwrap();
        let mut state = MemoryState::new_prony(&k, &hist);
        if let MemoryState::Prony(s) = &mut state {
            s.u_sync = phi.clone();
            s.grad_sq_sync = inner_grad(&phi, &phi);
        }
        // one step of size τ: z = a(1 − e^{−1})φ
        state.advance(&k, &phi, inner_grad(&phi, &phi), tau).unwrap();
        let conv = state.convolution(&k, &g).unwrap();
        let expect = phi.scale(a * (1.0 - (-1.0f64).exp()));
        assert!(conv.sub(&expect).max_abs() <= 1e-10 * expect.max_abs());
        // keep forcing: z → aφ
        for _ in 0..400 {
            state.advance(&k, &phi, inner_grad(&phi, &phi), tau).unwrap();
        }
        let conv = state.convolution(&k, &g).unwrap();
        let expect = phi.scale(a);
        assert!(conv.sub(&expect).max_abs() <= 1e-10 * expect.max_abs());
    }

    #[test]
    fn ramp_profile_initialization() {
        // g(θ) = e^(εθ): z(0) = aφ/(1+ετ), q(0) = a‖∇φ‖²/(1+2ετ).
        let g = Grid::unit_line(31).unwrap();
        let (a, tau, rate) = (1.1, 0.9, 0.6);
        let k = KernelSpec::new(vec![PronyMode { a, tau }]).unwrap();
        let phi = sine(&g, 1.5);
        let hist = InitialHistory::new(phi.clone(), TimeProfile::Ramp { rate }).unwrap();
        let state = MemoryState::new_prony(&k, &hist);
        let conv = state.convolution(&k, &g).unwrap();
        let expect = phi.scale(a / (1.0 + rate * tau));
        assert!(conv.sub(&expect).max_abs() <= 1e-12 * expect.max_abs());
        if let MemoryState::Prony(s) = &state {
            let expect_q = a * inner_grad(&phi, &phi) / (1.0 + 2.0 * rate * tau);
            assert!((s.q[0] - expect_q).abs() <= 1e-12 * expect_q);
        }
        // velocity default g′(0)·φ
        let v0 = hist.v0();
        assert!(v0.sub(&phi.scale(rate)).max_abs() < 1e-14);
    }

    #[test]
    fn quadrature_tail_matches_prony_at_t0_oscillatory() {
        let g = Grid::unit_line(31).unwrap();
        let k = KernelSpec::new(vec![
            PronyMode { a: 0.8, tau: 1.0 },
            PronyMode { a: 0.3, tau: 2.5 },
        ])
        .unwrap();
        let phi = sine(&g, 1.0);
        let hist = InitialHistory::new(
            phi.clone(),
            TimeProfile::Oscillatory { beta: 0.4, omega: 2.0 },
        )
        .unwrap();
        let prony = MemoryState::new_prony(&k, &hist);
        let quad = MemoryState::new_quadrature(&k, &hist);
        let cp = prony.convolution(&k, &g).unwrap();
        let cq = quad.convolution(&k, &g).unwrap();
        assert!(cp.sub(&cq).max_abs() <= 1e-12 * cp.max_abs().max(1e-12));
        let u_now = sine(&g, 0.5);
        let hp = prony.history_energy(&k, &u_now).unwrap();
        let hq = quad.history_energy(&k, &u_now).unwrap();
        assert!((hp - hq).abs() <= 1e-12 * hp.abs().max(1e-12));
    }

    /// Analytic convolutions for the driven trajectory u(x,t) = φ(x)·sin t
    /// over zero history and the unit kernel (a, τ) = (1, 1).
    fn conv_exact(t: f64) -> f64 {
        (t.sin() - t.cos() + (-t).exp()) / 2.0
    }

    fn hist_energy_factor_exact(t: f64) -> f64 {
        // ∫₀^∞ μ(s)(sin t − [t−s ≥ 0]·sin(t−s))² ds for μ(s) = e^(−s)
        let z = conv_exact(t);
        let q0 = 0.5 * (1.0 - (-t).exp())
            - ((2.0 * t).cos() + 2.0 * (2.0 * t).sin() - (-t).exp()) / 10.0;
        t.sin() * t.sin() - 2.0 * t.sin() * z + q0
    }

    #[test]
    fn driven_run_matches_analytic_convolution() {
        let g = Grid::unit_line(255).unwrap();
        let k = unit_kernel();
        let phi = sine(&g, 1.0);
        let hist = InitialHistory::new(g.zero_field(), TimeProfile::Constant).unwrap();
        let mut prony = MemoryState::new_prony(&k, &hist);
        let mut quad = MemoryState::new_quadrature(&k, &hist);
        let dt = 1e-3;
        let t_end = 5.0;
        let steps = (t_end / dt).round() as usize;
        for j in 1..=steps {
            let t = j as f64 * dt;
            let u = phi.scale(t.sin());
            let grad_sq = inner_grad(&u, &u);
            prony.advance(&k, &u, grad_sq, dt).unwrap();
            quad.advance(&k, &u, grad_sq, dt).unwrap();
        }
        let t = steps as f64 * dt;
        let u_now = phi.scale(t.sin());

        let exact = phi.scale(conv_exact(t));
        let cp = prony.convolution(&k, &g).unwrap();
        let cq = quad.convolution(&k, &g).unwrap();
        let scale = norm_l2(&exact);
        assert!(norm_l2(&cp.sub(&exact)) <= 1e-3 * scale, "prony vs analytic");
        assert!(norm_l2(&cq.sub(&exact)) <= 1e-3 * scale, "quadrature vs analytic");
        assert!(norm_l2(&cp.sub(&cq)) <= 1e-3 * scale, "prony vs quadrature");

        let h_exact = hist_energy_factor_exact(t) * inner_grad(&phi, &phi);
        let hp = prony.history_energy(&k, &u_now).unwrap();
        let hq = quad.history_energy(&k, &u_now).unwrap();
        assert!((hp - h_exact).abs() <= 1e-3 * h_exact.abs(), "hp {hp} vs {h_exact}");
        assert!((hq - h_exact).abs() <= 1e-3 * h_exact.abs(), "hq {hq} vs {h_exact}");
        assert!((hp - hq).abs() <= 1e-3 * hp.abs().max(1e-12));
    }

    #[test]
    fn history_energy_nonnegative_along_driven_run() {
        let g = Grid::unit_line(63).unwrap();
        let k = KernelSpec::new(vec![
            PronyMode { a: 1.0, tau: 1.0 },
            PronyMode { a: 0.5, tau: 0.3 },
        ])
        .unwrap();
        let phi = sine(&g, 1.0);
        let hist = InitialHistory::new(phi.clone(), TimeProfile::Constant).unwrap();
        let mut state = MemoryState::new_prony(&k, &hist);
        let dt = 0.01;
        for j in 1..=500 {
            let t = j as f64 * dt;
            let u = phi.scale((3.0 * t).cos());
            let grad_sq = inner_grad(&u, &u);
            state.advance(&k, &u, grad_sq, dt).unwrap();
            let scale = grad_sq.max(inner_grad(&phi, &phi));
            for h in state.per_mode_energies(&k, &u).unwrap() {
                assert!(h >= -1e-9 * scale, "H = {h} at t = {t}");
            }
        }
    }

    #[test]
    fn advance_rejects_bad_dt() {
        let g = Grid::unit_line(15).unwrap();
        let k = unit_kernel();
        let hist = InitialHistory::new(g.zero_field(), TimeProfile::Constant).unwrap();
        let mut state = MemoryState::new_prony(&k, &hist);
        let z = g.zero_field();
        assert!(matches!(
            state.advance(&k, &z, 0.0, 0.0),
            Err(MemoryError::NonPositiveDt(_))
        ));
    }

    #[test]
    fn mode_count_mismatch_detected() {
        let g = Grid::unit_line(15).unwrap();
        let k1 = unit_kernel();
        let k2 = KernelSpec::new(vec![
            PronyMode { a: 1.0, tau: 1.0 },
            PronyMode { a: 0.5, tau: 2.0 },
        ])
        .unwrap();
        let hist = InitialHistory::new(g.zero_field(), TimeProfile::Constant).unwrap();
        let state = MemoryState::new_prony(&k1, &hist);
        assert!(matches!(
            state.convolution(&k2, &g),
            Err(MemoryError::ModeCountMismatch { .. })
        ));
    }
}
