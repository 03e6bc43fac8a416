//! Every energy object the model carries, evaluated per recorded step.
//!
//! ```text
//!   ℰ(t) = ½(‖u_t‖₂² + ‖∇u‖₂² + ∫₀^∞ ‖∇w(t,s)‖₂² μ(s) ds)   quadratic energy
//!   E(t) = ℰ(t) − ‖u‖_{p+1}^{p+1}/(p+1)                      total energy
//!   G(t) = −E(t),  N(t) = ½‖u‖₂²,  N′(t) = ⟨u, u_t⟩
//!   Y(t) = G^{1−α} + ε N′                                    blow-up functional
//! ```
//!
//! The energy identity in total-energy form,
//!
//! ```text
//!   E(t) + ∫₀ᵗ ‖u_t‖_{m+1}^{m+1} dτ − ½∫₀ᵗ∫₀^∞ ‖∇w‖₂² μ′(s) ds dτ = E(0),
//! ```
//!
//! is monitored through `identity_residual`: the two time integrals are
//! accumulated by the running trapezoid rule at recorder cadence (default:
//! every step, so the residual order is the integrator's, not the cadence's).
//! The memory dissipation uses the per-mode identity
//! −½∫ μ′‖∇w‖² = ½ Σᵢ Hᵢ/τᵢ, exact for Prony kernels since μᵢ′ = −μᵢ/τᵢ.
//!
//! Toggled-off terms drop out of the identity exactly as they drop out of the
//! equation: with the source disabled the potential is zero, with damping
//! disabled the damping integral is zero.

use crate::dynamics::ModelParams;
use crate::grid::{inner_grad, inner_l2, lp_power, Field};
use crate::kernel::KernelSpec;
use crate::memory::MemoryState;

/// Per-step record of every monitored quantity.
#[derive(Debug, Clone, Copy)]
pub struct EnergyReport {
    pub t: f64,
    pub kinetic: f64,
    pub elastic: f64,
    pub history: f64,
    pub script_e: f64,
    pub potential: f64,
    pub total_e: f64,
    pub g: f64,
    pub n: f64,
    pub nprime: f64,
    pub damping_cum: f64,
    pub memory_cum: f64,
    pub identity_residual: f64,
    /// G^(1−α) + ε N′ when (α, ε) are supplied and G > 0, NaN otherwise.
    pub y: f64,
    /// Set when the state carried non-finite fields.
    pub post_blowup: bool,
}

/// Fixed CSV column order for energy traces.
pub const CSV_COLUMNS: &str =
    "t,kinetic,elastic,history,scriptE,potential,totalE,G,N,Nprime,damping_cum,memory_cum,identity_residual,Y";

impl EnergyReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.kinetic,
            self.elastic,
            self.history,
            self.script_e,
            self.potential,
            self.total_e,
            self.g,
            self.n,
            self.nprime,
            self.damping_cum,
            self.memory_cum,
            self.identity_residual,
            self.y
        )
    }
}

/// Records energy reports along a run and carries the running trapezoid
/// accumulators for the identity's time integrals.
#[derive(Debug, Clone)]
pub struct Recorder {
    cadence: u64,
    lyapunov: Option<(f64, f64)>,
    rows: Vec<EnergyReport>,
    total_e0: Option<f64>,
    prev_t: f64,
    prev_damping_rate: f64,
    prev_memory_rate: f64,
    damping_cum: f64,
    memory_cum: f64,
}

impl Recorder {
    /// Record every `cadence`-th step (1 = every step).
    pub fn new(cadence: u64) -> Self {
        Recorder {
            cadence: cadence.max(1),
            lyapunov: None,
            rows: Vec::new(),
            total_e0: None,
            prev_t: 0.0,
            prev_damping_rate: 0.0,
            prev_memory_rate: 0.0,
            damping_cum: 0.0,
            memory_cum: 0.0,
        }
    }

    /// Supply (α, ε) so reports carry the blow-up functional Y.
    pub fn with_lyapunov(mut self, alpha: f64, epsilon: f64) -> Self {
        self.lyapunov = Some((alpha, epsilon));
        self
    }

    pub fn cadence(&self) -> u64 {
        self.cadence
    }

    pub fn rows(&self) -> &[EnergyReport] {
        &self.rows
    }

    pub fn first(&self) -> Option<&EnergyReport> {
        self.rows.first()
    }

    pub fn last(&self) -> Option<&EnergyReport> {
        self.rows.last()
    }

    pub fn record(
        &mut self,
        t: f64,
        u: &Field,
        v: &Field,
        memory: &MemoryState,
        params: &ModelParams,
        kernel: &KernelSpec,
    ) {
        if !(u.is_finite() && v.is_finite()) {
            self.rows.push(EnergyReport {
                t,
                kinetic: f64::NAN,
                elastic: f64::NAN,
                history: f64::NAN,
                script_e: f64::NAN,
                potential: f64::NAN,
                total_e: f64::NAN,
                g: f64::NAN,
                n: f64::NAN,
                nprime: f64::NAN,
                damping_cum: self.damping_cum,
                memory_cum: self.memory_cum,
                identity_residual: f64::NAN,
                y: f64::NAN,
                post_blowup: true,
            });
            return;
        }

        let kinetic = 0.5 * inner_l2(v, v);
        let elastic = 0.5 * inner_grad(u, u);
        let per_mode = memory
            .per_mode_energies(kernel, u)
            .expect("memory state consistent with kernel");
        let history = 0.5 * per_mode.iter().sum::<f64>();
        let script_e = kinetic + elastic + history;
        let potential = if params.source_enabled {
            lp_power(u, params.p + 1.0) / (params.p + 1.0)
        } else {
            0.0
        };
        let total_e = script_e - potential;
        let g = -total_e;
        let n = 0.5 * inner_l2(u, u);
        let nprime = inner_l2(u, v);

        let damping_rate = if params.damping_enabled {
            lp_power(v, params.m + 1.0)
        } else {
            0.0
        };
        let memory_rate = 0.5
            * per_mode
                .iter()
                .zip(&kernel.modes)
                .map(|(h, mode)| h / mode.tau)
                .sum::<f64>();

        if self.total_e0.is_none() {
            self.total_e0 = Some(total_e);
            self.prev_t = t;
            self.prev_damping_rate = damping_rate;
            self.prev_memory_rate = memory_rate;
        } else {
            let dt = t - self.prev_t;
            self.damping_cum += 0.5 * dt * (self.prev_damping_rate + damping_rate);
            self.memory_cum += 0.5 * dt * (self.prev_memory_rate + memory_rate);
            self.prev_t = t;
            self.prev_damping_rate = damping_rate;
            self.prev_memory_rate = memory_rate;
        }

        let identity_residual =
            total_e + self.damping_cum + self.memory_cum - self.total_e0.unwrap();
        let y = match self.lyapunov {
            Some((alpha, epsilon)) if g > 0.0 => g.powf(1.0 - alpha) + epsilon * nprime,
            _ => f64::NAN,
        };

        self.rows.push(EnergyReport {
            t,
            kinetic,
            elastic,
            history,
            script_e,
            potential,
            total_e,
            g,
            n,
            nprime,
            damping_cum: self.damping_cum,
            memory_cum: self.memory_cum,
            identity_residual,
            y,
            post_blowup: false,
        });
    }

    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{CSV_COLUMNS}")?;
        for row in &self.rows {
            writeln!(out, "{}", row.csv_row())?;
        }
        Ok(())
    }
}

/// J(u) = ½‖∇u‖₂² − ‖u‖_{p+1}^{p+1}/(p+1).
pub fn potential_functional_j(u: &Field, p: f64) -> f64 {
    0.5 * inner_grad(u, u) - lp_power(u, p + 1.0) / (p + 1.0)
}

/// sup_{λ≥0} J(λu), attained at λ₀ with ‖∇u‖₂² = λ₀^(p−1)‖u‖_{p+1}^{p+1}:
///
/// ```text
///   sup_λ J(λu) = (½ − 1/(p+1)) · (‖∇u‖₂ / ‖u‖_{p+1})^(2(p+1)/(p−1)).
/// ```
///
/// Panics on the zero field, where no maximizing ray exists.
pub fn mountain_pass_sup(u: &Field, p: f64) -> f64 {
    let grad = inner_grad(u, u).sqrt();
    let lp = lp_power(u, p + 1.0).powf(1.0 / (p + 1.0));
    assert!(lp > 0.0, "mountain-pass sup needs a nonzero field");
    (0.5 - 1.0 / (p + 1.0)) * (grad / lp).powf(2.0 * (p + 1.0) / (p - 1.0))
}
