//! viscowave — a numerical laboratory for the viscoelastic wave equation
//!
//! ```text
//!   u_tt − k(0)Δu − ∫₀^∞ k′(s)Δu(t−s) ds + |u_t|^(m−1)u_t = |u|^(p−1)u
//! ```
//!
//! on a box with homogeneous Dirichlet data, where the relaxation kernel k is
//! a monotone-decreasing Prony series with k(∞) = 1 and the initial datum is
//! a full past history u(x,t) = u₀(x,t) for t ≤ 0.
//!
//! The crate simulates the flow and verifies, at desk scale, everything the
//! model's analysis makes checkable: the energy identity and its dissipation
//! monotonicity, finite-time blow-up under negative total energy and under
//! small positive total energy with large quadratic energy, global existence
//! when the damping exponent dominates the source, and the closed-form
//! constants (potential-well depth, Sobolev ratio, blow-up functional
//! parameters) those statements are built from.
//!
//! Module map:
//!
//! * [`kernel`] — Prony relaxation kernels k, μ = −k′ and their validation.
//! * [`grid`] — box discretization, Laplacian, gradients, norms.
//! * [`memory`] — the hereditary convolution in two interchangeable modes.
//! * [`dynamics`] — time integration with blow-up-aware adaptive stepping.
//! * [`energy`] — per-step energy reports and the identity residual.
//! * [`criteria`] — the blow-up/global-existence constants and hypothesis
//!   checks, including the discrete Sobolev constant.
//! * [`experiment`] — config ingestion, orchestration, persistence, CLI core.
//!
//! Start with the runnable examples (`cargo run --example linear_wave`, …);
//! each demonstrates one capability end to end.

pub mod criteria;
pub mod dynamics;
pub mod energy;
pub mod experiment;
pub mod grid;
pub mod kernel;
pub mod memory;

pub use dynamics::{BlowUpEvent, BlowUpReason, ModelParams, RunOutcome, State, StepControl};
pub use energy::{EnergyReport, Recorder};
pub use grid::{Field, Grid};
pub use kernel::{KernelSpec, PronyMode};
pub use memory::{InitialHistory, MemoryMode, MemoryState, TimeProfile};
