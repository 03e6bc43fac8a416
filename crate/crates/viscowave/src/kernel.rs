//! Relaxation kernels of Prony type.
//!
//! The memory kernel is a finite sum of decaying exponentials on top of the
//! equilibrium modulus 1:
//!
//! ```text
//!   k(s)  = 1 + Σᵢ aᵢ e^(−s/τᵢ),         aᵢ > 0, τᵢ > 0,
//!   μ(s)  = −k′(s) = Σᵢ (aᵢ/τᵢ) e^(−s/τᵢ) ≥ 0,
//!   μ′(s) = −Σᵢ (aᵢ/τᵢ²) e^(−s/τᵢ)       ≤ 0.
//! ```
//!
//! Every admissibility condition on the kernel (k′ < 0, μ ∈ C¹ ∩ L¹, μ′ ≤ 0,
//! k(∞) = 1) holds by construction for this family, and the hereditary
//! convolution it generates reduces exactly to one auxiliary ODE per mode.
//! An empty mode list is the memoryless limit k ≡ 1.

use std::fmt;

use serde::{Deserialize, Serialize};

/// One Prony mode: amplitude `a` (dimensionless) and relaxation time `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PronyMode {
    pub a: f64,
    pub tau: f64,
}

/// A validated Prony-series relaxation kernel. Immutable after validation;
/// safe to share read-only across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub modes: Vec<PronyMode>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelError {
    NonPositiveAmplitude { index: usize, a: f64 },
    NonPositiveRelaxationTime { index: usize, tau: f64 },
    NonFiniteParameter { index: usize },
    NegativeLag { s: f64 },
}

impl fmt::Display for KernelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelError::NonPositiveAmplitude { index, a } => {
                write!(f, "mode {index}: amplitude must be positive, got {a}")
            }
            KernelError::NonPositiveRelaxationTime { index, tau } => {
                write!(f, "mode {index}: relaxation time must be positive, got {tau}")
            }
            KernelError::NonFiniteParameter { index } => {
                write!(f, "mode {index}: non-finite parameter")
            }
            KernelError::NegativeLag { s } => write!(f, "kernel evaluated at negative lag s = {s}"),
        }
    }
}

impl std::error::Error for KernelError {}

/// Per-condition outcome of checking the admissibility assumptions on the
/// kernel. All conditions are structural for a valid Prony sum; the report
/// exists so a run can show its hypotheses explicitly.
#[derive(Debug, Clone)]
pub struct KernelValidation {
    pub k0: f64,
    pub mu_integral: f64,
    /// k′(s) < 0 for all s > 0 (vacuous for zero modes).
    pub kprime_negative: bool,
    /// μ ∈ C¹(ℝ⁺) ∩ L¹(ℝ⁺) with ∫μ = k(0) − 1.
    pub mu_c1_l1: bool,
    /// μ′(s) ≤ 0 for all s > 0.
    pub mu_prime_nonpositive: bool,
    /// k(s) → 1 as s → ∞.
    pub k_infinity_one: bool,
}

impl KernelSpec {
    pub fn new(modes: Vec<PronyMode>) -> Result<Self, KernelError> {
        let spec = KernelSpec { modes };
        spec.validate()?;
        Ok(spec)
    }

    /// Memoryless kernel, k ≡ 1.
    pub fn memoryless() -> Self {
        KernelSpec { modes: Vec::new() }
    }

    /// Rejects non-positive or non-finite mode parameters; reports k(0), ∫μ
    /// and each admissibility condition on success.
    pub fn validate(&self) -> Result<KernelValidation, KernelError> {
        for (index, mode) in self.modes.iter().enumerate() {
            if !mode.a.is_finite() || !mode.tau.is_finite() {
                return Err(KernelError::NonFiniteParameter { index });
            }
            if mode.a <= 0.0 {
                return Err(KernelError::NonPositiveAmplitude { index, a: mode.a });
            }
            if mode.tau <= 0.0 {
                return Err(KernelError::NonPositiveRelaxationTime { index, tau: mode.tau });
            }
        }
        let nontrivial = !self.modes.is_empty();
        Ok(KernelValidation {
            k0: self.k0(),
            mu_integral: self.k0() - 1.0,
            kprime_negative: nontrivial,
            mu_c1_l1: true,
            mu_prime_nonpositive: true,
            k_infinity_one: true,
        })
    }

    /// k(0) = 1 + Σ aᵢ.
    pub fn k0(&self) -> f64 {
        1.0 + self.modes.iter().map(|m| m.a).sum::<f64>()
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn tau_min(&self) -> Option<f64> {
        self.modes.iter().map(|m| m.tau).fold(None, |acc, t| {
            Some(acc.map_or(t, |a: f64| a.min(t)))
        })
    }

    pub fn tau_max(&self) -> Option<f64> {
        self.modes.iter().map(|m| m.tau).fold(None, |acc, t| {
            Some(acc.map_or(t, |a: f64| a.max(t)))
        })
    }

    fn check_lag(s: f64) -> Result<(), KernelError> {
        if s < 0.0 || !s.is_finite() {
            Err(KernelError::NegativeLag { s })
        } else {
            Ok(())
        }
    }

    /// k(s) = 1 + Σ aᵢ e^(−s/τᵢ).
    pub fn eval_k(&self, s: f64) -> Result<f64, KernelError> {
        Self::check_lag(s)?;
        Ok(1.0 + self.modes.iter().map(|m| m.a * (-s / m.tau).exp()).sum::<f64>())
    }

    /// μ(s) = −k′(s) = Σ (aᵢ/τᵢ) e^(−s/τᵢ).
    pub fn eval_mu(&self, s: f64) -> Result<f64, KernelError> {
        Self::check_lag(s)?;
        Ok(self.modes.iter().map(|m| m.a / m.tau * (-s / m.tau).exp()).sum())
    }

    /// μ′(s) = −Σ (aᵢ/τᵢ²) e^(−s/τᵢ).
    pub fn eval_mu_prime(&self, s: f64) -> Result<f64, KernelError> {
        Self::check_lag(s)?;
        Ok(-self
            .modes
            .iter()
            .map(|m| m.a / (m.tau * m.tau) * (-s / m.tau).exp())
            .sum::<f64>())
    }

    /// ∫ₛ^∞ μ(r) dr = Σ aᵢ e^(−s/τᵢ) = k(s) − 1.
    pub fn tail_mass(&self, s: f64) -> Result<f64, KernelError> {
        Self::check_lag(s)?;
        Ok(self.modes.iter().map(|m| m.a * (-s / m.tau).exp()).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(a: f64, tau: f64) -> KernelSpec {
        KernelSpec::new(vec![PronyMode { a, tau }]).unwrap()
    }

    #[test]
    fn single_mode_closed_forms() {
        let k = single(1.0, 1.0);
        let v = k.validate().unwrap();
        assert_eq!(v.k0, 2.0);
        assert_eq!(v.mu_integral, 1.0);
        assert_eq!(k.eval_k(0.0).unwrap(), 2.0);
        assert_eq!(k.eval_mu(0.0).unwrap(), 1.0);
        assert_eq!(k.eval_mu_prime(0.0).unwrap(), -1.0);
        assert_eq!(k.tail_mass(0.0).unwrap(), 1.0);
    }

    #[test]
    fn memoryless_limit() {
        let k = KernelSpec::memoryless();
        let v = k.validate().unwrap();
        assert_eq!(v.k0, 1.0);
        assert_eq!(v.mu_integral, 0.0);
        assert_eq!(k.eval_k(3.7).unwrap(), 1.0);
        assert_eq!(k.eval_mu(3.7).unwrap(), 0.0);
        assert_eq!(k.tail_mass(0.0).unwrap(), 0.0);
    }

    #[test]
    fn negative_amplitude_rejected() {
        let err = KernelSpec::new(vec![PronyMode { a: -1.0, tau: 1.0 }]).unwrap_err();
        assert!(matches!(err, KernelError::NonPositiveAmplitude { .. }));
        assert!(err.to_string().contains("amplitude must be positive"));
    }

    #[test]
    fn negative_tau_rejected() {
        let err = KernelSpec::new(vec![PronyMode { a: 1.0, tau: 0.0 }]).unwrap_err();
        assert!(matches!(err, KernelError::NonPositiveRelaxationTime { .. }));
    }

    #[test]
    fn two_mode_values_at_zero() {
        let k = KernelSpec::new(vec![
            PronyMode { a: 1.0, tau: 1.0 },
            PronyMode { a: 0.5, tau: 2.0 },
        ])
        .unwrap();
        assert_eq!(k.eval_k(0.0).unwrap(), 2.5);
        assert_eq!(k.eval_mu(0.0).unwrap(), 1.25);
    }

    #[test]
    fn long_lag_decay() {
        let k = single(1.0, 1.0);
        let s = 60.0;
        assert!((k.eval_k(s).unwrap() - 1.0).abs() < 1e-25);
        assert!(k.eval_mu(s).unwrap() < 1e-25);
        assert!(k.tail_mass(s).unwrap() < 1e-25);
    }

    #[test]
    fn negative_lag_rejected() {
        let k = single(1.0, 1.0);
        assert!(k.eval_k(-0.1).is_err());
        assert!(k.eval_mu(-0.1).is_err());
        assert!(k.eval_mu_prime(-0.1).is_err());
        assert!(k.tail_mass(-0.1).is_err());
    }

    proptest! {
        // μ = −k′ against a central difference of k.
        #[test]
        fn mu_matches_numerical_kprime(k in prop::collection::vec((0.05f64..4.0, 0.05f64..5.0), 1..4), s in 0.0f64..10.0) {
            let k = KernelSpec::new(k.into_iter().map(|(a, tau)| PronyMode { a, tau }).collect()).unwrap();
            let step = 1e-5 * k.tau_min().unwrap();
            let s = s.max(step);
            let dk = (k.eval_k(s + step).unwrap() - k.eval_k(s - step).unwrap()) / (2.0 * step);
            let mu = k.eval_mu(s).unwrap();
            prop_assert!((mu + dk).abs() <= 1e-6 * mu.abs().max(1e-12));
        }

        // Tail mass against composite-trapezoid quadrature of μ over [s, s + 40 τ_max].
        #[test]
        fn tail_mass_matches_quadrature(modes in prop::collection::vec((0.05f64..4.0, 0.05f64..5.0), 1..4), s in 0.0f64..5.0) {
            let k = KernelSpec::new(modes.into_iter().map(|(a, tau)| PronyMode { a, tau }).collect()).unwrap();
            let hi = s + 40.0 * k.tau_max().unwrap();
            let n = 400_000usize;
            let h = (hi - s) / n as f64;
            let mut acc = 0.5 * (k.eval_mu(s).unwrap() + k.eval_mu(hi).unwrap());
            for i in 1..n {
                acc += k.eval_mu(s + i as f64 * h).unwrap();
            }
            let quad = acc * h;
            let exact = k.tail_mass(s).unwrap();
            prop_assert!((quad - exact).abs() <= 1e-8 * exact.abs().max(1e-12));
        }

        // μ is nonincreasing.
        #[test]
        fn mu_nonincreasing(modes in prop::collection::vec((0.05f64..4.0, 0.05f64..5.0), 1..4), s1 in 0.0f64..10.0, ds in 0.0f64..10.0) {
            let k = KernelSpec::new(modes.into_iter().map(|(a, tau)| PronyMode { a, tau }).collect()).unwrap();
            prop_assert!(k.eval_mu(s1).unwrap() >= k.eval_mu(s1 + ds).unwrap());
        }
    }
}
