//! The physical system: quartic potential, energy truncation, Hamiltonian,
//! equations of motion, and the two escape criteria.
//!
//! The dimensionless equation of motion is `q̈ + q − q³ = F sin(Ωτ + Ψ)`;
//! the unforced energy is `H₀ = p²/2 + q²/2 − q⁴/4`. Escape is declared when
//! either the running maximum of `|q|` exceeds `q_max` (displacement
//! criterion) or the running maximum of `H₀` exceeds `ξ_max` (energy
//! criterion); comparisons are strict.

use std::f64::consts::TAU;
use thiserror::Error;

/// Energy at the top of the potential barrier (`V(±1) = 1/4`).
pub const BARRIER_ENERGY: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ModelError {
    #[error("truncation energy xi_max = {0:e} outside (0, 1/4]")]
    TruncationOutOfRange(f64),
    #[error("forcing amplitude F = {0:e} must be finite and >= 0")]
    BadAmplitude(f64),
    #[error("forcing frequency Omega = {0:e} must be finite and > 0")]
    BadFrequency(f64),
    #[error("phase Psi = {0:e} must be finite")]
    BadPhase(f64),
}

/// Forcing and truncation parameters; the control-plane coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Forcing amplitude `F ≥ 0`.
    pub f: f64,
    /// Forcing frequency `Ω > 0`.
    pub omega: f64,
    /// Forcing phase `Ψ`, stored reduced to `[0, 2π)`.
    pub psi: f64,
    /// Truncation energy `ξ_max ∈ (0, 1/4]`.
    pub xi_max: f64,
}

impl ModelParams {
    pub fn new(f: f64, omega: f64, psi: f64, xi_max: f64) -> Result<Self, ModelError> {
        if !f.is_finite() || f < 0.0 {
            return Err(ModelError::BadAmplitude(f));
        }
        if !omega.is_finite() || omega <= 0.0 {
            return Err(ModelError::BadFrequency(omega));
        }
        if !psi.is_finite() {
            return Err(ModelError::BadPhase(psi));
        }
        if !xi_max.is_finite() || xi_max <= 0.0 || xi_max > BARRIER_ENERGY {
            return Err(ModelError::TruncationOutOfRange(xi_max));
        }
        Ok(Self {
            f,
            omega,
            psi: psi.rem_euclid(TAU),
            xi_max,
        })
    }

    /// Forcing period `T = 2π/Ω`, one excitation cycle (EC).
    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    /// Maximum displacement matching the truncation energy.
    pub fn q_max(&self) -> f64 {
        q_max_of(self.xi_max).expect("xi_max validated on construction")
    }
}

/// Displacement–momentum pair; the IC-plane coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub q: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(q: f64, p: f64) -> Self {
        Self { q, p }
    }

    /// True iff the point lies strictly inside the truncated well:
    /// `H₀ < ξ_max` and `|q| < q_max`.
    pub fn is_inside_well(&self, xi_max: f64) -> bool {
        let q_max = match q_max_of(xi_max) {
            Ok(v) => v,
            Err(_) => return false,
        };
        hamiltonian(self) < xi_max && self.q.abs() < q_max
    }
}

/// Which running maximum declares escape, and its threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EscapeCriterion {
    /// `max|q(τ)| > q_max`
    Displacement { q_max: f64 },
    /// `max H₀(q(τ), p(τ)) > ξ_max`
    Energy { xi_max: f64 },
}

impl EscapeCriterion {
    pub fn displacement_for(params: &ModelParams) -> Self {
        Self::Displacement {
            q_max: params.q_max(),
        }
    }

    pub fn energy_for(params: &ModelParams) -> Self {
        Self::Energy {
            xi_max: params.xi_max,
        }
    }

    /// The monitored quantity at a phase point.
    pub fn quantity(&self, pt: &PhasePoint) -> f64 {
        match self {
            Self::Displacement { .. } => pt.q.abs(),
            Self::Energy { .. } => hamiltonian(pt),
        }
    }

    pub fn threshold(&self) -> f64 {
        match self {
            Self::Displacement { q_max } => *q_max,
            Self::Energy { xi_max } => *xi_max,
        }
    }

    /// Strict comparison, matching the defining inequalities.
    pub fn fires(&self, pt: &PhasePoint) -> bool {
        self.quantity(pt) > self.threshold()
    }
}

/// Full (untruncated) potential `V(q) = q²/2 − q⁴/4`.
pub fn potential_full(q: f64) -> f64 {
    0.5 * q * q - 0.25 * q * q * q * q
}

/// Truncated potential: `V(q) − ξ_max` inside `|q| < q_max`, zero outside.
///
/// Continuous at the cut since `V(q_max) = ξ_max`.
pub fn potential_truncated(q: f64, xi_max: f64) -> Result<f64, ModelError> {
    let q_max = q_max_of(xi_max)?;
    if xi_max <= 0.0 {
        return Err(ModelError::TruncationOutOfRange(xi_max));
    }
    if q.abs() < q_max {
        Ok(potential_full(q) - xi_max)
    } else {
        Ok(0.0)
    }
}

/// Maximum displacement for a truncation energy: `q_max = √(1 − √(1 − 4ξ))`.
///
/// Monotone increasing on `[0, 1/4]` with `q_max(1/4) = 1`.
pub fn q_max_of(xi_max: f64) -> Result<f64, ModelError> {
    if !xi_max.is_finite() || !(0.0..=BARRIER_ENERGY).contains(&xi_max) {
        return Err(ModelError::TruncationOutOfRange(xi_max));
    }
    Ok((1.0 - (1.0 - 4.0 * xi_max).max(0.0).sqrt()).sqrt())
}

/// Unforced Hamiltonian `H₀(p, q) = p²/2 − q⁴/4 + q²/2`.
pub fn hamiltonian(pt: &PhasePoint) -> f64 {
    0.5 * pt.p * pt.p + potential_full(pt.q)
}

/// Right-hand side of the forced equations of motion:
/// `(q̇, ṗ) = (p, −q + q³ + F sin(Ωτ + Ψ))`.
pub fn eom_rhs(pt: &PhasePoint, tau: f64, params: &ModelParams) -> (f64, f64) {
    let drive = params.f * (params.omega * tau + params.psi).sin();
    (pt.p, -pt.q + pt.q * pt.q * pt.q + drive)
}

/// A time-stamped sampled trajectory.
#[derive(Debug, Clone, Default)]
pub struct SampledTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
}

impl SampledTrajectory {
    pub fn push(&mut self, tau: f64, state: PhasePoint) {
        self.times.push(tau);
        self.states.push(state);
    }
}

/// First sample time at which the criterion's running maximum exceeds its
/// threshold, or `None`. The caller owns sampling density; crossings between
/// samples are invisible here.
pub fn escape_detect(trajectory: &SampledTrajectory, criterion: &EscapeCriterion) -> Option<f64> {
    trajectory
        .times
        .iter()
        .zip(trajectory.states.iter())
        .find(|(_, s)| criterion.fires(s))
        .map(|(t, _)| *t)
}
