//! Action-angle machinery of the unforced well: energy ↔ action, angle ↔
//! displacement, the orbital frequency, and the averaged forcing coupling.
//!
//! For an energy `E ∈ [0, 1/4)` inside the well, with `μ = √(1 − 4E)` and
//! modulus `k = √((1−μ)/(1+μ))`:
//!
//! * action        `I(E) = (2√2/3π)·√(1+μ)·(E(k) − μK(k))`
//! * frequency     `θ̇(E) = π√(1+μ) / (2√2·K(k))`
//! * displacement  `q(θ,E) = √(1−μ)·sn(2θK/π, k)`
//! * momentum      `p(θ,E) = √((1−μ²)/2)·cn(2θK/π, k)·dn(2θK/π, k)`
//!
//! The angle convention anchors `θ = 0` at `(q = 0, p > 0)`; `θ` grows with
//! time at rate `θ̇(E)`. The separatrix `E = 1/4` is singular; the internal
//! modulus is clamped at `1 − 1e-12` and strict-domain operations accept
//! energies up to `1/4 − 1e-9`.

use crate::elliptic::{
    ellint_f, ellint_k, ellint_k_comp, ellint_k_deriv, jacobi_sn_cn_dn, Modulus,
};
use crate::model::{hamiltonian, PhasePoint};
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use thiserror::Error;

/// Separatrix energy of the unforced well.
pub const XI_SEPARATRIX: f64 = 0.25;
/// Largest energy accepted by operations that are singular at the separatrix.
pub const XI_STRICT_MAX: f64 = XI_SEPARATRIX - 1e-9;
const K_CLAMP: f64 = 1.0 - 1.01e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ActionAngleError {
    #[error("energy E = {0:e} outside the well interior [0, 1/4)")]
    EnergyOutOfWell(f64),
    #[error("state (q={0:e}, p={1:e}) lies on or above the separatrix")]
    StateOutsideWell(f64, f64),
}

/// Derived quantities of a constant-energy orbit, computed once per energy.
#[derive(Debug, Clone, Copy)]
pub struct EnergyShape {
    e: f64,
    mu: f64,
    k: Modulus,
    amplitude: f64,
}

impl EnergyShape {
    /// Accepts `E ∈ [0, 1/4]`; at the separatrix the modulus is clamped.
    pub fn new(e: f64) -> Result<Self, ActionAngleError> {
        if !e.is_finite() || !(0.0..=XI_SEPARATRIX).contains(&e) {
            return Err(ActionAngleError::EnergyOutOfWell(e));
        }
        let mu = (1.0 - 4.0 * e).max(0.0).sqrt();
        let k_raw = ((1.0 - mu) / (1.0 + mu)).sqrt().min(K_CLAMP);
        let k = Modulus::new(k_raw).expect("clamped modulus is always valid");
        Ok(Self {
            e,
            mu,
            k,
            amplitude: (1.0 - mu).sqrt(),
        })
    }

    pub fn energy(&self) -> f64 {
        self.e
    }

    /// `μ = √(1 − 4E)`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn modulus(&self) -> Modulus {
        self.k
    }

    /// Turning-point displacement `√(1 − μ)`.
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
}

fn require_strict(e: f64) -> Result<EnergyShape, ActionAngleError> {
    if !e.is_finite() || !(0.0..=XI_STRICT_MAX).contains(&e) {
        return Err(ActionAngleError::EnergyOutOfWell(e));
    }
    EnergyShape::new(e)
}

/// Action `I(E)`, strictly increasing on `[0, 1/4]` with `I(0) = 0` and
/// `I(1/4) = 2√2/(3π)` (the separatrix loop area over 2π).
pub fn action_of_energy(e: f64) -> Result<f64, ActionAngleError> {
    let shape = EnergyShape::new(e)?;
    let k = shape.k.k();
    let big_e = crate::elliptic::ellint_e(k).expect("validated modulus");
    // μ·K stays finite through μ → 0: μ vanishes faster than K(k) diverges
    let mu_k = if shape.mu == 0.0 {
        0.0
    } else {
        shape.mu * ellint_k(k).expect("validated modulus")
    };
    Ok(2.0 * std::f64::consts::SQRT_2 / (3.0 * PI) * (1.0 + shape.mu).sqrt() * (big_e - mu_k))
}

/// Orbital angular frequency `θ̇(E) = dE/dI`; equals 1 at `E = 0` and
/// decreases monotonically toward 0 at the separatrix.
pub fn angle_frequency(e: f64) -> Result<f64, ActionAngleError> {
    let shape = require_strict(e)?;
    let big_k = ellint_k(shape.k.k()).expect("validated modulus");
    Ok(PI * (1.0 + shape.mu).sqrt() / (2.0 * std::f64::consts::SQRT_2 * big_k))
}

/// Displacement on the unperturbed orbit; odd and `2π`-periodic in `θ`,
/// peaking at the turning point `θ = π/2`.
pub fn q_of_angle(theta: f64, e: f64) -> Result<f64, ActionAngleError> {
    let shape = require_strict(e)?;
    if shape.amplitude == 0.0 {
        return Ok(0.0);
    }
    let big_k = ellint_k(shape.k.k()).expect("validated modulus");
    let u = 2.0 * theta * big_k / PI;
    let (sn, _, _) = jacobi_sn_cn_dn(u, shape.k.k()).expect("validated modulus");
    Ok(shape.amplitude * sn)
}

/// Momentum on the unperturbed orbit, `p(θ,E) = √((1−μ²)/2)·cn·dn`.
pub fn p_of_angle(theta: f64, e: f64) -> Result<f64, ActionAngleError> {
    let shape = require_strict(e)?;
    if shape.amplitude == 0.0 {
        return Ok(0.0);
    }
    let big_k = ellint_k(shape.k.k()).expect("validated modulus");
    let u = 2.0 * theta * big_k / PI;
    let (_, cn, dn) = jacobi_sn_cn_dn(u, shape.k.k()).expect("validated modulus");
    let scale = ((1.0 - shape.mu * shape.mu) / 2.0).sqrt();
    Ok(scale * cn * dn)
}

/// Inverse transform: angle and energy of an in-well phase point.
///
/// The principal-branch formula `θ = (π/2K)·F(asin(q/√(1−μ)), k)` covers one
/// quadrant; the other three follow from the symmetries of `sn`/`cn`:
/// reflect `θ → π − θ` for `p < 0` and shift by `π` for `q < 0`. The
/// degenerate rest state `(0,0)` maps to `θ = 0` by convention.
/// Returns `θ ∈ [0, 2π)` and `E = H₀(q, p)`.
pub fn angle_of_state(pt: &PhasePoint) -> Result<(f64, f64), ActionAngleError> {
    let e = hamiltonian(pt);
    if !(0.0..XI_SEPARATRIX).contains(&e) {
        return Err(ActionAngleError::StateOutsideWell(pt.q, pt.p));
    }
    let shape = EnergyShape::new(e)?;
    if shape.amplitude == 0.0 {
        return Ok((0.0, 0.0));
    }
    if pt.q.abs() > shape.amplitude * (1.0 + 1e-9) {
        // energy says the orbit cannot reach this displacement: outside the well
        return Err(ActionAngleError::StateOutsideWell(pt.q, pt.p));
    }
    if pt.p == 0.0 {
        // exact turning point; the asin route below would lose half the
        // digits to conditioning at the amplitude
        let theta = if pt.q > 0.0 { FRAC_PI_2 } else { 1.5 * PI };
        return Ok((theta, e));
    }
    let big_k = ellint_k(shape.k.k()).expect("validated modulus");
    let ratio = (pt.q.abs() / shape.amplitude).min(1.0);
    let theta_1 = FRAC_PI_2 / big_k * ellint_f(ratio.asin(), shape.k.k()).expect("valid modulus");
    let theta = match (pt.q >= 0.0, pt.p >= 0.0) {
        (true, true) => theta_1,
        (true, false) => PI - theta_1,
        (false, false) => PI + theta_1,
        (false, true) => TAU - theta_1,
    };
    Ok((theta.rem_euclid(TAU), e))
}

/// Coordinates on the resonance-manifold cylinder: slow phase `γ` (cyclic)
/// and averaged energy `ξ ∈ [0, 1/4)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlowState {
    pub gamma: f64,
    pub xi: f64,
}

impl SlowState {
    pub fn new(gamma: f64, xi: f64) -> Result<Self, ActionAngleError> {
        if !xi.is_finite() || !(0.0..XI_SEPARATRIX).contains(&xi) {
            return Err(ActionAngleError::EnergyOutOfWell(xi));
        }
        Ok(Self {
            gamma: gamma.rem_euclid(TAU),
            xi,
        })
    }

    /// The rest state, `ξ = 0`, with `γ` fixed by the `θ = 0` convention.
    pub fn zero_ic(psi: f64) -> Self {
        Self {
            gamma: (-psi).rem_euclid(TAU),
            xi: 0.0,
        }
    }
}

/// Slow coordinates of an in-well initial condition at `τ = 0`:
/// `γ = θ − Ψ (mod 2π)`, `ξ = H₀`.
pub fn slow_coords_of_ic(pt: &PhasePoint, psi: f64) -> Result<SlowState, ActionAngleError> {
    let (theta, e) = angle_of_state(pt)?;
    Ok(SlowState {
        gamma: (theta - psi).rem_euclid(TAU),
        xi: e,
    })
}

/// Averaged forcing coupling `G(ξ) = π√(1+μ)/K · exp(−πK'/(2K))`.
///
/// This is the closed-form (truncated nome series) coupling; `G(0) = 0` and
/// `G > 0` inside the well. See [`coupling_g_fourier`] for the untruncated
/// first-harmonic value.
pub fn coupling_g(xi: f64) -> Result<f64, ActionAngleError> {
    let shape = require_strict(xi)?;
    if xi == 0.0 {
        return Ok(0.0);
    }
    let k = shape.k.k();
    let big_k = ellint_k(k).expect("validated modulus");
    let big_k_comp = ellint_k_comp(k).expect("validated modulus");
    let nome_half = (-FRAC_PI_2 * big_k_comp / big_k).exp();
    Ok(PI * (1.0 + shape.mu).sqrt() / big_k * nome_half)
}

/// First-harmonic forcing coupling computed by direct Fourier quadrature:
/// `(1/2π)∫₀^{2π} q(θ,ξ)·sinθ dθ`, i.e. half the sine-series coefficient of
/// the orbit shape — the quantity that multiplies `cos γ` in the averaged
/// first integral. Agrees with [`coupling_g`] to `O(nome)`.
pub fn coupling_g_fourier(xi: f64) -> Result<f64, ActionAngleError> {
    require_strict(xi)?;
    if xi == 0.0 {
        return Ok(0.0);
    }
    // periodic trapezoid rule converges spectrally here
    const N: usize = 256;
    let mut acc = 0.0;
    for j in 0..N {
        let theta = TAU * j as f64 / N as f64;
        acc += q_of_angle(theta, xi)? * theta.sin();
    }
    Ok(acc / N as f64)
}

/// Analytic derivative `dG/dξ` of the closed-form coupling.
///
/// Uses `d(K'/K)/dk = −π/(2kk'²K²)` (a Legendre-relation identity) for the
/// nome factor, so only `dK/dk` is needed explicitly.
pub fn coupling_g_deriv(xi: f64) -> Result<f64, ActionAngleError> {
    let shape = require_strict(xi)?;
    if xi == 0.0 {
        return Err(ActionAngleError::EnergyOutOfWell(xi));
    }
    let g = coupling_g(xi)?;
    let mu = shape.mu;
    let k = shape.k.k();
    let kc2 = (1.0 - k) * (1.0 + k);
    let big_k = ellint_k(k).expect("validated modulus");
    let dk_dxi = 2.0 / (k * mu * (1.0 + mu) * (1.0 + mu));
    let dbig_k_dk = ellint_k_deriv(k).expect("validated modulus");
    let log_deriv = -1.0 / (mu * (1.0 + mu)) - dbig_k_dk / big_k * dk_dxi
        + PI * PI / (4.0 * k * kc2 * big_k * big_k) * dk_dxi;
    Ok(g * log_deriv)
}
