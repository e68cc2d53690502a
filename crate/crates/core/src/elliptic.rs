//! Complete and incomplete elliptic integrals and Jacobi elliptic functions.
//!
//! Everything here takes the elliptic MODULUS `k`, never the parameter
//! `m = k²`. Most scientific software (SciPy `ellipk`, Mathematica
//! `EllipticK`) takes `m`; square the modulus before calling those, not these.
//!
//! All routines are AGM-based: the arithmetic–geometric mean for the complete
//! integrals, the tangent-form phase recursion (descending Landen) for the
//! incomplete integral of the first kind, and the descending AGM backward
//! recursion for `sn`, `cn`, `dn`. Convergence is quadratic; the iteration
//! stops at `|aₙ − bₙ| ≤ 1e-16·aₙ` with a hard cap of 64 iterations.

use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

/// Moduli at or above this value are rejected as effectively singular.
///
/// `K(k)` diverges logarithmically at `k = 1`; callers that approach the
/// separatrix own the clamping decision, this kernel just refuses the limit.
pub const MODULUS_GUARD: f64 = 1.0 - 1e-12;

const AGM_REL_TOL: f64 = 1e-16;
const AGM_MAX_ITER: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EllipticError {
    #[error("modulus k = {0:e} outside [0, 1); note this library takes k, not m = k^2")]
    ModulusOutOfRange(f64),
    #[error("modulus k = {0:.17} within 1e-12 of the k = 1 singularity")]
    NearSingular(f64),
    #[error("argument {0:e} is not finite")]
    NonFiniteArgument(f64),
}

/// Validated elliptic modulus, `0 ≤ k < 1 − 1e-12`.
///
/// The complementary modulus is computed as `√((1−k)(1+k))` so that
/// `k² + k'² = 1` holds to machine precision even for `k` near 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Modulus(f64);

impl Modulus {
    pub fn new(k: f64) -> Result<Self, EllipticError> {
        if !k.is_finite() {
            return Err(EllipticError::NonFiniteArgument(k));
        }
        if !(0.0..1.0).contains(&k) {
            return Err(EllipticError::ModulusOutOfRange(k));
        }
        if k >= MODULUS_GUARD {
            return Err(EllipticError::NearSingular(k));
        }
        Ok(Self(k))
    }

    pub fn k(self) -> f64 {
        self.0
    }

    /// Complementary modulus `k' = √(1 − k²)`.
    pub fn complement(self) -> f64 {
        ((1.0 - self.0) * (1.0 + self.0)).sqrt()
    }

    /// Parameter `m = k²` (what SciPy/Mathematica expect).
    pub fn parameter(self) -> f64 {
        self.0 * self.0
    }
}

fn check_modulus(k: f64) -> Result<f64, EllipticError> {
    Modulus::new(k).map(Modulus::k)
}

/// AGM of (1, b0). Returns the common limit and `Σ 2^{n-1} cₙ²` with `c₀` given.
fn agm_with_sum(b0: f64, c0: f64) -> (f64, f64) {
    let mut a = 1.0_f64;
    let mut b = b0;
    let mut sum = 0.5 * c0 * c0;
    let mut w = 0.5;
    for _ in 0..AGM_MAX_ITER {
        if (a - b).abs() <= AGM_REL_TOL * a {
            break;
        }
        let c = 0.5 * (a - b);
        let gm = (a * b).sqrt();
        a = 0.5 * (a + b);
        b = gm;
        w *= 2.0;
        sum += w * c * c;
    }
    (a, sum)
}

fn complement_of(k: f64) -> f64 {
    ((1.0 - k) * (1.0 + k)).sqrt()
}

/// Complete elliptic integral of the first kind `K(k)`.
///
/// `K(k) = ∫₀^{π/2} dφ / √(1 − k² sin²φ)`, strictly increasing in `k`,
/// `K(0) = π/2`. Rejects `k ≥ 1 − 1e-12`.
pub fn ellint_k(k: f64) -> Result<f64, EllipticError> {
    let k = check_modulus(k)?;
    let (agm, _) = agm_with_sum(complement_of(k), k);
    Ok(FRAC_PI_2 / agm)
}

/// Complementary complete integral `K'(k) = K(√(1 − k²))`.
///
/// Evaluated as `π / (2·AGM(1, k))`, which stays accurate when `k'` is close
/// to 1 (small `k`), where forming `k'` first would lose digits.
/// Diverges as `k → 0`; returns `+∞` at `k = 0` exactly.
pub fn ellint_k_comp(k: f64) -> Result<f64, EllipticError> {
    let k = check_modulus(k)?;
    if k == 0.0 {
        return Ok(f64::INFINITY);
    }
    let (agm, _) = agm_with_sum(k, complement_of(k));
    Ok(FRAC_PI_2 / agm)
}

/// Complete elliptic integral of the second kind `E(k)`.
///
/// `E(k) = ∫₀^{π/2} √(1 − k² sin²φ) dφ`, strictly decreasing, `E(0) = π/2`,
/// `E(1) = 1`. Unlike the other routines this accepts the full closed
/// interval `[0, 1]`: `E` is finite at the singular modulus.
pub fn ellint_e(k: f64) -> Result<f64, EllipticError> {
    if !k.is_finite() {
        return Err(EllipticError::NonFiniteArgument(k));
    }
    if !(0.0..=1.0).contains(&k) {
        return Err(EllipticError::ModulusOutOfRange(k));
    }
    if k == 1.0 {
        return Ok(1.0);
    }
    let (agm, sum) = agm_with_sum(complement_of(k), k);
    let big_k = FRAC_PI_2 / agm;
    Ok(big_k * (1.0 - sum))
}

/// Derivative `dK/dk = (E(k) − k'²·K(k)) / (k·k'²)`.
///
/// Near `k = 0` the closed form loses all digits to cancellation, so the
/// series `dK/dk = (π/4)k·(1 + 9k²/8 + ...)` takes over below `k = 1e-4`.
pub fn ellint_k_deriv(k: f64) -> Result<f64, EllipticError> {
    let k = check_modulus(k)?;
    if k < 1e-4 {
        let m = k * k;
        return Ok(FRAC_PI_2 * k * (0.5 + m * (9.0 / 16.0 + m * 75.0 / 128.0)));
    }
    let kc2 = (1.0 - k) * (1.0 + k);
    let e = ellint_e(k)?;
    let big_k = ellint_k(k)?;
    Ok((e - kc2 * big_k) / (k * kc2))
}

/// Incomplete elliptic integral of the first kind `F(φ, k)`.
///
/// Defined for any real `φ` through the quasi-periodic extension
/// `F(φ + π, k) = F(φ, k) + 2K(k)` and oddness in `φ`.
pub fn ellint_f(phi: f64, k: f64) -> Result<f64, EllipticError> {
    let k = check_modulus(k)?;
    if !phi.is_finite() {
        return Err(EllipticError::NonFiniteArgument(phi));
    }
    if k == 0.0 {
        return Ok(phi);
    }
    let big_k = ellint_k(k)?;
    // phi = n·π + r with r in [-π/2, π/2]
    let n = (phi / PI).round();
    let r = phi - n * PI;
    let principal = if r >= 0.0 {
        f_principal(r, k)
    } else {
        -f_principal(-r, k)
    };
    Ok(2.0 * n * big_k + principal)
}

/// `F(φ, k)` for `φ ∈ [0, π/2]` via the AGM phase recursion.
///
/// The tangent is advanced with the addition formula
/// `t ← t(1 + b/a) / (1 − (b/a)t²)` while `mod` counts accumulated
/// half-periods of the doubling phase; `F = (atan t + mod·π) / (2^N a_N)`.
fn f_principal(phi: f64, k: f64) -> f64 {
    debug_assert!((0.0..=FRAC_PI_2 + 1e-12).contains(&phi));
    if phi == 0.0 {
        return 0.0;
    }
    let mut a = 1.0_f64;
    let mut b = complement_of(k);
    let mut t = phi.tan();
    let mut acc = phi;
    let mut half_periods = 0.0_f64;
    let mut doublings = 1.0_f64;
    for _ in 0..AGM_MAX_ITER {
        if (a - b).abs() <= AGM_REL_TOL * a {
            break;
        }
        let ratio = b / a;
        acc += (t * ratio).atan() + half_periods * PI;
        half_periods = ((acc + FRAC_PI_2) / PI).floor();
        let denom = 1.0 - ratio * t * t;
        if denom.abs() > 1e-12 && t.is_finite() {
            t = t * (1.0 + ratio) / denom;
        } else {
            // phase crossed a tangent pole; rebuild t from the tracked phase
            t = (acc - half_periods * PI).tan();
        }
        let gm = (a * b).sqrt();
        a = 0.5 * (a + b);
        b = gm;
        doublings *= 2.0;
    }
    (t.atan() + half_periods * PI) / (doublings * a)
}

/// Jacobi elliptic functions `(sn, cn, dn)(u, k)`, valid for any real `u`.
///
/// `u` is reduced modulo the full period `4K(k)` first, then the descending
/// AGM backward recurrence reconstructs all three values simultaneously.
/// Signs are exact in all four quarter-periods.
pub fn jacobi_sn_cn_dn(u: f64, k: f64) -> Result<(f64, f64, f64), EllipticError> {
    let k = check_modulus(k)?;
    if !u.is_finite() {
        return Err(EllipticError::NonFiniteArgument(u));
    }
    if k == 0.0 {
        return Ok((u.sin(), u.cos(), 1.0));
    }
    let big_k = ellint_k(k)?;
    let period = 4.0 * big_k;
    let ur = u - period * (u / period).round();

    // descending AGM with stored pairs, then backward recurrence
    const DEPTH: usize = AGM_MAX_ITER;
    let mut em = [0.0_f64; DEPTH];
    let mut en = [0.0_f64; DEPTH];
    let mut a = 1.0_f64;
    let mut emc = (1.0 - k) * (1.0 + k); // k'^2
    let mut c = 0.0_f64;
    let mut depth = 0;
    for i in 0..DEPTH {
        depth = i;
        em[i] = a;
        emc = emc.sqrt();
        en[i] = emc;
        c = 0.5 * (a + emc);
        if (a - emc).abs() <= AGM_REL_TOL * a {
            break;
        }
        emc *= a;
        a = c;
    }

    let phase = ur * c;
    let mut sn = phase.sin();
    let mut cn = phase.cos();
    let mut dn = 1.0_f64;
    if sn.abs() > 0.0 {
        let mut ratio = cn / sn;
        c *= ratio;
        for i in (0..=depth).rev() {
            let b = em[i];
            ratio *= c;
            c *= dn;
            dn = (en[i] + ratio) / (b + ratio);
            ratio = c / b;
        }
        let amp = 1.0 / (c * c + 1.0).sqrt();
        sn = if sn >= 0.0 { amp } else { -amp };
        cn = c * sn;
    }
    Ok((sn, cn, dn))
}
