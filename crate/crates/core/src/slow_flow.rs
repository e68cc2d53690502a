//! Reduced dynamics on the resonance-manifold cylinder `(γ, ξ)`.
//!
//! Averaging the forced Hamiltonian over the fast phase near the 1:1
//! resonance leaves a one-degree-of-freedom flow with the first integral
//!
//! `C(γ, ξ) = −F·G(ξ)·cos γ − Ω·J(ξ) + ξ`
//!
//! where `J` is the action and `G` the averaged forcing coupling. A level
//! curve that stays below the truncation circle `ξ = ξ_max` is a trapped
//! orbit; escape thresholds in `F` are reached in three ways as `F` grows:
//!
//! * MM  — the initial level curve becomes tangent to the circle at `γ = π`
//!   (or `γ = 0` on the low-frequency side);
//! * SM  — the curve reaches the saddle of `C` and spills past it above
//!   `ξ_max`;
//! * SMM — the saddle sits above `ξ_max`, so the `γ = 0` tangency governs.
//!
//! Because `γ` enters only through `cos γ`, all critical points of `C` sit
//! on the lines `γ ∈ {0, π}`; on each line they are located by a clustered
//! scan plus bisection and Newton polish.

use crate::action_angle::{
    action_of_energy, angle_frequency, coupling_g, coupling_g_deriv, coupling_g_fourier, SlowState,
    XI_STRICT_MAX,
};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SlowFlowError {
    #[error("averaged energy xi = {0:e} outside (0, 1/4) interior")]
    XiOutOfRange(f64),
    #[error("forcing amplitude F = {0:e} must be finite and >= 0")]
    BadAmplitude(f64),
    #[error("forcing frequency Omega = {0:e} must be finite and > 0")]
    BadFrequency(f64),
}

/// Which coupling enters the first integral.
///
/// `ClosedForm` is the truncated-nome expression; `Fourier` substitutes the
/// numerically exact first harmonic (they differ by `O(nome)`, a few percent
/// near the separatrix).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouplingMode {
    #[default]
    ClosedForm,
    Fourier,
}

impl CouplingMode {
    pub fn g(&self, xi: f64) -> f64 {
        if xi <= 0.0 {
            return 0.0;
        }
        match self {
            Self::ClosedForm => coupling_g(xi).expect("xi validated by caller"),
            Self::Fourier => coupling_g_fourier(xi).expect("xi validated by caller"),
        }
    }

    pub fn g_deriv(&self, xi: f64) -> f64 {
        match self {
            Self::ClosedForm => coupling_g_deriv(xi).expect("xi validated by caller"),
            Self::Fourier => {
                let h = 1e-6 * xi.max(0.01);
                let lo = (xi - h).max(1e-12);
                let hi = (xi + h).min(XI_STRICT_MAX);
                (self.g(hi) - self.g(lo)) / (hi - lo)
            }
        }
    }
}

/// Forcing amplitude and frequency of one resonance manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstIntegralContext {
    pub f: f64,
    pub omega: f64,
    pub coupling: CouplingMode,
}

impl FirstIntegralContext {
    pub fn new(f: f64, omega: f64) -> Result<Self, SlowFlowError> {
        Self::with_coupling(f, omega, CouplingMode::default())
    }

    pub fn with_coupling(
        f: f64,
        omega: f64,
        coupling: CouplingMode,
    ) -> Result<Self, SlowFlowError> {
        if !f.is_finite() || f < 0.0 {
            return Err(SlowFlowError::BadAmplitude(f));
        }
        if !omega.is_finite() || omega <= 0.0 {
            return Err(SlowFlowError::BadFrequency(omega));
        }
        Ok(Self { f, omega, coupling })
    }

    /// `C(γ, ξ)` without domain checks; `xi` must lie in `[0, XI_STRICT_MAX]`.
    pub fn c_at(&self, gamma: f64, xi: f64) -> f64 {
        let g = self.coupling.g(xi);
        let j = if xi == 0.0 {
            0.0
        } else {
            action_of_energy(xi).expect("xi validated by caller")
        };
        -self.f * g * gamma.cos() - self.omega * j + xi
    }

    /// `∂C/∂ξ = −F·G'(ξ)·cos γ + 1 − Ω/ω(ξ)`.
    pub fn dc_dxi(&self, gamma: f64, xi: f64) -> f64 {
        let gp = self.coupling.g_deriv(xi);
        let w = angle_frequency(xi).expect("xi validated by caller");
        -self.f * gp * gamma.cos() + 1.0 - self.omega / w
    }

    /// `∂C/∂γ = F·G(ξ)·sin γ`.
    pub fn dc_dgamma(&self, gamma: f64, xi: f64) -> f64 {
        self.f * self.coupling.g(xi) * gamma.sin()
    }
}

/// First integral at a slow state.
pub fn c_value(s: &SlowState, ctx: &FirstIntegralContext) -> Result<f64, SlowFlowError> {
    if !(0.0..XI_STRICT_MAX).contains(&s.xi) {
        return Err(SlowFlowError::XiOutOfRange(s.xi));
    }
    Ok(ctx.c_at(s.gamma, s.xi))
}

/// Hamiltonian slow flow of `C` in the `(γ, ξ)` chart:
/// `(γ̇, ξ̇) = ω(ξ)·(∂C/∂ξ, −∂C/∂γ)`.
///
/// The chart factor `dξ/dJ = ω(ξ)` keeps `C` exactly conserved. Rejects the
/// chart boundaries `ξ ≤ 0` (phase undefined) and `ξ → 1/4` (frequency → 0).
pub fn slow_rhs(s: &SlowState, ctx: &FirstIntegralContext) -> Result<(f64, f64), SlowFlowError> {
    if !(s.xi > 0.0 && s.xi <= XI_STRICT_MAX) {
        return Err(SlowFlowError::XiOutOfRange(s.xi));
    }
    let w = angle_frequency(s.xi).expect("xi in strict domain");
    Ok((
        w * self_dc_dxi(ctx, s.gamma, s.xi),
        -w * ctx.dc_dgamma(s.gamma, s.xi),
    ))
}

fn self_dc_dxi(ctx: &FirstIntegralContext, gamma: f64, xi: f64) -> f64 {
    ctx.dc_dxi(gamma, xi)
}

/// A nondegenerate critical point of `C` on one of the `γ ∈ {0, π}` lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub gamma: f64,
    pub xi: f64,
    pub c_value: f64,
    /// `det H(C) = C_γγ·C_ξξ` (the mixed derivative vanishes on the line).
    pub det_hessian: f64,
}

/// Saddle of the first integral: `∇C = 0`, `det H(C) < 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddlePoint {
    pub gamma_dag: f64,
    pub xi_dag: f64,
    pub c_value: f64,
    pub det_hessian: f64,
}

const XI_SCAN_FLOOR: f64 = 1e-7;
const SCAN_POINTS: usize = 400;

/// Critical points of `C` on the line `γ = 0` or `γ = π`.
///
/// Roots of `h(ξ) = ∂C/∂ξ` are bracketed on a quadratically clustered grid
/// (the coupling derivative diverges like `1/√ξ` at the origin), bisected,
/// then polished by Newton with a finite-difference second derivative.
pub fn critical_points_on_line(ctx: &FirstIntegralContext, gamma_line: f64) -> Vec<CriticalPoint> {
    let h = |xi: f64| ctx.dc_dxi(gamma_line, xi);
    let grid_xi = |j: usize| {
        let t = j as f64 / SCAN_POINTS as f64;
        XI_SCAN_FLOOR + (XI_STRICT_MAX - XI_SCAN_FLOOR) * t * t
    };
    let mut out = Vec::new();
    let mut prev_xi = grid_xi(0);
    let mut prev_h = h(prev_xi);
    for j in 1..=SCAN_POINTS {
        let xi = grid_xi(j);
        let hv = h(xi);
        if prev_h == 0.0 || prev_h.signum() != hv.signum() {
            let mut lo = prev_xi;
            let mut hi = xi;
            let mut h_lo = prev_h;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let hm = h(mid);
                if hm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if hm.signum() == h_lo.signum() {
                    lo = mid;
                    h_lo = hm;
                } else {
                    hi = mid;
                }
            }
            let mut root = 0.5 * (lo + hi);
            // Newton polish with finite-difference curvature
            for _ in 0..50 {
                let fd_h = 1e-7 * root.max(1e-3);
                let lo_x = (root - fd_h).max(XI_SCAN_FLOOR * 0.5);
                let hi_x = (root + fd_h).min(XI_STRICT_MAX);
                let hp = (h(hi_x) - h(lo_x)) / (hi_x - lo_x);
                if hp == 0.0 || !hp.is_finite() {
                    break;
                }
                let step = h(root) / hp;
                let next = (root - step).clamp(XI_SCAN_FLOOR * 0.5, XI_STRICT_MAX);
                let done = (next - root).abs() <= 1e-12;
                root = next;
                if done {
                    break;
                }
            }
            let fd_h = 1e-6 * root.max(1e-3);
            let lo_x = (root - fd_h).max(XI_SCAN_FLOOR * 0.5);
            let hi_x = (root + fd_h).min(XI_STRICT_MAX);
            let c_xixi = (h(hi_x) - h(lo_x)) / (hi_x - lo_x);
            let c_gg = ctx.f * ctx.coupling.g(root) * gamma_line.cos();
            out.push(CriticalPoint {
                gamma: gamma_line,
                xi: root,
                c_value: ctx.c_at(gamma_line, root),
                det_hessian: c_gg * c_xixi,
            });
        }
        prev_xi = xi;
        prev_h = hv;
    }
    out
}

/// The saddle of `C` relevant for escape from low energies: the lowest-ξ
/// critical point with `det H < 0`, searched on both `γ ∈ {0, π}` lines.
///
/// Returns `None` when the forcing has annihilated the resonance saddle or
/// no backbone resonance exists (`F = 0` has no isolated critical points).
pub fn find_saddle(ctx: &FirstIntegralContext) -> Option<SaddlePoint> {
    if ctx.f <= 0.0 {
        return None;
    }
    let mut best: Option<SaddlePoint> = None;
    for gamma_line in [0.0, PI] {
        for cp in critical_points_on_line(ctx, gamma_line) {
            if cp.det_hessian < 0.0 {
                let cand = SaddlePoint {
                    gamma_dag: cp.gamma,
                    xi_dag: cp.xi,
                    c_value: cp.c_value,
                    det_hessian: cp.det_hessian,
                };
                if best.map_or(true, |b| cand.xi_dag < b.xi_dag) {
                    best = Some(cand);
                }
            }
        }
    }
    best
}

/// How the critical level curve first reaches the truncation circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MechanismKind {
    /// Tangency of the initial level curve with `ξ = ξ_max`.
    Mm,
    /// Passage through the saddle of `C`.
    Sm,
    /// `γ = 0` tangency while the saddle sits above `ξ_max`.
    Smm,
}

impl MechanismKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Mm => "MM",
            Self::Sm => "SM",
            Self::Smm => "SMM",
        }
    }
}

/// A maximum-mechanism tangency solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmTangency {
    pub f_cr: f64,
    /// Tangency phase, `0` or `π`.
    pub gamma_star: f64,
}

fn ic_invariants(ic: &SlowState, mode: CouplingMode) -> (f64, f64, f64) {
    let g_ini = mode.g(ic.xi);
    let j_ini = if ic.xi == 0.0 {
        0.0
    } else {
        action_of_energy(ic.xi).expect("ic validated")
    };
    (g_ini, j_ini, ic.gamma.cos())
}

/// Critical force of the maximum mechanism: smallest `F ≥ 0` at which the
/// level curve through `ic` touches the circle `ξ = ξ_max` at `γ* ∈ {0, π}`.
///
/// `C(γ*, ξ_max) = C(γ_ini, ξ_ini)` is linear in `F` on both sides (the
/// initial level also carries the coupling term), so each branch is solved
/// exactly. Returns `None` when neither branch yields `F ≥ 0`.
pub fn fcr_mm(omega: f64, ic: &SlowState, xi_max: f64, mode: CouplingMode) -> Option<MmTangency> {
    if ic.xi > xi_max {
        return None;
    }
    let g_max = mode.g(xi_max.min(XI_STRICT_MAX));
    let j_max = action_of_energy(xi_max.min(XI_STRICT_MAX)).ok()?;
    let (g_ini, j_ini, cos_ini) = ic_invariants(ic, mode);
    let numerator = omega * (j_max - j_ini) - (xi_max - ic.xi);
    let mut best: Option<MmTangency> = None;
    for (sigma, gamma_star) in [(1.0, 0.0), (-1.0, PI)] {
        let denom = g_ini * cos_ini - sigma * g_max;
        if denom.abs() < 1e-15 {
            continue;
        }
        let f = numerator / denom;
        if f >= -1e-15 {
            let f = f.max(0.0);
            if best.map_or(true, |b| f < b.f_cr) {
                best = Some(MmTangency {
                    f_cr: f,
                    gamma_star,
                });
            }
        }
    }
    best
}

/// One point of the saddle-mechanism threshold curve, parameterized by the
/// saddle energy `ξ†`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmCurvePoint {
    pub xi_dag: f64,
    pub gamma_dag: f64,
    pub omega: f64,
    pub f_cr: f64,
    pub det_hessian: f64,
    /// `|∂C/∂ξ|` at the saddle with the solved `(F, Ω)`.
    pub residual_gradient: f64,
    /// `|C(γ†, ξ†) − C(γ_ini, ξ_ini)|` with the solved `(F, Ω)`.
    pub residual_level: f64,
}

/// Saddle-mechanism threshold curve `(Ω(ξ†), F(ξ†))`.
///
/// For each grid energy both saddle conditions are imposed at once:
/// `∂C/∂ξ(γ†, ξ†) = 0` and `C(γ†, ξ†) = C(γ_ini, ξ_ini)`. Both are linear
/// in `(F, Ω)`, so each point is a 2×2 solve; solutions with nonpositive
/// force or frequency, or without `det H < 0`, are skipped and reported.
pub fn fcr_sm_curve(
    xi_dag_grid: &[f64],
    ic: &SlowState,
    xi_max: f64,
    mode: CouplingMode,
) -> (Vec<SmCurvePoint>, Vec<(f64, String)>) {
    let (g_ini, j_ini, cos_ini) = ic_invariants(ic, mode);
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for &xi_dag in xi_dag_grid {
        if !(0.0 < xi_dag && xi_dag < xi_max.min(0.25)) {
            skipped.push((xi_dag, "outside (0, min(xi_max, 1/4))".to_string()));
            continue;
        }
        let g = mode.g(xi_dag);
        let gp = mode.g_deriv(xi_dag);
        let j = action_of_energy(xi_dag).expect("grid validated");
        let w = angle_frequency(xi_dag).expect("grid validated");
        let mut found = false;
        for (sigma, gamma_dag) in [(1.0, 0.0), (-1.0, PI)] {
            // (-σ g')·F − (1/ω)·Ω = −1
            // (g_ini·cosγ_ini − σ g)·F + (j_ini − j)·Ω = ξ_ini − ξ†
            let a11 = -sigma * gp;
            let a12 = -1.0 / w;
            let a21 = g_ini * cos_ini - sigma * g;
            let a22 = j_ini - j;
            let b1 = -1.0;
            let b2 = ic.xi - xi_dag;
            let det = a11 * a22 - a12 * a21;
            if det.abs() < 1e-14 {
                continue;
            }
            let f = (b1 * a22 - a12 * b2) / det;
            let omega = (a11 * b2 - b1 * a21) / det;
            if !(f > 0.0 && omega > 0.0) {
                continue;
            }
            let ctx = FirstIntegralContext {
                f,
                omega,
                coupling: mode,
            };
            // curvature along ξ at the solved point
            let fd_h = 1e-6 * xi_dag.max(1e-3);
            let hi_x = (xi_dag + fd_h).min(XI_STRICT_MAX);
            let lo_x = (xi_dag - fd_h).max(1e-9);
            let c_xixi =
                (ctx.dc_dxi(gamma_dag, hi_x) - ctx.dc_dxi(gamma_dag, lo_x)) / (hi_x - lo_x);
            let det_h = f * g * gamma_dag.cos() * c_xixi;
            if det_h >= 0.0 {
                continue;
            }
            let residual_gradient = ctx.dc_dxi(gamma_dag, xi_dag).abs();
            let residual_level = (ctx.c_at(gamma_dag, xi_dag) - ctx.c_at(ic.gamma, ic.xi)).abs();
            points.push(SmCurvePoint {
                xi_dag,
                gamma_dag,
                omega,
                f_cr: f,
                det_hessian: det_h,
                residual_gradient,
                residual_level,
            });
            found = true;
        }
        if !found {
            skipped.push((xi_dag, "no admissible saddle branch".to_string()));
        }
    }
    (points, skipped)
}

/// Initial level `C(γ_ini, ξ_ini)` as a function of `F` (linear).
fn c0_of_f(f: f64, omega: f64, ic: &SlowState, mode: CouplingMode) -> f64 {
    let (g_ini, j_ini, cos_ini) = ic_invariants(ic, mode);
    -f * g_ini * cos_ini - omega * j_ini + ic.xi
}

/// Saddle blocking state at fixed `(F, Ω)`: `Some(C† − C0)` when a saddle
/// with `ξ_ini < ξ† ≤ ξ_max` exists; positive means the saddle level still
/// shields the initial curve from the region above.
fn saddle_margin(
    f: f64,
    omega: f64,
    ic: &SlowState,
    xi_max: f64,
    mode: CouplingMode,
) -> Option<f64> {
    let ctx = FirstIntegralContext {
        f,
        omega,
        coupling: mode,
    };
    let saddle = find_saddle(&ctx)?;
    if saddle.xi_dag <= ic.xi || saddle.xi_dag > xi_max {
        return None;
    }
    Some(saddle.c_value - c0_of_f(f, omega, ic, mode))
}

/// Saddle-mechanism critical force at fixed `Ω`: the `F` at which the
/// initial level meets the saddle level (or the blocking saddle
/// annihilates). `None` when no saddle blocks at small forcing.
fn fcr_sm_at_omega(
    omega: f64,
    ic: &SlowState,
    xi_max: f64,
    mode: CouplingMode,
    f_probe_hi: f64,
) -> Option<f64> {
    let margin = |f: f64| saddle_margin(f, omega, ic, xi_max, mode);
    let f_lo = 1e-9;
    let m_lo = margin(f_lo)?;
    if m_lo <= 0.0 {
        // the initial level already clears the saddle at infinitesimal force
        return Some(0.0);
    }
    let n = 200;
    let mut prev_f = f_lo;
    for j in 1..=n {
        let f = f_probe_hi * j as f64 / n as f64;
        let still_blocking = matches!(margin(f), Some(m) if m > 0.0);
        if still_blocking {
            prev_f = f;
            continue;
        }
        // bisect the edge where blocking ends (margin root or annihilation)
        let mut lo = prev_f;
        let mut hi = f;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            match margin(mid) {
                Some(m) if m > 0.0 => lo = mid,
                _ => hi = mid,
            }
        }
        return Some(0.5 * (lo + hi));
    }
    None
}

/// One envelope sample: the governing threshold at a forcing frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopePoint {
    pub omega: f64,
    pub f_cr: f64,
    pub mechanism: MechanismKind,
}

/// Threshold at one frequency with the mechanism that attains it.
///
/// Tangency candidates count only when the initial curve is not shielded by
/// a saddle below `ξ_max` at that force; the saddle candidate counts only
/// when the level curve already reaches the circle once the saddle opens.
/// The winner is the smallest admissible force.
pub fn fcr_at_omega(
    omega: f64,
    ic: &SlowState,
    xi_max: f64,
    mode: CouplingMode,
) -> Option<EnvelopePoint> {
    let mm = fcr_mm(omega, ic, xi_max, mode);
    let f_probe_hi = mm.map_or(0.5, |t| (4.0 * t.f_cr).max(0.5));
    let sm = fcr_sm_at_omega(omega, ic, xi_max, mode, f_probe_hi);

    let mut candidates: Vec<(f64, MechanismKind)> = Vec::new();
    if let Some(t) = mm {
        let blocked =
            saddle_margin(t.f_cr.max(1e-12), omega, ic, xi_max, mode).is_some_and(|m| m > 1e-13);
        if !blocked {
            let kind = if t.gamma_star == 0.0 {
                // γ = 0 tangency: check for a saddle beyond the circle
                let ctx = FirstIntegralContext {
                    f: t.f_cr.max(1e-12),
                    omega,
                    coupling: mode,
                };
                match find_saddle(&ctx) {
                    Some(s) if s.xi_dag > xi_max => MechanismKind::Smm,
                    _ => MechanismKind::Mm,
                }
            } else {
                MechanismKind::Mm
            };
            candidates.push((t.f_cr, kind));
        }
    }
    if let Some(f_sm) = sm {
        // admissible only if the level curve reaches the circle at this force
        let c0 = c0_of_f(f_sm, omega, ic, mode);
        let g_max = mode.g(xi_max.min(XI_STRICT_MAX));
        let j_max = action_of_energy(xi_max.min(XI_STRICT_MAX)).expect("xi_max validated");
        let center = xi_max - omega * j_max;
        let reach = c0 >= center - f_sm * g_max - 1e-13 && c0 <= center + f_sm * g_max + 1e-13;
        if reach {
            candidates.push((f_sm, MechanismKind::Sm));
        }
    }
    candidates
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(f_cr, mechanism)| EnvelopePoint {
            omega,
            f_cr,
            mechanism,
        })
}

/// Analytic threshold curve over a frequency grid, evaluated in parallel;
/// frequencies with no positive threshold are omitted.
pub fn fcr_envelope(
    omega_grid: &[f64],
    ic: &SlowState,
    xi_max: f64,
    mode: CouplingMode,
) -> Vec<EnvelopePoint> {
    use rayon::prelude::*;
    omega_grid
        .par_iter()
        .map(|&omega| fcr_at_omega(omega, ic, xi_max, mode))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Mechanism governing the escape threshold at `(Ω, ic, ξ_max)`.
///
/// The forcing amplitude only disambiguates the degenerate `F = 0` case
/// (no escape), which reports `Mm` as the tangency-threshold context.
pub fn classify_mechanism(
    omega: f64,
    ic: &SlowState,
    xi_max: f64,
    f: f64,
    mode: CouplingMode,
) -> MechanismKind {
    if f <= 0.0 {
        return MechanismKind::Mm;
    }
    fcr_at_omega(omega, ic, xi_max, mode).map_or(MechanismKind::Mm, |p| p.mechanism)
}
