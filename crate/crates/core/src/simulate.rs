//! Brute-force verification harness: full-model time integration with escape
//! detection, critical-force bisection, basin rasters, stroboscopic maps and
//! the escape-criteria comparison protocol.
//!
//! The integrator is an adaptive embedded Dormand–Prince 5(4) pair with
//! continuous (dense) output. Escape is monitored at every accepted step and
//! on a dense sample grid of at least 20 points per forcing period; the
//! first threshold crossing is then localized on the dense interpolant.
//! All sweeps parallelize per cell / per initial condition with fixed-index
//! writes, so results are independent of the worker count.

use crate::model::{eom_rhs, EscapeCriterion, ModelParams, PhasePoint};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulateError {
    #[error("step size underflow at tau = {0:e}")]
    StepSizeUnderflow(f64),
    #[error("step budget exhausted after {0} steps")]
    StepBudgetExhausted(usize),
    #[error("bisection bracket invalid: escape(F_lo={f_lo:e}) = {escaped_lo}, escape(F_hi={f_hi:e}) = {escaped_hi}")]
    BracketFailure {
        f_lo: f64,
        f_hi: f64,
        escaped_lo: bool,
        escaped_hi: bool,
    },
}

/// Step-control settings of the embedded 5(4) integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Dense escape-check samples per forcing period (>= 20 by contract).
    pub samples_per_period: usize,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        // tight enough that unforced energy drift over 3000 excitation
        // cycles stays under 1e-9 with a factor-2 margin (measured)
        Self {
            rtol: 5e-13,
            atol: 1e-14,
            samples_per_period: 24,
            max_steps: 100_000_000,
        }
    }
}

impl IntegratorOptions {
    /// Looser profile for statistical counting experiments (escape counts
    /// over large random IC ensembles), where per-trajectory phase accuracy
    /// is irrelevant and the runs are CPU-bound.
    pub fn counting() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            ..Self::default()
        }
    }
}

// Dormand–Prince 5(4) tableau
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// dense-output weights
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

type State = [f64; 2];

#[inline]
fn rhs(t: f64, y: State, params: &ModelParams) -> State {
    let (dq, dp) = eom_rhs(&PhasePoint::new(y[0], y[1]), t, params);
    [dq, dp]
}

/// One accepted step with its dense-output coefficients.
struct DenseStep {
    t0: f64,
    h: f64,
    rcont: [State; 5],
}

impl DenseStep {
    #[inline]
    fn eval(&self, t: f64) -> State {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let mut out = [0.0; 2];
        for i in 0..2 {
            out[i] = self.rcont[0][i]
                + theta
                    * (self.rcont[1][i]
                        + theta1
                            * (self.rcont[2][i]
                                + theta * (self.rcont[3][i] + theta1 * self.rcont[4][i])));
        }
        out
    }
}

/// Adaptive stepper with FSAL reuse and PI-stabilized step control.
struct Dopri5<'a> {
    params: &'a ModelParams,
    opts: IntegratorOptions,
    t: f64,
    y: State,
    k1: State,
    h: f64,
    facold: f64,
    steps: usize,
}

impl<'a> Dopri5<'a> {
    fn new(ic: &PhasePoint, params: &'a ModelParams, opts: IntegratorOptions) -> Self {
        let y = [ic.q, ic.p];
        let k1 = rhs(0.0, y, params);
        Self {
            params,
            opts,
            t: 0.0,
            y,
            k1,
            h: 1e-4,
            facold: 1e-4,
            steps: 0,
        }
    }

    /// Advances past `t_limit` never overshooting it; returns the dense
    /// interpolant of the accepted step.
    fn step_to(&mut self, t_limit: f64) -> Result<DenseStep, SimulateError> {
        const SAFETY: f64 = 0.9;
        const BETA: f64 = 0.04;
        const EXPO: f64 = 0.2 - BETA * 0.75;
        loop {
            self.steps += 1;
            if self.steps > self.opts.max_steps {
                return Err(SimulateError::StepBudgetExhausted(self.steps));
            }
            let mut h = self.h.min(t_limit - self.t);
            if h <= 0.0 {
                h = self.h;
            }
            if h < 1e-13 * self.t.abs().max(1.0) {
                return Err(SimulateError::StepSizeUnderflow(self.t));
            }
            let clipped = h < self.h;
            let (t, y, k1) = (self.t, self.y, self.k1);
            let p = self.params;
            let mut ya = [0.0; 2];
            for i in 0..2 {
                ya[i] = y[i] + h * A21 * k1[i];
            }
            let k2 = rhs(t + C2 * h, ya, p);
            for i in 0..2 {
                ya[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            let k3 = rhs(t + C3 * h, ya, p);
            for i in 0..2 {
                ya[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            let k4 = rhs(t + C4 * h, ya, p);
            for i in 0..2 {
                ya[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            let k5 = rhs(t + C5 * h, ya, p);
            for i in 0..2 {
                ya[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            let k6 = rhs(t + h, ya, p);
            let mut y1 = [0.0; 2];
            for i in 0..2 {
                y1[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            let k7 = rhs(t + h, y1, p);
            let mut err_sq = 0.0;
            for i in 0..2 {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.opts.atol + self.opts.rtol * y[i].abs().max(y1[i].abs());
                err_sq += (e / sc) * (e / sc);
            }
            let err = (err_sq / 2.0).sqrt();

            if err <= 1.0 {
                // accept: build dense output, advance, grow step
                let mut rcont = [[0.0; 2]; 5];
                for i in 0..2 {
                    let ydiff = y1[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    rcont[0][i] = y[i];
                    rcont[1][i] = ydiff;
                    rcont[2][i] = bspl;
                    rcont[3][i] = ydiff - h * k7[i] - bspl;
                    rcont[4][i] = h
                        * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i]);
                }
                let dense = DenseStep { t0: t, h, rcont };
                self.t = t + h;
                self.y = y1;
                self.k1 = k7;
                let fac11 = err.max(1e-30).powf(EXPO);
                let fac = (fac11 / self.facold.powf(BETA) / SAFETY).clamp(0.1, 5.0);
                let h_next = h / fac;
                self.facold = err.max(1e-4);
                if !clipped {
                    self.h = h_next;
                } else {
                    self.h = self.h.max(h_next.min(self.h));
                }
                return Ok(dense);
            }
            // reject: shrink and retry
            let fac11 = err.powf(EXPO);
            self.h = h / (fac11 / SAFETY).min(10.0);
        }
    }
}

/// Integrates the forced system from `ic` for `horizon_ec` excitation cycles
/// and reports the first escape time (in EC), or `None`.
///
/// The escape quantity is checked at `τ = 0`, at every accepted step end,
/// and on the dense sample grid; a detected crossing is bisected on the
/// dense interpolant of its step.
pub fn integrate(
    ic: &PhasePoint,
    params: &ModelParams,
    horizon_ec: f64,
    criterion: &EscapeCriterion,
    opts: &IntegratorOptions,
) -> Result<Option<f64>, SimulateError> {
    let period = params.period();
    if criterion.fires(ic) {
        return Ok(Some(0.0));
    }
    let t_end = horizon_ec * period;
    let dt_sample = period / (opts.samples_per_period.max(20) as f64);
    let mut stepper = Dopri5::new(ic, params, *opts);
    let mut t_checked = 0.0;
    while stepper.t < t_end {
        let dense = stepper.step_to(t_end)?;
        let step_end = dense.t0 + dense.h;
        // dense samples strictly inside, then the step endpoint
        let mut probes: Vec<f64> = Vec::new();
        let mut s = (t_checked / dt_sample).floor() * dt_sample;
        while s <= step_end {
            if s > t_checked && s < step_end {
                probes.push(s);
            }
            s += dt_sample;
        }
        probes.push(step_end);
        let mut below_t = t_checked;
        for &tp in &probes {
            let ys = if tp == step_end {
                stepper.y
            } else {
                dense.eval(tp)
            };
            let pt = PhasePoint::new(ys[0], ys[1]);
            if criterion.fires(&pt) {
                // bisect the first crossing inside (below_t, tp]
                let mut lo = below_t.max(dense.t0);
                let mut hi = tp;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let ym = dense.eval(mid);
                    if criterion.fires(&PhasePoint::new(ym[0], ym[1])) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Ok(Some(0.5 * (lo + hi) / period));
            }
            below_t = tp;
        }
        t_checked = step_end;
    }
    Ok(None)
}

/// Settings for the critical-force bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectSpec {
    pub f_lo: f64,
    pub f_hi: f64,
    /// Terminal bracket width (5e-5 by protocol).
    pub f_tol: f64,
}

impl Default for BisectSpec {
    fn default() -> Self {
        Self {
            f_lo: 0.0,
            f_hi: 0.5,
            f_tol: 5e-5,
        }
    }
}

fn escapes_at(
    f: f64,
    base: &ModelParams,
    ic: &PhasePoint,
    criterion_of: &dyn Fn(&ModelParams) -> EscapeCriterion,
    horizon_ec: f64,
    opts: &IntegratorOptions,
) -> Result<bool, SimulateError> {
    let params = ModelParams::new(f, base.omega, base.psi, base.xi_max).expect("valid sweep point");
    let criterion = criterion_of(&params);
    Ok(integrate(ic, &params, horizon_ec, &criterion, opts)?.is_some())
}

/// Doubles `f_hi` from a hint until the trajectory escapes; `None` when even
/// the cap does not escape.
pub fn find_escape_bracket(
    base: &ModelParams,
    ic: &PhasePoint,
    criterion_of: &dyn Fn(&ModelParams) -> EscapeCriterion,
    horizon_ec: f64,
    opts: &IntegratorOptions,
    f_hint: f64,
    f_cap: f64,
) -> Result<Option<f64>, SimulateError> {
    let mut f_hi = f_hint.max(1e-4);
    for _ in 0..24 {
        if escapes_at(f_hi, base, ic, criterion_of, horizon_ec, opts)? {
            return Ok(Some(f_hi));
        }
        f_hi *= 2.0;
        if f_hi > f_cap {
            return Ok(None);
        }
    }
    Ok(None)
}

/// Critical forcing amplitude by bisection to `|F_hi − F_lo| ≤ f_tol`.
///
/// Requires escape at `f_hi` and none at `f_lo`; fails loudly with the
/// tested endpoints otherwise.
pub fn bisect_fcr(
    base: &ModelParams,
    ic: &PhasePoint,
    criterion_of: &dyn Fn(&ModelParams) -> EscapeCriterion,
    horizon_ec: f64,
    opts: &IntegratorOptions,
    spec: &BisectSpec,
) -> Result<f64, SimulateError> {
    let escaped_lo = escapes_at(spec.f_lo, base, ic, criterion_of, horizon_ec, opts)?;
    let escaped_hi = escapes_at(spec.f_hi, base, ic, criterion_of, horizon_ec, opts)?;
    if escaped_lo || !escaped_hi {
        return Err(SimulateError::BracketFailure {
            f_lo: spec.f_lo,
            f_hi: spec.f_hi,
            escaped_lo,
            escaped_hi,
        });
    }
    let mut lo = spec.f_lo;
    let mut hi = spec.f_hi;
    while hi - lo > spec.f_tol {
        let mid = 0.5 * (lo + hi);
        if escapes_at(mid, base, ic, criterion_of, horizon_ec, opts)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Rectangular IC-plane window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extent {
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl Extent {
    /// The `[-1, 1]²` square used by the basin experiments.
    pub fn unit_square() -> Self {
        Self {
            q_min: -1.0,
            q_max: 1.0,
            p_min: -1.0,
            p_max: 1.0,
        }
    }
}

/// Outcome of one raster cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellOutcome {
    pub escaped: bool,
    pub escape_time_ec: Option<f64>,
}

/// Raster classification of initial conditions.
#[derive(Debug, Clone)]
pub struct BasinGrid {
    pub extent: Extent,
    pub nx: usize,
    pub ny: usize,
    pub criterion: EscapeCriterion,
    pub horizon_ec: f64,
    /// Row-major, `iy * nx + ix`, `ix` along `q`.
    pub cells: Vec<CellOutcome>,
}

impl BasinGrid {
    pub fn ic_at(&self, ix: usize, iy: usize) -> PhasePoint {
        let fx = if self.nx > 1 {
            ix as f64 / (self.nx - 1) as f64
        } else {
            0.5
        };
        let fy = if self.ny > 1 {
            iy as f64 / (self.ny - 1) as f64
        } else {
            0.5
        };
        PhasePoint::new(
            self.extent.q_min + (self.extent.q_max - self.extent.q_min) * fx,
            self.extent.p_min + (self.extent.p_max - self.extent.p_min) * fy,
        )
    }

    pub fn safe_count(&self) -> usize {
        self.cells.iter().filter(|c| !c.escaped).count()
    }

    /// Safe cells at an earlier evaluation horizon.
    pub fn safe_count_at(&self, t_eval_ec: f64) -> usize {
        self.cells
            .iter()
            .filter(|c| match c.escape_time_ec {
                None => true,
                Some(t) => t > t_eval_ec,
            })
            .count()
    }
}

/// Classifies every node of a uniform `nx × ny` grid over `extent`.
///
/// Cells evaluate independently and in parallel; output order is fixed by
/// the cell index, so results do not depend on the worker count.
pub fn grid_scan(
    extent: Extent,
    nx: usize,
    ny: usize,
    params: &ModelParams,
    criterion: &EscapeCriterion,
    horizon_ec: f64,
    opts: &IntegratorOptions,
) -> Result<BasinGrid, SimulateError> {
    assert!(nx >= 2 && ny >= 2, "resolution must be at least 2x2");
    let proto = BasinGrid {
        extent,
        nx,
        ny,
        criterion: *criterion,
        horizon_ec,
        cells: Vec::new(),
    };
    let cells: Result<Vec<CellOutcome>, SimulateError> = (0..nx * ny)
        .into_par_iter()
        .map(|idx| {
            let ic = proto.ic_at(idx % nx, idx / nx);
            let escape = integrate(&ic, params, horizon_ec, criterion, opts)?;
            Ok(CellOutcome {
                escaped: escape.is_some(),
                escape_time_ec: escape,
            })
        })
        .collect();
    Ok(BasinGrid {
        cells: cells?,
        ..proto
    })
}

/// One stroboscopic orbit: states sampled at multiples of the forcing period.
#[derive(Debug, Clone)]
pub struct StrobeOrbit {
    pub ic: PhasePoint,
    /// `(q, p)` at `τ = 0, T, 2T, …`; truncated at escape.
    pub samples: Vec<(f64, f64)>,
    pub escaped: bool,
}

/// Iterates the period map for each initial condition.
///
/// Sampling lands exactly on period multiples (the step is clamped at each
/// target); orbits are truncated once the energy criterion fires.
pub fn strobe_map(
    ics: &[PhasePoint],
    params: &ModelParams,
    n_iters: usize,
    opts: &IntegratorOptions,
) -> Result<Vec<StrobeOrbit>, SimulateError> {
    let period = params.period();
    let criterion = EscapeCriterion::energy_for(params);
    ics.par_iter()
        .map(|ic| {
            let mut samples = vec![(ic.q, ic.p)];
            let mut escaped = criterion.fires(ic);
            if !escaped {
                let mut stepper = Dopri5::new(ic, params, *opts);
                'iters: for n in 1..=n_iters {
                    let t_target = n as f64 * period;
                    while stepper.t < t_target {
                        let dense = stepper.step_to(t_target)?;
                        // escape check at the step end is enough here: the
                        // strobe points matter, exact timing does not
                        let _ = dense;
                        let pt = PhasePoint::new(stepper.y[0], stepper.y[1]);
                        if criterion.fires(&pt) {
                            escaped = true;
                            break 'iters;
                        }
                    }
                    samples.push((stepper.y[0], stepper.y[1]));
                }
            }
            Ok(StrobeOrbit {
                ic: *ic,
                samples,
                escaped,
            })
        })
        .collect()
}

/// One row of the two-criteria comparison table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriteriaRow {
    pub f: f64,
    pub repeat: usize,
    /// Safe count under the displacement criterion.
    pub a_q: usize,
    /// Safe count under the energy criterion.
    pub a_e: usize,
    pub rel_diff: f64,
}

/// Two-pass escape-criteria comparison over random initial conditions.
///
/// For each forcing amplitude and repeat, `n_ics` points are drawn uniformly
/// from `[-1,1]²` with a per-run seed. Pass one integrates everything under
/// the energy criterion; pass two re-integrates only the energy-escaped
/// points under the displacement criterion. The displacement-safe set is
/// the union, so the energy-safe set is contained in it by construction.
pub fn criteria_compare(
    base: &ModelParams,
    f_list: &[f64],
    n_ics: usize,
    n_repeats: usize,
    seed: u64,
    horizon_ec: f64,
    opts: &IntegratorOptions,
) -> Result<Vec<CriteriaRow>, SimulateError> {
    let mut rows = Vec::new();
    for (fi, &f) in f_list.iter().enumerate() {
        let params = ModelParams::new(f, base.omega, base.psi, base.xi_max).expect("sweep point");
        let energy = EscapeCriterion::energy_for(&params);
        let displacement = EscapeCriterion::displacement_for(&params);
        for repeat in 0..n_repeats {
            let run_seed = seed
                ^ (fi as u64).wrapping_mul(0x9E3779B97F4A7C15)
                ^ (repeat as u64).wrapping_mul(0xD1B54A32D192ED03);
            let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
            let ics: Vec<PhasePoint> = (0..n_ics)
                .map(|_| {
                    PhasePoint::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
                })
                .collect();
            let energy_escaped: Result<Vec<bool>, SimulateError> = ics
                .par_iter()
                .map(|ic| Ok(integrate(ic, &params, horizon_ec, &energy, opts)?.is_some()))
                .collect();
            let energy_escaped = energy_escaped?;
            let a_e = energy_escaped.iter().filter(|&&e| !e).count();
            let rescued: Result<Vec<bool>, SimulateError> = ics
                .par_iter()
                .zip(energy_escaped.par_iter())
                .map(|(ic, &esc)| {
                    if !esc {
                        return Ok(false);
                    }
                    Ok(integrate(ic, &params, horizon_ec, &displacement, opts)?.is_none())
                })
                .collect();
            let a_q = a_e + rescued?.iter().filter(|&&r| r).count();
            rows.push(CriteriaRow {
                f,
                repeat,
                a_q,
                a_e,
                rel_diff: (a_q as f64 - a_e as f64) / a_e as f64,
            });
        }
    }
    Ok(rows)
}

/// Safe-pixel counts at increasing evaluation horizons (one grid scan at the
/// final horizon, counted per checkpoint). Non-increasing by construction.
pub fn area_vs_time(
    extent: Extent,
    nx: usize,
    ny: usize,
    params: &ModelParams,
    criterion: &EscapeCriterion,
    checkpoints_ec: &[f64],
    opts: &IntegratorOptions,
) -> Result<Vec<(f64, usize)>, SimulateError> {
    assert!(
        checkpoints_ec.windows(2).all(|w| w[0] < w[1]),
        "checkpoints must increase"
    );
    let horizon = *checkpoints_ec.last().expect("at least one checkpoint");
    let grid = grid_scan(extent, nx, ny, params, criterion, horizon, opts)?;
    Ok(checkpoints_ec
        .iter()
        .map(|&t| (t, grid.safe_count_at(t)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::hamiltonian;
    use std::f64::consts::PI;

    fn quick_opts() -> IntegratorOptions {
        IntegratorOptions::default()
    }

    #[test]
    fn free_motion_conserves_energy_over_full_horizon() {
        // integrator quality gate: |ΔH0| over 3000 EC of unforced motion
        let params = ModelParams::new(0.0, 0.9, 0.0, 0.25).unwrap();
        let ic = PhasePoint::new(0.55, 0.1);
        let h0 = hamiltonian(&ic);
        let period = params.period();
        let t_end = 3000.0 * period;
        let mut stepper = Dopri5::new(&ic, &params, quick_opts());
        while stepper.t < t_end {
            stepper.step_to(t_end).unwrap();
        }
        let h1 = hamiltonian(&PhasePoint::new(stepper.y[0], stepper.y[1]));
        assert!(
            (h1 - h0).abs() <= 1e-9,
            "energy drift {:e} over 3000 EC",
            (h1 - h0).abs()
        );
    }

    #[test]
    fn dense_output_matches_step_solution() {
        let params = ModelParams::new(0.05, 0.9, PI, 0.22).unwrap();
        let ic = PhasePoint::new(0.3, -0.2);
        let mut stepper = Dopri5::new(&ic, &params, quick_opts());
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let dense = stepper.step_to(1e9).unwrap();
            // interpolant endpoints agree with the accepted states
            let y_start = dense.eval(dense.t0);
            let y_end = dense.eval(dense.t0 + dense.h);
            worst = worst.max((y_end[0] - stepper.y[0]).abs() + (y_end[1] - stepper.y[1]).abs());
            worst = worst.max((y_start[0] - dense.rcont[0][0]).abs());
        }
        assert!(worst <= 1e-12, "dense endpoint mismatch {worst:e}");
    }

    #[test]
    fn no_escape_without_forcing_and_immediate_escape_above_threshold() {
        let params = ModelParams::new(0.0, 1.0, 0.0, 0.2).unwrap();
        let criterion = EscapeCriterion::energy_for(&params);
        let inside = PhasePoint::new(0.2, 0.0);
        let out = integrate(&inside, &params, 200.0, &criterion, &quick_opts()).unwrap();
        assert_eq!(out, None);

        let hot = PhasePoint::new(0.0, 0.7); // H0 = 0.245 > 0.2
        let out = integrate(&hot, &params, 10.0, &criterion, &quick_opts()).unwrap();
        assert_eq!(out, Some(0.0));
    }

    #[test]
    fn escape_time_is_first_crossing() {
        // forced resonant growth from rest escapes; the reported time must
        // be the first crossing of the threshold, verified by re-sampling
        let params = ModelParams::new(0.08, 0.95, PI, 0.2).unwrap();
        let criterion = EscapeCriterion::energy_for(&params);
        let ic = PhasePoint::new(0.0, 0.0);
        let t_esc = integrate(&ic, &params, 3000.0, &criterion, &quick_opts())
            .unwrap()
            .expect("escapes at this forcing");
        assert!(t_esc > 0.0);
        // before the crossing the running max stays below the threshold
        let period = params.period();
        let t_check = t_esc * period * 0.995;
        let mut stepper = Dopri5::new(&ic, &params, quick_opts());
        let mut max_h = hamiltonian(&ic);
        while stepper.t < t_check {
            stepper.step_to(t_check).unwrap();
            max_h = max_h.max(hamiltonian(&PhasePoint::new(stepper.y[0], stepper.y[1])));
        }
        assert!(
            max_h <= 0.2 + 1e-6,
            "energy {max_h} already above threshold before the reported escape"
        );
    }

    #[test]
    fn bisection_brackets_and_converges() {
        let base = ModelParams::new(0.1, 0.95, PI, 0.242).unwrap();
        let ic = PhasePoint::new(0.0, 0.0);
        let criterion_of = |p: &ModelParams| EscapeCriterion::energy_for(p);
        // degenerate bracket: F_hi below any escape
        let err = bisect_fcr(
            &base,
            &ic,
            &criterion_of,
            300.0,
            &quick_opts(),
            &BisectSpec {
                f_lo: 0.0,
                f_hi: 1e-4,
                f_tol: 5e-5,
            },
        )
        .unwrap_err();
        assert!(matches!(err, SimulateError::BracketFailure { .. }));

        let f_cr = bisect_fcr(
            &base,
            &ic,
            &criterion_of,
            300.0,
            &quick_opts(),
            &BisectSpec {
                f_lo: 0.0,
                f_hi: 0.3,
                f_tol: 5e-5,
            },
        )
        .unwrap();
        assert!(f_cr > 0.0 && f_cr < 0.3);
        // consistency: escape just above, none just below
        assert!(escapes_at(f_cr + 1e-4, &base, &ic, &criterion_of, 300.0, &quick_opts()).unwrap());
        assert!(!escapes_at(f_cr - 1e-4, &base, &ic, &criterion_of, 300.0, &quick_opts()).unwrap());
    }

    #[test]
    fn grid_scan_unforced_matches_analytic_disk() {
        let params = ModelParams::new(0.0, 0.9, PI, 0.2).unwrap();
        let criterion = EscapeCriterion::energy_for(&params);
        let grid = grid_scan(
            Extent::unit_square(),
            41,
            41,
            &params,
            &criterion,
            30.0,
            &quick_opts(),
        )
        .unwrap();
        let mut mismatches = 0;
        for iy in 0..41 {
            for ix in 0..41 {
                let ic = grid.ic_at(ix, iy);
                let analytic_safe =
                    hamiltonian(&ic) < 0.2 && ic.q.abs() < crate::model::q_max_of(0.2).unwrap();
                let numeric_safe = !grid.cells[iy * 41 + ix].escaped;
                if analytic_safe != numeric_safe {
                    mismatches += 1;
                }
            }
        }
        // only the H0 = ξmax boundary ring may disagree
        assert!(mismatches <= 41, "{mismatches} cells disagree");
    }

    #[test]
    fn grid_scan_monotone_in_horizon() {
        let params = ModelParams::new(0.06, 0.95, PI, 0.22).unwrap();
        let criterion = EscapeCriterion::energy_for(&params);
        let grid = grid_scan(
            Extent::unit_square(),
            21,
            21,
            &params,
            &criterion,
            200.0,
            &quick_opts(),
        )
        .unwrap();
        // safe set shrinks with the horizon, per-cell containment
        let short = grid.safe_count_at(50.0);
        let long = grid.safe_count_at(200.0);
        assert!(long <= short);
        for c in &grid.cells {
            if let Some(t) = c.escape_time_ec {
                assert!(t <= 200.0 + 1e-9);
            }
        }
    }

    #[test]
    fn strobe_unforced_lies_on_energy_level() {
        let params = ModelParams::new(0.0, 0.99, PI, 0.24).unwrap();
        let ics = [PhasePoint::new(0.4, 0.0), PhasePoint::new(0.1, 0.3)];
        let orbits = strobe_map(&ics, &params, 50, &quick_opts()).unwrap();
        for orbit in &orbits {
            assert!(!orbit.escaped);
            assert_eq!(orbit.samples.len(), 51);
            let h0 = hamiltonian(&orbit.ic);
            for &(q, p) in &orbit.samples {
                assert!(
                    (hamiltonian(&PhasePoint::new(q, p)) - h0).abs() <= 1e-9,
                    "strobe sample off the energy level"
                );
            }
        }
    }

    #[test]
    fn strobe_sampling_period_is_exact() {
        let params = ModelParams::new(0.02, 0.9, 0.0, 0.24).unwrap();
        // an orbit and the same orbit advanced by integrating two periods
        let ic = PhasePoint::new(0.2, 0.1);
        let orbits = strobe_map(&[ic], &params, 2, &quick_opts()).unwrap();
        let s = &orbits[0].samples;
        // re-integrate continuously to 2T and compare the endpoint
        let mut stepper = Dopri5::new(&ic, &params, quick_opts());
        let t_target = 2.0 * params.period();
        while stepper.t < t_target {
            stepper.step_to(t_target).unwrap();
        }
        assert!((s[2].0 - stepper.y[0]).abs() < 1e-9);
        assert!((s[2].1 - stepper.y[1]).abs() < 1e-9);
    }

    #[test]
    fn rhs_matches_trajectory_finite_differences() {
        // the vector field must agree with central differences of the
        // integrated flow it generates
        let params = ModelParams::new(0.07, 1.1, 0.4, 0.22).unwrap();
        let ic = PhasePoint::new(0.25, -0.15);
        let sample_at = |t: f64| {
            if t == 0.0 {
                return [ic.q, ic.p];
            }
            let mut stepper = Dopri5::new(&ic, &params, quick_opts());
            while stepper.t < t {
                stepper.step_to(t).unwrap();
            }
            stepper.y
        };
        let dt = 1e-5;
        for &t in &[0.5, 3.7, 12.0] {
            let plus = sample_at(t + dt);
            let minus = sample_at(t - dt);
            let here = sample_at(t);
            let (dq, dp) = eom_rhs(&PhasePoint::new(here[0], here[1]), t, &params);
            let fd_q = (plus[0] - minus[0]) / (2.0 * dt);
            let fd_p = (plus[1] - minus[1]) / (2.0 * dt);
            assert!((fd_q - dq).abs() < 1e-7, "dq/dτ at t={t}: {fd_q} vs {dq}");
            assert!((fd_p - dp).abs() < 1e-7, "dp/dτ at t={t}: {fd_p} vs {dp}");
        }
    }

    #[test]
    fn strobe_fixed_point_orbit_is_stationary() {
        // Newton refinement of a fixed point of the period map, then the
        // stroboscopic samples of that IC must all coincide
        let params = ModelParams::new(0.01, 0.9, 0.0, 0.24).unwrap();
        let period_map = |q: f64, p: f64| {
            let mut stepper = Dopri5::new(&PhasePoint::new(q, p), &params, quick_opts());
            let t_target = params.period();
            while stepper.t < t_target {
                stepper.step_to(t_target).unwrap();
            }
            (stepper.y[0], stepper.y[1])
        };
        // seed from the linear response amplitude F/(1-Ω²)
        let mut q = 0.0;
        let mut p = -params.f / (1.0 - params.omega * params.omega) * params.omega;
        for _ in 0..20 {
            let (pq, pp) = period_map(q, p);
            let (rq, rp) = (pq - q, pp - p);
            if rq.abs() + rp.abs() < 1e-13 {
                break;
            }
            let h = 1e-7;
            let (aq, ap) = period_map(q + h, p);
            let (bq, bp) = period_map(q, p + h);
            // Jacobian of P(x) - x
            let j11 = (aq - pq) / h - 1.0;
            let j12 = (bq - pq) / h;
            let j21 = (ap - pp) / h;
            let j22 = (bp - pp) / h - 1.0;
            let det = j11 * j22 - j12 * j21;
            q -= (rq * j22 - j12 * rp) / det;
            p -= (j11 * rp - rq * j21) / det;
        }
        let orbits = strobe_map(&[PhasePoint::new(q, p)], &params, 40, &quick_opts()).unwrap();
        let s = &orbits[0].samples;
        assert!(!orbits[0].escaped);
        for &(sq, sp) in s.iter() {
            assert!(
                (sq - q).abs() + (sp - p).abs() <= 1e-8,
                "fixed-point orbit drifted: ({sq}, {sp}) vs ({q}, {p})"
            );
        }
    }

    #[test]
    fn criteria_containment_and_determinism() {
        let base = ModelParams::new(0.0, 0.9, 0.0, 0.25).unwrap();
        let rows =
            criteria_compare(&base, &[0.011, 0.041], 300, 2, 42, 60.0, &quick_opts()).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert!(r.a_e <= r.a_q, "containment violated: {r:?}");
            assert!(r.rel_diff >= 0.0);
        }
        // identical seed reproduces identical counts
        let again =
            criteria_compare(&base, &[0.011, 0.041], 300, 2, 42, 60.0, &quick_opts()).unwrap();
        assert_eq!(rows, again);
    }

    #[test]
    fn area_series_monotone() {
        let params = ModelParams::new(0.0876, 0.95, PI, 0.25).unwrap();
        let criterion = EscapeCriterion::energy_for(&params);
        let series = area_vs_time(
            Extent::unit_square(),
            21,
            21,
            &params,
            &criterion,
            &[10.0, 50.0, 100.0, 200.0],
            &quick_opts(),
        )
        .unwrap();
        for w in series.windows(2) {
            assert!(w[1].1 <= w[0].1, "series not monotone: {series:?}");
        }
        // F = 0 keeps the series constant
        let free = ModelParams::new(0.0, 0.95, PI, 0.25).unwrap();
        let criterion = EscapeCriterion::energy_for(&free);
        let series = area_vs_time(
            Extent::unit_square(),
            15,
            15,
            &free,
            &criterion,
            &[10.0, 100.0],
            &quick_opts(),
        )
        .unwrap();
        assert_eq!(series[0].1, series[1].1);
    }
}
