//! Analytic safe basins on the resonance-manifold cylinder and their image
//! in the initial-condition plane.
//!
//! A safe basin is bounded either by the level curve tangent to the
//! truncation circle `ξ = ξ_max` (maximum type, "SBMT") or by the level
//! curve through the saddle of the first integral (saddle type, "SBST").
//! An SBMT boundary that wraps the full `γ` circle is a *peninsula* (safe
//! region between the curve and `ξ = 0`); one that closes without wrapping
//! is an *island* (safe region inside the loop). Both types can coexist,
//! in which case the safe set is their union and the plane image splits
//! into disjoint zones.
//!
//! Curves are traced per `γ` column: `C(γ, ξ) = level` is solved for `ξ` by
//! bracketing and bisection on a clustered grid, multiple roots are kept as
//! separate branches, and branches are stitched by continuity across
//! columns (folds close by pairing leftover roots within a column).

use crate::action_angle::{p_of_angle, q_of_angle, SlowState, XI_STRICT_MAX};
use crate::model::{ModelParams, PhasePoint};
use crate::raster::label_components;
use crate::slow_flow::{find_saddle, CouplingMode, FirstIntegralContext};
use std::f64::consts::{PI, TAU};

/// Boundary topology and membership rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasinClass {
    /// Maximum-type boundary closing without wrapping the cylinder.
    SbmtIsland,
    /// Maximum-type boundary wrapping the full `γ` circle.
    SbmtPeninsula,
    /// Saddle-type boundary (always wraps).
    Sbst,
}

impl BasinClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::SbmtIsland => "sbmt_island",
            Self::SbmtPeninsula => "sbmt_peninsula",
            Self::Sbst => "sbst",
        }
    }
}

/// Threshold below which a boundary level counts as the zero-level curve
/// (which emanates from `ξ = 0` and is handled with the peninsula rule
/// regardless of winding). The cut is this library's choice.
pub const LPT_LEVEL_EPS: f64 = 1e-12;

/// A classified safe-basin boundary, held on the cylinder and in the plane.
#[derive(Debug, Clone)]
pub struct BasinBoundary {
    pub class: BasinClass,
    /// The conserved value of the first integral along the curve.
    pub level: f64,
    /// Ordered `(γ, ξ)` samples; the polyline closes cyclically.
    pub cylinder: Vec<(f64, f64)>,
    /// The curve mapped to `(q₀, p₀)`, same ordering.
    pub plane: Vec<(f64, f64)>,
    /// Zero-level boundary: membership uses the peninsula rule.
    pub lpt: bool,
}

impl BasinBoundary {
    /// Net winding of the polyline around the cylinder, in turns.
    fn winding_turns(samples: &[(f64, f64)]) -> f64 {
        let mut total = 0.0;
        for w in 0..samples.len() {
            let (g1, _) = samples[w];
            let (g2, _) = samples[(w + 1) % samples.len()];
            let mut d = g2 - g1;
            if d > PI {
                d -= TAU;
            }
            if d < -PI {
                d += TAU;
            }
            total += d;
        }
        total / TAU
    }

    /// True when the boundary wraps the full `γ` circle.
    pub fn wraps(&self) -> bool {
        Self::winding_turns(&self.cylinder).abs() > 0.5
    }

    /// Parity of boundary crossings on the vertical segment from `(γ, 0)`
    /// to `(γ, ξ)`; `None` when the query point lies on the boundary.
    fn crossings_below(&self, gamma: f64, xi: f64) -> Option<usize> {
        let n = self.cylinder.len();
        let mut count = 0usize;
        for w in 0..n {
            let (g1, x1) = self.cylinder[w];
            let (g2, x2) = self.cylinder[(w + 1) % n];
            // unwrap the edge near the query phase
            let mut a = g1 - gamma;
            while a > PI {
                a -= TAU;
            }
            while a < -PI {
                a += TAU;
            }
            let mut d = g2 - g1;
            if d > PI {
                d -= TAU;
            }
            if d < -PI {
                d += TAU;
            }
            let b = a + d;
            // half-open in γ so shared vertices count once
            let crosses = (a <= 0.0 && b > 0.0) || (b <= 0.0 && a > 0.0);
            if !crosses {
                if a == 0.0 && b == 0.0 {
                    // vertical-ish degenerate edge at the query phase
                    let lo = x1.min(x2);
                    let hi = x1.max(x2);
                    if xi >= lo - 1e-9 && xi <= hi + 1e-9 {
                        return None;
                    }
                }
                continue;
            }
            let t = a / (a - b);
            let xc = x1 + t * (x2 - x1);
            if (xc - xi).abs() <= 1e-9 {
                return None; // on the boundary
            }
            if xc < xi {
                count += 1;
            }
        }
        Some(count)
    }

    /// Membership of a cylinder point with respect to this boundary alone
    /// (boundary-inclusive).
    pub fn contains(&self, s: &SlowState) -> bool {
        let Some(crossings) = self.crossings_below(s.gamma, s.xi) else {
            return true; // on the boundary: closed-region convention
        };
        let peninsula_rule =
            self.lpt || matches!(self.class, BasinClass::SbmtPeninsula | BasinClass::Sbst);
        if peninsula_rule {
            crossings % 2 == 0
        } else {
            crossings % 2 == 1
        }
    }
}

/// The union of safe sets of all boundaries at one parameter point.
#[derive(Debug, Clone)]
pub struct SafeRegion {
    pub boundaries: Vec<BasinBoundary>,
    pub xi_max: f64,
    pub psi: f64,
    /// Connected components of the rasterized plane image (4-connectivity,
    /// 400×400 over `[-1,1]²`); `>= 2` flags disjoint zones.
    pub plane_components: usize,
}

impl SafeRegion {
    /// Membership of an initial condition given in the plane.
    pub fn contains_plane(&self, pt: &PhasePoint) -> bool {
        let Ok(s) = crate::action_angle::slow_coords_of_ic(pt, self.psi) else {
            return false;
        };
        safe_membership(&s, self)
    }

    pub fn is_empty(&self) -> bool {
        self.boundaries.is_empty()
    }
}

/// True iff the slow state lies in the union of the boundaries' safe sets.
pub fn safe_membership(s: &SlowState, region: &SafeRegion) -> bool {
    if s.xi > region.xi_max {
        return false;
    }
    region.boundaries.iter().any(|b| b.contains(s))
}

const N_GAMMA: usize = 1024;
const N_XI_PROBE: usize = 400;
const XI_TRACE_FLOOR: f64 = 1e-9;

/// All `ξ` roots of `C(γ, ξ) = level` in `(floor, cap]`, sorted ascending.
fn column_roots(ctx: &FirstIntegralContext, gamma: f64, level: f64, cap: f64) -> Vec<f64> {
    let f = |xi: f64| ctx.c_at(gamma, xi) - level;
    let grid = |j: usize| {
        let t = j as f64 / N_XI_PROBE as f64;
        XI_TRACE_FLOOR + (cap - XI_TRACE_FLOOR) * t * t
    };
    let mut roots = Vec::new();
    let mut prev_xi = grid(0);
    let mut prev_f = f(prev_xi);
    for j in 1..=N_XI_PROBE {
        let xi = grid(j);
        let fv = f(xi);
        if prev_f == 0.0 {
            roots.push(prev_xi);
        } else if prev_f.signum() != fv.signum() {
            let mut lo = prev_xi;
            let mut hi = xi;
            let mut f_lo = prev_f;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm.signum() == f_lo.signum() {
                    lo = mid;
                    f_lo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev_xi = xi;
        prev_f = fv;
    }
    roots
}

/// Order-preserving minimal-cost matching between two sorted root lists.
/// Returns index pairs; unmatched indices cap within their own column.
fn match_columns(a: &[f64], b: &[f64]) -> Vec<(usize, usize)> {
    let m = a.len();
    let n = b.len();
    if m == 0 || n == 0 {
        return Vec::new();
    }
    let target = m.min(n);
    // DP over (i, j, matched) minimizing total |a_i − b_j|
    let inf = f64::INFINITY;
    let mut cost = vec![vec![inf; n + 1]; m + 1];
    let mut matched = vec![vec![0usize; n + 1]; m + 1];
    cost[0][0] = 0.0;
    for i in 0..=m {
        for j in 0..=n {
            if cost[i][j] == inf {
                continue;
            }
            if i < m && j < n {
                let c = cost[i][j] + (a[i] - b[j]).abs();
                if matched[i][j] + 1 > matched[i + 1][j + 1]
                    || (matched[i][j] + 1 == matched[i + 1][j + 1] && c < cost[i + 1][j + 1])
                {
                    cost[i + 1][j + 1] = c;
                    matched[i + 1][j + 1] = matched[i][j] + 1;
                }
            }
            if i < m
                && (matched[i][j] > matched[i + 1][j]
                    || (matched[i][j] == matched[i + 1][j] && cost[i][j] < cost[i + 1][j]))
            {
                cost[i + 1][j] = cost[i][j];
                matched[i + 1][j] = matched[i][j];
            }
            if j < n
                && (matched[i][j] > matched[i][j + 1]
                    || (matched[i][j] == matched[i][j + 1] && cost[i][j] < cost[i][j + 1]))
            {
                cost[i][j + 1] = cost[i][j];
                matched[i][j + 1] = matched[i][j];
            }
        }
    }
    // backtrack
    let mut pairs = Vec::new();
    let (mut i, mut j) = (m, n);
    while i > 0 && j > 0 {
        if matched[i][j] == matched[i - 1][j - 1] + 1
            && (cost[i][j] - (cost[i - 1][j - 1] + (a[i - 1] - b[j - 1]).abs())).abs() < 1e-12
        {
            pairs.push((i - 1, j - 1));
            i -= 1;
            j -= 1;
        } else if matched[i][j] == matched[i - 1][j] && cost[i][j] == cost[i - 1][j] {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    pairs.reverse();
    debug_assert!(pairs.len() <= target);
    pairs
}

/// Closed polylines of the level set `C = level` below `cap`, stitched from
/// per-column roots. `pin` optionally injects an exact on-curve vertex
/// (tangency or saddle) into its `γ` column.
fn trace_level_curve(
    ctx: &FirstIntegralContext,
    level: f64,
    cap: f64,
    pin: Option<(f64, f64)>,
) -> Vec<Vec<(f64, f64)>> {
    let mut columns: Vec<Vec<f64>> = (0..N_GAMMA)
        .map(|i| {
            let gamma = TAU * i as f64 / N_GAMMA as f64;
            column_roots(ctx, gamma, level, cap)
        })
        .collect();
    if let Some((g_pin, x_pin)) = pin {
        let col = ((g_pin / TAU * N_GAMMA as f64).round() as usize) % N_GAMMA;
        let list = &mut columns[col];
        // replace a nearby root or insert, keeping the list sorted
        match list.iter().position(|&r| (r - x_pin).abs() < 5e-4) {
            Some(idx) => list[idx] = x_pin,
            None => {
                let idx = list.partition_point(|&r| r < x_pin);
                list.insert(idx, x_pin);
            }
        }
    }

    // global vertex ids
    let mut offset = vec![0usize; N_GAMMA + 1];
    for i in 0..N_GAMMA {
        offset[i + 1] = offset[i] + columns[i].len();
    }
    let total = offset[N_GAMMA];
    if total == 0 {
        return Vec::new();
    }
    let vid = |col: usize, idx: usize| offset[col] + idx;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); total];
    for i in 0..N_GAMMA {
        let j = (i + 1) % N_GAMMA;
        let pairs = match_columns(&columns[i], &columns[j]);
        let mut used_i = vec![false; columns[i].len()];
        for &(ai, bj) in &pairs {
            adj[vid(i, ai)].push(vid(j, bj));
            adj[vid(j, bj)].push(vid(i, ai));
            used_i[ai] = true;
        }
        // fold caps: leftover roots in column i pair up consecutively,
        // but only those not already capped toward the previous column
        let leftovers: Vec<usize> = (0..columns[i].len()).filter(|&x| !used_i[x]).collect();
        let _ = leftovers; // capping handled after both neighbors are known
    }
    // cap vertices with degree < 2 inside their own column, pairing nearest
    for i in 0..N_GAMMA {
        let open: Vec<usize> = (0..columns[i].len())
            .filter(|&x| adj[vid(i, x)].len() < 2)
            .collect();
        let mut w = 0;
        while w + 1 < open.len() {
            let a = vid(i, open[w]);
            let b = vid(i, open[w + 1]);
            adj[a].push(b);
            adj[b].push(a);
            w += 2;
        }
    }

    // walk cycles/chains
    let mut visited = vec![false; total];
    let coords = |v: usize| {
        let col = offset.partition_point(|&o| o <= v) - 1;
        let idx = v - offset[col];
        (TAU * col as f64 / N_GAMMA as f64, columns[col][idx])
    };
    let mut curves = Vec::new();
    for start in 0..total {
        if visited[start] || adj[start].is_empty() {
            continue;
        }
        let mut path = vec![start];
        visited[start] = true;
        let mut prev = usize::MAX;
        let mut cur = start;
        loop {
            let next = adj[cur].iter().copied().find(|&n| n != prev && !visited[n]);
            match next {
                Some(n) => {
                    visited[n] = true;
                    path.push(n);
                    prev = cur;
                    cur = n;
                }
                None => break,
            }
        }
        if path.len() >= 8 {
            curves.push(path.into_iter().map(coords).collect::<Vec<_>>());
        }
    }
    curves
}

/// Maps a cylinder polyline to `(q₀, p₀)` via `θ = γ + Ψ` at `τ = 0`.
pub fn map_to_ic_plane(cylinder: &[(f64, f64)], psi: f64) -> Vec<(f64, f64)> {
    cylinder
        .iter()
        .map(|&(gamma, xi)| {
            let theta = gamma + psi;
            let xi_c = xi.min(XI_STRICT_MAX);
            let q = q_of_angle(theta, xi_c).expect("traced xi within domain");
            let p = p_of_angle(theta, xi_c).expect("traced xi within domain");
            (q, p)
        })
        .collect()
}

/// Maximum-type boundaries at the given parameters: level curves through the
/// tangency points `(γ*, ξ_max)`, `γ* ∈ {0, π}`, kept when the local
/// curvature puts the curve below the circle. Both branches can be valid at
/// once; each is classified island/peninsula by its winding.
///
/// Empty when no tangency branch produces a sub-threshold curve, or when
/// `ξ_max` sits at the separatrix (the tangency point is undefined there).
pub fn trace_sbmt(ctx: &FirstIntegralContext, xi_max: f64, psi: f64) -> Vec<BasinBoundary> {
    if ctx.f <= 0.0 || xi_max >= XI_STRICT_MAX {
        return Vec::new();
    }
    let mut out = Vec::new();
    for gamma_star in [0.0, PI] {
        let level = ctx.c_at(gamma_star, xi_max);
        // valid tangency-from-below requires C_γγ and ∂C/∂ξ of equal sign
        let c_gg = ctx.f * ctx.coupling.g(xi_max) * gamma_star.cos();
        let dc = ctx.dc_dxi(gamma_star, xi_max);
        if c_gg * dc <= 0.0 {
            continue;
        }
        let curves = trace_level_curve(ctx, level, xi_max, Some((gamma_star, xi_max)));
        // keep the component through the tangency point
        let Some(curve) = curves.into_iter().find(|c| {
            c.iter()
                .any(|&(g, x)| (x - xi_max).abs() < 1e-12 && ((g - gamma_star).abs() < 1e-9))
        }) else {
            continue;
        };
        let wraps = BasinBoundary::winding_turns(&curve).abs() > 0.5;
        let plane = map_to_ic_plane(&curve, psi);
        out.push(BasinBoundary {
            class: if wraps {
                BasinClass::SbmtPeninsula
            } else {
                BasinClass::SbmtIsland
            },
            level,
            cylinder: curve,
            plane,
            lpt: level.abs() <= LPT_LEVEL_EPS,
        });
    }
    out
}

/// Saddle-type boundary: the lower branch of the level curve through the
/// saddle, traced as the first crossing of the saddle level above `ξ = 0`
/// in every column (single-valued by construction), with the exact saddle
/// vertex spliced in. `None` when no saddle lies below `ξ_max`.
pub fn trace_sbst(ctx: &FirstIntegralContext, xi_max: f64, psi: f64) -> Option<BasinBoundary> {
    let saddle = find_saddle(ctx)?;
    if saddle.xi_dag >= xi_max {
        return None;
    }
    let level = saddle.c_value;
    let cap = xi_max.min(XI_STRICT_MAX);
    let saddle_col = ((saddle.gamma_dag / TAU * N_GAMMA as f64).round() as usize) % N_GAMMA;
    let mut curve = Vec::with_capacity(N_GAMMA);
    for i in 0..N_GAMMA {
        let gamma = TAU * i as f64 / N_GAMMA as f64;
        if i == saddle_col {
            curve.push((saddle.gamma_dag, saddle.xi_dag));
            continue;
        }
        let roots = column_roots(ctx, gamma, level, cap);
        match roots.first() {
            Some(&xi) => curve.push((gamma, xi)),
            None => {
                // near the pinch the two crossings may be closer than the
                // probe spacing; fall back toward the saddle energy
                curve.push((gamma, saddle.xi_dag));
            }
        }
    }
    let plane = map_to_ic_plane(&curve, psi);
    Some(BasinBoundary {
        class: BasinClass::Sbst,
        level,
        cylinder: curve,
        plane,
        lpt: level.abs() <= LPT_LEVEL_EPS,
    })
}

const PLANE_RASTER: usize = 400;

fn plane_component_count(boundaries: &[BasinBoundary], xi_max: f64, psi: f64) -> usize {
    if boundaries.is_empty() {
        return 0;
    }
    let region = SafeRegion {
        boundaries: boundaries.to_vec(),
        xi_max,
        psi,
        plane_components: 0,
    };
    let n = PLANE_RASTER;
    let mut mask = vec![false; n * n];
    for jy in 0..n {
        let p = -1.0 + 2.0 * (jy as f64 + 0.5) / n as f64;
        for jx in 0..n {
            let q = -1.0 + 2.0 * (jx as f64 + 0.5) / n as f64;
            mask[jy * n + jx] = region.contains_plane(&PhasePoint::new(q, p));
        }
    }
    let (_, count) = label_components(&mask, n, n);
    count
}

/// Assembles every existing boundary at the given parameters and counts the
/// disjoint plane zones. With `F = 0` the whole sub-threshold disk is safe
/// and the boundary degenerates to the circle `ξ = ξ_max`.
pub fn analytic_basin(params: &ModelParams, mode: CouplingMode) -> SafeRegion {
    let xi_cap = params.xi_max.min(XI_STRICT_MAX);
    if params.f == 0.0 {
        let ctx = FirstIntegralContext {
            f: 0.0,
            omega: params.omega,
            coupling: mode,
        };
        let level = ctx.c_at(0.0, xi_cap);
        let cylinder: Vec<(f64, f64)> = (0..N_GAMMA)
            .map(|i| (TAU * i as f64 / N_GAMMA as f64, xi_cap))
            .collect();
        let plane = map_to_ic_plane(&cylinder, params.psi);
        let boundary = BasinBoundary {
            class: BasinClass::SbmtPeninsula,
            level,
            cylinder,
            plane,
            lpt: false,
        };
        return SafeRegion {
            plane_components: 1,
            boundaries: vec![boundary],
            xi_max: params.xi_max,
            psi: params.psi,
        };
    }
    let ctx = FirstIntegralContext {
        f: params.f,
        omega: params.omega,
        coupling: mode,
    };
    let mut boundaries = trace_sbmt(&ctx, xi_cap, params.psi);
    if let Some(sbst) = trace_sbst(&ctx, xi_cap, params.psi) {
        boundaries.push(sbst);
    }
    let plane_components = plane_component_count(&boundaries, params.xi_max, params.psi);
    SafeRegion {
        boundaries,
        xi_max: params.xi_max,
        psi: params.psi,
        plane_components,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::hamiltonian;

    fn ctx(f: f64, omega: f64) -> FirstIntegralContext {
        FirstIntegralContext::new(f, omega).unwrap()
    }

    fn level_accuracy(ctx: &FirstIntegralContext, b: &BasinBoundary) -> f64 {
        b.cylinder
            .iter()
            .map(|&(g, x)| (ctx.c_at(g, x) - b.level).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn island_configuration() {
        // isolated island tangent to the circle from below
        let c = ctx(0.0876, 0.92);
        let bs = trace_sbmt(&c, 0.24, PI);
        assert_eq!(bs.len(), 1, "expected a single tangency branch");
        let b = &bs[0];
        assert_eq!(b.class, BasinClass::SbmtIsland);
        assert!(
            level_accuracy(&c, b) <= 1e-9,
            "level error {:e}",
            level_accuracy(&c, b)
        );
        assert!(b.cylinder.iter().all(|&(_, x)| x <= 0.24 + 1e-12));
        // no saddle survives this forcing
        assert!(trace_sbst(&c, 0.24, PI).is_none());
    }

    #[test]
    fn peninsula_configurations() {
        // high-frequency side
        let c = ctx(0.0876, 1.04);
        let bs = trace_sbmt(&c, 0.249, PI);
        assert!(!bs.is_empty());
        assert!(bs.iter().any(|b| b.class == BasinClass::SbmtPeninsula));
        // low-frequency side with the saddle above the truncation level
        let c = ctx(0.0876, 0.57);
        let bs = trace_sbmt(&c, 0.21, PI);
        assert!(!bs.is_empty());
        let b = bs
            .iter()
            .find(|b| b.class == BasinClass::SbmtPeninsula)
            .unwrap();
        assert!(level_accuracy(&c, b) <= 1e-9);
        // its tangency sits at γ = 0 in this regime
        assert!(b
            .cylinder
            .iter()
            .any(|&(g, x)| (x - 0.21).abs() < 1e-12 && (g.min(TAU - g)) < 1e-9));
    }

    #[test]
    fn sbst_configuration_and_coexistence() {
        // deep truncation admits the saddle-type boundary
        let c = ctx(0.0876, 0.57);
        let b = trace_sbst(&c, 0.2499, PI).expect("saddle-type boundary exists");
        assert_eq!(b.class, BasinClass::Sbst);
        assert!(b.cylinder.len() >= N_GAMMA);
        assert!(
            BasinBoundary::winding_turns(&b.cylinder).abs() > 0.5,
            "SBST must wrap"
        );
        // every sample on level, except the pinch fallback column
        let bad = b
            .cylinder
            .iter()
            .filter(|&&(g, x)| (c.c_at(g, x) - b.level).abs() > 1e-9)
            .count();
        assert!(bad <= 2, "{bad} off-level samples");

        // coexistence: saddle-type plus max-type island, disjoint in the plane
        let params = ModelParams::new(0.0478, 0.76, PI, 0.235).unwrap();
        let region = analytic_basin(&params, CouplingMode::ClosedForm);
        let classes: Vec<_> = region.boundaries.iter().map(|b| b.class).collect();
        assert!(classes.contains(&BasinClass::Sbst), "classes: {classes:?}");
        assert!(
            classes.contains(&BasinClass::SbmtIsland),
            "classes: {classes:?}"
        );
        assert!(
            region.plane_components >= 2,
            "expected disjoint plane zones, got {}",
            region.plane_components
        );
    }

    #[test]
    fn membership_rules() {
        let params = ModelParams::new(0.0478, 0.76, PI, 0.235).unwrap();
        let region = analytic_basin(&params, CouplingMode::ClosedForm);
        // the rest circle is safe under a wrapping boundary
        for j in 0..8 {
            let s = SlowState::new(TAU * j as f64 / 8.0, 1e-6).unwrap();
            assert!(
                safe_membership(&s, &region),
                "ξ→0 must be safe at γ index {j}"
            );
        }
        // above the truncation level: never safe
        let s = SlowState::new(1.0, 0.24).unwrap();
        assert!(!safe_membership(&s, &region));
        // a boundary sample itself is safe (closed-region convention)
        let b = &region.boundaries[0];
        let (g, x) = b.cylinder[b.cylinder.len() / 3];
        let s = SlowState::new(g, x.min(0.2349)).unwrap();
        assert!(safe_membership(&s, &region));
    }

    #[test]
    fn island_interior_vs_outside() {
        let params = ModelParams::new(0.0876, 0.92, PI, 0.24).unwrap();
        let region = analytic_basin(&params, CouplingMode::ClosedForm);
        let island = region
            .boundaries
            .iter()
            .find(|b| b.class == BasinClass::SbmtIsland)
            .expect("island present");
        // centroid of the island is inside
        let n = island.cylinder.len() as f64;
        let (mut gc_sin, mut gc_cos, mut xc) = (0.0, 0.0, 0.0);
        for &(g, x) in &island.cylinder {
            gc_sin += g.sin();
            gc_cos += g.cos();
            xc += x;
        }
        let gc = gc_sin.atan2(gc_cos).rem_euclid(TAU);
        let s = SlowState::new(gc, xc / n).unwrap();
        assert!(safe_membership(&s, &region), "island centroid not safe");
        // rest state is outside an island-only region
        let z = SlowState::new(0.0, 1e-9).unwrap();
        assert!(
            !safe_membership(&z, &region),
            "rest state escapes at this forcing"
        );
        assert_eq!(region.plane_components, 1);
    }

    #[test]
    fn plane_mapping_consistency() {
        // every plane sample carries the energy of its cylinder source
        let params = ModelParams::new(0.0478, 0.76, PI, 0.235).unwrap();
        let region = analytic_basin(&params, CouplingMode::ClosedForm);
        for b in &region.boundaries {
            for (&(_, xi), &(q, p)) in b.cylinder.iter().zip(b.plane.iter()) {
                let h = hamiltonian(&PhasePoint::new(q, p));
                assert!((h - xi).abs() <= 1e-9, "plane sample energy {h} vs ξ {xi}");
            }
        }
        // a wrapping boundary maps to a loop enclosing the origin
        let b = region
            .boundaries
            .iter()
            .find(|b| b.class == BasinClass::Sbst)
            .unwrap();
        let mut winding = 0.0;
        for w in 0..b.plane.len() {
            let (x1, y1) = b.plane[w];
            let (x2, y2) = b.plane[(w + 1) % b.plane.len()];
            winding += (y2.atan2(x2) - y1.atan2(x1) + PI).rem_euclid(TAU) - PI;
        }
        assert!(
            (winding.abs() - TAU).abs() < 0.3,
            "plane loop winding {winding}"
        );
    }

    #[test]
    fn psi_rotates_plane_image() {
        let base = ModelParams::new(0.01, 0.9, PI, 0.22).unwrap();
        let shifted = ModelParams::new(0.01, 0.9, 1.0, 0.22).unwrap();
        let r1 = analytic_basin(&base, CouplingMode::ClosedForm);
        let r2 = analytic_basin(&shifted, CouplingMode::ClosedForm);
        assert!(!r1.is_empty() && !r2.is_empty());
        // same cylinder boundary, different plane image
        let b1 = &r1.boundaries[0];
        let b2 = r2
            .boundaries
            .iter()
            .find(|b| b.class == b1.class)
            .expect("same class present");
        let d_cyl: f64 = b1
            .cylinder
            .iter()
            .zip(b2.cylinder.iter())
            .map(|(a, b)| (a.1 - b.1).abs())
            .fold(0.0, f64::max);
        assert!(d_cyl < 1e-9, "cylinder boundary should not depend on Ψ");
        let d_plane: f64 = b1
            .plane
            .iter()
            .zip(b2.plane.iter())
            .map(|(a, b)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt())
            .fold(0.0, f64::max);
        assert!(d_plane > 1e-2, "plane image must rotate with Ψ");
    }

    #[test]
    fn unforced_basin_is_subthreshold_disk() {
        let params = ModelParams::new(0.0, 0.9, PI, 0.2).unwrap();
        let region = analytic_basin(&params, CouplingMode::ClosedForm);
        assert_eq!(region.boundaries.len(), 1);
        assert_eq!(region.plane_components, 1);
        let s = SlowState::new(2.0, 0.19).unwrap();
        assert!(safe_membership(&s, &region));
        let s = SlowState::new(2.0, 0.21).unwrap();
        assert!(!safe_membership(&s, &region));
        // plane boundary is the H0 = ξ_max oval
        for &(q, p) in &region.boundaries[0].plane {
            let h = hamiltonian(&PhasePoint::new(q, p));
            assert!((h - 0.2).abs() < 1e-7);
        }
    }

    #[test]
    fn membership_matches_connectivity_oracle() {
        // independent oracle: a slow state is safe iff the level set of C
        // through it, flood-filled on the cylinder raster, stays below ξmax
        fn safe_by_flood(ctx: &FirstIntegralContext, s: &SlowState, xi_max: f64) -> bool {
            let c0 = ctx.c_at(s.gamma, s.xi);
            let ng = 512;
            let nx = 512;
            let xi_lo = 1e-7;
            let mut corner = vec![0.0f64; (ng + 1) * (nx + 1)];
            for i in 0..=ng {
                let g = TAU * i as f64 / ng as f64;
                for j in 0..=nx {
                    let x = xi_lo + (xi_max - xi_lo) * j as f64 / nx as f64;
                    corner[i * (nx + 1) + j] = ctx.c_at(g, x) - c0;
                }
            }
            let has = |i: usize, j: usize| {
                let r = [
                    corner[i * (nx + 1) + j],
                    corner[i * (nx + 1) + j + 1],
                    corner[(i + 1) * (nx + 1) + j],
                    corner[(i + 1) * (nx + 1) + j + 1],
                ];
                r.iter().any(|&v| v <= 0.0) && r.iter().any(|&v| v >= 0.0)
            };
            let gi = ((s.gamma / TAU) * ng as f64) as usize % ng;
            let ji = (((s.xi - xi_lo) / (xi_max - xi_lo)) * nx as f64).clamp(0.0, nx as f64 - 1.0)
                as usize;
            let mut stack = Vec::new();
            let mut seen = vec![false; ng * nx];
            'seed: for r in 0..nx.max(ng) {
                for (di, dj) in [
                    (0i64, r as i64),
                    (0, -(r as i64)),
                    (r as i64, 0),
                    (-(r as i64), 0),
                ] {
                    let i = ((gi as i64 + di).rem_euclid(ng as i64)) as usize;
                    let j = (ji as i64 + dj).clamp(0, nx as i64 - 1) as usize;
                    if has(i, j) {
                        stack.push((i, j));
                        seen[i * nx + j] = true;
                        break 'seed;
                    }
                }
            }
            while let Some((i, j)) = stack.pop() {
                if j == nx - 1 {
                    return false; // level set reaches the circle: escape
                }
                let left = (i + ng - 1) % ng;
                let right = (i + 1) % ng;
                let mut neigh = vec![(right, j), (left, j), (i, j + 1)];
                if j > 0 {
                    neigh.push((i, j - 1));
                }
                for (ni, nj) in neigh {
                    if !seen[ni * nx + nj] && has(ni, nj) {
                        seen[ni * nx + nj] = true;
                        stack.push((ni, nj));
                    }
                }
            }
            true
        }

        let params = ModelParams::new(0.0478, 0.76, PI, 0.235).unwrap();
        let region = analytic_basin(&params, CouplingMode::ClosedForm);
        let c = ctx(0.0478, 0.76);
        let mut state = 0x5EEDu64;
        let mut lcg = move || {
            state = state.wrapping_add(0x9E3779B97F4A7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            z = z ^ (z >> 31);
            (z >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut disagreements = 0;
        let total = 150;
        for _ in 0..total {
            let s = SlowState::new(lcg() * TAU, 0.003 + lcg() * 0.231).unwrap();
            let by_rules = safe_membership(&s, &region);
            let by_flood = safe_by_flood(&c, &s, 0.235);
            if by_rules != by_flood {
                disagreements += 1;
            }
        }
        // raster-resolution effects near boundaries allow a few mismatches
        assert!(
            disagreements <= total / 30,
            "{disagreements}/{total} membership disagreements vs flood oracle"
        );
    }
}
