//! Orchestration front end: reproduction subcommands over the analysis and
//! simulation library, emitting CSV (canonical) and SVG (quick-look) files.

mod config;
mod svg;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use config::RunConfig;
use escape_atlas_core::action_angle::SlowState;
use escape_atlas_core::basin::{analytic_basin, SafeRegion};
use escape_atlas_core::io;
use escape_atlas_core::model::{hamiltonian, EscapeCriterion, ModelParams, PhasePoint};
use escape_atlas_core::simulate::{
    area_vs_time, bisect_fcr, criteria_compare, find_escape_bracket, grid_scan, strobe_map,
    BasinGrid, BisectSpec, Extent, IntegratorOptions,
};
use escape_atlas_core::slow_flow::{fcr_envelope, CouplingMode, EnvelopePoint};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "escape-atlas",
    about = "Safe-basin prediction and brute-force verification for forced escape from a truncated quartic well",
    version
)]
struct Cli {
    /// Run-configuration file (flat key = value); flags override file keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (falls back to $ESCAPE_ATLAS_OUT, then "out").
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// RNG seed for the sampled experiments.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also run the numeric verification pass.
    #[arg(long, global = true)]
    verify: bool,
    /// Fast profile: 500 EC horizon, raster capped at 100×100.
    #[arg(long, global = true)]
    fast: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic critical-force curve over the Ω sweep (optionally verified
    /// by bisection).
    FcrCurve,
    /// Analytic safe-basin boundaries (optionally overlaid on a numeric
    /// basin raster).
    Basin,
    /// Stroboscopic (period-map) portrait of non-escaping trajectories.
    Strobe,
    /// Escape-criteria comparison, safe-area decay, and the dual-criteria
    /// basin charts.
    Appendix,
    /// Quick self-check of the library invariants.
    Selftest,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.display().to_string();
    } else if cli.config.is_none() || cfg.out_dir == "out" {
        if let Ok(env_out) = std::env::var("ESCAPE_ATLAS_OUT") {
            if !env_out.is_empty() {
                cfg.out_dir = env_out;
            }
        }
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.verify |= cli.verify;
    cfg.fast |= cli.fast;
    cfg.validate()?;

    if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global()
            .context("worker pool")?;
    }

    if !matches!(cli.command, Command::Selftest) {
        // the canonical serialized config (seed included) is the
        // experiment record for every artifact in the output directory
        let path = out_path(&cfg, "run_config.txt")?;
        write_file(&path, |w| w.write_all(cfg.serialize().as_bytes()))?;
    }

    match cli.command {
        Command::FcrCurve => cmd_fcr_curve(&cfg),
        Command::Basin => cmd_basin(&cfg),
        Command::Strobe => cmd_strobe(&cfg),
        Command::Appendix => cmd_appendix(&cfg),
        Command::Selftest => cmd_selftest(),
    }
}

fn out_path(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    let dir = Path::new(&cfg.out_dir);
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.join(name))
}

fn write_file(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write(&mut w)?;
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

fn xi_suffix(xi_list: &[f64], idx: usize) -> String {
    if xi_list.len() == 1 {
        String::new()
    } else {
        format!("_xi{}", xi_list[idx])
    }
}

/// Integrator settings for verification sweeps (basin rasters, bisection).
fn sweep_opts() -> IntegratorOptions {
    IntegratorOptions {
        rtol: 1e-10,
        atol: 1e-12,
        ..Default::default()
    }
}

fn cmd_fcr_curve(cfg: &RunConfig) -> Result<()> {
    let sweep = cfg
        .sweep_omega
        .as_ref()
        .ok_or_else(|| anyhow!("fcr-curve requires sweep.omega (start:stop:count)"))?;
    let ic = cfg.ic.as_slow(cfg.psi)?;
    let xi_list = cfg.sweep_xi_max.clone().unwrap_or_else(|| vec![cfg.xi_max]);
    let mut curves: Vec<(f64, Vec<EnvelopePoint>)> = Vec::new();
    for (i, &xi_max) in xi_list.iter().enumerate() {
        let env = fcr_envelope(sweep, &ic, xi_max, cfg.coupling);
        let path = out_path(cfg, &format!("fcr_analytic{}.csv", xi_suffix(&xi_list, i)))?;
        write_file(&path, |w| io::write_fcr_csv(w, &env))?;
        curves.push((xi_max, env));
    }

    let mut numeric_overlay: Vec<EnvelopePoint> = Vec::new();
    if cfg.verify {
        let xi_max = xi_list[0];
        let env = &curves[0].1;
        if env.is_empty() {
            bail!("no analytic threshold points to verify");
        }
        let dip = env
            .iter()
            .min_by(|a, b| a.f_cr.total_cmp(&b.f_cr))
            .expect("nonempty");
        let mut picks: Vec<&EnvelopePoint> = env.iter().collect();
        picks.sort_by(|a, b| {
            (a.omega - dip.omega)
                .abs()
                .total_cmp(&(b.omega - dip.omega).abs())
        });
        picks.truncate(12);
        picks.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        let ic_plane = cfg.ic.as_plane(cfg.psi)?;
        let horizon = cfg.effective_horizon();
        let opts = sweep_opts();
        let criterion_of = |p: &ModelParams| EscapeCriterion::displacement_for(p);
        let results: Vec<Result<EnvelopePoint>> = {
            use rayon::prelude::*;
            picks
                .par_iter()
                .map(|pt| {
                    let base = cfg.params_with(0.1, pt.omega, xi_max)?;
                    let hi = find_escape_bracket(
                        &base,
                        &ic_plane,
                        &criterion_of,
                        horizon,
                        &opts,
                        2.0 * pt.f_cr,
                        2.0,
                    )?
                    .ok_or_else(|| anyhow!("no escape up to F = 2 at omega {}", pt.omega))?;
                    let spec = BisectSpec {
                        f_lo: 0.0,
                        f_hi: hi,
                        f_tol: 5e-5,
                    };
                    let f_cr = bisect_fcr(&base, &ic_plane, &criterion_of, horizon, &opts, &spec)?;
                    Ok(EnvelopePoint {
                        omega: pt.omega,
                        f_cr,
                        mechanism: pt.mechanism,
                    })
                })
                .collect()
        };
        for (pick, res) in picks.iter().zip(results) {
            let num = res?;
            let rel = (pick.f_cr - num.f_cr).abs() / num.f_cr;
            println!(
                "omega={:.4}: analytic {:.5} vs numeric {:.5} (rel {:.1}%)",
                num.omega,
                pick.f_cr,
                num.f_cr,
                rel * 100.0
            );
            numeric_overlay.push(num);
        }
        let path = out_path(cfg, "fcr_numeric.csv")?;
        write_file(&path, |w| io::write_fcr_csv(w, &numeric_overlay))?;
    }

    // quick-look chart
    let f_max = curves
        .iter()
        .flat_map(|(_, env)| env.iter().map(|p| p.f_cr))
        .fold(0.0f64, f64::max);
    let mut fig = svg::Figure::new(
        "Escape threshold vs forcing frequency",
        "omega",
        "F_cr",
        (sweep[0], *sweep.last().unwrap()),
        (0.0, f_max * 1.05),
    );
    let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];
    for (i, (_, env)) in curves.iter().enumerate() {
        let pts: Vec<(f64, f64)> = env.iter().map(|p| (p.omega, p.f_cr)).collect();
        fig.polyline(&pts, palette[i % palette.len()], 1.8, false);
    }
    fig.scatter(
        &numeric_overlay
            .iter()
            .map(|p| (p.omega, p.f_cr))
            .collect::<Vec<_>>(),
        "#000000",
        3.5,
    );
    let path = out_path(cfg, "fcr_curve.svg")?;
    write_file(&path, |w| w.write_all(fig.render().as_bytes()))?;
    Ok(())
}

fn basin_mismatch(region: &SafeRegion, grid: &BasinGrid, params: &ModelParams) -> (usize, usize) {
    let q_max = params.q_max();
    let mut in_well = 0usize;
    let mut mismatch = 0usize;
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let ic = grid.ic_at(ix, iy);
            if !(hamiltonian(&ic) < params.xi_max && ic.q.abs() < q_max) {
                continue;
            }
            in_well += 1;
            let analytic_safe = region.contains_plane(&ic);
            let numeric_safe = !grid.cells[iy * grid.nx + ix].escaped;
            if analytic_safe != numeric_safe {
                mismatch += 1;
            }
        }
    }
    (mismatch, in_well)
}

fn cmd_basin(cfg: &RunConfig) -> Result<()> {
    let xi_list = cfg.sweep_xi_max.clone().unwrap_or_else(|| vec![cfg.xi_max]);
    for (i, &xi_max) in xi_list.iter().enumerate() {
        let suffix = xi_suffix(&xi_list, i);
        let params = cfg.params_with(cfg.f, cfg.omega, xi_max)?;
        let region = analytic_basin(&params, cfg.coupling);
        if region.is_empty() {
            println!(
                "xi_max={xi_max}: analytic safe region is empty (forcing above all thresholds)"
            );
        } else {
            let classes: Vec<&str> = region.boundaries.iter().map(|b| b.class.as_str()).collect();
            println!(
                "xi_max={xi_max}: boundaries [{}], plane components {}",
                classes.join(", "),
                region.plane_components
            );
        }
        let path = out_path(cfg, &format!("boundary{suffix}.csv"))?;
        write_file(&path, |w| io::write_boundary_csv(w, &region))?;

        let mut fig = svg::Figure::new(
            &format!("Safe basin, xi_max = {xi_max}"),
            "q0",
            "p0",
            (-1.0, 1.0),
            (-1.0, 1.0),
        );
        if cfg.verify {
            let res = cfg.effective_resolution();
            let criterion = EscapeCriterion::energy_for(&params);
            let grid = grid_scan(
                Extent::unit_square(),
                res,
                res,
                &params,
                &criterion,
                cfg.effective_horizon(),
                &sweep_opts(),
            )?;
            let path = out_path(cfg, &format!("grid{suffix}.csv"))?;
            write_file(&path, |w| io::write_grid_csv(w, &grid))?;
            let (mismatch, in_well) = basin_mismatch(&region, &grid, &params);
            println!(
                "xi_max={xi_max}: mismatch fraction {:.4} ({mismatch}/{in_well} in-well cells)",
                if in_well > 0 {
                    mismatch as f64 / in_well as f64
                } else {
                    0.0
                }
            );
            let safe_cells: Vec<(f64, f64)> = (0..grid.cells.len())
                .filter(|&idx| !grid.cells[idx].escaped)
                .map(|idx| {
                    let pt = grid.ic_at(idx % grid.nx, idx / grid.nx);
                    (pt.q, pt.p)
                })
                .collect();
            fig.cells(
                &safe_cells,
                2.0 / res as f64,
                2.0 / res as f64,
                "#b0b0b0",
                0.8,
            );
        }
        for b in &region.boundaries {
            fig.loop_path(&b.plane, "#d62728", 1.6, false);
        }
        let path = out_path(cfg, &format!("basin{suffix}.svg"))?;
        write_file(&path, |w| w.write_all(fig.render().as_bytes()))?;
    }
    Ok(())
}

fn sample_in_well(rng: &mut ChaCha8Rng, params: &ModelParams) -> PhasePoint {
    let q_lim = params.q_max();
    let p_lim = (2.0 * params.xi_max).sqrt();
    loop {
        let pt = PhasePoint::new(
            rng.random_range(-q_lim..=q_lim),
            rng.random_range(-p_lim..=p_lim),
        );
        if pt.is_inside_well(params.xi_max) {
            return pt;
        }
    }
}

fn cmd_strobe(cfg: &RunConfig) -> Result<()> {
    let params = cfg.params()?;
    let n_iters = if cfg.fast {
        cfg.strobe_n_iters.min(500)
    } else {
        cfg.strobe_n_iters
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut retained = Vec::new();
    let mut tried = 0usize;
    let opts = IntegratorOptions::default();
    while retained.len() < cfg.strobe_n_ics && tried < 50 * cfg.strobe_n_ics.max(1) {
        let batch: Vec<PhasePoint> = (0..cfg.strobe_n_ics.clamp(1, 50))
            .map(|_| sample_in_well(&mut rng, &params))
            .collect();
        tried += batch.len();
        for orbit in strobe_map(&batch, &params, n_iters, &opts)? {
            if !orbit.escaped && retained.len() < cfg.strobe_n_ics {
                retained.push(orbit);
            }
        }
    }
    println!(
        "retained {}/{} non-escaping orbits from {tried} sampled ICs ({n_iters} iterations each)",
        retained.len(),
        cfg.strobe_n_ics
    );
    let path = out_path(cfg, "strobe.csv")?;
    write_file(&path, |w| io::write_strobe_csv(w, &retained))?;

    let mut fig = svg::Figure::new("Stroboscopic portrait", "q", "p", (-1.0, 1.0), (-0.8, 0.8));
    for orbit in &retained {
        fig.scatter(&orbit.samples, "#1f77b4", 0.7);
    }
    let region = analytic_basin(&params, cfg.coupling);
    for b in &region.boundaries {
        fig.loop_path(&b.plane, "#d62728", 1.6, true);
    }
    let path = out_path(cfg, "strobe.svg")?;
    write_file(&path, |w| w.write_all(fig.render().as_bytes()))?;
    Ok(())
}

fn cmd_appendix(cfg: &RunConfig) -> Result<()> {
    let horizon = cfg.effective_horizon();
    let opts = IntegratorOptions::counting();
    let base = cfg.params()?;

    // criteria comparison table over the amplitude grid
    let f_list: Vec<f64> = (0..cfg.appendix_f_count)
        .map(|i| cfg.appendix_f_start + cfg.appendix_f_step * i as f64)
        .collect();
    let rows = criteria_compare(
        &base,
        &f_list,
        cfg.appendix_n_ics,
        cfg.appendix_n_repeats,
        cfg.seed,
        horizon,
        &opts,
    )?;
    let path = out_path(cfg, "criteria.csv")?;
    write_file(&path, |w| io::write_criteria_csv(w, &rows))?;
    for &f in &f_list {
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| (r.f - f).abs() < 1e-12)
            .map(|r| r.rel_diff)
            .collect();
        let min = vals.iter().cloned().fold(f64::MAX, f64::min);
        let max = vals.iter().cloned().fold(f64::MIN, f64::max);
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        println!("F={f:.3}: rel_diff min {min:.4} mean {mean:.4} max {max:.4}");
    }

    // safe-area decay at the configured model point
    let res = if cfg.fast {
        cfg.appendix_resolution.min(100)
    } else {
        cfg.appendix_resolution
    };
    let criterion = EscapeCriterion::energy_for(&base);
    let n_checks = 12;
    let checkpoints: Vec<f64> = (1..=n_checks)
        .map(|i| horizon * i as f64 / n_checks as f64)
        .collect();
    let series = area_vs_time(
        Extent::unit_square(),
        res,
        res,
        &base,
        &criterion,
        &checkpoints,
        &opts,
    )?;
    let path = out_path(cfg, "area.csv")?;
    write_file(&path, |w| io::write_area_csv(w, &series))?;

    // dual-criteria basin charts
    let energy_grid = grid_scan(
        Extent::unit_square(),
        res,
        res,
        &base,
        &criterion,
        horizon,
        &opts,
    )?;
    let path = out_path(cfg, "grid_energy.csv")?;
    write_file(&path, |w| io::write_grid_csv(w, &energy_grid))?;
    let disp = EscapeCriterion::displacement_for(&base);
    let disp_grid = grid_scan(
        Extent::unit_square(),
        res,
        res,
        &base,
        &disp,
        horizon,
        &opts,
    )?;
    let path = out_path(cfg, "grid_displacement.csv")?;
    write_file(&path, |w| io::write_grid_csv(w, &disp_grid))?;

    let mut fig = svg::Figure::new(
        "Safe basins: displacement (grey) vs energy (black) criterion",
        "q0",
        "p0",
        (-1.0, 1.0),
        (-1.0, 1.0),
    );
    let cell = 2.0 / res as f64;
    let collect_safe = |grid: &BasinGrid| -> Vec<(f64, f64)> {
        (0..grid.cells.len())
            .filter(|&idx| !grid.cells[idx].escaped)
            .map(|idx| {
                let pt = grid.ic_at(idx % grid.nx, idx / grid.nx);
                (pt.q, pt.p)
            })
            .collect()
    };
    fig.cells(&collect_safe(&disp_grid), cell, cell, "#b0b0b0", 0.9);
    fig.cells(&collect_safe(&energy_grid), cell, cell, "#202020", 0.9);
    let path = out_path(cfg, "criteria_basins.svg")?;
    write_file(&path, |w| w.write_all(fig.render().as_bytes()))?;
    Ok(())
}

fn cmd_selftest() -> Result<()> {
    use escape_atlas_core::action_angle::{angle_of_state, p_of_angle, q_of_angle};
    use escape_atlas_core::elliptic::{ellint_e, ellint_k, jacobi_sn_cn_dn};
    use escape_atlas_core::slow_flow::{fcr_mm, slow_rhs, FirstIntegralContext};

    let mut all_ok = true;
    let mut check = |name: &str, ok: bool| {
        println!("{name}: {}", if ok { "PASS" } else { "FAIL" });
        all_ok &= ok;
    };

    let mut state = 0x5EEDu64;
    let mut rand01 = move || {
        state = state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    };

    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let u = (rand01() - 0.5) * 30.0;
        let k = rand01() * 0.999;
        let (sn, cn, dn) = jacobi_sn_cn_dn(u, k).unwrap();
        worst = worst.max((sn * sn + cn * cn - 1.0).abs());
        worst = worst.max((dn * dn + k * k * sn * sn - 1.0).abs());
    }
    check("jacobi identities <= 1e-12", worst <= 1e-12);

    let mut worst = 0.0f64;
    for i in 1..=9 {
        let k = i as f64 / 10.0;
        let kc = ((1.0 - k) * (1.0 + k)).sqrt();
        let r = ellint_e(k).unwrap() * ellint_k(kc).unwrap()
            + ellint_e(kc).unwrap() * ellint_k(k).unwrap()
            - ellint_k(k).unwrap() * ellint_k(kc).unwrap()
            - std::f64::consts::FRAC_PI_2;
        worst = worst.max(r.abs());
    }
    check("legendre relation <= 1e-12", worst <= 1e-12);

    let mut worst = 0.0f64;
    for _ in 0..200 {
        let e = 0.001 + rand01() * 0.248;
        let theta = rand01() * std::f64::consts::TAU;
        let q = q_of_angle(theta, e).unwrap();
        let p = p_of_angle(theta, e).unwrap();
        worst = worst.max((hamiltonian(&PhasePoint::new(q, p)) - e).abs());
        let (t2, e2) = angle_of_state(&PhasePoint::new(q, p)).unwrap();
        let q2 = q_of_angle(t2, e2).unwrap();
        let p2 = p_of_angle(t2, e2).unwrap();
        worst = worst.max((q - q2).abs() + (p - p2).abs());
    }
    check("angle transform round trip <= 1e-9", worst <= 1e-9);

    let ctx = FirstIntegralContext::new(0.02, 0.9).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let mut gamma = rand01() * std::f64::consts::TAU;
        let mut xi = 0.05 + rand01() * 0.15;
        let c0 = ctx.c_at(gamma, xi);
        let dt = 0.005;
        for _ in 0..40_000 {
            let f = |g: f64, x: f64| slow_rhs(&SlowState { gamma: g, xi: x }, &ctx).unwrap();
            let (k1g, k1x) = f(gamma, xi);
            let (k2g, k2x) = f(gamma + 0.5 * dt * k1g, xi + 0.5 * dt * k1x);
            let (k3g, k3x) = f(gamma + 0.5 * dt * k2g, xi + 0.5 * dt * k2x);
            let (k4g, k4x) = f(gamma + dt * k3g, xi + dt * k3x);
            gamma += dt / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
            xi += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        }
        worst = worst.max((ctx.c_at(gamma, xi) - c0).abs());
    }
    check("slow-flow conservation (tau=200) <= 1e-8", worst <= 1e-8);

    let ic = SlowState::zero_ic(std::f64::consts::PI);
    let mode = CouplingMode::ClosedForm;
    let mut ok = true;
    for omega in [0.9, 1.0, 1.1] {
        let t = fcr_mm(omega, &ic, 0.242, mode).unwrap();
        let g = mode.g(0.242);
        let j = escape_atlas_core::action_angle::action_of_energy(0.242).unwrap();
        ok &= (t.f_cr - (omega * j - 0.242).abs() / g).abs() <= 1e-12;
    }
    check("zero-IC tangency closed form", ok);

    let rows = vec![escape_atlas_core::simulate::CriteriaRow {
        f: 0.01,
        repeat: 0,
        a_q: 10,
        a_e: 9,
        rel_diff: 1.0 / 9.0,
    }];
    let mut buf = Vec::new();
    io::write_criteria_csv(&mut buf, &rows).unwrap();
    let ok = io::read_criteria_csv(&buf[..])
        .map(|r| r == rows)
        .unwrap_or(false);
    check("csv round trip", ok);

    if !all_ok {
        bail!("selftest failed");
    }
    Ok(())
}
