//! Flat `key = value` run configuration with dotted sections.
//!
//! A reproduction recipe is one file; CLI flags override file keys. Lines
//! starting with `#` (or inline ` #` tails) are comments. Unknown keys are
//! rejected by name so typos fail loudly.

use anyhow::{anyhow, bail, Context, Result};
use escape_atlas_core::action_angle::SlowState;
use escape_atlas_core::model::{ModelParams, PhasePoint};
use escape_atlas_core::slow_flow::CouplingMode;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// Initial condition, in exactly one representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IcSpec {
    Plane { q: f64, p: f64 },
    Slow { gamma: f64, xi: f64 },
}

impl IcSpec {
    pub fn as_slow(&self, psi: f64) -> Result<SlowState> {
        match *self {
            IcSpec::Slow { gamma, xi } => SlowState::new(gamma, xi).map_err(|e| anyhow!("ic: {e}")),
            IcSpec::Plane { q, p } => {
                escape_atlas_core::action_angle::slow_coords_of_ic(&PhasePoint::new(q, p), psi)
                    .map_err(|e| anyhow!("ic: {e}"))
            }
        }
    }

    pub fn as_plane(&self, psi: f64) -> Result<PhasePoint> {
        match *self {
            IcSpec::Plane { q, p } => Ok(PhasePoint::new(q, p)),
            IcSpec::Slow { gamma, xi } => {
                let theta = gamma + psi;
                let q = escape_atlas_core::action_angle::q_of_angle(theta, xi)
                    .map_err(|e| anyhow!("ic: {e}"))?;
                let p = escape_atlas_core::action_angle::p_of_angle(theta, xi)
                    .map_err(|e| anyhow!("ic: {e}"))?;
                Ok(PhasePoint::new(q, p))
            }
        }
    }
}

/// Everything one run needs; every field maps to a dotted config key.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub f: f64,
    pub omega: f64,
    pub psi: f64,
    pub xi_max: f64,
    pub coupling: CouplingMode,
    pub ic: IcSpec,
    /// Strictly increasing Ω grid (`sweep.omega = start:stop:count`).
    pub sweep_omega: Option<Vec<f64>>,
    /// Truncation levels to repeat an experiment over (`sweep.xi_max = a,b,c`).
    pub sweep_xi_max: Option<Vec<f64>>,
    pub horizon_ec: f64,
    pub resolution: usize,
    pub seed: u64,
    pub workers: usize,
    pub out_dir: String,
    pub verify: bool,
    pub fast: bool,
    pub strobe_n_ics: usize,
    pub strobe_n_iters: usize,
    pub appendix_f_start: f64,
    pub appendix_f_step: f64,
    pub appendix_f_count: usize,
    pub appendix_n_ics: usize,
    pub appendix_n_repeats: usize,
    pub appendix_resolution: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            f: 0.01,
            omega: 0.9,
            psi: std::f64::consts::PI,
            xi_max: 0.22,
            coupling: CouplingMode::ClosedForm,
            ic: IcSpec::Plane { q: 0.0, p: 0.0 },
            sweep_omega: None,
            sweep_xi_max: None,
            horizon_ec: 3000.0,
            resolution: 200,
            seed: 42,
            workers: 0,
            out_dir: "out".to_string(),
            verify: false,
            fast: false,
            strobe_n_ics: 100,
            strobe_n_iters: 3000,
            appendix_f_start: 0.001,
            appendix_f_step: 0.005,
            appendix_f_count: 15,
            appendix_n_ics: 10_000,
            appendix_n_repeats: 5,
            appendix_resolution: 300,
        }
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    // start:stop:count (inclusive endpoints, strictly increasing)
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("grid must be start:stop:count, got {spec:?}");
    }
    let start: f64 = parts[0].trim().parse().context("grid start")?;
    let stop: f64 = parts[1].trim().parse().context("grid stop")?;
    let count: usize = parts[2].trim().parse().context("grid count")?;
    if count < 1 || (count > 1 && stop <= start) {
        bail!("grid must be strictly increasing with count >= 1, got {spec:?}");
    }
    Ok((0..count)
        .map(|i| {
            if count == 1 {
                start
            } else {
                start + (stop - start) * i as f64 / (count - 1) as f64
            }
        })
        .collect())
}

fn parse_list(spec: &str) -> Result<Vec<f64>> {
    let vals: Result<Vec<f64>> = spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("list item {s:?}"))
        })
        .collect();
    let vals = vals?;
    if vals.windows(2).any(|w| w[1] <= w[0]) {
        bail!("list values must be strictly increasing, got {spec:?}");
    }
    Ok(vals)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut ic_plane: (Option<f64>, Option<f64>) = (None, None);
        let mut ic_slow: (Option<f64>, Option<f64>) = (None, None);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            let ctx = |what: &str| format!("line {}: key {key} ({what})", lineno + 1);
            match key {
                "model.f" => cfg.f = value.parse().with_context(|| ctx("float"))?,
                "model.omega" => cfg.omega = value.parse().with_context(|| ctx("float"))?,
                "model.psi" => cfg.psi = value.parse().with_context(|| ctx("float"))?,
                "model.xi_max" => cfg.xi_max = value.parse().with_context(|| ctx("float"))?,
                "model.coupling" => {
                    cfg.coupling = match value {
                        "closed-form" => CouplingMode::ClosedForm,
                        "fourier" => CouplingMode::Fourier,
                        other => bail!(
                            "line {}: model.coupling must be closed-form or fourier, got {other:?}",
                            lineno + 1
                        ),
                    }
                }
                "ic.q" => ic_plane.0 = Some(value.parse().with_context(|| ctx("float"))?),
                "ic.p" => ic_plane.1 = Some(value.parse().with_context(|| ctx("float"))?),
                "ic.gamma" => ic_slow.0 = Some(value.parse().with_context(|| ctx("float"))?),
                "ic.xi" => ic_slow.1 = Some(value.parse().with_context(|| ctx("float"))?),
                "sweep.omega" => cfg.sweep_omega = Some(parse_grid(value)?),
                "sweep.xi_max" => cfg.sweep_xi_max = Some(parse_list(value)?),
                "run.horizon_ec" => cfg.horizon_ec = value.parse().with_context(|| ctx("float"))?,
                "run.resolution" => cfg.resolution = value.parse().with_context(|| ctx("int"))?,
                "run.seed" => cfg.seed = value.parse().with_context(|| ctx("u64"))?,
                "run.workers" => cfg.workers = value.parse().with_context(|| ctx("int"))?,
                "run.out_dir" => cfg.out_dir = value.to_string(),
                "run.verify" => cfg.verify = value.parse().with_context(|| ctx("bool"))?,
                "run.fast" => cfg.fast = value.parse().with_context(|| ctx("bool"))?,
                "strobe.n_ics" => cfg.strobe_n_ics = value.parse().with_context(|| ctx("int"))?,
                "strobe.n_iters" => {
                    cfg.strobe_n_iters = value.parse().with_context(|| ctx("int"))?
                }
                "appendix.f_start" => {
                    cfg.appendix_f_start = value.parse().with_context(|| ctx("float"))?
                }
                "appendix.f_step" => {
                    cfg.appendix_f_step = value.parse().with_context(|| ctx("float"))?
                }
                "appendix.f_count" => {
                    cfg.appendix_f_count = value.parse().with_context(|| ctx("int"))?
                }
                "appendix.n_ics" => {
                    cfg.appendix_n_ics = value.parse().with_context(|| ctx("int"))?
                }
                "appendix.n_repeats" => {
                    cfg.appendix_n_repeats = value.parse().with_context(|| ctx("int"))?
                }
                "appendix.resolution" => {
                    cfg.appendix_resolution = value.parse().with_context(|| ctx("int"))?
                }
                other => bail!("line {}: unknown key {other:?}", lineno + 1),
            }
        }
        match (ic_plane, ic_slow) {
            ((None, None), (None, None)) => {}
            ((Some(q), Some(p)), (None, None)) => cfg.ic = IcSpec::Plane { q, p },
            ((None, None), (Some(gamma), Some(xi))) => cfg.ic = IcSpec::Slow { gamma, xi },
            _ => bail!("ic must be given as exactly one of (ic.q, ic.p) or (ic.gamma, ic.xi)"),
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ModelParams::new(self.f, self.omega, self.psi, self.xi_max)
            .map_err(|e| anyhow!("model: {e}"))?;
        if let Some(grid) = &self.sweep_omega {
            if grid.iter().any(|&w| w <= 0.0) {
                bail!("sweep.omega values must be positive");
            }
        }
        if let Some(list) = &self.sweep_xi_max {
            for &x in list {
                if !(0.0 < x && x <= 0.25) {
                    bail!("sweep.xi_max value {x} outside (0, 1/4]");
                }
            }
        }
        if self.resolution < 2 {
            bail!("run.resolution must be at least 2");
        }
        Ok(())
    }

    /// Canonical serialization; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut kv: BTreeMap<&str, String> = BTreeMap::new();
        kv.insert("model.f", format!("{:.17e}", self.f));
        kv.insert("model.omega", format!("{:.17e}", self.omega));
        kv.insert("model.psi", format!("{:.17e}", self.psi));
        kv.insert("model.xi_max", format!("{:.17e}", self.xi_max));
        kv.insert(
            "model.coupling",
            match self.coupling {
                CouplingMode::ClosedForm => "closed-form".to_string(),
                CouplingMode::Fourier => "fourier".to_string(),
            },
        );
        match self.ic {
            IcSpec::Plane { q, p } => {
                kv.insert("ic.q", format!("{q:.17e}"));
                kv.insert("ic.p", format!("{p:.17e}"));
            }
            IcSpec::Slow { gamma, xi } => {
                kv.insert("ic.gamma", format!("{gamma:.17e}"));
                kv.insert("ic.xi", format!("{xi:.17e}"));
            }
        }
        if let Some(grid) = &self.sweep_omega {
            let (start, stop, count) = (grid[0], *grid.last().unwrap(), grid.len());
            kv.insert("sweep.omega", format!("{start:.17e}:{stop:.17e}:{count}"));
        }
        if let Some(list) = &self.sweep_xi_max {
            let items: Vec<String> = list.iter().map(|x| format!("{x:.17e}")).collect();
            kv.insert("sweep.xi_max", items.join(","));
        }
        kv.insert("run.horizon_ec", format!("{:.17e}", self.horizon_ec));
        kv.insert("run.resolution", self.resolution.to_string());
        kv.insert("run.seed", self.seed.to_string());
        kv.insert("run.workers", self.workers.to_string());
        kv.insert("run.out_dir", self.out_dir.clone());
        kv.insert("run.verify", self.verify.to_string());
        kv.insert("run.fast", self.fast.to_string());
        kv.insert("strobe.n_ics", self.strobe_n_ics.to_string());
        kv.insert("strobe.n_iters", self.strobe_n_iters.to_string());
        kv.insert(
            "appendix.f_start",
            format!("{:.17e}", self.appendix_f_start),
        );
        kv.insert("appendix.f_step", format!("{:.17e}", self.appendix_f_step));
        kv.insert("appendix.f_count", self.appendix_f_count.to_string());
        kv.insert("appendix.n_ics", self.appendix_n_ics.to_string());
        kv.insert("appendix.n_repeats", self.appendix_n_repeats.to_string());
        kv.insert("appendix.resolution", self.appendix_resolution.to_string());
        let mut out = String::new();
        for (k, v) in kv {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.f, self.omega, self.psi, self.xi_max).map_err(|e| anyhow!("{e}"))
    }

    pub fn params_with(&self, f: f64, omega: f64, xi_max: f64) -> Result<ModelParams> {
        ModelParams::new(f, omega, self.psi, xi_max).map_err(|e| anyhow!("{e}"))
    }

    /// Effective horizon / resolution after the `--fast` profile.
    pub fn effective_horizon(&self) -> f64 {
        if self.fast {
            self.horizon_ec.min(500.0)
        } else {
            self.horizon_ec
        }
    }

    pub fn effective_resolution(&self) -> usize {
        if self.fast {
            self.resolution.min(100)
        } else {
            self.resolution
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_serialize_round_trip() {
        let text = "
# reproduction recipe
model.f = 0.0478
model.omega = 0.76
model.psi = 3.141592653589793
model.xi_max = 0.235
ic.gamma = 0.0
ic.xi = 0.0
sweep.omega = 0.6:1.2:61
run.horizon_ec = 3000
run.seed = 7
";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.f, 0.0478);
        assert!(matches!(cfg.ic, IcSpec::Slow { .. }));
        assert_eq!(cfg.sweep_omega.as_ref().unwrap().len(), 61);
        let round = RunConfig::parse(&cfg.serialize()).unwrap();
        assert_eq!(cfg, round);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse("model.freq = 1.0").unwrap_err();
        assert!(err.to_string().contains("model.freq"), "{err}");
    }

    #[test]
    fn conflicting_ic_rejected() {
        let err =
            RunConfig::parse("ic.q = 0.0\nic.p = 0.0\nic.gamma = 1.0\nic.xi = 0.1").unwrap_err();
        assert!(err.to_string().contains("exactly one"), "{err}");
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("1:2:3").unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_grid("0.9:0.9:1").unwrap(), vec![0.9]);
        assert!(parse_grid("2:1:5").is_err());
        assert!(parse_list("0.1,0.2,0.15").is_err());
    }
}
