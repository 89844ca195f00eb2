//! Run configuration: a sectioned TOML document with `[sim]`, `[grid]`,
//! `[run]`, `[init]`, `[phase]` and an optional `[sweep]` table.
//!
//! ```toml
//! [sim]
//! eps = 0.125
//! rotation = 0.5
//! trap = [1.0, 1.0]
//!
//! [grid]
//! points = 256
//! half_extent = 8.0
//!
//! [run]
//! t_final = 0.5
//! ```
//!
//! Unknown keys and missing required keys are errors naming the section
//! and key. Command line overrides `--section.key=value` are applied to the
//! document before validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::params::{Nonlinearity, SimParams};
use crate::rays::QuadraticPhase;

/// Default observer stride, in steps.
pub const DEFAULT_STRIDE: usize = 100;
/// Default ray output interval.
pub const DEFAULT_RAY_DT: f64 = 1e-2;
/// Default number of rays per axis for `run-rays`.
pub const DEFAULT_RAYS_PER_AXIS: usize = 8;
/// Fraction of the largest stable step used when `dt` is not given for the
/// WKB and hydrodynamic solvers.
pub const AUTO_DT_SAFETY: f64 = 0.9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    #[default]
    Nls,
    Wkb,
    Hydro,
    Rays,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Nls => "nls",
            Solver::Wkb => "wkb",
            Solver::Hydro => "hydro",
            Solver::Rays => "rays",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NonlinearityKind {
    #[default]
    Cubic,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub eps: f64,
    #[serde(default)]
    pub rotation: f64,
    pub trap: Vec<f64>,
    #[serde(default)]
    pub nonlinearity: NonlinearityKind,
    #[serde(default = "one")]
    pub coupling: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Points per axis, a power of two.
    pub points: usize,
    /// Half width `L` of the box `[-L, L)^d`.
    pub half_extent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub solver: Solver,
    pub t_final: f64,
    /// Step size; chosen per solver when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "yes")]
    pub snapshots: bool,
    #[serde(default = "default_rays_per_axis")]
    pub rays_per_axis: usize,
    /// Half width of the square of ray launch points; `L / 2` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ray_extent: Option<f64>,
}

/// Initial amplitude `a_in`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitSpec {
    /// Unit-mass Gaussian `exp(-|x - center|^2 / (2 width^2))`.
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        #[serde(default = "reference_width")]
        width: f64,
    },
    /// Unit-mass vortex `r^|m| exp(-r^2 / (2 width^2)) exp(i m theta)`.
    Vortex {
        winding: i32,
        #[serde(default = "one")]
        width: f64,
    },
    /// Complex RSFW1 snapshot.
    File { path: PathBuf },
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec::Gaussian {
            center: None,
            width: reference_width(),
        }
    }
}

/// Initial phase `Phi_in`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PhaseSpec {
    #[default]
    Zero,
    /// `1/2 x^T sigma x + b . x + c` with `sigma` row-major.
    Quadratic {
        sigma: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<Vec<f64>>,
        #[serde(default)]
        c: f64,
    },
    /// Real RSFW1 snapshot of the phase samples.
    File { path: PathBuf },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Nls,
    Wkb,
    #[default]
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Strictly decreasing list of at least three values.
    pub eps: Vec<f64>,
    #[serde(default)]
    pub mode: SweepMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sim: SimSection,
    pub grid: GridSection,
    pub run: RunSection,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub phase: PhaseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn reference_width() -> f64 {
    std::f64::consts::FRAC_1_SQRT_2
}

fn default_stride() -> usize {
    DEFAULT_STRIDE
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_rays_per_axis() -> usize {
    DEFAULT_RAYS_PER_AXIS
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_with_overrides(text, &[])
}

/// Parse, apply `--section.key=value` overrides, then validate.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let text = if overrides.is_empty() {
        text.to_string()
    } else {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| syntax_error(text, &e))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::to_string(&table).map_err(|e| Error::ConfigSyntax(e.to_string()))?
    };
    let cfg: RunConfig = toml::from_str(&text).map_err(|e| syntax_error(&text, &e))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_with_overrides(&text, overrides)?;
    cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    cfg.validate()?;
    Ok(cfg)
}

/// Apply one `--section.key=value` (or `section.key=value`) override.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let body = spec.strip_prefix("--").unwrap_or(spec);
    let (path, raw) = body
        .split_once('=')
        .ok_or_else(|| Error::ConfigSyntax(format!("override `{spec}` is not of the form --section.key=value")))?;
    let (section, key) = path
        .split_once('.')
        .ok_or_else(|| Error::ConfigSyntax(format!("override `{spec}` lacks a section")))?;
    let value = parse_value(raw);
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let toml::Value::Table(t) = entry else {
        return Err(Error::config(section, key, "section is not a table"));
    };
    t.insert(key.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Name the section and key of a deserialization error.
fn syntax_error(text: &str, err: &toml::de::Error) -> Error {
    let message = err.message().to_string();
    let offset = err.span().map(|s| s.start.min(text.len())).unwrap_or(0);
    let before = &text[..offset];
    let section = before
        .lines()
        .filter_map(|l| {
            let l = l.trim();
            l.strip_prefix('[').and_then(|r| r.strip_suffix(']')).map(str::trim)
        })
        .next_back()
        .unwrap_or("")
        .to_string();
    let key = message
        .split('`')
        .nth(1)
        .map(str::to_string)
        .or_else(|| {
            let line_start = before.rfind('\n').map(|i| i + 1).unwrap_or(0);
            let line = text[line_start..].lines().next().unwrap_or("");
            line.split_once('=').map(|(k, _)| k.trim().to_string())
        })
        .unwrap_or_default();
    if section.is_empty() && key.is_empty() {
        Error::ConfigSyntax(message)
    } else {
        Error::Config {
            section,
            key,
            reason: message,
        }
    }
}

fn check(ok: bool, section: &str, key: &str, reason: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(section, key, reason()))
    }
}

impl RunConfig {
    pub fn dim(&self) -> usize {
        self.sim.trap.len()
    }

    /// Check every constraint, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        let s = &self.sim;
        let limit_ok = matches!(self.run.solver, Solver::Wkb | Solver::Hydro | Solver::Rays);
        check(
            s.eps.is_finite() && (s.eps > 0.0 || (limit_ok && s.eps == 0.0)),
            "sim",
            "eps",
            || format!("{} must be positive", s.eps),
        )?;
        check(s.rotation.is_finite() && s.rotation >= 0.0, "sim", "rotation", || {
            format!("{} must be >= 0", s.rotation)
        })?;
        check((2..=3).contains(&s.trap.len()), "sim", "trap", || {
            format!("need 2 or 3 frequencies, got {}", s.trap.len())
        })?;
        check(s.trap.iter().all(|w| w.is_finite() && *w >= 0.0), "sim", "trap", || {
            "frequencies must be >= 0".into()
        })?;
        check(s.coupling.is_finite() && s.coupling > 0.0, "sim", "coupling", || {
            format!("{} must be > 0", s.coupling)
        })?;
        let g = &self.grid;
        check(g.points >= 8 && g.points.is_power_of_two(), "grid", "points", || {
            format!("{} is not a power of two >= 8", g.points)
        })?;
        check(g.half_extent.is_finite() && g.half_extent > 0.0, "grid", "half_extent", || {
            format!("{} must be > 0", g.half_extent)
        })?;
        let r = &self.run;
        check(r.t_final.is_finite() && r.t_final >= 0.0, "run", "t_final", || {
            format!("{} must be >= 0", r.t_final)
        })?;
        if let Some(dt) = r.dt {
            check(dt.is_finite() && dt > 0.0, "run", "dt", || format!("{dt} must be > 0"))?;
        }
        check(r.stride >= 1, "run", "stride", || "must be >= 1".into())?;
        check(r.rays_per_axis >= 1, "run", "rays_per_axis", || "must be >= 1".into())?;
        if let Some(e) = r.ray_extent {
            check(e.is_finite() && e > 0.0, "run", "ray_extent", || format!("{e} must be > 0"))?;
        }
        let d = self.dim();
        match &self.init {
            InitSpec::Gaussian { center, width } => {
                if let Some(c) = center {
                    check(c.len() == d, "init", "center", || format!("needs {d} components"))?;
                }
                check(width.is_finite() && *width > 0.0, "init", "width", || format!("{width} must be > 0"))?;
            }
            InitSpec::Vortex { width, .. } => {
                check(d == 2, "init", "kind", || "vortex data needs d = 2".into())?;
                check(width.is_finite() && *width > 0.0, "init", "width", || format!("{width} must be > 0"))?;
            }
            InitSpec::File { path } => {
                check(path.exists(), "init", "path", || format!("{} does not exist", path.display()))?;
            }
        }
        match &self.phase {
            PhaseSpec::Zero => {}
            PhaseSpec::Quadratic { sigma, b, c } => {
                check(sigma.len() == d * d, "phase", "sigma", || format!("needs {} entries", d * d))?;
                if let Some(b) = b {
                    check(b.len() == d, "phase", "b", || format!("needs {d} entries"))?;
                }
                check(c.is_finite(), "phase", "c", || "must be finite".into())?;
                self.quadratic_phase()
                    .map_err(|e| Error::config("phase", "sigma", e.to_string()))?;
            }
            PhaseSpec::File { path } => {
                check(path.exists(), "phase", "path", || format!("{} does not exist", path.display()))?;
            }
        }
        if let Some(sw) = &self.sweep {
            check(sw.eps.len() >= 3, "sweep", "eps", || "needs at least three values".into())?;
            check(sw.eps.iter().all(|e| e.is_finite() && *e > 0.0), "sweep", "eps", || {
                "values must be positive".into()
            })?;
            check(sw.eps.windows(2).all(|w| w[1] < w[0]), "sweep", "eps", || {
                "values must be strictly decreasing".into()
            })?;
        }
        Ok(())
    }

    /// Make relative file paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let InitSpec::File { path } = &mut self.init {
            fix(path);
        }
        if let PhaseSpec::File { path } = &mut self.phase {
            fix(path);
        }
    }

    pub fn params(&self) -> Result<SimParams> {
        let nl = match self.sim.nonlinearity {
            NonlinearityKind::Cubic => Nonlinearity::Cubic {
                coupling: self.sim.coupling,
            },
            NonlinearityKind::Linear => Nonlinearity::Linear,
        };
        let p = SimParams {
            eps: self.sim.eps,
            rotation: self.sim.rotation,
            trap: self.sim.trap.clone(),
            nonlinearity: nl,
        };
        p.validate_limit()?;
        Ok(p)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::uniform(self.dim(), self.grid.points, self.grid.half_extent)
    }

    /// The initial phase when it is zero or quadratic.
    pub fn quadratic_phase(&self) -> Result<Option<QuadraticPhase>> {
        let d = self.dim();
        match &self.phase {
            PhaseSpec::Zero => Ok(Some(QuadraticPhase::zero(d))),
            PhaseSpec::Quadratic { sigma, b, c } => {
                let b = b.clone().unwrap_or_else(|| vec![0.0; d]);
                QuadraticPhase::new(d, sigma, &b, *c).map(Some)
            }
            PhaseSpec::File { .. } => Ok(None),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[sim]\neps = 0.125\ntrap = [1.0, 1.0]\n\n[grid]\npoints = 64\nhalf_extent = 8.0\n\n[run]\nt_final = 0.5\n";

    #[test]
    fn minimal_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.run.stride, DEFAULT_STRIDE);
        assert_eq!(c.run.dt, None);
        assert_eq!(c.run.solver, Solver::Nls);
        assert_eq!(c.phase, PhaseSpec::Zero);
        assert_eq!(c.sim.rotation, 0.0);
        assert_eq!(c.params().unwrap().nonlinearity, Nonlinearity::Cubic { coupling: 1.0 });
    }

    #[test]
    fn negative_eps_names_key() {
        let text = MINIMAL.replace("eps = 0.125", "eps = -1");
        match parse_config(&text) {
            Err(Error::Config { section, key, .. }) => {
                assert_eq!((section.as_str(), key.as_str()), ("sim", "eps"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_and_missing_keys() {
        let text = MINIMAL.replace("half_extent", "half_extnt");
        match parse_config(&text) {
            Err(Error::Config { section, key, .. }) => {
                assert_eq!(section, "grid");
                assert!(key == "half_extnt" || key == "half_extent", "{key}");
            }
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("t_final = 0.5\n", "stride = 3\n");
        match parse_config(&text) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "t_final"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_apply() {
        let c = parse_with_overrides(
            MINIMAL,
            &["--sim.rotation=0.5".into(), "--run.output=elsewhere".into(), "--init.kind=vortex".into(), "--init.winding=1".into()],
        )
        .unwrap();
        assert_eq!(c.sim.rotation, 0.5);
        assert_eq!(c.run.output, PathBuf::from("elsewhere"));
        assert_eq!(c.init, InitSpec::Vortex { winding: 1, width: 1.0 });
        assert!(parse_with_overrides(MINIMAL, &["--sim.eps=0".into()]).is_err());
    }

    #[test]
    fn roundtrip() {
        let text = format!("{MINIMAL}\n[phase]\nkind = \"quadratic\"\nsigma = [0.5, 0.1, 0.1, -0.2]\n\n[sweep]\neps = [0.25, 0.125, 0.0625]\n");
        let c = parse_config(&text).unwrap();
        assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn sweep_must_decrease() {
        let text = format!("{MINIMAL}\n[sweep]\neps = [0.25, 0.5, 0.0625]\n");
        assert!(matches!(parse_config(&text), Err(Error::Config { .. })));
    }

    #[test]
    fn asymmetric_phase_rejected() {
        let text = format!("{MINIMAL}\n[phase]\nkind = \"quadratic\"\nsigma = [0.5, 0.1, 0.3, -0.2]\n");
        assert!(parse_config(&text).is_err());
    }
}
