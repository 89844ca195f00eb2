//! Epsilon sweeps against the `eps = 0` limit and log-log rate fits.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{RunConfig, SweepMode};
use crate::harness::manifest::Manifest;
use crate::harness::run::{auto_wkb_dt, Prepared};
use crate::nls::{default_dt, evolve_nls};
use crate::norms;
use crate::observables::Observables;
use crate::wkb::{evolve_wkb, DriftSource, WkbState};

/// Minimum acceptable fitted rate.
pub const SLOPE_THRESHOLD: f64 = 0.9;
/// Errors below this are indistinguishable from quadrature and roundoff.
pub const QUADRATURE_FLOOR: f64 = 1e-9;

pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_JSON: &str = "sweep.json";

/// Errors of one member run at `t = T`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub eps: f64,
    /// `|| |psi|^2 - rho_0 ||_{L^1}`.
    pub density_l1: Option<f64>,
    /// `|| J - rho_0 v_0 ||_{L^2}`.
    pub current_l2: Option<f64>,
    /// `|| a^eps - a_0 ||_{L^2}`.
    pub amplitude_l2: Option<f64>,
    pub wall_time_s: f64,
}

/// Least-squares fit `log err = slope log eps + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// All errors lie below [`QUADRATURE_FLOOR`], so the slope is noise.
    pub floor_limited: bool,
    /// Errors strictly decrease along the decreasing `eps` list.
    pub monotone: bool,
}

impl SlopeFit {
    pub fn passes(&self) -> bool {
        !self.floor_limited && self.monotone && self.slope >= SLOPE_THRESHOLD
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub eps: f64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub eps: Vec<f64>,
    pub t_final: f64,
    pub points: Vec<SweepPoint>,
    pub density_fit: Option<SlopeFit>,
    pub current_fit: Option<SlopeFit>,
    pub amplitude_fit: Option<SlopeFit>,
    pub reference_wall_time_s: f64,
    pub slope_threshold: f64,
    pub failures: Vec<SweepFailure>,
}

/// The `eps = 0` solution at `T`.
#[derive(Clone, Debug)]
pub struct LimitReference {
    pub amplitude: Vec<Complex64>,
    pub rho: Vec<f64>,
    /// `rho (v + grad S)`.
    pub flux: Vec<Vec<f64>>,
    pub t: f64,
}

/// Fit the rate of `errors` against `eps`.
pub fn fit_slope(eps: &[f64], errors: &[f64]) -> SlopeFit {
    let n = eps.len() as f64;
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.max(f64::MIN_POSITIVE).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    SlopeFit {
        slope,
        intercept: my - slope * mx,
        floor_limited: errors.iter().all(|e| *e < QUADRATURE_FLOOR),
        monotone: errors.windows(2).all(|w| w[1] < w[0]),
    }
}

/// Evolve the limit system from the WKB data of `prep` up to `t_final`.
pub fn limit_reference(prep: &Prepared, drift: &dyn DriftSource, t_final: f64) -> Result<LimitReference> {
    let params = prep.params.with_eps(0.0);
    let state0 = WkbState::from_amplitude(&prep.grid, &prep.amplitude, 0.0)?;
    let dt = auto_wkb_dt(&state0, drift, t_final)?;
    let fin = evolve_wkb(&state0, drift, &params, t_final, dt, usize::MAX, |_, _| {})?;
    let field = drift.sample(&prep.grid, fin.t)?;
    let grad_s = field.phase_gradient(&prep.grid, params.rotation);
    let rho = fin.density();
    let flux = fin
        .v
        .iter()
        .zip(&grad_s)
        .map(|(v, g)| v.iter().zip(g).zip(&rho).map(|((a, b), r)| r * (a + b)).collect())
        .collect();
    Ok(LimitReference {
        amplitude: fin.amplitude(),
        rho,
        flux,
        t: fin.t,
    })
}

fn nls_errors(prep: &Prepared, reference: &LimitReference, eps: f64, t_final: f64, dt: Option<f64>) -> Result<(f64, f64)> {
    let params = prep.params.with_eps(eps);
    let dt = dt.unwrap_or_else(|| default_dt(&params));
    let psi0 = prep.initial_wave(eps)?;
    let psi = evolve_nls(&psi0, &params, t_final, dt, usize::MAX, |_, _| {})?;
    let grid = &prep.grid;
    let density = norms::l1(grid, psi.values.iter().zip(&reference.rho).map(|(z, r)| z.norm_sqr() - r));
    let current = Observables::new(grid).current(&psi.values, eps);
    let sq: f64 = current
        .iter()
        .zip(&reference.flux)
        .map(|(j, f)| norms::l2(grid, j.iter().zip(f).map(|(a, b)| a - b)).powi(2))
        .sum();
    Ok((density, sq.sqrt()))
}

fn wkb_error(prep: &Prepared, drift: &dyn DriftSource, reference: &LimitReference, eps: f64, t_final: f64) -> Result<f64> {
    let params = prep.params.with_eps(eps);
    let state0 = WkbState::from_amplitude(&prep.grid, &prep.amplitude, eps)?;
    let dt = auto_wkb_dt(&state0, drift, t_final)?;
    let fin = evolve_wkb(&state0, drift, &params, t_final, dt, usize::MAX, |_, _| {})?;
    let diff: Vec<Complex64> = fin.amplitude().iter().zip(&reference.amplitude).map(|(a, b)| a - b).collect();
    Ok(norms::l2_complex(&prep.grid, &diff))
}

/// Run every `eps` of the list (in parallel) against one limit reference.
///
/// NLS members use `base.run.dt` (or the default step); WKB members use the
/// largest stable step. A failing member is recorded in `failures` and the
/// other results are kept.
pub fn epsilon_sweep(base: &RunConfig, eps_list: &[f64], t_final: f64, mode: SweepMode) -> Result<SweepResult> {
    if eps_list.len() < 3 {
        return Err(Error::config("sweep", "eps", "needs at least three values"));
    }
    if !eps_list.iter().all(|e| e.is_finite() && *e > 0.0) || !eps_list.windows(2).all(|w| w[1] < w[0]) {
        return Err(Error::config("sweep", "eps", "values must be positive and strictly decreasing"));
    }
    let prep = Prepared::new(base)?;
    let drift = prep.phase.drift_source(&prep.params, t_final)?;
    let start = Instant::now();
    let reference = limit_reference(&prep, drift.as_ref(), t_final)?;
    let reference_wall_time_s = start.elapsed().as_secs_f64();
    let outcomes: Vec<(SweepPoint, Option<SweepFailure>)> = eps_list
        .par_iter()
        .map(|&eps| {
            let start = Instant::now();
            let mut point = SweepPoint {
                eps,
                ..Default::default()
            };
            let mut failure = None;
            if mode != SweepMode::Wkb {
                match nls_errors(&prep, &reference, eps, t_final, base.run.dt) {
                    Ok((d, c)) => {
                        point.density_l1 = Some(d);
                        point.current_l2 = Some(c);
                    }
                    Err(e) => failure = Some(e.to_string()),
                }
            }
            if mode != SweepMode::Nls && failure.is_none() {
                match wkb_error(&prep, drift.as_ref(), &reference, eps, t_final) {
                    Ok(a) => point.amplitude_l2 = Some(a),
                    Err(e) => failure = Some(e.to_string()),
                }
            }
            point.wall_time_s = start.elapsed().as_secs_f64();
            (point, failure.map(|message| SweepFailure { eps, message }))
        })
        .collect();
    let (points, failures): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    let failures: Vec<SweepFailure> = failures.into_iter().flatten().collect();
    let fit = |get: fn(&SweepPoint) -> Option<f64>| -> Option<SlopeFit> {
        let vals: Option<Vec<f64>> = points.iter().map(get).collect();
        vals.map(|v| fit_slope(eps_list, &v))
    };
    Ok(SweepResult {
        eps: eps_list.to_vec(),
        t_final,
        density_fit: fit(|p| p.density_l1),
        current_fit: fit(|p| p.current_l2),
        amplitude_fit: fit(|p| p.amplitude_l2),
        points,
        reference_wall_time_s,
        slope_threshold: SLOPE_THRESHOLD,
        failures,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// Write `sweep.csv`, `sweep.json` and the manifest into `dir`.
pub fn write_sweep(dir: &Path, result: &SweepResult, config_toml: String) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut csv = String::from("eps,density_l1,current_l2,amplitude_l2,wall_time_s\n");
    for p in &result.points {
        csv.push_str(&format!(
            "{:.16e},{},{},{},{:.3}\n",
            p.eps,
            opt(p.density_l1),
            opt(p.current_l2),
            opt(p.amplitude_l2),
            p.wall_time_s
        ));
    }
    let csv_path = dir.join(SWEEP_CSV);
    fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    let json_path = dir.join(SWEEP_JSON);
    let json = serde_json::to_string_pretty(result).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))?;
    let mut manifest = Manifest::new("sweep", config_toml);
    manifest.add_artifact(dir, Path::new(SWEEP_CSV))?;
    manifest.add_artifact(dir, Path::new(SWEEP_JSON))?;
    manifest.note("slope_threshold", SLOPE_THRESHOLD);
    manifest.note("failures", result.failures.len());
    manifest.wall_time_s = result.reference_wall_time_s + result.points.iter().map(|p| p.wall_time_s).sum::<f64>();
    manifest.write(dir)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let eps = [0.25, 0.125, 0.0625, 0.03125];
        let errs: Vec<f64> = eps.iter().map(|e| 3.0 * e * e).collect();
        let f = fit_slope(&eps, &errs);
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.monotone && !f.floor_limited && f.passes());
    }

    #[test]
    fn floor_and_monotonicity_flags() {
        let eps = [0.25, 0.125, 0.0625];
        let f = fit_slope(&eps, &[1e-13, 2e-13, 1e-13]);
        assert!(f.floor_limited && !f.monotone && !f.passes());
    }
}
