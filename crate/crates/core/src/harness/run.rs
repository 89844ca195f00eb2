//! Single runs: build the initial data, drive one solver and write the
//! observables CSV, snapshots and manifest into the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{boundary_max, WaveField};
use crate::grid::GridSpec;
use crate::harness::config::{InitSpec, PhaseSpec, RunConfig, Solver, AUTO_DT_SAFETY};
use crate::harness::manifest::Manifest;
use crate::harness::phase::SampledPhase;
use crate::init::{gaussian, make_vortex_init, wkb_assemble};
use crate::nls::{default_dt, evolve_nls};
use crate::observables::{self, ObservableRecord, Observables};
use crate::params::SimParams;
use crate::rays::{self, InitialPhase, QuadraticPhase, Ray, SHOOTING_STEP};
use crate::snapshot::Snapshot;
use crate::wkb::{self, evolve_hydro, evolve_wkb, DriftSource, HydroState, QuadraticDrift, RayDrift, WkbState};

pub const OBSERVABLES_FILE: &str = "observables.csv";
pub const RAYS_FILE: &str = "rays.csv";

/// Sampling interval of the quadratic phase coefficients.
const PHASE_SAMPLE_DT: f64 = 1e-2;

/// Initial phase in the representation the solvers need.
#[derive(Clone, Debug)]
pub enum PhaseInit {
    Quadratic(QuadraticPhase),
    Sampled(SampledPhase),
}

impl PhaseInit {
    pub fn as_initial(&self) -> &dyn InitialPhase {
        match self {
            PhaseInit::Quadratic(q) => q,
            PhaseInit::Sampled(s) => s,
        }
    }

    pub fn samples(&self, grid: &GridSpec) -> Vec<f64> {
        match self {
            PhaseInit::Quadratic(q) => grid.sample(|x| q.value(x)),
            PhaseInit::Sampled(s) => s.samples().to_vec(),
        }
    }

    /// `grad Phi_in` per axis.
    pub fn velocity(&self, grid: &GridSpec) -> Vec<Vec<f64>> {
        match self {
            PhaseInit::Quadratic(q) => {
                let g = grid.sample(|x| q.gradient(x));
                (0..grid.dim()).map(|i| g.iter().map(|v| v[i]).collect()).collect()
            }
            PhaseInit::Sampled(s) => s.gradient_samples().to_vec(),
        }
    }

    /// Drift source covering `[0, t_final]`.
    pub fn drift_source(&self, params: &SimParams, t_final: f64) -> Result<Box<dyn DriftSource>> {
        match self {
            PhaseInit::Quadratic(q) => {
                let h = PHASE_SAMPLE_DT.min(t_final.max(f64::MIN_POSITIVE));
                Ok(Box::new(QuadraticDrift::new(q, params, h, t_final.max(h))?))
            }
            PhaseInit::Sampled(s) => Ok(Box::new(RayDrift::new(s.clone(), params, SHOOTING_STEP))),
        }
    }
}

/// Grid, parameters and initial data of a configuration.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub grid: GridSpec,
    pub params: SimParams,
    pub amplitude: Vec<Complex64>,
    pub phase: PhaseInit,
}

impl Prepared {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let grid = cfg.grid()?;
        let params = cfg.params()?;
        let amplitude = match &cfg.init {
            InitSpec::Gaussian { center, width } => {
                let c = center.clone().unwrap_or_else(|| vec![0.0; grid.dim()]);
                gaussian(&grid, &c, *width)
            }
            InitSpec::Vortex { winding, width } => make_vortex_init(&grid, *winding, *width)?,
            InitSpec::File { path } => {
                let snap = Snapshot::read(path)?;
                snap.grid.same_as(&grid)?;
                snap.values
            }
        };
        let phase = match cfg.quadratic_phase()? {
            Some(q) => PhaseInit::Quadratic(q),
            None => {
                let PhaseSpec::File { path } = &cfg.phase else {
                    unreachable!("non-quadratic phases come from files")
                };
                let snap = Snapshot::read(path)?;
                snap.grid.same_as(&grid)?;
                PhaseInit::Sampled(SampledPhase::new(&grid, snap.real_part()))
            }
        };
        Ok(Self {
            grid,
            params,
            amplitude,
            phase,
        })
    }

    /// `psi_in = a_in exp(i Phi_in / eps)`.
    pub fn initial_wave(&self, eps: f64) -> Result<WaveField> {
        wkb_assemble(&self.grid, &self.amplitude, &self.phase.samples(&self.grid), eps)
    }
}

/// Largest stable WKB step, shrunk so that it divides `t_final`.
pub fn auto_wkb_dt(state: &WkbState, drift: &dyn DriftSource, t_final: f64) -> Result<f64> {
    let wmax = drift.max_speed(&state.grid, state.t, state.t + t_final)?;
    let (adv, disp) = wkb::stability_limits(state, wmax);
    let dt = AUTO_DT_SAFETY * adv.min(disp);
    let dt = if dt.is_finite() { dt } else { 1e-2 };
    Ok(if t_final > 0.0 {
        t_final / (t_final / dt).ceil()
    } else {
        dt
    })
}

/// Result of [`run`].
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub records: Vec<ObservableRecord>,
    pub manifest: Manifest,
}

struct Sink<'a> {
    dir: &'a Path,
    snapshots: bool,
    files: Vec<PathBuf>,
    records: Vec<ObservableRecord>,
    boundary: f64,
    failure: Option<Error>,
}

impl Sink<'_> {
    fn snapshot(&mut self, name: String, snap: Snapshot) {
        if !self.snapshots || self.failure.is_some() {
            return;
        }
        let file = PathBuf::from(name);
        match snap.write(&self.dir.join(&file)) {
            Ok(()) => self.files.push(file),
            Err(e) => self.failure = Some(e),
        }
    }
}

/// Execute the configured solver and write its artifacts.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let prep = Prepared::new(cfg)?;
    let dir = cfg.run.output.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut manifest = Manifest::new(&format!("run-{}", cfg.run.solver.name()), cfg.to_toml());
    let mut sink = Sink {
        dir: &dir,
        snapshots: cfg.run.snapshots,
        files: Vec::new(),
        records: Vec::new(),
        boundary: 0.0,
        failure: None,
    };
    match cfg.run.solver {
        Solver::Nls => run_nls(cfg, &prep, &mut sink, &mut manifest)?,
        Solver::Wkb => run_wkb(cfg, &prep, &mut sink, &mut manifest)?,
        Solver::Hydro => run_hydro(cfg, &prep, &mut sink, &mut manifest)?,
        Solver::Rays => run_rays(cfg, &prep, &mut sink, &mut manifest)?,
    }
    if let Some(e) = sink.failure.take() {
        return Err(e);
    }
    if cfg.run.solver != Solver::Rays {
        let path = dir.join(OBSERVABLES_FILE);
        let mut buf = Vec::new();
        observables::write_csv(&mut buf, &sink.records).map_err(|e| Error::io(&path, e))?;
        fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
        manifest.add_artifact(&dir, Path::new(OBSERVABLES_FILE))?;
        if let (Some(first), Some(last)) = (sink.records.first(), sink.records.last()) {
            manifest.note("mass_initial", first.mass);
            manifest.note("mass_final", last.mass);
            manifest.note("energy_initial", first.energy);
            manifest.note("energy_final", last.energy);
        }
        manifest.note("boundary_max", sink.boundary);
    }
    for f in &sink.files {
        manifest.add_artifact(&dir, f)?;
    }
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    manifest.write(&dir)?;
    let records = std::mem::take(&mut sink.records);
    drop(sink);
    Ok(RunOutcome {
        dir,
        records,
        manifest,
    })
}

fn run_nls(cfg: &RunConfig, prep: &Prepared, sink: &mut Sink, manifest: &mut Manifest) -> Result<()> {
    let params = &prep.params;
    let dt = cfg.run.dt.unwrap_or_else(|| default_dt(params));
    let psi0 = prep.initial_wave(params.eps)?;
    let obs = Observables::new(&prep.grid);
    evolve_nls(&psi0, params, cfg.run.t_final, dt, cfg.run.stride, |step, psi| {
        sink.records.push(obs.record(psi, params));
        sink.boundary = sink.boundary.max(psi.boundary_max());
        sink.snapshot(format!("psi_{step:06}.rsfw"), Snapshot::from_wave(psi));
    })?;
    manifest.note("dt", dt);
    Ok(())
}

fn wkb_snapshots(sink: &mut Sink, step: usize, s: &WkbState) {
    let g = &s.grid;
    sink.snapshot(format!("alpha_{step:06}.rsfw"), Snapshot::from_real(g, &s.alpha, s.eps, s.t, "alpha"));
    sink.snapshot(format!("beta_{step:06}.rsfw"), Snapshot::from_real(g, &s.beta, s.eps, s.t, "beta"));
    for (i, v) in s.v.iter().enumerate() {
        let tag = format!("v{}", i + 1);
        sink.snapshot(format!("{tag}_{step:06}.rsfw"), Snapshot::from_real(g, v, s.eps, s.t, &tag));
    }
    if let Some(phi) = &s.phi {
        sink.snapshot(format!("phi_{step:06}.rsfw"), Snapshot::from_real(g, phi, s.eps, s.t, "phi"));
    }
}

fn run_wkb(cfg: &RunConfig, prep: &Prepared, sink: &mut Sink, manifest: &mut Manifest) -> Result<()> {
    let params = &prep.params;
    let grid = &prep.grid;
    let t_final = cfg.run.t_final;
    let drift = prep.phase.drift_source(params, t_final)?;
    let state0 = WkbState::from_amplitude(grid, &prep.amplitude, params.eps)?;
    let dt = match cfg.run.dt {
        Some(dt) => dt,
        None => auto_wkb_dt(&state0, drift.as_ref(), t_final)?,
    };
    let obs = Observables::new(grid);
    evolve_wkb(&state0, drift.as_ref(), params, t_final, dt, cfg.run.stride, |step, s| {
        if sink.failure.is_some() {
            return;
        }
        let field = match drift.sample(grid, s.t) {
            Ok(f) => f,
            Err(e) => {
                sink.failure = Some(e);
                return;
            }
        };
        let record = if s.eps > 0.0 {
            match s.assemble(&field) {
                Ok(psi) => obs.record(&psi, params),
                Err(e) => {
                    sink.failure = Some(e);
                    return;
                }
            }
        } else {
            let grad_s = field.phase_gradient(grid, params.rotation);
            let vel: Vec<Vec<f64>> = s
                .v
                .iter()
                .zip(&grad_s)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect();
            let mut r = obs.record_limit(&s.density(), &vel, params, s.t);
            r.t = s.t;
            r
        };
        sink.records.push(record);
        sink.boundary = sink
            .boundary
            .max(boundary_max(grid, s.alpha.iter().zip(&s.beta).map(|(a, b)| a.hypot(*b))));
        wkb_snapshots(sink, step, s);
    })?;
    manifest.note("dt", dt);
    Ok(())
}

fn run_hydro(cfg: &RunConfig, prep: &Prepared, sink: &mut Sink, manifest: &mut Manifest) -> Result<()> {
    let params = &prep.params;
    let grid = &prep.grid;
    let t_final = cfg.run.t_final;
    let drift = prep.phase.drift_source(params, t_final)?;
    let rho: Vec<f64> = prep.amplitude.iter().map(|z| z.norm_sqr()).collect();
    let v0 = prep.phase.velocity(grid);
    let h0 = HydroState::new(grid.clone(), rho, v0)?;
    let dt = match cfg.run.dt {
        Some(dt) => dt,
        None => {
            let mut probe = WkbState::from_amplitude(grid, &prep.amplitude, 0.0)?;
            let f0 = drift.sample(grid, 0.0)?;
            let grad_s = f0.phase_gradient(grid, params.rotation);
            probe.v = h0
                .v
                .iter()
                .zip(&grad_s)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect();
            auto_wkb_dt(&probe, drift.as_ref(), t_final)?
        }
    };
    let obs = Observables::new(grid);
    evolve_hydro(&h0, drift.as_ref(), params, t_final, dt, cfg.run.stride, |step, h| {
        sink.records.push(obs.record_limit(&h.rho, &h.v, params, h.t));
        sink.boundary = sink.boundary.max(boundary_max(grid, h.rho.iter().map(|r| r.sqrt())));
        sink.snapshot(format!("rho_{step:06}.rsfw"), Snapshot::from_real(grid, &h.rho, 0.0, h.t, "rho"));
        for (i, v) in h.v.iter().enumerate() {
            let tag = format!("v{}", i + 1);
            sink.snapshot(format!("{tag}_{step:06}.rsfw"), Snapshot::from_real(grid, v, 0.0, h.t, &tag));
        }
    })?;
    manifest.note("dt", dt);
    Ok(())
}

/// Launch points on a square lattice of half width `extent`.
pub fn ray_launch_points(dim: usize, per_axis: usize, extent: f64) -> Vec<Vec<f64>> {
    let coord = |k: usize| {
        if per_axis == 1 {
            0.0
        } else {
            -extent + 2.0 * extent * k as f64 / (per_axis - 1) as f64
        }
    };
    let total = per_axis.pow(dim as u32);
    (0..total)
        .map(|mut k| {
            let mut x = vec![0.0; dim];
            for a in (0..dim).rev() {
                x[a] = coord(k % per_axis);
                k /= per_axis;
            }
            x
        })
        .collect()
}

fn run_rays(cfg: &RunConfig, prep: &Prepared, sink: &mut Sink, manifest: &mut Manifest) -> Result<()> {
    let params = &prep.params;
    let dt = cfg.run.dt.unwrap_or(crate::harness::config::DEFAULT_RAY_DT);
    let extent = cfg.run.ray_extent.unwrap_or(0.5 * cfg.grid.half_extent);
    let phase = prep.phase.as_initial();
    let launch: Vec<Ray> = ray_launch_points(prep.grid.dim(), cfg.run.rays_per_axis, extent)
        .iter()
        .map(|x| Ray::launch(x, phase))
        .collect();
    let trajectories = rays::integrate_bundle(&launch, params, dt, cfg.run.t_final)?;
    let path = sink.dir.join(RAYS_FILE);
    let mut buf = Vec::new();
    rays::write_rays_csv(&mut buf, prep.grid.dim(), &trajectories).map_err(|e| Error::io(&path, e))?;
    fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    sink.files.push(PathBuf::from(RAYS_FILE));
    let caustics: Vec<f64> = trajectories.iter().filter_map(|t| t.caustic).collect();
    let drift = trajectories
        .iter()
        .map(|t| {
            let e0 = t.samples[0].energy(params);
            let e1 = t.last().energy(params);
            (e1 - e0).abs() / e0.abs().max(1.0)
        })
        .fold(0.0, f64::max);
    manifest.note("dt", dt);
    manifest.note("rays", launch.len());
    manifest.note("caustics", caustics.len());
    if let Some(first) = caustics.iter().cloned().reduce(f64::min) {
        manifest.note("first_caustic", first);
    }
    manifest.note("hamiltonian_drift_max", drift);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn launch_lattice() {
        let pts = ray_launch_points(2, 3, 1.0);
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], vec![-1.0, -1.0]);
        assert_eq!(pts[1], vec![-1.0, 0.0]);
        assert_eq!(pts[8], vec![1.0, 1.0]);
        assert_eq!(ray_launch_points(2, 1, 1.0), vec![vec![0.0, 0.0]]);
    }
}
