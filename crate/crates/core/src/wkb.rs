//! Modified-WKB hyperbolic system and the limit superfluid equations.
//!
//! With `psi = a exp(i (S + phi) / eps)`, `S` the Hamilton-Jacobi phase,
//! `w = grad S - Omega x^perp`, `v = grad phi` and `u = v + w`, the unknowns
//! `U = (alpha, beta, v)` with `a = alpha + i beta` evolve by
//!
//! ```text
//! a_t   = -u . grad a - (a/2) div u + (i eps / 2) Lap a
//! v_t   = -grad(w . v + |v|^2 / 2 + f(|a|^2))
//! phi_t = -(w . v + |v|^2 / 2 + f(|a|^2))
//! ```
//!
//! Space is discretized with fourth-order periodic differences and time with
//! classical Runge-Kutta. Transport is written in skew-symmetric form
//! `(u . D a + D . (u a)) / 2`, which conserves the discrete mass exactly, and
//! `v` is advanced as a discrete gradient so that `D phi = v` is preserved.
//! A sponge layer in the outer tenth of the box relaxes `U` towards its
//! initial values.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fd;
use crate::field::WaveField;
use crate::grid::GridSpec;
use crate::init::wkb_assemble;
use crate::linalg::{self, Mat3, Vec3};
use crate::norms;
use crate::params::{perp, Nonlinearity, SimParams};
use crate::rays::{self, InitialPhase, QuadraticPhase, QuadraticTrajectory};
use crate::spectral::Spectral;

/// Fraction of the half extent, per side, occupied by the sponge.
pub const SPONGE_FRACTION: f64 = 0.1;
/// Peak relaxation rate of the sponge.
pub const SPONGE_STRENGTH: f64 = 20.0;
/// Advective Courant limit on `dt max|u| / dx`.
pub const ADVECTIVE_CFL: f64 = 0.5;
/// Dispersive limit on `dt eps / dx^2`.
pub const DISPERSIVE_CFL: f64 = 0.2;
/// Interior box fraction used by the gradient-consistency check.
pub const INTERIOR_FRACTION: f64 = 0.8;

/// Drift `w`, its Jacobian and the phase `S` sampled on the grid at one time.
#[derive(Clone, Debug)]
pub struct DriftField {
    pub w: Vec<Vec<f64>>,
    /// `jac[i * d + j] = d w_i / d x_j`.
    pub jac: Vec<Vec<f64>>,
    pub phase: Vec<f64>,
}

impl DriftField {
    pub fn zero(grid: &GridSpec) -> Self {
        let d = grid.dim();
        let n = grid.len();
        Self {
            w: vec![vec![0.0; n]; d],
            jac: vec![vec![0.0; n]; d * d],
            phase: vec![0.0; n],
        }
    }

    pub fn divergence(&self, d: usize) -> Vec<f64> {
        let n = self.phase.len();
        (0..n)
            .into_par_iter()
            .with_min_len(1024)
            .map(|p| (0..d).map(|i| self.jac[i * d + i][p]).sum())
            .collect()
    }

    /// `grad S = w + Omega x^perp` at every node.
    pub fn phase_gradient(&self, grid: &GridSpec, rotation: f64) -> Vec<Vec<f64>> {
        let xp = grid.sample(perp);
        (0..grid.dim())
            .map(|i| {
                self.w[i]
                    .par_iter()
                    .zip(xp.par_iter())
                    .map(|(w, q)| w + rotation * q[i])
                    .collect()
            })
            .collect()
    }

    fn jac_at(&self, d: usize, p: usize) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for i in 0..d {
            for j in 0..d {
                m[i][j] = self.jac[i * d + j][p];
            }
        }
        m
    }
}

/// Supplier of the Hamilton-Jacobi phase and drift at arbitrary times.
pub trait DriftSource: Send + Sync {
    fn sample(&self, grid: &GridSpec, t: f64) -> Result<Arc<DriftField>>;

    /// Upper bound for `|w|` on the grid over `[t0, t1]`, used for the CFL check.
    fn max_speed(&self, grid: &GridSpec, t0: f64, t1: f64) -> Result<f64> {
        let mut m: f64 = 0.0;
        for k in 0..=4 {
            let t = t0 + (t1 - t0) * k as f64 / 4.0;
            let f = self.sample(grid, t)?;
            for p in 0..grid.len() {
                let s: f64 = f.w.iter().map(|c| c[p] * c[p]).sum();
                m = m.max(s.sqrt());
            }
        }
        Ok(m)
    }
}

/// Quadratic phase, evolved through its coefficients.
#[derive(Clone, Debug)]
pub struct QuadraticDrift {
    trajectory: QuadraticTrajectory,
    rotation: f64,
}

impl QuadraticDrift {
    /// Coefficients on `[0, t_final]` sampled every `dt`.
    pub fn new(q0: &QuadraticPhase, params: &SimParams, dt: f64, t_final: f64) -> Result<Self> {
        let trajectory = rays::quadratic_phase_evolve(q0, params, dt, t_final)?;
        if let Some(t) = trajectory.caustic {
            return Err(Error::Caustic { t });
        }
        Ok(Self {
            trajectory,
            rotation: params.rotation,
        })
    }

    pub fn trajectory(&self) -> &QuadraticTrajectory {
        &self.trajectory
    }

    pub fn phase_at(&self, t: f64) -> Result<QuadraticPhase> {
        self.trajectory.at(t)
    }
}

impl DriftSource for QuadraticDrift {
    fn sample(&self, grid: &GridSpec, t: f64) -> Result<Arc<DriftField>> {
        let q = self.trajectory.at(t)?;
        let d = grid.dim();
        let jac = q.drift_jacobian(self.rotation);
        let w_nodes = grid.sample(|x| q.drift(x, self.rotation));
        let w = (0..d).map(|i| w_nodes.iter().map(|v| v[i]).collect()).collect();
        let jac = (0..d * d).map(|k| vec![jac[k / d][k % d]; grid.len()]).collect();
        let phase = grid.sample(|x| q.value(x));
        Ok(Arc::new(DriftField { w, jac, phase }))
    }

    fn max_speed(&self, grid: &GridSpec, t0: f64, t1: f64) -> Result<f64> {
        // w is affine in x, so its modulus peaks at a corner of the box
        let d = grid.dim();
        let mut m: f64 = 0.0;
        let corners: Vec<Vec<f64>> = (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|a| {
                        let l = grid.half_extents()[a];
                        if mask >> a & 1 == 1 { l } else { -l }
                    })
                    .collect()
            })
            .collect();
        let samples = &self.trajectory.samples;
        for q in samples.iter().filter(|q| q.t >= t0 - 1e-12 && q.t <= t1 + 1e-12) {
            for c in &corners {
                let w = q.drift(c, self.rotation);
                m = m.max(w.iter().map(|v| v * v).sum::<f64>().sqrt());
            }
        }
        Ok(m)
    }
}

/// General smooth phase: `S`, `grad S` and `D^2 S` from Newton-shot rays at
/// every node, cached per time.
pub struct RayDrift<P: InitialPhase> {
    phase: P,
    params: SimParams,
    step: f64,
    cache: Mutex<HashMap<u64, Arc<DriftField>>>,
    launch: Mutex<Option<(f64, Vec<Vec3>)>>,
}

impl<P: InitialPhase> RayDrift<P> {
    pub fn new(phase: P, params: &SimParams, step: f64) -> Self {
        Self {
            phase,
            params: params.clone(),
            step,
            cache: Mutex::new(HashMap::new()),
            launch: Mutex::new(None),
        }
    }
}

impl<P: InitialPhase + Send> DriftSource for RayDrift<P> {
    fn sample(&self, grid: &GridSpec, t: f64) -> Result<Arc<DriftField>> {
        if let Some(f) = self.cache.lock().unwrap().get(&t.to_bits()) {
            return Ok(f.clone());
        }
        let d = grid.dim();
        let guesses: Vec<Vec3> = match &*self.launch.lock().unwrap() {
            Some((_, g)) if g.len() == grid.len() => g.clone(),
            _ => (0..grid.len()).map(|p| grid.position(p)).collect(),
        };
        let evals: Vec<rays::PhaseEval> = (0..grid.len())
            .into_par_iter()
            .map(|p| {
                let x = grid.position(p);
                rays::eval_phase_general_from(t, &x[..d], &self.phase, &self.params, &guesses[p][..d], self.step)
            })
            .collect::<Result<_>>()?;
        let om = self.params.rotation;
        let mut field = DriftField::zero(grid);
        for (p, e) in evals.iter().enumerate() {
            let x = grid.position(p);
            let xp = perp(&x);
            for i in 0..d {
                field.w[i][p] = e.gradient[i] - om * xp[i];
                for j in 0..d {
                    field.jac[i * d + j][p] = e.hessian[i][j] - om * linalg::ROT[i][j];
                }
            }
            field.phase[p] = e.value;
        }
        *self.launch.lock().unwrap() = Some((t, evals.iter().map(|e| e.x0).collect()));
        let field = Arc::new(field);
        self.cache.lock().unwrap().insert(t.to_bits(), field.clone());
        Ok(field)
    }
}

/// `U = (alpha, beta, v)` with an optional accumulated phase `phi`.
#[derive(Clone, Debug, PartialEq)]
pub struct WkbState {
    pub grid: GridSpec,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub phi: Option<Vec<f64>>,
    pub eps: f64,
    pub t: f64,
}

impl WkbState {
    /// WKB data `a_in` with `phi = 0` and `v = 0`; the whole initial phase
    /// is carried by the drift source.
    pub fn from_amplitude(grid: &GridSpec, amplitude: &[Complex64], eps: f64) -> Result<Self> {
        if amplitude.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for {} nodes",
                amplitude.len(),
                grid.len()
            )));
        }
        let n = grid.len();
        Ok(Self {
            grid: grid.clone(),
            alpha: amplitude.iter().map(|z| z.re).collect(),
            beta: amplitude.iter().map(|z| z.im).collect(),
            v: vec![vec![0.0; n]; grid.dim()],
            phi: Some(vec![0.0; n]),
            eps,
            t: 0.0,
        })
    }

    pub fn amplitude(&self) -> Vec<Complex64> {
        self.alpha
            .iter()
            .zip(&self.beta)
            .map(|(a, b)| Complex64::new(*a, *b))
            .collect()
    }

    pub fn density(&self) -> Vec<f64> {
        self.alpha.iter().zip(&self.beta).map(|(a, b)| a * a + b * b).collect()
    }

    pub fn mass(&self) -> f64 {
        self.density().iter().sum::<f64>() * self.grid.cell_measure()
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    fn components(&self) -> Vec<&Vec<f64>> {
        let mut out = vec![&self.alpha, &self.beta];
        out.extend(self.v.iter());
        if let Some(phi) = &self.phi {
            out.push(phi);
        }
        out
    }

    /// `N[U] = ||U||_s + || |x| U ||_{s-1}` over `(alpha, beta, v)`.
    pub fn weighted_norm(&self, s: f64) -> f64 {
        let mut comps: Vec<&[f64]> = vec![&self.alpha, &self.beta];
        comps.extend(self.v.iter().map(|c| c.as_slice()));
        norms::sobolev_norm_real(&self.grid, &comps, s, true)
    }

    /// `psi = a exp(i (S + phi) / eps)` with `S` taken from `drift`.
    pub fn assemble(&self, drift: &DriftField) -> Result<WaveField> {
        let phi = self
            .phi
            .as_ref()
            .ok_or_else(|| Error::param("phi", "state does not track the phase"))?;
        let total: Vec<f64> = phi.iter().zip(&drift.phase).map(|(a, b)| a + b).collect();
        let mut psi = wkb_assemble(&self.grid, &self.amplitude(), &total, self.eps)?;
        psi.t = self.t;
        Ok(psi)
    }
}

/// Pointwise coefficient matrices of the first-order system at one node.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemMatrices {
    /// `sum_j A_j xi_j`, `(d + 2) x (d + 2)`.
    pub a: Vec<Vec<f64>>,
    /// `sum_j B_j xi_j = (w . xi) I`.
    pub b: Vec<Vec<f64>>,
    /// Zeroth-order coupling `diag(div w / 2, div w / 2, (d_i w_j))`.
    pub m: Vec<Vec<f64>>,
    /// Coefficient `eps / 2` of the dispersion operator `[[0, -Lap], [Lap, 0]]` acting on `(alpha, beta)`.
    pub dispersion: f64,
    /// Symmetrizer `diag(1, 1, I / (4 f'))`.
    pub q: Vec<Vec<f64>>,
}

/// Values of `U`, `w` and `D w` at a single point.
#[derive(Clone, Copy, Debug)]
pub struct PointState {
    pub alpha: f64,
    pub beta: f64,
    pub v: Vec3,
    pub w: Vec3,
    /// `jac[i][j] = d w_i / d x_j`.
    pub jac: Mat3,
}

impl SystemMatrices {
    pub fn at_point(d: usize, u: &PointState, nl: &Nonlinearity, eps: f64, xi: &[f64]) -> Self {
        let n = d + 2;
        let fp = nl.fprime(u.alpha * u.alpha + u.beta * u.beta);
        let vxi: f64 = (0..d).map(|j| u.v[j] * xi[j]).sum();
        let wxi: f64 = (0..d).map(|j| u.w[j] * xi[j]).sum();
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![vec![0.0; n]; n];
        let mut m = vec![vec![0.0; n]; n];
        let mut q = vec![vec![0.0; n]; n];
        let div: f64 = (0..d).map(|i| u.jac[i][i]).sum();
        for i in 0..n {
            a[i][i] = vxi;
            b[i][i] = wxi;
        }
        for j in 0..d {
            a[0][2 + j] = 0.5 * u.alpha * xi[j];
            a[1][2 + j] = 0.5 * u.beta * xi[j];
            a[2 + j][0] = 2.0 * fp * u.alpha * xi[j];
            a[2 + j][1] = 2.0 * fp * u.beta * xi[j];
        }
        m[0][0] = 0.5 * div;
        m[1][1] = 0.5 * div;
        for i in 0..d {
            for j in 0..d {
                m[2 + i][2 + j] = u.jac[j][i];
            }
        }
        q[0][0] = 1.0;
        q[1][1] = 1.0;
        for j in 0..d {
            q[2 + j][2 + j] = if fp > 0.0 { 1.0 / (4.0 * fp) } else { f64::INFINITY };
        }
        Self {
            a,
            b,
            m,
            dispersion: 0.5 * eps,
            q,
        }
    }

    /// Largest entry of `Q (A + B) - (Q (A + B))^T`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.a.len();
        let qa: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| self.q[i][i] * (self.a[i][j] + self.b[i][j])).collect())
            .collect();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((qa[i][j] - qa[j][i]).abs());
            }
        }
        worst
    }
}

/// Coefficient matrices of the state at node `node` in direction `xi`.
pub fn assemble_matrices(
    state: &WkbState,
    drift: &DriftField,
    params: &SimParams,
    xi: &[f64],
    node: usize,
) -> SystemMatrices {
    let d = state.grid.dim();
    let mut v = [0.0; 3];
    let mut w = [0.0; 3];
    for i in 0..d {
        v[i] = state.v[i][node];
        w[i] = drift.w[i][node];
    }
    let u = PointState {
        alpha: state.alpha[node],
        beta: state.beta[node],
        v,
        w,
        jac: drift.jac_at(d, node),
    };
    SystemMatrices::at_point(d, &u, &params.nonlinearity, state.eps, xi)
}

/// Time derivative of every component of a state.
#[derive(Clone, Debug)]
pub struct WkbRates {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
}

fn zip_map<F>(a: &[f64], b: &[f64], f: F) -> Vec<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    a.par_iter().zip(b.par_iter()).with_min_len(2048).map(|(x, y)| f(*x, *y)).collect()
}

/// `-(u . D c + D . (u c)) / 2` for one scalar component.
fn skew_transport(grid: &GridSpec, c: &[f64], u: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = vec![0.0; c.len()];
    for (axis, ua) in u.iter().enumerate() {
        let dc = fd::d1(grid, c, axis);
        let flux = zip_map(ua, c, |x, y| x * y);
        let dflux = fd::d1(grid, &flux, axis);
        acc.par_iter_mut()
            .zip(ua.par_iter().zip(dc.par_iter()).zip(dflux.par_iter()))
            .with_min_len(2048)
            .for_each(|(o, ((u, dc), df))| *o -= 0.5 * (u * dc + df));
    }
    acc
}

/// Right-hand side of the WKB system with the drift sampled at the state's time.
pub fn rhs_wkb(state: &WkbState, drift: &DriftField, params: &SimParams) -> WkbRates {
    rhs_components(
        &state.grid,
        &state.alpha,
        &state.beta,
        &state.v,
        drift,
        &params.nonlinearity,
        state.eps,
    )
}

fn rhs_components(
    grid: &GridSpec,
    alpha: &[f64],
    beta: &[f64],
    v: &[Vec<f64>],
    drift: &DriftField,
    nl: &Nonlinearity,
    eps: f64,
) -> WkbRates {
    let d = grid.dim();
    let n = grid.len();
    let u: Vec<Vec<f64>> = (0..d).map(|i| zip_map(&v[i], &drift.w[i], |a, b| a + b)).collect();
    let mut da = skew_transport(grid, alpha, &u);
    let mut db = skew_transport(grid, beta, &u);
    if eps > 0.0 {
        let la = fd::laplacian(grid, alpha);
        let lb = fd::laplacian(grid, beta);
        let h = 0.5 * eps;
        da.par_iter_mut().zip(lb.par_iter()).for_each(|(o, l)| *o -= h * l);
        db.par_iter_mut().zip(la.par_iter()).for_each(|(o, l)| *o += h * l);
    }
    let q: Vec<f64> = (0..n)
        .into_par_iter()
        .with_min_len(2048)
        .map(|p| {
            let mut s = nl.f(alpha[p] * alpha[p] + beta[p] * beta[p]);
            for i in 0..d {
                s += drift.w[i][p] * v[i][p] + 0.5 * v[i][p] * v[i][p];
            }
            s
        })
        .collect();
    let dv = (0..d)
        .map(|i| fd::d1(grid, &q, i).into_iter().map(|x| -x).collect())
        .collect();
    let dphi = q.into_iter().map(|x| -x).collect();
    WkbRates {
        alpha: da,
        beta: db,
        v: dv,
        phi: dphi,
    }
}

/// Smooth sponge rate, zero in the interior and `SPONGE_STRENGTH` at the edge.
pub fn sponge_profile(grid: &GridSpec) -> Vec<f64> {
    let l: Vec<f64> = grid.half_extents().to_vec();
    grid.sample(|x| {
        let mut s: f64 = 0.0;
        for (xi, li) in x.iter().zip(&l) {
            let depth = ((xi.abs() - (1.0 - SPONGE_FRACTION) * li) / (SPONGE_FRACTION * li)).clamp(0.0, 1.0);
            s = s.max(depth);
        }
        let r = (0.5 * std::f64::consts::PI * s).sin();
        SPONGE_STRENGTH * r * r
    })
}

/// Stable step limits `(advective, dispersive)` for a state and drift bound.
pub fn stability_limits(state: &WkbState, max_drift: f64) -> (f64, f64) {
    let grid = &state.grid;
    let dx = (0..grid.dim()).map(|a| grid.spacing(a)).fold(f64::INFINITY, f64::min);
    let vmax = (0..grid.len())
        .map(|p| state.v.iter().map(|c| c[p] * c[p]).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let speed = vmax + max_drift;
    let adv = if speed > 0.0 { ADVECTIVE_CFL * dx / speed } else { f64::INFINITY };
    let disp = if state.eps > 0.0 { DISPERSIVE_CFL * dx * dx / state.eps } else { f64::INFINITY };
    (adv, disp)
}

struct Stepper<'a> {
    grid: &'a GridSpec,
    drift: &'a dyn DriftSource,
    params: &'a SimParams,
    eps: f64,
    sponge: Vec<f64>,
    reference: Vec<Vec<f64>>,
    track_phi: bool,
}

impl Stepper<'_> {
    /// Components in the fixed order `alpha, beta, v_1.., phi`.
    fn rates(&self, comps: &[Vec<f64>], t: f64) -> Result<Vec<Vec<f64>>> {
        let d = self.grid.dim();
        let drift = self.drift.sample(self.grid, t)?;
        let r = rhs_components(
            self.grid,
            &comps[0],
            &comps[1],
            &comps[2..2 + d],
            &drift,
            &self.params.nonlinearity,
            self.eps,
        );
        let mut out = vec![r.alpha, r.beta];
        out.extend(r.v);
        if self.track_phi {
            out.push(r.phi);
        }
        for (rate, (c, c0)) in out.iter_mut().zip(comps.iter().zip(&self.reference)) {
            rate.par_iter_mut()
                .zip(self.sponge.par_iter().zip(c.par_iter().zip(c0.par_iter())))
                .with_min_len(2048)
                .for_each(|(r, (s, (x, x0)))| {
                    if *s > 0.0 {
                        *r -= s * (x - x0);
                    }
                });
        }
        Ok(out)
    }

    fn step(&self, comps: &[Vec<f64>], t: f64, dt: f64) -> Result<Vec<Vec<f64>>> {
        let shift = |base: &[Vec<f64>], k: &[Vec<f64>], h: f64| -> Vec<Vec<f64>> {
            base.iter()
                .zip(k)
                .map(|(b, k)| zip_map(b, k, |x, y| x + h * y))
                .collect()
        };
        let k1 = self.rates(comps, t)?;
        let k2 = self.rates(&shift(comps, &k1, 0.5 * dt), t + 0.5 * dt)?;
        let k3 = self.rates(&shift(comps, &k2, 0.5 * dt), t + 0.5 * dt)?;
        let k4 = self.rates(&shift(comps, &k3, dt), t + dt)?;
        Ok(comps
            .iter()
            .enumerate()
            .map(|(c, base)| {
                (0..base.len())
                    .into_par_iter()
                    .with_min_len(2048)
                    .map(|p| base[p] + dt / 6.0 * (k1[c][p] + 2.0 * k2[c][p] + 2.0 * k3[c][p] + k4[c][p]))
                    .collect()
            })
            .collect())
    }
}

/// Integrate the WKB system from `state0.t` over a duration `t_final`.
///
/// The observer sees the initial state, every `stride`-th step and the final
/// state. Step-size limits are checked before the first step.
pub fn evolve_wkb<F>(
    state0: &WkbState,
    drift: &dyn DriftSource,
    params: &SimParams,
    t_final: f64,
    dt: f64,
    stride: usize,
    mut observer: F,
) -> Result<WkbState>
where
    F: FnMut(usize, &WkbState),
{
    params.with_eps(state0.eps).validate_limit()?;
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::param("T", format!("{t_final} must be >= 0")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("{dt} must be > 0")));
    }
    let grid = &state0.grid;
    if grid.dim() != params.dim() {
        return Err(Error::GridMismatch(format!(
            "grid has d = {} but {} trap frequencies",
            grid.dim(),
            params.dim()
        )));
    }
    let t0 = state0.t;
    let wmax = drift.max_speed(grid, t0, t0 + t_final)?;
    let (adv, disp) = stability_limits(state0, wmax);
    if dt > adv {
        return Err(Error::Cfl {
            kind: "advective",
            dt,
            limit: adv,
        });
    }
    if dt > disp {
        return Err(Error::Cfl {
            kind: "dispersive",
            dt,
            limit: disp,
        });
    }
    let track_phi = state0.phi.is_some();
    let mut comps: Vec<Vec<f64>> = vec![state0.alpha.clone(), state0.beta.clone()];
    comps.extend(state0.v.iter().cloned());
    if let Some(phi) = &state0.phi {
        comps.push(phi.clone());
    }
    let stepper = Stepper {
        grid,
        drift,
        params,
        eps: state0.eps,
        sponge: sponge_profile(grid),
        reference: comps.clone(),
        track_phi,
    };
    let stride = stride.max(1);
    let mut full = (t_final / dt).floor() as usize;
    let mut tail = t_final - full as f64 * dt;
    if tail > dt * (1.0 - 1e-9) {
        full += 1;
        tail = 0.0;
    }
    if tail < dt * 1e-9 {
        tail = 0.0;
    }
    let total = full + usize::from(tail > 0.0);
    let d = grid.dim();
    let unpack = |comps: &[Vec<f64>], t: f64| WkbState {
        grid: grid.clone(),
        alpha: comps[0].clone(),
        beta: comps[1].clone(),
        v: comps[2..2 + d].to_vec(),
        phi: track_phi.then(|| comps[2 + d].clone()),
        eps: state0.eps,
        t,
    };
    observer(0, state0);
    let mut t = t0;
    for step in 1..=total {
        let h = if step <= full { dt } else { tail };
        comps = stepper.step(&comps, t, h)?;
        t = if step <= full { t0 + step as f64 * dt } else { t0 + t_final };
        if !comps.iter().all(|c| c.iter().all(|x| x.is_finite())) {
            return Err(Error::NumericalAbort { step, t });
        }
        if step % stride == 0 || step == total {
            observer(step, &unpack(&comps, t));
        }
    }
    Ok(unpack(&comps, t))
}

/// Trapezoid quadrature in time of `phi_t = -(w . v + |v|^2/2 + f(|a|^2))`.
#[derive(Clone, Debug)]
pub struct PhiAccumulator {
    phi: Vec<f64>,
    last: Option<(f64, Vec<f64>)>,
}

impl PhiAccumulator {
    pub fn new(phi0: Vec<f64>) -> Self {
        Self { phi: phi0, last: None }
    }

    pub fn push(&mut self, state: &WkbState, drift: &DriftField, params: &SimParams) {
        let rate = rhs_wkb(state, drift, params).phi;
        if let Some((t_prev, prev)) = &self.last {
            let h = state.t - t_prev;
            self.phi
                .par_iter_mut()
                .zip(prev.par_iter().zip(rate.par_iter()))
                .for_each(|(p, (a, b))| *p += 0.5 * h * (a + b));
        }
        self.last = Some((state.t, rate));
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }
}

/// Accumulated phase at every stored time of a trajectory.
pub fn accumulate_phi(
    states: &[WkbState],
    drift: &dyn DriftSource,
    params: &SimParams,
) -> Result<Vec<Vec<f64>>> {
    let Some(first) = states.first() else {
        return Ok(Vec::new());
    };
    let mut acc = PhiAccumulator::new(vec![0.0; first.grid.len()]);
    let mut out = Vec::with_capacity(states.len());
    for s in states {
        let f = drift.sample(&s.grid, s.t)?;
        acc.push(s, &f, params);
        out.push(acc.phi().to_vec());
    }
    Ok(out)
}

/// `max |D phi - v|` over the interior box.
pub fn gradient_mismatch(grid: &GridSpec, phi: &[f64], v: &[Vec<f64>]) -> f64 {
    let mask = grid.interior_mask(INTERIOR_FRACTION);
    let mut worst: f64 = 0.0;
    for (axis, va) in v.iter().enumerate() {
        let g = fd::d1(grid, phi, axis);
        for p in 0..grid.len() {
            if mask[p] {
                worst = worst.max((g[p] - va[p]).abs());
            }
        }
    }
    worst
}

/// Density and total velocity of the limit superfluid system.
#[derive(Clone, Debug, PartialEq)]
pub struct HydroState {
    pub grid: GridSpec,
    pub rho: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub t: f64,
}

impl HydroState {
    pub fn new(grid: GridSpec, rho: Vec<f64>, v: Vec<Vec<f64>>) -> Result<Self> {
        if rho.len() != grid.len() || v.len() != grid.dim() || v.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::GridMismatch("hydro fields do not match the grid".into()));
        }
        if let Some(r) = rho.iter().find(|r| !(**r >= 0.0)) {
            return Err(Error::param("rho", format!("density {r} must be >= 0")));
        }
        Ok(Self { grid, rho, v, t: 0.0 })
    }

    pub fn mass(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.grid.cell_measure()
    }
}

fn hydro_from_wkb(state: &WkbState, drift: &DriftField, rotation: f64) -> HydroState {
    let grad_s = drift.phase_gradient(&state.grid, rotation);
    HydroState {
        grid: state.grid.clone(),
        rho: state.density(),
        v: state
            .v
            .iter()
            .zip(&grad_s)
            .map(|(a, b)| zip_map(a, b, |x, y| x + y))
            .collect(),
        t: state.t,
    }
}

/// Limit (`eps = 0`) superfluid dynamics: evolve `(alpha, beta, v)` from
/// `alpha = sqrt(rho_0)`, `beta = 0`, `v = v_0 - grad S_in` and read back
/// `rho = alpha^2 + beta^2`, `velocity = v + grad S`.
pub fn evolve_hydro<F>(
    h0: &HydroState,
    drift: &dyn DriftSource,
    params: &SimParams,
    t_final: f64,
    dt: f64,
    stride: usize,
    mut observer: F,
) -> Result<HydroState>
where
    F: FnMut(usize, &HydroState),
{
    let grid = &h0.grid;
    let f0 = drift.sample(grid, h0.t)?;
    let grad_s = f0.phase_gradient(grid, params.rotation);
    let v: Vec<Vec<f64>> = h0
        .v
        .iter()
        .zip(&grad_s)
        .map(|(a, b)| zip_map(a, b, |x, y| x - y))
        .collect();
    let state0 = WkbState {
        grid: grid.clone(),
        alpha: h0.rho.iter().map(|r| r.sqrt()).collect(),
        beta: vec![0.0; grid.len()],
        v,
        phi: None,
        eps: 0.0,
        t: h0.t,
    };
    let mut failure = None;
    let fin = evolve_wkb(&state0, drift, params, t_final, dt, stride, |k, s| {
        if failure.is_some() {
            return;
        }
        match drift.sample(grid, s.t) {
            Ok(f) => observer(k, &hydro_from_wkb(s, &f, params.rotation)),
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let f = drift.sample(grid, fin.t)?;
    Ok(hydro_from_wkb(&fin, &f, params.rotation))
}

/// Density, velocity and current of a wave function.
#[derive(Clone, Debug)]
pub struct Madelung {
    pub rho: Vec<f64>,
    /// `eps Im(conj(psi) grad psi) / max(rho, rho_floor)`.
    pub velocity: Vec<Vec<f64>>,
    /// `J = eps Im(conj(psi) grad psi)`.
    pub current: Vec<Vec<f64>>,
}

/// Relative vacuum floor for the velocity quotient.
pub const VACUUM_FLOOR: f64 = 1e-12;

pub fn madelung_extract(psi: &WaveField, eps: f64) -> Madelung {
    let spec = Spectral::new(&psi.grid);
    let rho = psi.density();
    let floor = VACUUM_FLOOR * rho.iter().cloned().fold(0.0, f64::max);
    let mut velocity = Vec::new();
    let mut current = Vec::new();
    for axis in 0..psi.grid.dim() {
        let dpsi = spec.derivative(&psi.values, axis);
        let j: Vec<f64> = psi
            .values
            .iter()
            .zip(&dpsi)
            .map(|(z, dz)| eps * (z.conj() * dz).im)
            .collect();
        velocity.push(j.iter().zip(&rho).map(|(j, r)| j / r.max(floor)).collect());
        current.push(j);
    }
    Madelung {
        rho,
        velocity,
        current,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn params(eps: f64, rotation: f64, nl: Nonlinearity) -> SimParams {
        SimParams::new(eps, rotation, vec![1.0, 1.0], nl).unwrap()
    }

    #[test]
    fn matrices_examples() {
        let nl = Nonlinearity::Cubic { coupling: 1.0 };
        let zero = PointState {
            alpha: 0.0,
            beta: 0.0,
            v: [0.0; 3],
            w: [0.0; 3],
            jac: [[0.0; 3]; 3],
        };
        let m = SystemMatrices::at_point(2, &zero, &nl, 0.1, &[1.0, 0.0]);
        assert!(m.a.iter().flatten().all(|x| *x == 0.0));
        let one = PointState { alpha: 1.0, ..zero };
        let m = SystemMatrices::at_point(2, &one, &nl, 0.1, &[1.0, 0.0]);
        let mut nonzero = vec![];
        for i in 0..4 {
            for j in 0..4 {
                if m.a[i][j] != 0.0 {
                    nonzero.push((i, j, m.a[i][j]));
                }
            }
        }
        assert_eq!(nonzero, vec![(0, 2, 0.5), (2, 0, 2.0)]);
    }

    #[test]
    fn symmetrizer_makes_symbol_symmetric() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let nl = Nonlinearity::Cubic { coupling: rng.gen_range(0.1..5.0) };
            let mut jac = [[0.0; 3]; 3];
            for row in jac.iter_mut().take(2) {
                for x in row.iter_mut().take(2) {
                    *x = rng.gen_range(-2.0..2.0);
                }
            }
            let u = PointState {
                alpha: rng.gen_range(-2.0..2.0),
                beta: rng.gen_range(-2.0..2.0),
                v: [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), 0.0],
                w: [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), 0.0],
                jac,
            };
            for _ in 0..10 {
                let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let m = SystemMatrices::at_point(2, &u, &nl, 0.2, &[th.cos(), th.sin()]);
                assert!(m.symmetry_defect() < 1e-12);
                for i in 0..4 {
                    assert!(m.q[i][i] > 0.0);
                }
            }
        }
    }

    #[test]
    fn constant_state_is_steady() {
        let g = GridSpec::uniform(2, 16, 4.0).unwrap();
        let n = g.len();
        let s = WkbState {
            grid: g.clone(),
            alpha: vec![0.8; n],
            beta: vec![0.0; n],
            v: vec![vec![0.0; n]; 2],
            phi: Some(vec![0.0; n]),
            eps: 0.1,
            t: 0.0,
        };
        let r = rhs_wkb(&s, &DriftField::zero(&g), &params(0.1, 0.0, Nonlinearity::default()));
        for c in [&r.alpha, &r.beta, &r.v[0], &r.v[1]] {
            assert!(c.iter().all(|x| x.abs() < 1e-12));
        }
        assert!(r.phi.iter().all(|x| (x + 0.64).abs() < 1e-12));
    }

    #[test]
    fn zero_time_returns_input() {
        let g = GridSpec::uniform(2, 32, 6.0).unwrap();
        let p = params(0.25, 0.5, Nonlinearity::default());
        let a = crate::init::gaussian(&g, &[0.0, 0.0], 1.0);
        let s0 = WkbState::from_amplitude(&g, &a, 0.25).unwrap();
        let drift = QuadraticDrift::new(&QuadraticPhase::zero(2), &p, 1e-3, 0.0).unwrap();
        let out = evolve_wkb(&s0, &drift, &p, 0.0, 1e-3, 1, |_, _| {}).unwrap();
        assert_eq!(out, s0);
    }

    #[test]
    fn cfl_violations_are_rejected() {
        let g = GridSpec::uniform(2, 64, 6.0).unwrap();
        let p = params(0.25, 1.0, Nonlinearity::default());
        let a = crate::init::gaussian(&g, &[0.0, 0.0], 1.0);
        let s0 = WkbState::from_amplitude(&g, &a, 0.25).unwrap();
        let drift = QuadraticDrift::new(&QuadraticPhase::zero(2), &p, 0.1, 0.2).unwrap();
        let err = evolve_wkb(&s0, &drift, &p, 0.2, 0.1, 1, |_, _| {}).unwrap_err();
        assert!(matches!(err, Error::Cfl { kind: "advective", .. }), "{err}");
        let slow = params(0.25, 0.0, Nonlinearity::default());
        let drift = QuadraticDrift::new(&QuadraticPhase::zero(2), &slow, 0.05, 0.1).unwrap();
        let err = evolve_wkb(&s0, &drift, &slow, 0.1, 0.05, 1, |_, _| {}).unwrap_err();
        assert!(matches!(err, Error::Cfl { kind: "dispersive", .. }), "{err}");
    }

    #[test]
    fn uniform_phase_ode() {
        // constant density 0.5, zero velocity, no trap: phi(t) = -0.5 t
        let g = GridSpec::uniform(2, 16, 4.0).unwrap();
        let p = SimParams::new(0.1, 0.0, vec![0.0, 0.0], Nonlinearity::default()).unwrap();
        let n = g.len();
        let s0 = WkbState {
            grid: g.clone(),
            alpha: vec![0.5f64.sqrt(); n],
            beta: vec![0.0; n],
            v: vec![vec![0.0; n]; 2],
            phi: Some(vec![0.0; n]),
            eps: 0.1,
            t: 0.0,
        };
        let drift = QuadraticDrift::new(&QuadraticPhase::zero(2), &p, 0.01, 1.0).unwrap();
        let mut acc = PhiAccumulator::new(vec![0.0; n]);
        let out = evolve_wkb(&s0, &drift, &p, 1.0, 0.01, 1, |_, s| {
            acc.push(s, &DriftField::zero(&g), &p);
        })
        .unwrap();
        // the sponge pins phi near the edges; the interior follows the ODE
        let mask = g.interior_mask(INTERIOR_FRACTION);
        let phi = out.phi.unwrap();
        for p in (0..n).filter(|&p| mask[p]) {
            assert!((phi[p] + 0.5).abs() < 1e-12);
        }
        assert!(acc.phi().iter().all(|x| (x + 0.5).abs() < 1e-12));
    }

    #[test]
    fn madelung_of_pure_phase() {
        let g = GridSpec::uniform(2, 64, std::f64::consts::PI).unwrap();
        let eps = 0.1;
        let phase = |x: &[f64]| 0.3 * x[0].sin() + 0.2 * (x[1]).cos();
        let values = g.sample(|x| Complex64::from_polar(1.0, phase(x) / eps));
        let psi = WaveField::new(g.clone(), values, 0.0, eps).unwrap();
        let m = madelung_extract(&psi, eps);
        for p in 0..g.len() {
            let x = g.position(p);
            assert!((m.velocity[0][p] - 0.3 * x[0].cos()).abs() < 1e-9);
            assert!((m.velocity[1][p] + 0.2 * x[1].sin()).abs() < 1e-9);
        }
        let real = WaveField::new(g.clone(), g.sample(|x| Complex64::new((-x[0] * x[0]).exp() + 0.1, 0.0)), 0.0, eps).unwrap();
        let m = madelung_extract(&real, eps);
        assert!(m.velocity.iter().flatten().all(|v| v.abs() < 1e-12));
    }
}
