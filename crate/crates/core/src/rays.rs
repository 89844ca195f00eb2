//! Hamiltonian rays for the rotational Hamilton-Jacobi equation
//!
//! ```text
//! S_t + 1/2 |grad S|^2 + V(x) - Omega x^perp . grad S = 0
//! ```
//!
//! with `H(x, p) = 1/2 |p|^2 + V(x) - Omega (J x) . p`. Along a ray the Hessian
//! `Sigma = D^2 S`, the Jacobian `Gamma = dx/dx_0` and the action obey
//!
//! ```text
//! Sigma' = -Sigma^2 - W + Omega (J^T Sigma + Sigma J)
//! Gamma' = (Sigma - Omega J) Gamma
//! s'     = 1/2 |p|^2 - V(x)
//! ```
//!
//! where `W = diag(omega^2)`. Quadratic phases `1/2 x^T Sigma x + b . x + c`
//! stay quadratic and are evolved through their coefficients.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat3, Vec3, IDENTITY, ROT, ZERO};
use crate::params::SimParams;

/// Threshold on `det Gamma` below which the ray map is declared singular.
pub const DET_MIN: f64 = 1e-8;

/// Largest `||Sigma|| h` allowed in one internal Runge-Kutta substep.
const RICCATI_CFL: f64 = 0.05;

/// Internal step used when shooting rays for [`eval_phase_general`].
pub const SHOOTING_STEP: f64 = 2e-3;

const NEWTON_MAX_ITER: usize = 50;

fn trap_matrix(params: &SimParams) -> Mat3 {
    let mut w = [0.0; 3];
    for (j, om) in params.trap.iter().enumerate() {
        w[j] = om * om;
    }
    linalg::diag(&w)
}

fn pad(x: &[f64]) -> Vec3 {
    let mut out = [0.0; 3];
    out[..x.len()].copy_from_slice(x);
    out
}

/// Right-hand side of the ray equations `(x', p')`.
pub fn hamiltonian_rhs(x: &[f64], p: &[f64], params: &SimParams) -> (Vec3, Vec3) {
    let (x, p) = (pad(x), pad(p));
    let om = params.rotation;
    let jx = linalg::mul_vec(&ROT, &x);
    let jp = linalg::mul_vec(&ROT, &p);
    let wx = linalg::mul_vec(&trap_matrix(params), &x);
    let xdot = std::array::from_fn(|i| p[i] - om * jx[i]);
    let pdot = std::array::from_fn(|i| -wx[i] - om * jp[i]);
    (xdot, pdot)
}

/// `H(x, p) = 1/2 |p|^2 + V(x) - Omega (J x) . p`.
pub fn hamiltonian(x: &[f64], p: &[f64], params: &SimParams) -> f64 {
    let (x, p) = (pad(x), pad(p));
    let jx = linalg::mul_vec(&ROT, &x);
    let kinetic: f64 = 0.5 * p.iter().map(|v| v * v).sum::<f64>();
    let rot: f64 = jx.iter().zip(&p).map(|(a, b)| a * b).sum();
    kinetic + params.potential(&x[..params.dim()]) - params.rotation * rot
}

/// Eulerian Riccati right-hand side `-Sigma^2 - W + Omega (J^T Sigma + Sigma J)`.
pub fn riccati_rhs(sigma: &Mat3, params: &SimParams) -> Mat3 {
    let sq = linalg::mul(sigma, sigma);
    let w = trap_matrix(params);
    let coupling = linalg::add(
        &linalg::mul(&linalg::transpose(&ROT), sigma),
        &linalg::mul(sigma, &ROT),
    );
    std::array::from_fn(|i| {
        std::array::from_fn(|j| -sq[i][j] - w[i][j] + params.rotation * coupling[i][j])
    })
}

/// Smooth initial phase `S_in` with its first and second derivatives.
pub trait InitialPhase: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec3;
    fn hessian(&self, x: &[f64]) -> Mat3;
}

/// A single ray with its transported Hessian, Jacobian and action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub dim: usize,
    pub x0: Vec3,
    pub x: Vec3,
    pub p: Vec3,
    pub sigma: Mat3,
    pub gamma: Mat3,
    pub action: f64,
    pub t: f64,
}

impl Ray {
    /// Ray launched from `x0` with momentum `grad S_in(x0)`.
    pub fn launch(x0: &[f64], phase: &dyn InitialPhase) -> Self {
        Self {
            dim: phase.dim(),
            x0: pad(x0),
            x: pad(x0),
            p: phase.gradient(x0),
            sigma: phase.hessian(x0),
            gamma: IDENTITY,
            action: phase.value(x0),
            t: 0.0,
        }
    }

    pub fn det_gamma(&self) -> f64 {
        linalg::det(&self.gamma)
    }

    pub fn tr_sigma(&self) -> f64 {
        linalg::trace(&self.sigma)
    }

    pub fn energy(&self, params: &SimParams) -> f64 {
        hamiltonian(&self.x[..self.dim], &self.p[..self.dim], params)
    }

    fn is_singular(&self) -> bool {
        let det = self.det_gamma();
        !(det > DET_MIN) || !linalg::is_finite(&self.sigma) || !self.action.is_finite()
    }
}

#[derive(Clone, Copy)]
struct RayDeriv {
    x: Vec3,
    p: Vec3,
    sigma: Mat3,
    gamma: Mat3,
    action: f64,
}

fn ray_rhs(r: &Ray, params: &SimParams) -> RayDeriv {
    let (x, p) = hamiltonian_rhs(&r.x, &r.p, params);
    let drift_jac = linalg::axpy(-params.rotation, &ROT, &r.sigma);
    RayDeriv {
        x,
        p,
        sigma: riccati_rhs(&r.sigma, params),
        gamma: linalg::mul(&drift_jac, &r.gamma),
        action: 0.5 * r.p.iter().map(|v| v * v).sum::<f64>() - params.potential(&r.x[..r.dim]),
    }
}

fn ray_shift(r: &Ray, k: &RayDeriv, h: f64) -> Ray {
    Ray {
        x: std::array::from_fn(|i| r.x[i] + h * k.x[i]),
        p: std::array::from_fn(|i| r.p[i] + h * k.p[i]),
        sigma: linalg::axpy(h, &k.sigma, &r.sigma),
        gamma: linalg::axpy(h, &k.gamma, &r.gamma),
        action: r.action + h * k.action,
        ..*r
    }
}

fn ray_rk4(r: &Ray, params: &SimParams, h: f64) -> Ray {
    let k1 = ray_rhs(r, params);
    let k2 = ray_rhs(&ray_shift(r, &k1, 0.5 * h), params);
    let k3 = ray_rhs(&ray_shift(r, &k2, 0.5 * h), params);
    let k4 = ray_rhs(&ray_shift(r, &k3, h), params);
    let comb = |a: f64, b: f64, c: f64, d: f64| (a + 2.0 * b + 2.0 * c + d) / 6.0;
    let m = |a: &Mat3, b: &Mat3, c: &Mat3, d: &Mat3| -> Mat3 {
        std::array::from_fn(|i| std::array::from_fn(|j| comb(a[i][j], b[i][j], c[i][j], d[i][j])))
    };
    let avg = RayDeriv {
        x: std::array::from_fn(|i| comb(k1.x[i], k2.x[i], k3.x[i], k4.x[i])),
        p: std::array::from_fn(|i| comb(k1.p[i], k2.p[i], k3.p[i], k4.p[i])),
        sigma: m(&k1.sigma, &k2.sigma, &k3.sigma, &k4.sigma),
        gamma: m(&k1.gamma, &k2.gamma, &k3.gamma, &k4.gamma),
        action: comb(k1.action, k2.action, k3.action, k4.action),
    };
    let mut out = ray_shift(r, &avg, h);
    out.sigma = linalg::symmetrize(&out.sigma);
    out.t = r.t + h;
    out
}

/// Advance by `duration`, refining the step where `Sigma` is large.
/// Returns `Err` with the ray state at the caustic if the ray map degenerates.
fn advance_ray(r: &Ray, params: &SimParams, duration: f64) -> std::result::Result<Ray, Ray> {
    let mut cur = *r;
    let target = r.t + duration;
    let mut remaining = duration;
    while remaining > 0.0 {
        let norm = linalg::frobenius(&cur.sigma).max(1e-300);
        let h = remaining.min(RICCATI_CFL / norm);
        let last = h >= remaining;
        cur = ray_rk4(&cur, params, h);
        if cur.is_singular() {
            return Err(cur);
        }
        remaining -= h;
        if last {
            cur.t = target;
            break;
        }
    }
    Ok(cur)
}

/// Sampled ray path; `caustic` holds the time at which `det Gamma <= DET_MIN`.
#[derive(Clone, Debug)]
pub struct RayTrajectory {
    pub samples: Vec<Ray>,
    pub caustic: Option<f64>,
}

impl RayTrajectory {
    pub fn last(&self) -> &Ray {
        self.samples.last().expect("trajectory has the initial sample")
    }
}

fn step_count(dt: f64, t_final: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("{dt} must be > 0")));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::param("T", format!("{t_final} must be >= 0")));
    }
    Ok((t_final / dt - 1e-9).ceil().max(0.0) as usize)
}

/// Integrate one ray on `[ray.t, ray.t + t_final]`, sampling every `dt`.
/// A caustic truncates the trajectory and is reported, not raised.
pub fn integrate_ray(ray: &Ray, params: &SimParams, dt: f64, t_final: f64) -> Result<RayTrajectory> {
    let steps = step_count(dt, t_final)?;
    let t0 = ray.t;
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(*ray);
    let mut cur = *ray;
    for n in 1..=steps {
        let next_t = if n == steps { t0 + t_final } else { t0 + n as f64 * dt };
        match advance_ray(&cur, params, next_t - cur.t) {
            Ok(r) => {
                cur = r;
                samples.push(cur);
            }
            Err(r) => {
                return Ok(RayTrajectory {
                    samples,
                    caustic: Some(r.t),
                });
            }
        }
    }
    Ok(RayTrajectory {
        samples,
        caustic: None,
    })
}

/// Independent rays integrated in parallel.
pub fn integrate_bundle(rays: &[Ray], params: &SimParams, dt: f64, t_final: f64) -> Result<Vec<RayTrajectory>> {
    rays.par_iter()
        .map(|r| integrate_ray(r, params, dt, t_final))
        .collect()
}

/// `S(t, x) = 1/2 x^T Sigma x + b . x + c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticPhase {
    pub dim: usize,
    pub sigma: Mat3,
    pub b: Vec3,
    pub c: f64,
    pub t: f64,
}

impl QuadraticPhase {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            sigma: ZERO,
            b: [0.0; 3],
            c: 0.0,
            t: 0.0,
        }
    }

    /// Build from a `d x d` row-major Hessian, a `d`-vector and a constant.
    pub fn new(dim: usize, sigma: &[f64], b: &[f64], c: f64) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::DimensionUnsupported(dim));
        }
        if sigma.len() != dim * dim || b.len() != dim {
            return Err(Error::param("phase", format!("expected {} Hessian entries and {dim} linear ones", dim * dim)));
        }
        let mut s = ZERO;
        for i in 0..dim {
            for j in 0..dim {
                s[i][j] = sigma[i * dim + j];
            }
        }
        if linalg::asymmetry(&s) > 1e-12 * linalg::frobenius(&s).max(1.0) {
            return Err(Error::param("phase", "Hessian must be symmetric"));
        }
        Ok(Self {
            dim,
            sigma: s,
            b: pad(b),
            c,
            t: 0.0,
        })
    }

    /// Drift `w = grad S - Omega x^perp = (Sigma - Omega J) x + b`.
    pub fn drift(&self, x: &[f64], rotation: f64) -> Vec3 {
        let jac = self.drift_jacobian(rotation);
        let m = linalg::mul_vec(&jac, &pad(x));
        std::array::from_fn(|i| m[i] + self.b[i])
    }

    /// `dw_i / dx_j = (Sigma - Omega J)_ij`.
    pub fn drift_jacobian(&self, rotation: f64) -> Mat3 {
        linalg::axpy(-rotation, &ROT, &self.sigma)
    }
}

impl InitialPhase for QuadraticPhase {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let x = pad(x);
        let sx = linalg::mul_vec(&self.sigma, &x);
        (0..3).map(|i| 0.5 * x[i] * sx[i] + self.b[i] * x[i]).sum::<f64>() + self.c
    }

    fn gradient(&self, x: &[f64]) -> Vec3 {
        let sx = linalg::mul_vec(&self.sigma, &pad(x));
        std::array::from_fn(|i| sx[i] + self.b[i])
    }

    fn hessian(&self, _x: &[f64]) -> Mat3 {
        self.sigma
    }
}

#[derive(Clone, Copy)]
struct QuadState {
    q: QuadraticPhase,
    gamma: Mat3,
}

fn quad_rhs(s: &QuadState, params: &SimParams) -> (Mat3, Vec3, f64, Mat3) {
    let sigma = &s.q.sigma;
    let om = params.rotation;
    let sb = linalg::mul_vec(sigma, &s.q.b);
    let jtb = linalg::mul_vec(&linalg::transpose(&ROT), &s.q.b);
    let db = std::array::from_fn(|i| -sb[i] + om * jtb[i]);
    let dc = -0.5 * s.q.b.iter().map(|v| v * v).sum::<f64>();
    let dgamma = linalg::mul(&s.q.drift_jacobian(om), &s.gamma);
    (riccati_rhs(sigma, params), db, dc, dgamma)
}

fn quad_shift(s: &QuadState, k: &(Mat3, Vec3, f64, Mat3), h: f64) -> QuadState {
    QuadState {
        q: QuadraticPhase {
            sigma: linalg::axpy(h, &k.0, &s.q.sigma),
            b: std::array::from_fn(|i| s.q.b[i] + h * k.1[i]),
            c: s.q.c + h * k.2,
            ..s.q
        },
        gamma: linalg::axpy(h, &k.3, &s.gamma),
    }
}

fn quad_rk4(s: &QuadState, params: &SimParams, h: f64) -> QuadState {
    let k1 = quad_rhs(s, params);
    let k2 = quad_rhs(&quad_shift(s, &k1, 0.5 * h), params);
    let k3 = quad_rhs(&quad_shift(s, &k2, 0.5 * h), params);
    let k4 = quad_rhs(&quad_shift(s, &k3, h), params);
    let c = |a: f64, b: f64, c: f64, d: f64| (a + 2.0 * b + 2.0 * c + d) / 6.0;
    let m = |a: &Mat3, b: &Mat3, cc: &Mat3, d: &Mat3| -> Mat3 {
        std::array::from_fn(|i| std::array::from_fn(|j| c(a[i][j], b[i][j], cc[i][j], d[i][j])))
    };
    let avg = (
        m(&k1.0, &k2.0, &k3.0, &k4.0),
        std::array::from_fn(|i| c(k1.1[i], k2.1[i], k3.1[i], k4.1[i])),
        c(k1.2, k2.2, k3.2, k4.2),
        m(&k1.3, &k2.3, &k3.3, &k4.3),
    );
    let mut out = quad_shift(s, &avg, h);
    out.q.sigma = linalg::symmetrize(&out.q.sigma);
    out.q.t = s.q.t + h;
    out
}

fn advance_quad(s: &QuadState, params: &SimParams, duration: f64) -> std::result::Result<QuadState, f64> {
    let mut cur = *s;
    let target = s.q.t + duration;
    let mut remaining = duration;
    while remaining > 0.0 {
        let norm = linalg::frobenius(&cur.q.sigma).max(1e-300);
        let h = remaining.min(RICCATI_CFL / norm);
        let last = h >= remaining;
        cur = quad_rk4(&cur, params, h);
        let det = linalg::det(&cur.gamma);
        if !(det > DET_MIN) || !linalg::is_finite(&cur.q.sigma) {
            return Err(cur.q.t);
        }
        remaining -= h;
        if last {
            cur.q.t = target;
            break;
        }
    }
    Ok(cur)
}

/// Coefficient trajectory of a quadratic phase, sampled every `dt`.
#[derive(Clone, Debug)]
pub struct QuadraticTrajectory {
    pub samples: Vec<QuadraticPhase>,
    /// `det Gamma` of the (position independent) ray Jacobian at each sample.
    pub det_gamma: Vec<f64>,
    pub caustic: Option<f64>,
    pub dt: f64,
    params: SimParams,
    gammas: Vec<Mat3>,
}

impl QuadraticTrajectory {
    pub fn last(&self) -> &QuadraticPhase {
        self.samples.last().expect("trajectory has the initial sample")
    }

    /// Phase at an arbitrary time inside the sampled range, integrated
    /// forward from the nearest earlier sample.
    pub fn at(&self, t: f64) -> Result<QuadraticPhase> {
        let t0 = self.samples[0].t;
        let t_end = self.last().t;
        if t < t0 - 1e-12 || t > t_end + 1e-9 * self.dt.max(1.0) {
            if let Some(tc) = self.caustic {
                return Err(Error::Caustic { t: tc });
            }
            return Err(Error::param("t", format!("{t} outside the phase trajectory [{t0}, {t_end}]")));
        }
        let k = (((t - t0) / self.dt).floor().max(0.0) as usize).min(self.samples.len() - 1);
        let base = QuadState {
            q: self.samples[k],
            gamma: self.gammas[k],
        };
        let rem = t - base.q.t;
        if rem.abs() <= 1e-12 * self.dt {
            return Ok(base.q);
        }
        advance_quad(&base, &self.params, rem)
            .map(|s| s.q)
            .map_err(|t| Error::Caustic { t })
    }
}

/// Evolve the coefficients of a quadratic phase over `[q0.t, q0.t + t_final]`.
pub fn quadratic_phase_evolve(
    q0: &QuadraticPhase,
    params: &SimParams,
    dt: f64,
    t_final: f64,
) -> Result<QuadraticTrajectory> {
    let steps = step_count(dt, t_final)?;
    if linalg::asymmetry(&q0.sigma) > 1e-12 * linalg::frobenius(&q0.sigma).max(1.0) {
        return Err(Error::param("phase", "Hessian must be symmetric"));
    }
    let t0 = q0.t;
    let mut cur = QuadState {
        q: *q0,
        gamma: IDENTITY,
    };
    let mut samples = vec![*q0];
    let mut gammas = vec![IDENTITY];
    let mut det_gamma = vec![1.0];
    let mut caustic = None;
    for n in 1..=steps {
        let next_t = if n == steps { t0 + t_final } else { t0 + n as f64 * dt };
        match advance_quad(&cur, params, next_t - cur.q.t) {
            Ok(s) => {
                cur = s;
                samples.push(cur.q);
                gammas.push(cur.gamma);
                det_gamma.push(linalg::det(&cur.gamma));
            }
            Err(t) => {
                caustic = Some(t);
                break;
            }
        }
    }
    Ok(QuadraticTrajectory {
        samples,
        det_gamma,
        caustic,
        dt,
        params: params.clone(),
        gammas,
    })
}

/// Residual of the rotational HJ equation for given `S_t` and `grad S` at `x`.
pub fn hj_residual(s_t: f64, x: &[f64], grad: &[f64], params: &SimParams) -> f64 {
    let xp = crate::params::perp(x);
    let half_sq: f64 = 0.5 * grad.iter().map(|v| v * v).sum::<f64>();
    let rot: f64 = xp.iter().zip(grad).map(|(a, b)| a * b).sum();
    s_t + half_sq + params.potential(x) - params.rotation * rot
}

/// Phase value, gradient and Hessian at a point, with the launch point found.
#[derive(Clone, Copy, Debug)]
pub struct PhaseEval {
    pub value: f64,
    pub gradient: Vec3,
    pub hessian: Mat3,
    pub x0: Vec3,
}

fn shoot(x0: &Vec3, s_in: &dyn InitialPhase, params: &SimParams, t: f64, step: f64) -> Result<Ray> {
    let d = s_in.dim();
    let mut ray = Ray::launch(&x0[..d], s_in);
    let steps = ((t / step).ceil() as usize).max(1);
    let h = t / steps as f64;
    for _ in 0..steps {
        ray = advance_ray(&ray, params, h).map_err(|r| Error::Caustic { t: r.t })?;
    }
    Ok(ray)
}

/// `S(t, x)` and its derivatives for a general initial phase by Newton
/// shooting on the launch point, starting from `x_target`.
pub fn eval_phase_general(
    t: f64,
    x_target: &[f64],
    s_in: &dyn InitialPhase,
    params: &SimParams,
) -> Result<PhaseEval> {
    eval_phase_general_from(t, x_target, s_in, params, x_target, SHOOTING_STEP)
}

/// As [`eval_phase_general`] with an explicit initial guess and ray step.
pub fn eval_phase_general_from(
    t: f64,
    x_target: &[f64],
    s_in: &dyn InitialPhase,
    params: &SimParams,
    guess: &[f64],
    step: f64,
) -> Result<PhaseEval> {
    let target = pad(x_target);
    if t == 0.0 {
        return Ok(PhaseEval {
            value: s_in.value(x_target),
            gradient: s_in.gradient(x_target),
            hessian: s_in.hessian(x_target),
            x0: target,
        });
    }
    let tol = 1e-12 * (1.0 + target.iter().map(|v| v * v).sum::<f64>().sqrt());
    let resid = |r: &Ray| -> (Vec3, f64) {
        let e: Vec3 = std::array::from_fn(|i| r.x[i] - target[i]);
        (e, e.iter().map(|v| v * v).sum::<f64>().sqrt())
    };
    let mut x0 = pad(guess);
    let mut ray = shoot(&x0, s_in, params, t, step)?;
    let (mut err, mut norm) = resid(&ray);
    for _ in 0..NEWTON_MAX_ITER {
        if norm <= tol {
            return Ok(PhaseEval {
                value: ray.action,
                gradient: ray.p,
                hessian: ray.sigma,
                x0,
            });
        }
        let delta = linalg::solve(&ray.gamma, &err).ok_or(Error::Caustic { t })?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec3 = std::array::from_fn(|i| x0[i] - lambda * delta[i]);
            let trial_ray = shoot(&trial, s_in, params, t, step)?;
            let (e, n) = resid(&trial_ray);
            if n < norm || lambda < 1e-3 {
                x0 = trial;
                ray = trial_ray;
                err = e;
                norm = n;
                break;
            }
            lambda *= 0.5;
        }
    }
    if norm <= tol {
        return Ok(PhaseEval {
            value: ray.action,
            gradient: ray.p,
            hessian: ray.sigma,
            x0,
        });
    }
    Err(Error::NewtonDivergence {
        target: x_target.to_vec(),
        iterations: NEWTON_MAX_ITER,
    })
}

/// Largest spectral norm of the phase Hessian over the sample points.
pub fn subquadratic_monitor<F>(hessian: F, samples: &[Vec<f64>]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Mat3> + Sync,
{
    samples
        .par_iter()
        .map(|x| hessian(x).map(|h| linalg::sym_norm(&h)))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Ray bundle dump: `ray,t,x1..,p1..,det_gamma,tr_sigma,action`.
pub fn write_rays_csv<W: Write>(out: &mut W, dim: usize, trajectories: &[RayTrajectory]) -> std::io::Result<()> {
    let mut header = vec!["ray".to_string(), "t".to_string()];
    header.extend((1..=dim).map(|i| format!("x{i}")));
    header.extend((1..=dim).map(|i| format!("p{i}")));
    header.extend(["det_gamma", "tr_sigma", "action"].map(String::from));
    writeln!(out, "{}", header.join(","))?;
    for (k, traj) in trajectories.iter().enumerate() {
        for r in &traj.samples {
            let mut row = vec![k.to_string(), format!("{:.16e}", r.t)];
            row.extend(r.x[..dim].iter().map(|v| format!("{v:.16e}")));
            row.extend(r.p[..dim].iter().map(|v| format!("{v:.16e}")));
            row.push(format!("{:.16e}", r.det_gamma()));
            row.push(format!("{:.16e}", r.tr_sigma()));
            row.push(format!("{:.16e}", r.action));
            writeln!(out, "{}", row.join(","))?;
        }
    }
    Ok(())
}
