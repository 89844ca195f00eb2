//! Mass, energy, angular momentum and moments, plus the moment ODE system.
//!
//! Quadratures use the grid cell measure; gradients are spectral with the
//! Nyquist mode removed. With `x^perp = (x_2, -x_1)`:
//!
//! ```text
//! E     = int eps^2/2 |grad psi|^2 + V |psi|^2 + G(|psi|^2) + Re(i eps Omega conj(psi) x^perp . grad psi)
//! m_eps = i eps int conj(psi) x^perp . grad psi
//! n     = int x . J,     J = eps Im(conj(psi) grad psi)
//! X     = int |x|^2 |psi|^2,   xy = int x_1 x_2 |psi|^2
//! ```

use std::io::{BufRead, Write};

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::grid::GridSpec;
use crate::params::{perp, SimParams};
use crate::spectral::Spectral;

/// CSV header of an observables time series.
pub const CSV_HEADER: &str = "t,mass,energy,m_eps,n,X,xy";

/// One row of the observables time series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservableRecord {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub m_eps: f64,
    pub n: f64,
    pub x2: f64,
    pub xy: f64,
}

impl ObservableRecord {
    pub fn csv_row(&self) -> String {
        [self.t, self.mass, self.energy, self.m_eps, self.n, self.x2, self.xy]
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn parse_row(line: &str) -> Result<Self> {
        let vals = line
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Format(format!("bad number `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != 7 {
            return Err(Error::Format(format!("expected 7 columns, got {}", vals.len())));
        }
        Ok(Self {
            t: vals[0],
            mass: vals[1],
            energy: vals[2],
            m_eps: vals[3],
            n: vals[4],
            x2: vals[5],
            xy: vals[6],
        })
    }
}

pub fn write_csv<W: Write>(out: &mut W, records: &[ObservableRecord]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<ObservableRecord>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty observables file".into()))?
        .map_err(|e| Error::Format(e.to_string()))?;
    if header.trim() != CSV_HEADER {
        return Err(Error::Format(format!("unexpected header `{header}`")));
    }
    lines
        .filter(|l| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true))
        .map(|l| ObservableRecord::parse_row(&l.map_err(|e| Error::Format(e.to_string()))?))
        .collect()
}

/// Quadrature value together with its imaginary residue, which vanishes
/// analytically.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub imag_residue: f64,
}

/// Reusable evaluator holding the FFT plans and node coordinates of a grid.
pub struct Observables {
    grid: GridSpec,
    spectral: Spectral,
    positions: Vec<[f64; 3]>,
}

impl Observables {
    pub fn new(grid: &GridSpec) -> Self {
        Self {
            grid: grid.clone(),
            spectral: Spectral::new(grid),
            positions: (0..grid.len()).map(|p| grid.position(p)).collect(),
        }
    }

    pub fn mass(&self, psi: &[Complex64]) -> f64 {
        psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_measure()
    }

    /// `int conj(psi) x^perp . grad psi`, given the gradient.
    fn rotation_integral(&self, psi: &[Complex64], grad: &[Vec<Complex64>]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, z) in psi.iter().enumerate() {
            let xp = perp(&self.positions[p]);
            acc += z.conj() * (grad[0][p] * xp[0] + grad[1][p] * xp[1]);
        }
        acc * self.grid.cell_measure()
    }

    pub fn angular_momentum(&self, psi: &[Complex64], eps: f64) -> Quadrature {
        let grad = self.spectral.gradient(psi);
        let m = Complex64::new(0.0, eps) * self.rotation_integral(psi, &grad);
        Quadrature {
            value: m.re,
            imag_residue: m.im,
        }
    }

    pub fn energy(&self, psi: &[Complex64], params: &SimParams) -> Quadrature {
        let eps = params.eps;
        let grad = self.spectral.gradient(psi);
        let dv = self.grid.cell_measure();
        let mut local = 0.0;
        for (p, z) in psi.iter().enumerate() {
            let rho = z.norm_sqr();
            let kin: f64 = grad.iter().map(|g| g[p].norm_sqr()).sum();
            let x = &self.positions[p][..self.grid.dim()];
            local += 0.5 * eps * eps * kin + params.potential(x) * rho + params.nonlinearity.primitive(rho);
        }
        let rot = Complex64::new(0.0, eps * params.rotation) * self.rotation_integral(psi, &grad);
        Quadrature {
            value: local * dv + rot.re,
            imag_residue: rot.im,
        }
    }

    /// `J = eps Im(conj(psi) grad psi)` per axis.
    pub fn current(&self, psi: &[Complex64], eps: f64) -> Vec<Vec<f64>> {
        self.spectral
            .gradient(psi)
            .iter()
            .map(|g| psi.iter().zip(g).map(|(z, dz)| eps * (z.conj() * dz).im).collect())
            .collect()
    }

    /// `(n, X, xy)` of a wave function, with `n` from the current.
    pub fn moments(&self, psi: &[Complex64], eps: f64) -> (f64, f64, f64) {
        let j = self.current(psi, eps);
        let rho: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
        self.moments_from(&rho, &j)
    }

    /// `(int x . flux, int |x|^2 rho, int x_1 x_2 rho)`.
    fn moments_from(&self, rho: &[f64], flux: &[Vec<f64>]) -> (f64, f64, f64) {
        let d = self.grid.dim();
        let (mut n, mut x2, mut xy) = (0.0, 0.0, 0.0);
        for (p, r) in rho.iter().enumerate() {
            let x = &self.positions[p];
            n += (0..d).map(|i| x[i] * flux[i][p]).sum::<f64>();
            x2 += (0..d).map(|i| x[i] * x[i]).sum::<f64>() * r;
            xy += x[0] * x[1] * r;
        }
        let dv = self.grid.cell_measure();
        (n * dv, x2 * dv, xy * dv)
    }

    /// `int (sum_j omega_j^2 x_j^2) rho`, twice the potential energy.
    pub fn trap_moment(&self, rho: &[f64], params: &SimParams) -> f64 {
        rho.iter()
            .enumerate()
            .map(|(p, r)| 2.0 * params.potential(&self.positions[p][..self.grid.dim()]) * r)
            .sum::<f64>()
            * self.grid.cell_measure()
    }

    pub fn record(&self, psi: &WaveField, params: &SimParams) -> ObservableRecord {
        let (n, x2, xy) = self.moments(&psi.values, params.eps);
        ObservableRecord {
            t: psi.t,
            mass: self.mass(&psi.values),
            energy: self.energy(&psi.values, params).value,
            m_eps: self.angular_momentum(&psi.values, params.eps).value,
            n,
            x2,
            xy,
        }
    }

    /// Limit observables from `(rho, v)`: the energy uses `E_0`, `m` the
    /// limit angular momentum and `n = int rho x . v`.
    pub fn record_limit(&self, rho: &[f64], v: &[Vec<f64>], params: &SimParams, t: f64) -> ObservableRecord {
        let flux: Vec<Vec<f64>> = v
            .iter()
            .map(|c| c.iter().zip(rho).map(|(a, r)| a * r).collect())
            .collect();
        let (n, x2, xy) = self.moments_from(rho, &flux);
        ObservableRecord {
            t,
            mass: rho.iter().sum::<f64>() * self.grid.cell_measure(),
            energy: limit_energy(&self.grid, rho, v, params),
            m_eps: limit_angular_momentum(&self.grid, rho, v),
            n,
            x2,
            xy,
        }
    }
}

pub fn mass(psi: &WaveField) -> f64 {
    psi.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * psi.grid.cell_measure()
}

pub fn energy(psi: &WaveField, params: &SimParams) -> f64 {
    Observables::new(&psi.grid).energy(&psi.values, params).value
}

pub fn angular_momentum(psi: &WaveField, eps: f64) -> f64 {
    Observables::new(&psi.grid).angular_momentum(&psi.values, eps).value
}

pub fn moments(psi: &WaveField, eps: f64) -> (f64, f64, f64) {
    Observables::new(&psi.grid).moments(&psi.values, eps)
}

/// `m = -int rho x^perp . v`.
pub fn limit_angular_momentum(grid: &GridSpec, rho: &[f64], v: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for (p, r) in rho.iter().enumerate() {
        let xp = perp(&grid.position(p));
        acc += r * (xp[0] * v[0][p] + xp[1] * v[1][p]);
    }
    -acc * grid.cell_measure()
}

/// `E_0 = int rho |v|^2 / 2 + V rho + G(rho) - Omega rho x^perp . v`.
pub fn limit_energy(grid: &GridSpec, rho: &[f64], v: &[Vec<f64>], params: &SimParams) -> f64 {
    let d = grid.dim();
    let mut acc = 0.0;
    for (p, r) in rho.iter().enumerate() {
        let x = grid.position(p);
        let xp = perp(&x);
        let v2: f64 = (0..d).map(|i| v[i][p] * v[i][p]).sum();
        let rot = xp[0] * v[0][p] + xp[1] * v[1][p];
        acc += 0.5 * r * v2 + params.potential(&x[..d]) * r + params.nonlinearity.primitive(*r)
            - params.rotation * r * rot;
    }
    acc * grid.cell_measure()
}

/// Constants of the moment system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentODEParams {
    pub rotation: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub e0: f64,
    pub m0: f64,
    pub n0: f64,
    pub x0: f64,
    /// Trap deformation `(omega_1^2 - omega_2^2) / (omega_1^2 + omega_2^2)`.
    pub delta: f64,
    /// `(omega_1^2 + omega_2^2) / 2`.
    pub omega_perp_sq: f64,
}

impl MomentODEParams {
    pub fn new(params: &SimParams, initial: &ObservableRecord) -> Result<Self> {
        if params.dim() != 2 {
            return Err(Error::DimensionUnsupported(params.dim()));
        }
        let (w1, w2) = (params.trap[0], params.trap[1]);
        let sum = w1 * w1 + w2 * w2;
        if !(sum > 0.0) {
            return Err(Error::param("trap", "moment system needs a confining trap"));
        }
        Ok(Self {
            rotation: params.rotation,
            omega1: w1,
            omega2: w2,
            e0: initial.energy,
            m0: initial.m_eps,
            n0: initial.n,
            x0: initial.x2,
            delta: (w1 * w1 - w2 * w2) / sum,
            omega_perp_sq: 0.5 * sum,
        })
    }

    pub fn is_isotropic(&self) -> bool {
        (self.omega1 - self.omega2).abs() <= 1e-14 * self.omega1.abs().max(1.0)
    }

    /// `omega_1^2 - omega_2^2`, the coefficient of `<x_1 x_2>` in `dm/dt`.
    pub fn forcing_coefficient(&self) -> f64 {
        self.omega1 * self.omega1 - self.omega2 * self.omega2
    }

    /// The alternative coefficient `delta / (2 omega_perp^2)`.
    pub fn deformation_coefficient(&self) -> f64 {
        self.delta / (2.0 * self.omega_perp_sq)
    }

    /// `sqrt(4 omega^2 + 2 Omega^2)` for the isotropic trap.
    pub fn frequency(&self) -> f64 {
        (4.0 * self.omega1 * self.omega1 + 2.0 * self.rotation * self.rotation).sqrt()
    }
}

/// Right-hand side `(dm/dt, dn/dt)` of the moment system
///
/// ```text
/// dn/dt = 2 (E_0 - Omega m) - 2 int (sum_j omega_j^2 x_j^2) rho
/// dm/dt = Omega n + (omega_1^2 - omega_2^2) <x_1 x_2>
/// ```
///
/// `trap_moment` is `int (sum_j omega_j^2 x_j^2) rho`; when absent it is
/// closed as `omega_perp^2 X`, which is exact for isotropic traps.
pub fn moment_ode_rhs(m: f64, n: f64, x2: f64, xy: f64, trap_moment: Option<f64>, p: &MomentODEParams) -> (f64, f64) {
    let trap = trap_moment.unwrap_or(p.omega_perp_sq * x2);
    let mdot = p.rotation * n + p.forcing_coefficient() * xy;
    let ndot = 2.0 * (p.e0 - p.rotation * m) - 2.0 * trap;
    (mdot, ndot)
}

/// Closed-form `m(t)` of the isotropic moment system.
pub fn isotropic_closed_form(t: f64, p: &MomentODEParams) -> Result<f64> {
    if !p.is_isotropic() {
        return Err(Error::Anisotropic {
            omega: vec![p.omega1, p.omega2],
        });
    }
    let (c1, c2, mp, kappa) = closed_form_constants(p);
    Ok(c1 * (kappa * t).cos() + c2 * (kappa * t).sin() + mp)
}

/// `(C_1, C_2, m_p, kappa)` of `m(t) = C_1 cos(kappa t) + C_2 sin(kappa t) + m_p`.
pub fn closed_form_constants(p: &MomentODEParams) -> (f64, f64, f64, f64) {
    let w2 = p.omega1 * p.omega1;
    let om = p.rotation;
    let kappa = p.frequency();
    let mp = (2.0 * om * p.e0 + 4.0 * w2 * p.m0 - 2.0 * om * w2 * p.x0) / (2.0 * om * om + 4.0 * w2);
    let c1 = p.m0 - mp;
    let c2 = om * p.n0 / kappa;
    (c1, c2, mp, kappa)
}

/// The particular constant as printed alongside the closed form,
/// `(Omega E_0 + Omega omega^2 (2 m_0 - X_0)) / (Omega^2 + 2 omega^2)`.
pub fn printed_particular_constant(p: &MomentODEParams) -> f64 {
    let w2 = p.omega1 * p.omega1;
    let om = p.rotation;
    (om * p.e0 + om * w2 * (2.0 * p.m0 - p.x0)) / (om * om + 2.0 * w2)
}

/// `m(t) - m(0) - Omega/2 (X(t) - X(0))` along a series.
pub fn semiclassical_am_relation(records: &[ObservableRecord], rotation: f64) -> Vec<f64> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    records
        .iter()
        .map(|r| r.m_eps - first.m_eps - 0.5 * rotation * (r.x2 - first.x2))
        .collect()
}

/// Angular frequency of the largest non-constant Fourier peak of a
/// uniformly sampled series, refined by zero padding and a parabolic fit.
pub fn dominant_frequency(samples: &[f64], dt: f64) -> f64 {
    let n = samples.len();
    if n < 4 {
        return 0.0;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let padded = (16 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = samples
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let hann = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos();
            Complex64::new((s - mean) * hann, 0.0)
        })
        .collect();
    buf.resize(padded, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let mag: Vec<f64> = buf[..padded / 2].iter().map(|z| z.norm()).collect();
    let k = (1..mag.len() - 1)
        .max_by(|&a, &b| mag[a].total_cmp(&mag[b]))
        .unwrap_or(1);
    let (a, b, c) = (mag[k - 1], mag[k], mag[k + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    2.0 * std::f64::consts::PI * (k as f64 + shift) / (padded as f64 * dt)
}
