//! Physical parameters, the harmonic trap and the nonlinearity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::MAX_DIM;

/// Local nonlinearity `f(|psi|^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Nonlinearity {
    /// `f(z) = g z` with `g > 0`.
    Cubic { coupling: f64 },
    /// `f = 0`: the linear Schrodinger equation.
    Linear,
}

impl Default for Nonlinearity {
    fn default() -> Self {
        Nonlinearity::Cubic { coupling: 1.0 }
    }
}

impl Nonlinearity {
    pub fn f(&self, rho: f64) -> f64 {
        match *self {
            Nonlinearity::Cubic { coupling } => coupling * rho,
            Nonlinearity::Linear => 0.0,
        }
    }

    pub fn fprime(&self, _rho: f64) -> f64 {
        match *self {
            Nonlinearity::Cubic { coupling } => coupling,
            Nonlinearity::Linear => 0.0,
        }
    }

    /// Energy density primitive `G` with `G' = f` and `G(0) = 0`.
    pub fn primitive(&self, rho: f64) -> f64 {
        match *self {
            Nonlinearity::Cubic { coupling } => 0.5 * coupling * rho * rho,
            Nonlinearity::Linear => 0.0,
        }
    }

    /// Whether `f' > 0`, the condition under which the WKB system is symmetrizable.
    pub fn is_defocusing(&self) -> bool {
        matches!(*self, Nonlinearity::Cubic { coupling } if coupling > 0.0)
    }
}

/// Scaled constants of the rotating semiclassical NLS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Semiclassical parameter `eps`.
    pub eps: f64,
    /// Angular velocity `Omega`.
    pub rotation: f64,
    /// Trap frequencies `omega_1 .. omega_d`.
    pub trap: Vec<f64>,
    pub nonlinearity: Nonlinearity,
}

impl SimParams {
    pub fn new(eps: f64, rotation: f64, trap: Vec<f64>, nonlinearity: Nonlinearity) -> Result<Self> {
        let p = Self {
            eps,
            rotation,
            trap,
            nonlinearity,
        };
        p.validate()?;
        Ok(p)
    }

    /// Validation shared by constructors and deserialized values.
    ///
    /// `eps = 0` is accepted only by the limit solvers, which check it
    /// themselves; here `eps` must be positive.
    pub fn validate(&self) -> Result<()> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::param("eps", format!("{} must be > 0", self.eps)));
        }
        self.validate_limit()
    }

    /// Same as [`SimParams::validate`] but admits `eps = 0`.
    pub fn validate_limit(&self) -> Result<()> {
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return Err(Error::param("eps", format!("{} must be >= 0", self.eps)));
        }
        if !(self.rotation.is_finite() && self.rotation >= 0.0) {
            return Err(Error::param(
                "rotation",
                format!("{} must be >= 0", self.rotation),
            ));
        }
        let d = self.trap.len();
        if !(2..=MAX_DIM).contains(&d) {
            return Err(Error::param("trap", format!("need 2 or 3 frequencies, got {d}")));
        }
        if let Some(w) = self.trap.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::param("trap", format!("frequency {w} must be >= 0")));
        }
        if let Nonlinearity::Cubic { coupling } = self.nonlinearity {
            if !(coupling.is_finite() && coupling > 0.0) {
                return Err(Error::param(
                    "coupling",
                    format!("{coupling} must be > 0 (f' > 0)"),
                ));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.trap.len()
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        Self {
            eps,
            ..self.clone()
        }
    }

    /// `V(x) = 1/2 sum_j omega_j^2 x_j^2`.
    pub fn potential(&self, x: &[f64]) -> f64 {
        eval_potential(&self.trap, x)
    }

    pub fn potential_gradient(&self, x: &[f64]) -> [f64; MAX_DIM] {
        potential_gradient(&self.trap, x)
    }

    pub fn is_isotropic(&self) -> bool {
        self.trap.windows(2).all(|w| (w[0] - w[1]).abs() <= 1e-14 * w[0].abs().max(1.0))
    }
}

/// Anisotropic harmonic trap `1/2 sum_j omega_j^2 x_j^2`.
pub fn eval_potential(trap: &[f64], x: &[f64]) -> f64 {
    0.5 * trap.iter().zip(x).map(|(w, xi)| w * w * xi * xi).sum::<f64>()
}

/// `grad V = (omega_1^2 x_1, ..., omega_d^2 x_d)`.
pub fn potential_gradient(trap: &[f64], x: &[f64]) -> [f64; MAX_DIM] {
    let mut g = [0.0; MAX_DIM];
    for (j, (w, xi)) in trap.iter().zip(x).enumerate() {
        g[j] = w * w * xi;
    }
    g
}

/// `x^perp = (x_2, -x_1, 0)`.
pub fn perp(x: &[f64]) -> [f64; MAX_DIM] {
    let mut out = [0.0; MAX_DIM];
    out[0] = x[1];
    out[1] = -x[0];
    out
}
