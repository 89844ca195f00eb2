//! Sampled fields on a [`GridSpec`].

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Complex wave function `psi^eps` sampled on a periodic grid at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveField {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
    pub t: f64,
    pub eps: f64,
}

impl WaveField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>, t: f64, eps: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            t,
            eps,
        })
    }

    pub fn zeros(grid: GridSpec, eps: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); n],
            t: 0.0,
            eps,
        }
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest modulus on the outermost layer of nodes, the domain truncation diagnostic.
    pub fn boundary_max(&self) -> f64 {
        boundary_max(&self.grid, self.values.iter().map(|z| z.norm()))
    }
}

/// Real scalar field sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let values = grid.sample(f);
        Self { grid, values }
    }
}

pub fn boundary_max(grid: &GridSpec, moduli: impl Iterator<Item = f64>) -> f64 {
    let dim = grid.dim();
    let pts = grid.points();
    moduli
        .enumerate()
        .filter(|(p, _)| {
            let idx = grid.multi_index(*p);
            (0..dim).any(|a| idx[a] == 0 || idx[a] == pts[a] - 1)
        })
        .map(|(_, m)| m)
        .fold(0.0, f64::max)
}

/// Discrete `L^2` inner product `sum conj(a) b dV`.
pub fn inner(grid: &GridSpec, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * grid.cell_measure()
}
