//! Initial phases given as grid samples.

use crate::fd;
use crate::grid::GridSpec;
use crate::linalg::{Mat3, Vec3, ZERO};
use crate::rays::InitialPhase;

/// Phase samples with fourth-order difference derivatives, evaluated off
/// the grid by tensor-product cubic Lagrange interpolation.
#[derive(Clone, Debug)]
pub struct SampledPhase {
    grid: GridSpec,
    value: Vec<f64>,
    grad: Vec<Vec<f64>>,
    hess: Vec<Vec<f64>>,
}

impl SampledPhase {
    pub fn new(grid: &GridSpec, value: Vec<f64>) -> Self {
        let d = grid.dim();
        let grad = fd::gradient(grid, &value);
        let mut hess = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                hess.push(fd::d1(grid, &grad[j], i));
            }
        }
        for i in 0..d {
            for j in 0..i {
                let avg: Vec<f64> = hess[i * d + j].iter().zip(&hess[j * d + i]).map(|(a, b)| 0.5 * (a + b)).collect();
                hess[i * d + j] = avg.clone();
                hess[j * d + i] = avg;
            }
        }
        Self {
            grid: grid.clone(),
            value,
            grad,
            hess,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.value
    }

    pub fn gradient_samples(&self) -> &[Vec<f64>] {
        &self.grad
    }

    fn interp(&self, data: &[f64], x: &[f64]) -> f64 {
        let d = self.grid.dim();
        let mut idx = [[0usize; 4]; 3];
        let mut wts = [[0.0; 4]; 3];
        for a in 0..d {
            let n = self.grid.points()[a];
            let h = self.grid.spacing(a);
            let s = (x[a] + self.grid.half_extents()[a]) / h;
            let base = s.floor();
            let u = s - base;
            for (k, off) in (-1i64..=2).enumerate() {
                idx[a][k] = (base as i64 + off).rem_euclid(n as i64) as usize;
            }
            wts[a] = [
                -u * (u - 1.0) * (u - 2.0) / 6.0,
                (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
                -(u + 1.0) * u * (u - 2.0) / 2.0,
                (u + 1.0) * u * (u - 1.0) / 6.0,
            ];
        }
        let mut acc = 0.0;
        let mut multi = [0usize; 3];
        for k in 0..4usize.pow(d as u32) {
            let mut w = 1.0;
            let mut rem = k;
            for a in 0..d {
                let c = rem % 4;
                rem /= 4;
                multi[a] = idx[a][c];
                w *= wts[a][c];
            }
            acc += w * data[self.grid.flat_index(&multi[..d])];
        }
        acc
    }
}

impl InitialPhase for SampledPhase {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.interp(&self.value, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec3 {
        let mut g = [0.0; 3];
        for (a, c) in self.grad.iter().enumerate() {
            g[a] = self.interp(c, x);
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> Mat3 {
        let d = self.grid.dim();
        let mut h = ZERO;
        for i in 0..d {
            for j in 0..d {
                h[i][j] = self.interp(&self.hess[i * d + j], x);
            }
        }
        h
    }
}
