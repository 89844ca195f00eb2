//! FFT plumbing shared by the split-step integrator and the spectral observables.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridSpec;

/// Forward/inverse FFT plans for every axis of a grid.
#[derive(Clone)]
pub struct Spectral {
    grid: GridSpec,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    wavenumbers: Vec<Vec<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = grid.points().iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = grid.points().iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let wavenumbers = (0..grid.dim()).map(|a| grid.wavenumbers(a)).collect();
        Self {
            grid: grid.clone(),
            forward,
            inverse,
            wavenumbers,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.wavenumbers[axis]
    }

    /// Transform every line along `axis`, let `op(line, spectrum)` modify the
    /// unnormalized spectrum, then transform back. `op` is responsible for the
    /// `1/n` normalization.
    pub fn map_lines<F>(&self, data: &mut [Complex64], axis: usize, op: F)
    where
        F: Fn(usize, &mut [Complex64]) + Sync,
    {
        let n = self.grid.points()[axis];
        let mut lines = self.grid.gather_lines(data, axis);
        let fwd = &self.forward[axis];
        let inv = &self.inverse[axis];
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        lines
            .par_chunks_mut(n)
            .enumerate()
            .with_min_len(8)
            .for_each_init(
                || vec![Complex64::new(0.0, 0.0); scratch_len],
                |scratch, (line, buf)| {
                    fwd.process_with_scratch(buf, scratch);
                    op(line, buf);
                    inv.process_with_scratch(buf, scratch);
                },
            );
        self.grid.scatter_lines(&lines, axis, data);
    }

    /// Unnormalized d-dimensional forward transform.
    pub fn forward_nd(&self, data: &mut [Complex64]) {
        for axis in 0..self.grid.dim() {
            self.transform_axis(data, axis, true);
        }
    }

    /// Inverse of [`Spectral::forward_nd`], normalization included.
    pub fn inverse_nd(&self, data: &mut [Complex64]) {
        for axis in 0..self.grid.dim() {
            self.transform_axis(data, axis, false);
        }
        let scale = 1.0 / self.grid.len() as f64;
        data.par_iter_mut().for_each(|z| *z *= scale);
    }

    fn transform_axis(&self, data: &mut [Complex64], axis: usize, forward: bool) {
        let n = self.grid.points()[axis];
        let plan = if forward {
            &self.forward[axis]
        } else {
            &self.inverse[axis]
        };
        let mut lines = self.grid.gather_lines(data, axis);
        let scratch_len = plan.get_inplace_scratch_len();
        lines.par_chunks_mut(n).with_min_len(8).for_each_init(
            || vec![Complex64::new(0.0, 0.0); scratch_len],
            |scratch, buf| plan.process_with_scratch(buf, scratch),
        );
        self.grid.scatter_lines(&lines, axis, data);
    }

    /// Spectral first derivative along `axis`; the Nyquist mode is dropped.
    pub fn derivative(&self, data: &[Complex64], axis: usize) -> Vec<Complex64> {
        let n = self.grid.points()[axis];
        let k = &self.wavenumbers[axis];
        let mut out = data.to_vec();
        self.map_lines(&mut out, axis, |_, spec| {
            for (j, z) in spec.iter_mut().enumerate() {
                *z = if j == n / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, k[j] / n as f64) * *z
                };
            }
        });
        out
    }

    pub fn gradient(&self, data: &[Complex64]) -> Vec<Vec<Complex64>> {
        (0..self.grid.dim()).map(|a| self.derivative(data, a)).collect()
    }

    /// Real-field convenience wrapper of [`Spectral::derivative`].
    pub fn derivative_real(&self, data: &[f64], axis: usize) -> Vec<f64> {
        let z: Vec<Complex64> = data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.derivative(&z, axis).into_iter().map(|z| z.re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_plane_wave_is_exact() {
        let g = GridSpec::uniform(2, 32, 4.0).unwrap();
        let s = Spectral::new(&g);
        let k = [3.0 * std::f64::consts::PI / 4.0, -std::f64::consts::PI / 2.0];
        let psi = g.sample(|x| Complex64::from_polar(1.0, k[0] * x[0] + k[1] * x[1]));
        for axis in 0..2 {
            let d = s.derivative(&psi, axis);
            for (a, b) in d.iter().zip(&psi) {
                let expect = Complex64::new(0.0, k[axis]) * b;
                assert!((a - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn nd_roundtrip() {
        let g = GridSpec::new(vec![8, 16, 8], vec![1.0, 2.0, 3.0]).unwrap();
        let s = Spectral::new(&g);
        let orig = g.sample(|x| Complex64::new(x[0] * x[1] - x[2], (x[0] + x[2]).sin()));
        let mut work = orig.clone();
        s.forward_nd(&mut work);
        s.inverse_nd(&mut work);
        for (a, b) in work.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
