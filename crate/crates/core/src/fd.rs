//! Fourth-order centered finite differences with periodic wrap.

use rayon::prelude::*;

use crate::grid::GridSpec;

const D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const D2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];

fn stencil(grid: &GridSpec, data: &[f64], axis: usize, coef: &[f64; 5], scale: f64, out: &mut [f64]) {
    let n = grid.points()[axis];
    let stride = grid.stride(axis);
    // chunk c covers the nodes with (outer, i) = (c / n, c % n) and all inner offsets
    out.par_chunks_mut(stride)
        .enumerate()
        .with_min_len((4096 / stride).max(1))
        .for_each(|(c, chunk)| {
            let outer = c / n;
            let i = c % n;
            let block = outer * n * stride;
            let rows: [usize; 5] = std::array::from_fn(|k| {
                let j = (i + n + k - 2) % n;
                block + j * stride
            });
            for (inner, o) in chunk.iter_mut().enumerate() {
                let mut acc = 0.0;
                for k in 0..5 {
                    acc += coef[k] * data[rows[k] + inner];
                }
                *o = acc * scale;
            }
        });
}

/// `d/dx_axis` to fourth order.
pub fn d1(grid: &GridSpec, data: &[f64], axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    stencil(grid, data, axis, &D1, 1.0 / grid.spacing(axis), &mut out);
    out
}

/// `d^2/dx_axis^2` to fourth order.
pub fn d2(grid: &GridSpec, data: &[f64], axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    let h = grid.spacing(axis);
    stencil(grid, data, axis, &D2, 1.0 / (h * h), &mut out);
    out
}

pub fn laplacian(grid: &GridSpec, data: &[f64]) -> Vec<f64> {
    let mut acc = d2(grid, data, 0);
    for axis in 1..grid.dim() {
        let part = d2(grid, data, axis);
        acc.par_iter_mut().zip(part.par_iter()).for_each(|(a, b)| *a += b);
    }
    acc
}

pub fn gradient(grid: &GridSpec, data: &[f64]) -> Vec<Vec<f64>> {
    (0..grid.dim()).map(|a| d1(grid, data, a)).collect()
}
