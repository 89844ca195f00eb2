//! Uniform periodic grids on the box `[-L, L)^d`.
//!
//! Samples are stored row-major: the first axis varies slowest. For `d = 2`
//! the flat index of node `(i, j)` is `i * n_2 + j`, where `i` indexes `x_1`
//! and `j` indexes `x_2`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum supported spatial dimension.
pub const MAX_DIM: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    points: Vec<usize>,
    half_extent: Vec<f64>,
}

impl GridSpec {
    pub fn new(points: Vec<usize>, half_extent: Vec<f64>) -> Result<Self> {
        let dim = points.len();
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::param("dim", format!("expected 2 or 3 axes, got {dim}")));
        }
        if half_extent.len() != dim {
            return Err(Error::param(
                "half_extent",
                format!("{} values for {dim} axes", half_extent.len()),
            ));
        }
        for &n in &points {
            if n < 8 || !n.is_power_of_two() {
                return Err(Error::param(
                    "points",
                    format!("{n} is not a power of two >= 8"),
                ));
            }
        }
        for &l in &half_extent {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::param("half_extent", format!("{l} is not positive")));
            }
        }
        Ok(Self {
            points,
            half_extent,
        })
    }

    /// Same number of points and half extent on every axis.
    pub fn uniform(dim: usize, points: usize, half_extent: f64) -> Result<Self> {
        Self::new(vec![points; dim], vec![half_extent; dim])
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn half_extents(&self) -> &[f64] {
        &self.half_extent
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.half_extent[axis] / self.points[axis] as f64
    }

    /// Volume of one grid cell, the quadrature weight of every node.
    pub fn cell_measure(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    pub fn domain_measure(&self) -> f64 {
        self.half_extent.iter().map(|l| 2.0 * l).product()
    }

    /// Coordinate of node `j` on `axis`: `-L + j dx`.
    pub fn coord(&self, axis: usize, j: usize) -> f64 {
        -self.half_extent[axis] + j as f64 * self.spacing(axis)
    }

    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.points[axis]).map(|j| self.coord(axis, j)).collect()
    }

    /// Distance between consecutive flat indices along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.points[axis + 1..].iter().product()
    }

    pub fn multi_index(&self, flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        let mut rem = flat;
        for axis in (0..self.dim()).rev() {
            idx[axis] = rem % self.points[axis];
            rem /= self.points[axis];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.points)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Physical position of a node; unused trailing components are zero.
    pub fn position(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.dim() {
            x[axis] = self.coord(axis, idx[axis]);
        }
        x
    }

    /// Angular wavenumbers in FFT order for `axis`.
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.points[axis];
        let base = 2.0 * PI / (2.0 * self.half_extent[axis]);
        (0..n)
            .map(|j| {
                let m = if j < n / 2 { j as isize } else { j as isize - n as isize };
                base * m as f64
            })
            .collect()
    }

    /// Number of one-dimensional lines running along `axis`.
    pub fn line_count(&self, axis: usize) -> usize {
        self.len() / self.points[axis]
    }

    /// Flat index of the first node of line `line` along `axis`.
    pub fn line_start(&self, axis: usize, line: usize) -> usize {
        let stride = self.stride(axis);
        let outer = line / stride;
        let inner = line % stride;
        outer * self.points[axis] * stride + inner
    }

    /// Multi-index of a line's first node (the `axis` slot is zero).
    pub fn line_multi_index(&self, axis: usize, line: usize) -> [usize; MAX_DIM] {
        self.multi_index(self.line_start(axis, line))
    }

    /// Copy every line along `axis` into a contiguous line-major buffer.
    pub fn gather_lines<T: Copy + Send + Sync>(&self, data: &[T], axis: usize) -> Vec<T> {
        let n = self.points[axis];
        let stride = self.stride(axis);
        if stride == 1 {
            return data.to_vec();
        }
        let mut out = Vec::with_capacity(data.len());
        for line in 0..self.line_count(axis) {
            let start = self.line_start(axis, line);
            out.extend((0..n).map(|j| data[start + j * stride]));
        }
        out
    }

    /// Inverse of [`GridSpec::gather_lines`].
    pub fn scatter_lines<T: Copy + Send + Sync>(&self, lines: &[T], axis: usize, data: &mut [T]) {
        let n = self.points[axis];
        let stride = self.stride(axis);
        if stride == 1 {
            data.copy_from_slice(lines);
            return;
        }
        for (line, chunk) in lines.chunks(n).enumerate() {
            let start = self.line_start(axis, line);
            for (j, &v) in chunk.iter().enumerate() {
                data[start + j * stride] = v;
            }
        }
    }

    /// Evaluate `f` at every node position, in parallel.
    pub fn sample<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[f64]) -> T + Sync,
    {
        let dim = self.dim();
        (0..self.len())
            .into_par_iter()
            .with_min_len(1024)
            .map(|p| f(&self.position(p)[..dim]))
            .collect()
    }

    pub fn same_as(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{:?}/{:?} vs {:?}/{:?}",
                self.points, self.half_extent, other.points, other.half_extent
            )))
        }
    }

    /// Mask of nodes inside the inner box `|x_j| <= frac * L_j` on every axis.
    pub fn interior_mask(&self, frac: f64) -> Vec<bool> {
        let lims: Vec<f64> = self.half_extent.iter().map(|l| frac * l).collect();
        self.sample(|x| x.iter().zip(&lims).all(|(xi, l)| xi.abs() <= *l))
    }
}
