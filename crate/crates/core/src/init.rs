//! WKB assembly and canonical initial amplitudes.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::grid::GridSpec;

/// `psi = a exp(i Phi / eps)` pointwise.
pub fn wkb_assemble(
    grid: &GridSpec,
    amplitude: &[Complex64],
    phase: &[f64],
    eps: f64,
) -> Result<WaveField> {
    if amplitude.len() != grid.len() || phase.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "amplitude {} / phase {} samples for {} nodes",
            amplitude.len(),
            phase.len(),
            grid.len()
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::param("eps", "WKB assembly needs eps > 0"));
    }
    let values = amplitude
        .iter()
        .zip(phase)
        .map(|(a, s)| {
            let (sin, cos) = (s / eps).sin_cos();
            a * Complex64::new(cos, sin)
        })
        .collect();
    WaveField::new(grid.clone(), values, 0.0, eps)
}

/// Scale `values` in place to unit discrete mass.
pub fn normalize(grid: &GridSpec, values: &mut [Complex64]) {
    let mass: f64 = values.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.cell_measure();
    if mass > 0.0 {
        let s = mass.sqrt().recip();
        values.iter_mut().for_each(|z| *z *= s);
    }
}

/// Unit-mass Gaussian amplitude `exp(-|x - c|^2 / (2 w^2))`.
///
/// With `width = 1/sqrt(2)` this is the reference profile `a_in ~ exp(-|x|^2)`.
pub fn gaussian(grid: &GridSpec, center: &[f64], width: f64) -> Vec<Complex64> {
    let mut values = grid.sample(|x| {
        let r2: f64 = x.iter().zip(center).map(|(xi, ci)| (xi - ci).powi(2)).sum();
        Complex64::new((-r2 / (2.0 * width * width)).exp(), 0.0)
    });
    normalize(grid, &mut values);
    values
}

/// Vortex amplitude `r^|m| exp(-r^2 / (2 w^2)) exp(i m theta)` with unit mass.
pub fn make_vortex_init(grid: &GridSpec, winding: i32, width: f64) -> Result<Vec<Complex64>> {
    if grid.dim() != 2 {
        return Err(Error::DimensionUnsupported(grid.dim()));
    }
    if !(width > 0.0) {
        return Err(Error::param("width", format!("{width} must be > 0")));
    }
    let m = winding.unsigned_abs() as i32;
    let mut values = grid.sample(|x| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        let envelope = r2.sqrt().powi(m) * (-r2 / (2.0 * width * width)).exp();
        if envelope == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let theta = x[1].atan2(x[0]);
        Complex64::from_polar(envelope, winding as f64 * theta)
    });
    normalize(grid, &mut values);
    Ok(values)
}

/// Grid nodes on the boundary of the square `max(|x_1|, |x_2|) = half_side`,
/// traversed counter-clockwise. The side is snapped to the nearest grid line.
pub fn square_loop(grid: &GridSpec, half_side: f64) -> Vec<usize> {
    let n = grid.points();
    let snap = |axis: usize, x: f64| -> usize {
        ((x + grid.half_extents()[axis]) / grid.spacing(axis)).round() as usize
    };
    let (i_lo, i_hi) = (snap(0, -half_side), snap(0, half_side));
    let (j_lo, j_hi) = (snap(1, -half_side), snap(1, half_side));
    assert!(i_hi < n[0] && j_hi < n[1] && i_lo < i_hi && j_lo < j_hi);
    let mut path = Vec::new();
    for i in i_lo..i_hi {
        path.push(grid.flat_index(&[i, j_lo]));
    }
    for j in j_lo..j_hi {
        path.push(grid.flat_index(&[i_hi, j]));
    }
    for i in (i_lo + 1..=i_hi).rev() {
        path.push(grid.flat_index(&[i, j_hi]));
    }
    for j in (j_lo + 1..=j_hi).rev() {
        path.push(grid.flat_index(&[i_lo, j]));
    }
    path
}

/// Net phase winding of `values` along a closed node path, in units of `2 pi`.
pub fn winding_number(values: &[Complex64], path: &[usize]) -> i64 {
    let mut total = 0.0;
    for (k, &p) in path.iter().enumerate() {
        let q = path[(k + 1) % path.len()];
        total += (values[q] * values[p].conj()).arg();
    }
    (total / (2.0 * PI)).round() as i64
}
