//! Discrete Lebesgue and Sobolev norms.
//!
//! The `H^s` norm is spectral, `(sum_k (1 + |k|^2)^s |u_k|^2 dV)^(1/2)` with
//! `u_k` normalized so that `s = 0` reproduces the discrete `L^2` norm.
//! Fractional `s` is allowed.

use rustfft::num_complex::Complex64;

use crate::grid::GridSpec;
use crate::spectral::Spectral;

/// Default Sobolev index, above `2 + d/2` for `d <= 3`.
pub const DEFAULT_SOBOLEV_INDEX: f64 = 4.0;

fn hs_squared(spec: &Spectral, data: &[Complex64], s: f64) -> f64 {
    let grid = spec.grid();
    let mut work = data.to_vec();
    spec.forward_nd(&mut work);
    let ks: Vec<&[f64]> = (0..grid.dim()).map(|a| spec.wavenumbers(a)).collect();
    let scale = grid.cell_measure() / grid.len() as f64;
    work.iter()
        .enumerate()
        .map(|(p, z)| {
            let idx = grid.multi_index(p);
            let k2: f64 = (0..grid.dim()).map(|a| ks[a][idx[a]].powi(2)).sum();
            (1.0 + k2).powf(s) * z.norm_sqr()
        })
        .sum::<f64>()
        * scale
}

/// `H^s` norm of a (possibly multi-component) field; with `weighted` the
/// combination `||U||_s + || |x| U ||_{s-1}` is returned.
pub fn sobolev_norm(grid: &GridSpec, components: &[&[Complex64]], s: f64, weighted: bool) -> f64 {
    let spec = Spectral::new(grid);
    let plain: f64 = components.iter().map(|c| hs_squared(&spec, c, s)).sum::<f64>();
    if !weighted {
        return plain.sqrt();
    }
    let radius = grid.sample(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt());
    let moment: f64 = components
        .iter()
        .map(|c| {
            let xc: Vec<Complex64> = c.iter().zip(&radius).map(|(z, r)| z * r).collect();
            hs_squared(&spec, &xc, s - 1.0)
        })
        .sum();
    plain.sqrt() + moment.sqrt()
}

/// Real-valued components, e.g. the WKB unknowns `(alpha, beta, v_1, .., v_d)`.
pub fn sobolev_norm_real(grid: &GridSpec, components: &[&[f64]], s: f64, weighted: bool) -> f64 {
    let owned: Vec<Vec<Complex64>> = components
        .iter()
        .map(|c| c.iter().map(|&x| Complex64::new(x, 0.0)).collect())
        .collect();
    let refs: Vec<&[Complex64]> = owned.iter().map(|v| v.as_slice()).collect();
    sobolev_norm(grid, &refs, s, weighted)
}

pub fn l1(grid: &GridSpec, values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().map(f64::abs).sum::<f64>() * grid.cell_measure()
}

pub fn l2(grid: &GridSpec, values: impl IntoIterator<Item = f64>) -> f64 {
    (values.into_iter().map(|x| x * x).sum::<f64>() * grid.cell_measure()).sqrt()
}

pub fn linf(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().map(f64::abs).fold(0.0, f64::max)
}

pub fn l2_complex(grid: &GridSpec, values: &[Complex64]) -> f64 {
    l2(grid, values.iter().map(|z| z.norm()))
}
