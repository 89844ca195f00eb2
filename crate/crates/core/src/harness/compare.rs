//! Differences between two snapshot files.

use std::path::Path;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::inner;
use crate::norms;
use crate::snapshot::Snapshot;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareMetrics {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    /// `H^s` norm of the difference.
    pub hs: f64,
    pub s: f64,
    /// `min_theta || A - e^{i theta} B ||_{L^2}`.
    pub gauge_l2: f64,
    /// Relative `L^2` difference, `l2 / ||A||`.
    pub relative_l2: f64,
}

/// `B` rotated by the global phase that best aligns it with `A`.
pub fn gauge_align(grid: &crate::grid::GridSpec, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let ip = inner(grid, b, a);
    let rot = if ip.norm() > 0.0 { ip / ip.norm() } else { Complex64::new(1.0, 0.0) };
    b.iter().map(|z| z * rot).collect()
}

pub fn compare_fields(a: &Snapshot, b: &Snapshot, s: f64) -> Result<CompareMetrics> {
    a.grid.same_as(&b.grid)?;
    let grid = &a.grid;
    let diff: Vec<Complex64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    let aligned = gauge_align(grid, &a.values, &b.values);
    let gauge: Vec<Complex64> = a.values.iter().zip(&aligned).map(|(x, y)| x - y).collect();
    let l2 = norms::l2_complex(grid, &diff);
    let na = norms::l2_complex(grid, &a.values);
    Ok(CompareMetrics {
        l1: norms::l1(grid, diff.iter().map(|z| z.norm())),
        l2,
        linf: norms::linf(diff.iter().map(|z| z.norm())),
        hs: norms::sobolev_norm(grid, &[&diff], s, false),
        s,
        gauge_l2: norms::l2_complex(grid, &gauge),
        relative_l2: if na > 0.0 { l2 / na } else { l2 },
    })
}

pub fn compare_files(a: &Path, b: &Path, s: f64) -> Result<CompareMetrics> {
    compare_fields(&Snapshot::read(a)?, &Snapshot::read(b)?, s)
}
