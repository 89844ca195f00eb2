//! Semiclassical rotating nonlinear Schrodinger solvers.
//!
//! The crate integrates the NLS with a rotation term by Strang splitting
//! ([`nls`]), the rotational Hamilton-Jacobi phase by rays and Hessian
//! transport ([`rays`]), and the modified WKB system together with its
//! superfluid limit ([`wkb`]). [`observables`] evaluates mass, energy,
//! angular momentum and moments. [`harness`] drives configured runs, `eps`
//! sweeps and snapshot comparison.

pub mod error;
pub mod fd;
pub mod field;
pub mod grid;
pub mod harness;
pub mod init;
pub mod linalg;
pub mod nls;
pub mod norms;
pub mod observables;
pub mod params;
pub mod rays;
pub mod snapshot;
pub mod spectral;
pub mod wkb;

pub use error::{Error, Result};
pub use field::WaveField;
pub use grid::GridSpec;
pub use params::{Nonlinearity, SimParams};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/nls.md")]
    mod nls {}
    #[doc = include_str!("../../../book/src/rays.md")]
    mod rays {}
    #[doc = include_str!("../../../book/src/wkb.md")]
    mod wkb {}
    #[doc = include_str!("../../../book/src/observables.md")]
    mod observables {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
}
