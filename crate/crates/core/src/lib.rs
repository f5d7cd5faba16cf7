//! Numerical laboratory for the damped hyperbolic Stokes system
//!
//! ```text
//! ∂²u/∂t² − Δu + ∇p + a(x) ∂u/∂t = 0,   div u = 0,   u|∂Ω = 0
//! ```
//!
//! The crate is `no_std` and only needs `alloc`. It covers:
//!
//! * [`geometry`]: planar domains (rectangle, disk), damping profiles and the
//!   elliptic / hyperbolic / glancing classification of boundary points.
//! * [`raytracer`]: generalized bicharacteristics (free flight, specular
//!   reflection, gliding) and a sampled geometric-control-condition checker.
//! * [`stokes`]: MAC staggered-grid calculus on rectangles, the discrete Leray
//!   projector, the Stokes operator and its lowest eigenpairs.
//! * [`evolution`]: modal time integration (implicit midpoint), energy
//!   bookkeeping, decay fits and observability Gramians.
//! * [`spectral`]: the damped generator, its spectrum, imaginary-axis
//!   resolvent sweeps and per-mode quasimode diagnostics.
//! * [`lame`]: the penalized Lamé family converging to the Stokes system.
//!
//! File formats, configuration and the command-line runner live in the
//! `hypstokes-lab` companion crate.

#![no_std]

// Modules import `num_traits::Float` for the float methods `core` lacks. The
// import goes unused whenever std is linked in, hence the `allow`s.

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod banded;
pub mod error;
pub mod evolution;
pub mod geometry;
pub mod lame;
pub mod raytracer;
pub mod spectral;
pub mod stokes;

pub use error::{Error, Result};

/// 2-vector used for positions and directions.
pub type Vec2 = nalgebra::Vector2<f64>;

/// Euclidean remainder, always in `[0, m)` for `m > 0`.
#[inline]
pub(crate) fn rem_euclid(a: f64, m: f64) -> f64 {
    let r = a % m;
    if r < 0.0 {
        r + m
    } else {
        r
    }
}

/// Crate version, embedded in generated reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
