//! Flux-limited diffusion (FLD) and classical diffusion (CDA) for multiple
//! scattering in heterogeneous participating media on uniform voxel grids.
//!
//! The crate is `no_std` + `alloc` when built without the default `std`
//! feature. The `parallel` feature (on by default) runs the red-black
//! relaxation passes and the renderers on the rayon thread pool.
//!
//! Module map:
//!
//! * [`grid`]: scalar voxel fields, sampling, centered differences, coarsening
//! * [`limiters`]: flux limiters `F(R)`
//! * [`solver`]: red-black SOR Gauss-Seidel solve of the flux-limited diffusion equation
//! * [`classical`]: an independent fixed-`1/3` diffusion solver used as a cross-check
//! * [`analytic`]: closed-form point-source fluences and radial profile extraction
//! * [`lightbake`]: deep shadow map and reduced-incident source baking
//! * [`raymarch`]: primary-ray volume renderer and tone mapping
//! * [`pathtracer`]: delta-tracking volumetric path tracer used as ground truth
//! * [`scenes`]: procedural test scenes

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analytic;
pub mod classical;
mod error;
pub mod grid;
pub mod lightbake;
pub mod limiters;
mod math;
pub mod noise;
pub mod pathtracer;
mod real;
pub mod raymarch;
pub mod scenes;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{GridDims, ScalarField, Voxel};
pub use limiters::FluxLimiter;
pub use math::Vec3;
pub use real::Real;
pub use solver::{Boundary, Precision, SolveResult, SolverConfig};

/// Per-channel RGB triple.
pub type Rgb = [f64; 3];
