//! Fourier control barrier certificates for stochastic systems learned from data.
//!
//! The pipeline fits an empirical conditional mean embedding to sampled
//! transitions, expands the barrier in a truncated Fourier basis, transfers the
//! embedding onto that basis with an FFT and tightens the resulting
//! semi-infinite program into a finite LP over a periodic lattice.
//!
//! Module map:
//! - [`geometry`]: domains, regions, lattices
//! - [`kernels`]: squared-exponential kernel and the empirical CME
//! - [`spectral`]: feature basis, barrier evaluation, transfer matrix
//! - [`bounds`]: lattice-based bounds for trigonometric polynomials
//! - [`lp`]: LP model, assembly and the text format
//! - [`solver`]: dense simplex and external back-ends
//! - [`systems`]: benchmark dynamics, MLP controllers, rollouts
//! - [`certify`]: synthesis, independent checking, Monte Carlo
//! - [`cli`]: configuration and command implementations

pub mod bounds;
pub mod certify;
pub mod cli;
pub mod geometry;
pub mod kernels;
pub mod lp;
pub mod solver;
pub mod spectral;
pub mod systems;

mod error;
pub use error::{Error, Result};
