//! Simulation and verification of consistent families of sticky Brownian
//! motions and the lattice flows of kernels that approximate them.
//!
//! * [`cells`]: partitions, split vectors and the piecewise-linear generator.
//! * [`params`]: measures, θ- and p-families and the conversions between them.
//! * [`flow`]: seeded Poisson environments and exact kernel propagation on `Z`.
//! * [`chain`]: the N-point lattice chain, diffusive rescaling and samplers
//!   for the continuum family.
//! * [`halfplane`]: the sticky half-plane diffusion and its exit statistics.
//! * [`verify`]: Monte Carlo estimation and the statistical checks.

pub mod cells;
pub mod chain;
pub mod error;
pub mod flow;
pub mod halfplane;
pub mod params;
pub mod path;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
