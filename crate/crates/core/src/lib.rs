//! Magnetic Lorentz gas toolkit.
//!
//! Three levels of description of a charged particle moving among Poisson
//! hard disks in a perpendicular magnetic field, and cross-checks between them:
//!
//! * [`geometry`], [`medium`], [`lorentz_sim`]: exact event-driven dynamics;
//! * [`boltzmann_process`], [`operators`]: the generalized Boltzmann process
//!   with self-recollision memory and its generator on the velocity circle;
//! * [`kinetic_solver`]: the kinetic equation with delays, its Hilbert
//!   expansion and the limiting heat equation.

pub mod boltzmann_process;
pub mod cli;
pub mod error;
pub mod fourier;
pub mod geometry;
pub mod kinetic_solver;
pub mod lorentz_sim;
pub mod medium;
pub mod operators;
pub mod quadrature;
pub mod seeding;
pub mod stats;

pub use error::{Error, Result};
