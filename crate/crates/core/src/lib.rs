//! Simulation and bifurcation analysis of planar piecewise-smooth continuous
//! Liénard systems with a corner on the splitting line `x = 0`.

pub mod bifurcation;
pub mod cli;
pub mod config;
pub mod expr;
pub mod fixtures;
pub mod integrator;
pub mod io;
pub mod orbits;
pub mod roots;
pub mod system;

pub use expr::{Expression, Jet3};
pub use system::SystemDefinition;
