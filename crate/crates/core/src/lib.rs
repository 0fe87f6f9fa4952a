//! Simulation and analysis of bipartite consensus on matrix-weighted signed
//! networks, with actuator saturation and dynamic event-triggered
//! communication.
//!
//! - [`matgraph`]: weights, Laplacians, structural balance, assumptions.
//! - [`control`]: saturation, control laws, trigger gains and functions.
//! - [`sim`]: the hybrid simulator and consensus metrics.
//! - [`scenario`], [`output`], [`plot`]: scenario files, CSV and SVG output.

pub mod cli;
pub mod control;
pub mod matgraph;
pub mod output;
pub mod plot;
pub mod scenario;
pub mod sim;

#[cfg(test)]
pub(crate) mod testdata;
