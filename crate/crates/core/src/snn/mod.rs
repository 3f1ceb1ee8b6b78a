//! Spiking classifier: additive solvers, FC + LIF layers, population decoding
//! and energy accounting.

mod energy;
mod lif;
mod model;
mod solver;

pub use energy::*;
pub use lif::{heaviside, lif_step};
pub use model::*;
pub use solver::*;
