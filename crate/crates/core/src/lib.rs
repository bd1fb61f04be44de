//! Simulation of static quantum circuits built from periodic XY spin
//! chains: dual-rail packet qubits, single-qubit gate blocks and an
//! entangling gate mediated by a gapped ancillary chain.

pub mod analytic;
pub mod basis;
pub mod harness;
pub mod operators;
pub mod propagate;
pub mod sparse;
pub mod states;
pub mod symmetry;
