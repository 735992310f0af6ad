//! Simulation and analysis of the driven collective-decay spin model: Dicke
//! operators, Lindblad evolution, mean-field and phase dynamics, quantum
//! trajectories, tilted-generator large deviations and signal analysis.

pub mod analysis;
pub mod arnoldi;
pub mod error;
pub mod io;
pub mod largedev;
pub mod linalg;
pub mod mastereq;
pub mod parallel;
pub mod semiclassical;
pub mod sparse;
pub mod spinops;
pub mod superop;
pub mod unravel;

pub use error::{Error, Result};
pub use spinops::{
    build_collective_ops, magnetization, magnetization_of_density, spin_coherent_state,
    CollectiveOps, CollectiveSpinSystem, DenseOperator, Magnetization, OperatorLabel, QuantumState,
};
