//! Exact few-qubit simulation of quantum energy teleportation (QET):
//! minimal and fully unitary protocols, strong local passivity, a
//! circuit-level shot simulator, QET-based algorithmic cooling, and
//! negative energy densities of a (1+1)-D massless scalar field.

pub mod cooling;
pub mod error;
pub mod hardware_sim;
pub mod minimal_qet;
pub mod optim;
pub mod qft1d;
pub mod qcore;
pub mod quad;
pub mod rng;
pub mod slp;
pub mod unitary_qet;

pub use error::{QetError, Result};
pub use qcore::{
    embed, expect, hermitian_eig, kron, matexp_pauli_pair, partial_trace, ComplexMatrix, DensityOperator, Pauli,
    QubitOrdering, StateVector, Subsystem, C64,
};
pub use minimal_qet::{EnergyLedger, MinimalParams};
pub use unitary_qet::UnitaryParams;
pub use cooling::{CoolingSystem, PovmParams, PurityReport};
pub use hardware_sim::{Circuit, ConfusionMatrix, Gate, HardwareReport, Observable, ShotResult, ShotSettings};
pub use qft1d::{FieldScenario, Smearing, WellMetrics};
pub use slp::{SlpInstance, SlpVerdict};
