//! Simulation and analysis of a spin-1/2 Ising-chain quantum computer driven
//! by resonant rf-pulses.
//!
//! The chain has `L` nuclear spins with Larmor frequencies `ω_k = ω_0 + a·k`
//! and nearest-neighbour Ising coupling `J`. A protocol is a sequence of
//! rectangular circularly-polarized pulses; during each pulse the Hamiltonian
//! is stationary in the frame rotating with the pulse frequency.
//!
//! The crate provides
//!
//! - [`spinbasis`]: computational basis and state vectors,
//! - [`hamiltonian`]: static and rotating-frame Hamiltonians, single-flip
//!   energy differences, fake-transition values and the chaos-border estimate,
//! - [`protocol`]: pulses, the remote-entanglement protocol and the
//!   selective-regime validator,
//! - [`evolve_exact`]: exact propagation by per-pulse eigendecomposition,
//! - [`evolve_pert`]: the two-level block propagator with optional
//!   first-order dressing,
//! - [`fidelity`]: ideal target state, dynamical fidelity and the analytic
//!   slope law,
//! - [`sweep`]: parameter sweeps, CSV output and linear fits.
//!
//! Units: `ħ = 1`; all frequencies share one dimensionless unit and times are
//! inverse frequencies.

pub mod error;
pub mod evolve_exact;
pub mod evolve_pert;
pub mod fidelity;
pub mod hamiltonian;
pub mod protocol;
pub mod spinbasis;
pub mod sweep;

pub use error::{Error, Result};
pub use evolve_exact::{ExactEvolver, PulsePropagator};
pub use evolve_pert::{ErrorParams, Order, PertEvolver, TwoLevelBlock};
pub use fidelity::{FidelityReport, LinearFit, PredictedFidelity, PropagatorChoice, Simulation};
pub use hamiltonian::{ChainParams, ChaosEstimate, CouplingCensus, RotFrameHam};
pub use protocol::{Protocol, ProtocolKind, Pulse, SelectiveReport};
pub use spinbasis::{BasisState, Frame, StateVector};
pub use sweep::{SlopeReport, SweepParam, SweepRow, SweepSpec};

/// Complex amplitude type used throughout.
pub type C64 = num_complex::Complex64;
