//! Shared fixtures for the propagation benchmarks.

use spinfid_core::protocol::build_entanglement_protocol;
use spinfid_core::{ChainParams, Protocol};

/// Rabi frequency of the reference runs.
pub const RABI: f64 = 0.118;

/// The reference chain: `a = 100`, `J = 1`, `ω_0 = 0`.
pub fn chain(qubits: usize) -> ChainParams {
    ChainParams::new(qubits, 0.0, 100.0, 1.0).expect("valid reference chain")
}

pub fn protocol(qubits: usize) -> Protocol {
    build_entanglement_protocol(&chain(qubits), RABI).expect("protocol for L >= 3")
}
