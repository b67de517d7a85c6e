//! Discrete-event simulator of spin-photon quantum network architectures.
//!
//! The crate quantifies entanglement-distribution performance for optically
//! linked spin nodes: heralded Bell-pair generation, teleported gates and
//! distillation built on those pairs, repeater chains, memory-assisted MDI
//! QKD sessions, and connectivity-dependent logical-gate cost analysis.
//!
//! Module map:
//! - [`qstate`]: dense density-matrix engine, the exact reference for every
//!   protocol circuit (≤ 10 qubits).
//! - [`photonics`]: photon emission, two-photon interference, and the
//!   heralded two-round entanglement attempt with detection-time filtering.
//! - [`entanglement`]: Bell-diagonal pair algebra — teleported CNOT,
//!   swapping, distillation, and memory decay — with a consumption ledger.
//! - [`network`]: topologies, link budgets, the deterministic event queue,
//!   and gen-1/gen-2 repeater protocols.
//! - [`protocols`]: MA-MDI QKD over one or two hubs plus connectivity and
//!   code-overhead analyses.
//! - [`oracle`]: independent circuit-level reference implementations used by
//!   the test suites to validate the closed-form paths.

pub mod entanglement;
pub mod network;
pub mod oracle;
pub mod photonics;
pub mod protocols;
pub mod qstate;

/// Deterministic RNG used throughout the simulator; explicit so results are
/// reproducible across platforms and releases.
pub type SimRng = rand_chacha::ChaCha8Rng;
