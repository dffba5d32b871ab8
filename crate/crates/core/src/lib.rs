//! Digital twin of a 16-channel photonic QUBO solver.
//!
//! The crate simulates the optical vector-matrix multiplier (an FFT-mesh of
//! Mach-Zehnder interferometers read out by balanced homodyne detection),
//! injects calibrated detection and laser noise, runs a simulated-annealing
//! heuristic against the simulated chip and checks the outcome against an
//! exhaustive brute-force oracle. A deterministic latency model covers the
//! timing side of the hardware.
//!
//! Module map:
//!
//! - [`mesh`]: topology, thermo-optic phases, unitary composition, homodyne readout
//! - [`qubo`]: problems, costs, eigendecomposition mapping, brute-force oracle
//! - [`noise`]: noise channel and stability metrics (fidelity, scale factor, SNR)
//! - [`anneal`]: flip-count law, proposals, Metropolis acceptance, the run loop
//! - [`timing`]: latency breakdown and throughput arithmetic
//! - [`harness`]: campaigns, success curves, exports

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anneal;
pub mod error;
pub mod harness;
pub mod mesh;
pub mod noise;
pub mod qubo;
pub mod timing;

pub use error::{Error, Result};
