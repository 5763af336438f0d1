//! Compressive k-means on a classical simulator of a small quantum device.
//!
//! A dataset is summarized by a fixed-length sketch of averaged random
//! Fourier features. Sketch components are estimated with simulated
//! Hadamard-test circuits over a subsampled, zero-padded diagonal phase
//! oracle. Centroids are then chosen from jittered candidate sets by solving
//! one small one-hot QUBO per cluster with shallow QAOA under an XY ring
//! mixer, and refined by a Lloyd-style loop with elitist retention.
//!
//! Module map:
//!
//! | module       | contents                                                     |
//! |--------------|--------------------------------------------------------------|
//! | [`data`]     | matrices, standardization, frequencies, feature map, SSE     |
//! | [`rng`]      | keyed, reproducible random streams                           |
//! | [`statevec`] | dense statevector simulator, shot sampling, Pauli noise      |
//! | [`sketch`]   | exact and Hadamard-test sketch estimation, diagnostics       |
//! | [`qubo`]     | group / joint QUBO construction, energies, relaxation bounds |
//! | [`solver`]   | QAOA with XY ring mixer, exhaustive oracles, gate counts     |
//! | [`pipeline`] | end-to-end clustering loop and resource accounting           |
//! | [`bench`]    | dataset generators, CSV loading, baselines, experiment grid  |

pub mod bench;
pub mod data;
pub mod error;
pub mod pipeline;
pub mod qubo;
pub mod rng;
pub mod sketch;
pub mod solver;
pub mod statevec;

pub use error::{Error, Result};
