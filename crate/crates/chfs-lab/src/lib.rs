//! Desk-scale simulation laboratory for seeded families of Haar-random
//! quantum states and the protocols built on top of them.
//!
//! The crate is organized in layers:
//!
//! - [`hilbert`] — exact dense quantum linear algebra (states, unitaries,
//!   Haar sampling, distances, partial traces, register surgery).
//! - [`oracle`] — seeded families of Haar states indexed by bit strings, with
//!   isometric, unitarized, and classically-accessible query interfaces.
//! - [`state_tests`] — swap/purity/product tests evaluated both as exact
//!   probabilities and as sampled outcomes.
//! - [`tomography`] — black-box reconstruction of small unitaries with a
//!   diamond-norm error bound.
//! - [`primitives`] — the pseudorandom constructions under study and the
//!   candidate black boxes used as attack targets.
//! - [`attacks`] — the distinguishing algorithms and their scoring rules.
//! - [`verify`] — Monte-Carlo verification of the analytic claims the
//!   constructions rest on.
//! - [`harness`] — experiment configs, records, and replay plumbing behind
//!   the command-line binary.
//!
//! Every random choice flows through [`rng::LabRng`], a seeded, streamed
//! generator: a run is reproduced exactly by its (seed, stream) pair, and
//! parallel work splits into numbered substreams so results are independent
//! of thread scheduling.

pub mod attacks;
pub mod bits;
pub mod error;
pub mod harness;
pub mod hilbert;
pub mod oracle;
pub mod primitives;
pub mod rng;
pub mod stats;
pub mod tomography;
pub mod verify;
