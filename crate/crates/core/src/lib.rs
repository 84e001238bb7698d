//! Lattice-based distributed mean estimation.
//!
//! Inputs are rounded to a randomly shifted cubic lattice and sent as their
//! coordinates mod `q`; a receiver recovers the point from its own nearby
//! vector. The crate has the codec, a randomized-rotation wrapper, a
//! checksum-protected variant with modulus escalation, a sub-linear variant,
//! protocols over a simulated bit-metered network, reference quantizers and
//! an experiment harness.

pub mod baselines;
pub mod bits;
pub mod codec;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod protocols;
pub mod quantizer;
pub mod random;
pub mod robust;
pub mod rotation;
pub mod sublinear;

pub use codec::{Encoded, VectorCodec};
pub use error::{Error, Result};
pub use random::{Domain, RoundId, SharedRandomness};
