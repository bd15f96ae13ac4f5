//! Computational line geometry of real projective 3-space.
//!
//! The crate is organized bottom-up: [`projective`] holds points, lines and maps,
//! [`clifford`] the quaternionic Clifford parallelism, [`flows`] the nine normal forms of
//! one-parameter projective groups, and [`dynamics`] orbit limits and the replays of the
//! limit arguments that rule out non-compact automorphism groups of a parallelism.

pub mod error;
pub mod flows;
pub mod clifford;
pub mod dynamics;
pub mod projective;

pub use error::{Error, Result};
