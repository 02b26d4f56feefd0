//! Numerics for the angle / angular-momentum pair on the cylinder phase space.
//!
//! Von Mises minimum-uncertainty states, moments and displacement operators,
//! the two-mode simultaneous-measurement bound, EPR-like teleportation, and
//! the Q / Wigner / P characteristic-function hierarchy.

pub mod angular_state;
pub mod epr_teleport;
pub mod error;
pub mod joint_measurement;
pub mod operators;
pub mod phase_space;
pub mod special_fn;
pub mod verify;

pub use angular_state::{AngularWindow, TruncatedKet, VonMisesParams};
pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
