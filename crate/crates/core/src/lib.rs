//! Corroborative verification and validation of automated-vehicle
//! traffic-rule controllers.
//!
//! The crate pairs two evidence streams over one shared world model:
//!
//! * [`automata`]: rule controllers as timed automata, checked by zone-based
//!   reachability against safety properties;
//! * [`sim`] + [`assertions`]: the same controllers executed in closed loop
//!   in a kinematic simulator, with the resulting traces checked against
//!   invariant, execution, pre- and post-condition assertions;
//!
//! and [`corroboration`] cross-checks them with boundary and falsification
//! campaigns derived from the assumptions the formal verdict rests on.

pub mod assertions;
pub mod automata;
pub mod corroboration;
pub mod lex;
pub mod sim;
pub mod spatial;
pub mod traffic;

/// Hex SHA-256 of `bytes`, used to tie traces and reports to their inputs.
pub fn digest(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
