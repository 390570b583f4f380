//! Hierarchic (Stackelberg-Nash) boundary control of the wave equation on a
//! domain that scales in time, `Omega_t = k(t) * (0, 1)`.
//!
//! The moving-domain problem is mapped to the unit cylinder `(0,1) x (0,T)`,
//! where it becomes `v'' + L v = 0` with time-dependent coefficients. On top of
//! an explicit/implicit leapfrog discretization whose adjoint is the exact
//! matrix transpose, the crate computes
//!
//! * the Nash follower `w2 = F(w1)` for a given leader control ([`follower`]),
//! * the leader control reaching the terminal balls with minimal norm, through
//!   the Fenchel dual problem solved by monotone FISTA ([`leader`]),
//! * verification diagnostics and a batch front end ([`diagnostics`], [`cli`]).

pub mod cli;
pub mod diagnostics;
pub mod discretization;
mod error;
pub mod follower;
pub mod leader;
pub mod scale;

pub use error::{Error, Result};
