//! Grid, fields, the marching scheme and its transpose.

pub mod csvio;
mod field;
mod grid;
mod model;
pub mod norms;
pub mod tridiag;

pub use field::{terminal_of, BoundaryControl, SpaceTimeField, TerminalPair, Traces};
pub use grid::{Grid, MIN_CELLS, MIN_STEPS};
pub use model::{CoefficientTable, ForwardData, WaveModel, CFL_LIMIT};
