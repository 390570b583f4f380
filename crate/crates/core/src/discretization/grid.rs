use crate::{Error, Result};

pub const MIN_CELLS: usize = 8;
pub const MIN_STEPS: usize = 16;

/// Uniform grid on the cylinder `[0,1] x [0,T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub nt: usize,
    pub horizon: f64,
}

impl Grid {
    pub fn new(nx: usize, nt: usize, horizon: f64) -> Result<Self> {
        if nx < MIN_CELLS || nt < MIN_STEPS {
            return Err(Error::InvalidConfig(format!(
                "grid needs nx >= {MIN_CELLS} and nt >= {MIN_STEPS}, got ({nx}, {nt})"
            )));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidConfig(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { nx, nt, horizon })
    }

    pub fn dy(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 / self.nx as f64
    }

    pub fn t(&self, m: usize) -> f64 {
        self.horizon * m as f64 / self.nt as f64
    }

    pub fn nodes(&self) -> usize {
        self.nx + 1
    }

    pub fn levels(&self) -> usize {
        self.nt + 1
    }

    /// Trapezoidal time weight of level `m`.
    pub fn time_weight(&self, m: usize) -> f64 {
        if m == 0 || m == self.nt {
            0.5
        } else {
            1.0
        }
    }
}
