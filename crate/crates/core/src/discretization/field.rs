use super::Grid;
use crate::scale::{Segment, Side};
use crate::{Error, Result};

/// Values on the `(t, y)` grid, row-major by time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: Grid,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.levels() * grid.nodes()],
        }
    }

    /// Samples `f(y, t)` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut field = Self::zeros(grid);
        for m in 0..grid.levels() {
            let t = grid.t(m);
            for (j, v) in field.level_mut(m).iter_mut().enumerate() {
                *v = f(grid.y(j), t);
            }
        }
        field
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.levels() * grid.nodes() {
            return Err(Error::Shape(format!(
                "field needs {} x {} values, got {}",
                grid.levels(),
                grid.nodes(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn level(&self, m: usize) -> &[f64] {
        let n = self.grid.nodes();
        &self.values[m * n..(m + 1) * n]
    }

    pub fn level_mut(&mut self, m: usize) -> &mut [f64] {
        let n = self.grid.nodes();
        &mut self.values[m * n..(m + 1) * n]
    }

    pub fn get(&self, m: usize, j: usize) -> f64 {
        self.values[m * self.grid.nodes() + j]
    }

    pub fn set(&mut self, m: usize, j: usize, v: f64) {
        let n = self.grid.nodes();
        self.values[m * n + j] = v;
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &SpaceTimeField) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn sub(&self, other: &SpaceTimeField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `⟨self, other⟩_Q`: trapezoid in time, interior nodes in space.
    pub fn inner_q(&self, other: &SpaceTimeField) -> f64 {
        let g = self.grid;
        let mut total = 0.0;
        for m in 0..g.levels() {
            let (a, b) = (self.level(m), other.level(m));
            let s: f64 = (1..g.nx).map(|j| a[j] * b[j]).sum();
            total += g.time_weight(m) * s;
        }
        total * g.dt() * g.dy()
    }

    pub fn norm_q(&self) -> f64 {
        self.inner_q(self).sqrt()
    }

    /// Left and right boundary columns.
    pub fn boundary_traces(&self) -> Traces {
        let g = self.grid;
        Traces {
            left: (0..g.levels()).map(|m| self.get(m, 0)).collect(),
            right: (0..g.levels()).map(|m| self.get(m, g.nx)).collect(),
        }
    }
}

/// Dirichlet data on both ends, one sample per time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Traces {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl Traces {
    pub fn zeros(nt: usize) -> Self {
        Self {
            left: vec![0.0; nt + 1],
            right: vec![0.0; nt + 1],
        }
    }

    pub fn side(&self, side: Side) -> &[f64] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn side_mut(&mut self, side: Side) -> &mut Vec<f64> {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    pub fn add(&self, other: &Traces) -> Traces {
        Traces {
            left: self.left.iter().zip(&other.left).map(|(a, b)| a + b).collect(),
            right: self.right.iter().zip(&other.right).map(|(a, b)| a + b).collect(),
        }
    }
}

/// A boundary control supported on a segment of the lateral boundary.
/// Entries outside the segment are kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryControl {
    segment: Segment,
    dt: f64,
    traces: Traces,
}

impl BoundaryControl {
    pub fn zeros(segment: Segment, grid: Grid) -> Self {
        Self {
            segment,
            dt: grid.dt(),
            traces: Traces::zeros(grid.nt),
        }
    }

    /// Restricts `traces` to the segment.
    pub fn from_traces(segment: Segment, grid: Grid, traces: Traces) -> Result<Self> {
        if traces.left.len() != grid.levels() || traces.right.len() != grid.levels() {
            return Err(Error::Shape(format!(
                "traces need {} samples per side",
                grid.levels()
            )));
        }
        if traces.left.iter().chain(&traces.right).any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite control sample".into()));
        }
        let mut control = Self {
            segment,
            dt: grid.dt(),
            traces,
        };
        control.apply_mask();
        Ok(control)
    }

    /// Samples `f(t)` on every active entry of the segment.
    pub fn from_fn(segment: Segment, grid: Grid, f: impl Fn(Side, f64) -> f64) -> Self {
        let mut c = Self::zeros(segment, grid);
        for side in [Side::Left, Side::Right] {
            for m in 0..grid.levels() {
                if segment.is_active(side, m) {
                    c.traces.side_mut(side)[m] = f(side, grid.t(m));
                }
            }
        }
        c
    }

    fn apply_mask(&mut self) {
        for side in [Side::Left, Side::Right] {
            let seg = self.segment;
            for (m, v) in self.traces.side_mut(side).iter_mut().enumerate() {
                if !seg.is_active(side, m) {
                    *v = 0.0;
                }
            }
        }
    }

    pub fn segment(&self) -> Segment {
        self.segment
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn traces(&self) -> &Traces {
        &self.traces
    }

    pub fn samples(&self, side: Side) -> &[f64] {
        self.traces.side(side)
    }

    /// `⟨self, other⟩_Σ = dt Σ_m (left·left + right·right)`
    pub fn dot(&self, other: &BoundaryControl) -> f64 {
        let s: f64 = self
            .traces
            .left
            .iter()
            .zip(&other.traces.left)
            .chain(self.traces.right.iter().zip(&other.traces.right))
            .map(|(a, b)| a * b)
            .sum();
        s * self.dt
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self += alpha * other`, masked to `self`'s segment.
    pub fn axpy(&mut self, alpha: f64, other: &BoundaryControl) {
        for side in [Side::Left, Side::Right] {
            let src = other.traces.side(side).to_vec();
            for (a, b) in self.traces.side_mut(side).iter_mut().zip(src) {
                *a += alpha * b;
            }
        }
        self.apply_mask();
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for side in [Side::Left, Side::Right] {
            for v in out.traces.side_mut(side) {
                *v *= alpha;
            }
        }
        out
    }

    /// The same samples restricted to another segment.
    pub fn restricted(&self, segment: Segment) -> Self {
        let mut out = Self {
            segment,
            dt: self.dt,
            traces: self.traces.clone(),
        };
        out.apply_mask();
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.traces
            .left
            .iter()
            .chain(&self.traces.right)
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Terminal position and velocity, interior representation (end values zero).
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalPair {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
}

impl TerminalPair {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            position: vec![0.0; grid.nodes()],
            velocity: vec![0.0; grid.nodes()],
        }
    }
}

/// `(v(T), v'(T))` with the second-order one-sided difference for the velocity.
pub fn terminal_of(field: &SpaceTimeField) -> TerminalPair {
    let g = field.grid();
    let (m, dt) = (g.nt, g.dt());
    let (a, b, c) = (field.level(m), field.level(m - 1), field.level(m - 2));
    let mut position = a.to_vec();
    let mut velocity: Vec<f64> = (0..g.nodes())
        .map(|j| (3.0 * a[j] - 4.0 * b[j] + c[j]) / (2.0 * dt))
        .collect();
    for v in [&mut position, &mut velocity] {
        v[0] = 0.0;
        v[g.nx] = 0.0;
    }
    TerminalPair { position, velocity }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scale::Window;

    #[test]
    fn terminal_velocity_exact_on_quadratics() {
        let grid = Grid::new(8, 20, 1.3).unwrap();
        let field = SpaceTimeField::from_fn(grid, |y, t| t * y * (1.0 - y));
        let tp = terminal_of(&field);
        for j in 1..grid.nx {
            let y = grid.y(j);
            assert!((tp.velocity[j] - y * (1.0 - y)).abs() < 1e-12);
            assert!((tp.position[j] - 1.3 * y * (1.0 - y)).abs() < 1e-14);
        }
        let quad = SpaceTimeField::from_fn(grid, |y, t| t * t * y);
        let tp = terminal_of(&quad);
        assert!((tp.velocity[3] - 2.0 * 1.3 * grid.y(3)).abs() < 1e-12);
        let zero = terminal_of(&SpaceTimeField::zeros(grid));
        assert_eq!(zero, TerminalPair::zeros(grid));
    }

    #[test]
    fn control_is_masked_to_segment() {
        let grid = Grid::new(8, 16, 1.0).unwrap();
        let seg = Segment {
            left: None,
            right: Some(Window { start: 4, end: 9 }),
        };
        let c = BoundaryControl::from_fn(seg, grid, |_, _| 1.0);
        assert_eq!(c.samples(Side::Left).iter().sum::<f64>(), 0.0);
        assert_eq!(c.samples(Side::Right).iter().sum::<f64>(), 6.0);
        assert!((c.norm() - (6.0 * grid.dt()).sqrt()).abs() < 1e-15);
    }
}
