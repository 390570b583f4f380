use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// The controlled part `Gamma0` of the boundary of `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryPart {
    Left,
    Right,
    Both,
}

/// How `Sigma0` is shared between leader and follower.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMode {
    /// `Sigma0 = Sigma1 ∪ Sigma2` with disjoint parts.
    Disjoint,
    /// `Sigma0 = Sigma1 = Sigma2` and the trace is `w1 + w2`.
    Additive,
}

/// Inclusive range of time levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn contains(&self, m: usize) -> bool {
        (self.start..=self.end).contains(&m)
    }
}

/// A subset of the lateral boundary: for each side an optional active window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub left: Option<Window>,
    pub right: Option<Window>,
}

impl Segment {
    pub fn full(side: Side, nt: usize) -> Self {
        let w = Some(Window { start: 0, end: nt });
        match side {
            Side::Left => Self { left: w, right: None },
            Side::Right => Self { left: None, right: w },
        }
    }

    pub fn window(&self, side: Side) -> Option<Window> {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }

    pub fn is_active(&self, side: Side, m: usize) -> bool {
        self.window(side).is_some_and(|w| w.contains(m))
    }

    pub fn intersects(&self, other: &Segment) -> bool {
        [Side::Left, Side::Right].iter().any(|&s| match (self.window(s), other.window(s)) {
            (Some(a), Some(b)) => a.start <= b.end && b.start <= a.end,
            _ => false,
        })
    }

    /// True when only one side carries an active window.
    pub fn single_side(&self) -> Option<Side> {
        match (self.left, self.right) {
            (Some(_), None) => Some(Side::Left),
            (None, Some(_)) => Some(Side::Right),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    /// Spatial dimension entering the coefficient formulas.
    pub n: u32,
    pub gamma0: BoundaryPart,
    pub mode: CouplingMode,
}

impl Geometry {
    pub fn new(n: u32, gamma0: BoundaryPart, mode: CouplingMode) -> Self {
        Self { n, gamma0, mode }
    }

    /// `sup_{y in Omega} dist(y, Gamma0)` on the unit interval.
    pub fn observation_distance(&self) -> f64 {
        match self.gamma0 {
            BoundaryPart::Both => 0.5,
            _ => 1.0,
        }
    }

    pub fn sigma0(&self, nt: usize) -> Segment {
        let full = Some(Window { start: 0, end: nt });
        match self.gamma0 {
            BoundaryPart::Left => Segment { left: full, right: None },
            BoundaryPart::Right => Segment { left: None, right: full },
            BoundaryPart::Both => Segment { left: full, right: full },
        }
    }

    /// Leader segment. In disjoint mode with both ends controlled the leader
    /// takes the left end; with one end the leader takes the first half in time.
    pub fn sigma1(&self, nt: usize) -> Segment {
        match (self.mode, self.gamma0) {
            (CouplingMode::Additive, _) => self.sigma0(nt),
            (CouplingMode::Disjoint, BoundaryPart::Both) => Segment::full(Side::Left, nt),
            (CouplingMode::Disjoint, part) => split(part, 0, nt / 2),
        }
    }

    pub fn sigma2(&self, nt: usize) -> Segment {
        match (self.mode, self.gamma0) {
            (CouplingMode::Additive, _) => self.sigma0(nt),
            (CouplingMode::Disjoint, BoundaryPart::Both) => Segment::full(Side::Right, nt),
            (CouplingMode::Disjoint, part) => split(part, nt / 2 + 1, nt),
        }
    }
}

fn split(part: BoundaryPart, start: usize, end: usize) -> Segment {
    let w = Some(Window { start, end });
    match part {
        BoundaryPart::Left => Segment { left: w, right: None },
        _ => Segment { left: None, right: w },
    }
}
