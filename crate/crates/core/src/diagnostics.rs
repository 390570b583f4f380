//! Verification: stencil residuals, transpose and duality identities, discrete
//! energy, manufactured solutions and convergence studies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discretization::norms::inner_l2_omega;
use crate::discretization::{BoundaryControl, ForwardData, Grid, SpaceTimeField, Traces, WaveModel};
use crate::follower::{j2_gradient, FollowerProblem};
use crate::leader::{apply_A, apply_A_star, DualVariable, LeaderProblem};
use crate::scale::{eval_coefficients, BoundaryPart, CouplingMode, Geometry, ScaleFunction, Side};
use crate::Result;

/// Which discrete operator a residual refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// The forward scheme for `v'' + L v = f`.
    L,
    /// The transposed scheme (the discrete `p'' + L* p = f`).
    LStar,
}

/// Max interior stencil residual. Forward: equations `1..nt-1`. Transposed:
/// levels `1..nt-3`, which carry no terminal loads.
pub fn residual_pde(model: &WaveModel, field: &SpaceTimeField, rhs: Option<&SpaceTimeField>, which: Stencil) -> f64 {
    match which {
        Stencil::L => model.forward_residual(field, rhs),
        Stencil::LStar => model.adjoint_residual(field, rhs),
    }
}

/// Norm of the `J2` gradient at `w2`.
pub fn euler_residual(problem: &FollowerProblem, w2: &BoundaryControl) -> Result<f64> {
    Ok(j2_gradient(problem, w2)?.norm())
}

/// Machine-readable outcome of a randomized check.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CheckReport {
    pub check: String,
    pub seed: u64,
    pub samples: usize,
    pub max_violation: f64,
    pub pass: bool,
}

impl CheckReport {
    pub fn new(check: &str, seed: u64, samples: usize, max_violation: f64, tol: f64) -> Self {
        Self {
            check: check.to_string(),
            seed,
            samples,
            max_violation,
            pass: max_violation.is_finite() && max_violation <= tol,
        }
    }
}

pub const ADJOINTNESS_TOL: f64 = 1e-12;
pub const DUALITY_TOL: f64 = 1e-10;

fn random_traces(grid: Grid, rng: &mut ChaCha8Rng) -> Traces {
    let mut tr = Traces::zeros(grid.nt);
    for v in tr.left.iter_mut().chain(tr.right.iter_mut()) {
        *v = rng.gen_range(-1.0..1.0);
    }
    tr
}

fn random_interior(grid: Grid, rng: &mut ChaCha8Rng) -> SpaceTimeField {
    let mut f = SpaceTimeField::zeros(grid);
    for m in 0..grid.levels() {
        for j in 1..grid.nx {
            f.set(m, j, rng.gen_range(-1.0..1.0));
        }
    }
    f
}

fn random_dual(nodes: usize, rng: &mut ChaCha8Rng) -> DualVariable {
    let coords: Vec<f64> = (0..2 * (nodes - 2)).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DualVariable::from_coords(&coords)
}

/// `max |⟨B w, r⟩_Q - ⟨w, B* r⟩_Σ| / (|w| |r|)` over random pairs on both ends.
pub fn adjointness_check(model: &WaveModel, samples: usize, seed: u64) -> Result<CheckReport> {
    let g = model.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let both = Geometry::new(1, BoundaryPart::Both, CouplingMode::Additive).sigma0(g.nt);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let w = BoundaryControl::from_traces(both, g, random_traces(g, &mut rng))?;
        let r = random_interior(g, &mut rng);
        let lhs = model.boundary_to_state(&w)?.inner_q(&r);
        let p = model.march_backward_transpose(Some(&r), None)?;
        let rhs = w.dot(&model.conormal_trace(&p, both));
        worst = worst.max((lhs - rhs).abs() / (w.norm() * r.norm_q()));
    }
    Ok(CheckReport::new("adjointness", seed, samples, worst, ADJOINTNESS_TOL))
}

/// `max |⟨⟨A w, f⟩⟩ - ⟨w, A* f⟩_{Σ1}| / max(|⟨⟨A w, f⟩⟩|, |w| |A* f|)`; `A*` is
/// built with `sigma_star` when given (an inconsistency probe).
pub fn duality_identity_violation(
    problem: &LeaderProblem,
    sigma_star: Option<f64>,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let md = problem.model;
    let g = md.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut star = problem.clone();
    if let Some(s) = sigma_star {
        star.sigma = s;
    }
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let w = BoundaryControl::from_traces(md.sigma1(), g, random_traces(g, &mut rng))?;
        let f = random_dual(g.nodes(), &mut rng);
        let (eta, zeta) = apply_A(problem, &w)?;
        let lhs = inner_l2_omega(&eta, &f.f0) + inner_l2_omega(&zeta, &f.f1);
        let astar = apply_A_star(&star, &f)?;
        let rhs = w.dot(&astar);
        let scale = lhs.abs().max(w.norm() * astar.norm());
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    Ok(worst)
}

pub fn duality_identity_check(problem: &LeaderProblem, samples: usize, seed: u64) -> Result<CheckReport> {
    let v = duality_identity_violation(problem, None, samples, seed)?;
    Ok(CheckReport::new("duality_identity", seed, samples, v, DUALITY_TOL))
}

/// `E^m = 1/2 |(v^{m+1} - v^m)/dt|² + 1/2 ⟨D⁺v^{m+1}, D⁺v^m⟩`, `m = 0..nt-1`: the
/// quantity the leapfrog scheme conserves for `k ≡ 1` with homogeneous data.
pub fn discrete_energy(field: &SpaceTimeField) -> Vec<f64> {
    let g = field.grid();
    let (dt, dy) = (g.dt(), g.dy());
    (0..g.nt)
        .map(|m| {
            let (a, b) = (field.level(m), field.level(m + 1));
            let kinetic: f64 = (1..g.nx).map(|j| ((b[j] - a[j]) / dt).powi(2)).sum::<f64>() * dy;
            let potential: f64 = (0..g.nx)
                .map(|j| (b[j + 1] - b[j]) * (a[j + 1] - a[j]))
                .sum::<f64>()
                / dy;
            0.5 * (kinetic + potential)
        })
        .collect()
}

/// Largest relative deviation of the discrete energy from its first value.
pub fn energy_drift(field: &SpaceTimeField) -> f64 {
    let e = discrete_energy(field);
    let e0 = e[0];
    let scale = e0.abs().max(f64::MIN_POSITIVE);
    e.iter().fold(0.0f64, |m, v| m.max((v - e0).abs())) / scale
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConvergenceReport {
    pub levels: Vec<(usize, usize)>,
    pub errors: Vec<f64>,
    /// `log2(e_i / e_{i+1})`
    pub rates: Vec<f64>,
}

impl ConvergenceReport {
    /// Error ratios `e_i / e_{i+1}`.
    pub fn ratios(&self) -> Vec<f64> {
        self.errors.windows(2).map(|w| w[0] / w[1]).collect()
    }
}

/// Evaluates `error(nx, nt)` on every level (in parallel) and reports the rates.
pub fn convergence_study<F>(levels: &[(usize, usize)], error: F) -> Result<ConvergenceReport>
where
    F: Fn(usize, usize) -> Result<f64> + Sync,
{
    let results: Vec<Result<f64>> = std::thread::scope(|s| {
        let handles: Vec<_> = levels
            .iter()
            .map(|&(nx, nt)| {
                let error = &error;
                s.spawn(move || error(nx, nt))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("level worker panicked")).collect()
    });
    let errors = results.into_iter().collect::<Result<Vec<_>>>()?;
    let rates = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(ConvergenceReport {
        levels: levels.to_vec(),
        errors,
        rates,
    })
}

/// A closed-form solution `v(y, t)` together with its derivatives.
#[derive(Debug, Clone, Copy)]
pub struct Exact {
    pub v: fn(f64, f64) -> f64,
    pub v_t: fn(f64, f64) -> f64,
    pub v_tt: fn(f64, f64) -> f64,
    pub v_y: fn(f64, f64) -> f64,
    pub v_yy: fn(f64, f64) -> f64,
    pub v_ty: fn(f64, f64) -> f64,
}

/// Manufactured test problem on the cylinder (homogeneous Dirichlet ends).
#[derive(Debug, Clone)]
pub struct Manufactured {
    pub name: &'static str,
    pub scale: ScaleFunction,
    pub horizon: f64,
    pub exact: Exact,
}

use std::f64::consts::PI;

impl Manufactured {
    /// `sin(πy) cos(πt)` with `k ≡ 1` on `[0, 2]`.
    pub fn standing_wave() -> Self {
        Self {
            name: "standing_wave",
            scale: ScaleFunction::constant(1.0),
            horizon: 2.0,
            exact: SINE_COSINE,
        }
    }

    /// `sin(πy) cos(πt)` with `k = 1 + 0.1 sin t` on `[0, 2]`.
    pub fn oscillating_scale() -> Self {
        Self {
            name: "oscillating_scale",
            scale: ScaleFunction::sinusoidal(0.1, 1.0, 1.0),
            horizon: 2.0,
            exact: SINE_COSINE,
        }
    }

    /// `t² y (1 - y)` with `k = 1 + 0.1 t` on `[0, 1]`.
    pub fn polynomial() -> Self {
        Self {
            name: "polynomial",
            scale: ScaleFunction::linear(1.0, 0.1),
            horizon: 1.0,
            exact: Exact {
                v: |y, t| t * t * y * (1.0 - y),
                v_t: |y, t| 2.0 * t * y * (1.0 - y),
                v_tt: |y, _| 2.0 * y * (1.0 - y),
                v_y: |y, t| t * t * (1.0 - 2.0 * y),
                v_yy: |_, t| -2.0 * t * t,
                v_ty: |y, t| 2.0 * t * (1.0 - 2.0 * y),
            },
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "standing_wave" => Some(Self::standing_wave()),
            "oscillating_scale" => Some(Self::oscillating_scale()),
            "polynomial" => Some(Self::polynomial()),
            _ => None,
        }
    }

    pub fn model(&self, nx: usize, nt: usize) -> Result<WaveModel> {
        let grid = Grid::new(nx, nt, self.horizon)?;
        WaveModel::new(grid, self.scale.clone(), Geometry::new(1, BoundaryPart::Both, CouplingMode::Additive))
    }

    /// `f = v'' + L v` at every node.
    pub fn source(&self, grid: Grid) -> Result<SpaceTimeField> {
        let mut f = SpaceTimeField::zeros(grid);
        let e = &self.exact;
        for m in 0..grid.levels() {
            let t = grid.t(m);
            let (k, dk, _) = self.scale.eval(t);
            for j in 0..grid.nodes() {
                let y = grid.y(j);
                let c = eval_coefficients(&self.scale, y, t, 1)?;
                let a_y = -2.0 * dk * dk * y / (k * k);
                let val = (e.v_tt)(y, t) - a_y * (e.v_y)(y, t) - c.a * (e.v_yy)(y, t)
                    + c.b * (e.v_ty)(y, t)
                    + c.c * (e.v_y)(y, t);
                f.set(m, j, val);
            }
        }
        Ok(f)
    }

    /// Discrete solution and the sampled exact field.
    pub fn solve(&self, nx: usize, nt: usize) -> Result<(SpaceTimeField, SpaceTimeField, SpaceTimeField)> {
        let model = self.model(nx, nt)?;
        let g = model.grid();
        let f = self.source(g)?;
        let e = self.exact;
        let pos: Vec<f64> = (0..g.nodes()).map(|j| (e.v)(g.y(j), 0.0)).collect();
        let vel: Vec<f64> = (0..g.nodes()).map(|j| (e.v_t)(g.y(j), 0.0)).collect();
        let v = model.march_forward(&ForwardData {
            source: Some(&f),
            position: Some(&pos),
            velocity: Some(&vel),
            traces: None,
        })?;
        Ok((v, SpaceTimeField::from_fn(g, e.v), f))
    }

    /// Max-norm error over the space-time grid.
    pub fn error(&self, nx: usize, nt: usize) -> Result<f64> {
        let (v, exact, _) = self.solve(nx, nt)?;
        Ok(v.sub(&exact).max_abs())
    }
}

const SINE_COSINE: Exact = Exact {
    v: |y, t| (PI * y).sin() * (PI * t).cos(),
    v_t: |y, t| -PI * (PI * y).sin() * (PI * t).sin(),
    v_tt: |y, t| -PI * PI * (PI * y).sin() * (PI * t).cos(),
    v_y: |y, t| PI * (PI * y).cos() * (PI * t).cos(),
    v_yy: |y, t| -PI * PI * (PI * y).sin() * (PI * t).cos(),
    v_ty: |y, t| -PI * PI * (PI * y).cos() * (PI * t).sin(),
};

/// First level at which node `j` of `field` exceeds `tol` in magnitude.
pub fn first_arrival(field: &SpaceTimeField, j: usize, tol: f64) -> Option<usize> {
    (0..field.grid().levels()).find(|&m| field.get(m, j).abs() > tol)
}

/// Unit impulse at level `m0` on `side`.
pub fn impulse(grid: Grid, side: Side, m0: usize) -> Traces {
    let mut tr = Traces::zeros(grid.nt);
    tr.side_mut(side)[m0] = 1.0;
    tr
}
