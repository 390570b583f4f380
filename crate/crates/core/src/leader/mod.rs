//! The leader: the minimal-norm control `w1` on `Σ1` such that, with the
//! follower answering `w2 = F(w1)`, the terminal state lands in
//!
//! ```text
//! v(T) ∈ v0 + rho0 B_{L²},   v'(T) ∈ v1 + rho1 B_{H⁻¹}.
//! ```
//!
//! Write `v = v_aff + g(w1)`, where `v_aff` is the follower-coupled state for
//! `w1 = 0` and `g` is linear in `w1`. With `A w1 = (g'(T) + δ g(T), -g(T))` the
//! problem is `min 1/2 |w1|²` subject to `A w1 ∈ c + balls`, whose Fenchel dual is
//!
//! ```text
//! J(f) = 1/2 |A* f|² - ⟨c0, f0⟩ - ⟨c1, f1⟩ + rho1 |f0|_{H¹₀} + rho0 |f1|_{L²}
//! ```
//!
//! with `c0 = v1 - v_aff'(T)` (plus the frozen `δ g(T)` shift) and
//! `c1 = v_aff(T) - v0`. The optimal leader is `w1 = A* f⋆`.
//!
//! `A*` is computed by the cascade: `φ` backward from the terminal pair
//! `(f0, f1 - δ f0)` with source `k^n ψ`, and `ψ` forward with trace
//! `-(1/sigma) C2 φ` on `Σ2`. Both are the exact transposes of the discrete
//! forward maps, so `⟨⟨A w, f⟩⟩ = ⟨w, A* f⟩_{Σ1}` holds to solver tolerance.

mod fista;

use serde::Serialize;

use crate::discretization::norms::{inner_l2_omega, norm_h01_omega, norm_hm1_omega, norm_l2_omega};
use crate::discretization::{terminal_of, BoundaryControl, SpaceTimeField, TerminalPair, WaveModel};
use crate::follower::{solve_follower, FollowerProblem, FollowerSolution, TraceOperator};
use crate::scale::{holmgren_time_ok, CouplingMode};
use crate::{Error, Result};

pub use fista::{minimize_dual, prox_block, GramOperator, LeaderOptions};

/// Terminal balls `B_{L²}(v0, rho0) × B_{H⁻¹}(v1, rho1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllabilityTarget {
    pub v0_target: Vec<f64>,
    pub v1_target: Vec<f64>,
    pub rho0: f64,
    pub rho1: f64,
}

impl ControllabilityTarget {
    /// End values of `v1` are dropped: only interior values act on `H¹₀`.
    pub fn new(v0_target: Vec<f64>, mut v1_target: Vec<f64>, rho0: f64, rho1: f64) -> Result<Self> {
        if !(rho0 > 0.0) || !(rho1 > 0.0) {
            return Err(Error::InvalidConfig(format!("ball radii must be positive, got ({rho0}, {rho1})")));
        }
        if v0_target.len() != v1_target.len() || v0_target.len() < 3 {
            return Err(Error::Shape("targets need nx + 1 values each".into()));
        }
        let n = v0_target.len() - 1;
        if v0_target[0].abs() > 1e-12 || v0_target[n].abs() > 1e-12 {
            return Err(Error::NonhomogeneousBoundary {
                left: v0_target[0],
                right: v0_target[n],
            });
        }
        v1_target[0] = 0.0;
        v1_target[n] = 0.0;
        Ok(Self {
            v0_target,
            v1_target,
            rho0,
            rho1,
        })
    }
}

/// `(f0, f1) ∈ H¹₀ × L²`, nodal values with zero ends.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVariable {
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
}

impl DualVariable {
    pub fn zeros(nodes: usize) -> Self {
        Self {
            f0: vec![0.0; nodes],
            f1: vec![0.0; nodes],
        }
    }

    pub fn new(mut f0: Vec<f64>, mut f1: Vec<f64>) -> Result<Self> {
        if f0.len() != f1.len() || f0.len() < 3 {
            return Err(Error::Shape("dual components need nx + 1 values each".into()));
        }
        let n = f0.len() - 1;
        if f0[0].abs() > 1e-12 || f0[n].abs() > 1e-12 {
            return Err(Error::NonhomogeneousBoundary { left: f0[0], right: f0[n] });
        }
        f0[0] = 0.0;
        f0[n] = 0.0;
        f1[0] = 0.0;
        f1[n] = 0.0;
        Ok(Self { f0, f1 })
    }

    pub fn nodes(&self) -> usize {
        self.f0.len()
    }

    /// Interior coordinates `[f0_1..f0_{nx-1}, f1_1..f1_{nx-1}]`.
    pub fn to_coords(&self) -> Vec<f64> {
        let n = self.nodes() - 1;
        self.f0[1..n].iter().chain(&self.f1[1..n]).copied().collect()
    }

    pub fn from_coords(coords: &[f64]) -> Self {
        let m = coords.len() / 2;
        let mut f = Self::zeros(m + 2);
        f.f0[1..=m].copy_from_slice(&coords[..m]);
        f.f1[1..=m].copy_from_slice(&coords[m..]);
        f
    }

    pub fn is_zero(&self) -> bool {
        self.f0.iter().chain(&self.f1).all(|&v| v == 0.0)
    }

    /// `rho1 |f0|_{H¹₀} + rho0 |f1|_{L²}`
    pub fn penalty(&self, target: &ControllabilityTarget) -> f64 {
        target.rho1 * norm_h01_omega(&self.f0).expect("zero ends") + target.rho0 * norm_l2_omega(&self.f1)
    }
}

/// Adjoint states of the cascade for one dual variable.
#[derive(Debug, Clone)]
pub struct CascadeSolution {
    pub phi: SpaceTimeField,
    pub psi: SpaceTimeField,
    pub iterations: usize,
    /// `|sigma s + C2 φ|_Σ` where `s` is the trace of `ψ` on `Σ2`.
    pub residual: f64,
}

/// The leader-independent offset: follower-coupled state for `w1 = 0`.
#[derive(Debug, Clone)]
pub struct AffinePart {
    pub v0: SpaceTimeField,
    pub p0: SpaceTimeField,
    pub w2: BoundaryControl,
    pub terminal: TerminalPair,
    pub iterations: usize,
}

/// Shared data of all leader computations.
#[derive(Debug, Clone)]
pub struct LeaderProblem<'a> {
    pub model: &'a WaveModel,
    pub v2: SpaceTimeField,
    pub sigma: f64,
    pub delta: f64,
    /// Relaxation of the inner fixed-point iterations.
    pub relaxation: f64,
    /// Tolerance of the inner coupled solves.
    pub inner_tol: f64,
    pub max_iter: usize,
}

impl<'a> LeaderProblem<'a> {
    pub fn new(model: &'a WaveModel, v2: SpaceTimeField, sigma: f64, delta: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidConfig(format!("delta must be nonnegative, got {delta}")));
        }
        if v2.grid() != model.grid() {
            return Err(Error::Shape("tracking target does not match the grid".into()));
        }
        Ok(Self {
            model,
            v2,
            sigma,
            delta,
            relaxation: 0.5,
            inner_tol: 1e-13,
            max_iter: 5000,
        })
    }

    fn op(&self) -> TraceOperator<'a> {
        TraceOperator::new(self.model, self.sigma)
    }

    fn nodes(&self) -> usize {
        self.model.grid().nodes()
    }

    fn holmgren_ok(&self) -> bool {
        holmgren_time_ok(self.model.grid().horizon, &self.model.geometry())
    }
}

/// Follower-coupled state for `w1 = 0` (relaxed Picard, CG fallback).
pub fn solve_affine_part(problem: &LeaderProblem) -> Result<AffinePart> {
    let md = problem.model;
    let g = md.grid();
    let fp = FollowerProblem::new(md, BoundaryControl::zeros(md.sigma1(), g), problem.v2.clone(), problem.sigma)?;
    let b = fp.normal_rhs()?;
    let solved = problem
        .op()
        .solve_coupled(&b, problem.relaxation, problem.inner_tol, problem.max_iter)?;
    let v0 = fp.state(&solved.x)?;
    let p0 = fp.adjoint(&v0)?;
    let terminal = terminal_of(&v0);
    Ok(AffinePart {
        v0,
        p0,
        w2: solved.x,
        terminal,
        iterations: solved.iterations,
    })
}

/// Follower response to `w1` with zero tracking target, and the resulting state `g`.
fn coupled_response(problem: &LeaderProblem, w1: &BoundaryControl) -> Result<(BoundaryControl, SpaceTimeField)> {
    let op = problem.op();
    let g1 = op.state(w1.traces())?;
    let (_, c) = op.pullback(Some(&problem.model.kn_times(&g1)), None)?;
    let s = op.solve_coupled(&c.scaled(-1.0), problem.relaxation, problem.inner_tol, problem.max_iter)?;
    let g = op.state(&w1.traces().add(s.x.traces()))?;
    Ok((s.x, g))
}

/// `A w1 = (g'(T) + δ g(T), -g(T))`.
#[allow(non_snake_case)]
pub fn apply_A(problem: &LeaderProblem, w1: &BoundaryControl) -> Result<(Vec<f64>, Vec<f64>)> {
    let (_, g) = coupled_response(problem, w1)?;
    let tp = terminal_of(&g);
    let eta = tp
        .velocity
        .iter()
        .zip(&tp.position)
        .map(|(v, p)| v + problem.delta * p)
        .collect();
    let zeta = tp.position.iter().map(|p| -p).collect();
    Ok((eta, zeta))
}

fn cascade_terminal(problem: &LeaderProblem, f: &DualVariable) -> TerminalPair {
    TerminalPair {
        position: f.f0.clone(),
        velocity: f.f1.iter().zip(&f.f0).map(|(a, b)| a - problem.delta * b).collect(),
    }
}

/// Adjoint states `(φ, ψ)` for the dual variable `f`.
pub fn solve_cascade(problem: &LeaderProblem, f: &DualVariable) -> Result<CascadeSolution> {
    if f.nodes() != problem.nodes() {
        return Err(Error::Shape("dual variable does not match the grid".into()));
    }
    let op = problem.op();
    let term = cascade_terminal(problem, f);
    let (_, c) = op.pullback(None, Some(&term))?;
    let s = op.solve_coupled(&c.scaled(-1.0), problem.relaxation, problem.inner_tol, problem.max_iter)?;
    let psi = op.state(s.x.traces())?;
    let phi = problem
        .model
        .march_backward_transpose(Some(&problem.model.kn_times(&psi)), Some(&term))?;
    let mut r = problem.model.conormal_trace(&phi, op.seg2);
    r.axpy(problem.sigma, &s.x);
    Ok(CascadeSolution {
        phi,
        psi,
        iterations: s.iterations,
        residual: r.norm(),
    })
}

/// `A* f`: the conormal trace of `φ` on `Σ1`.
#[allow(non_snake_case)]
pub fn apply_A_star(problem: &LeaderProblem, f: &DualVariable) -> Result<BoundaryControl> {
    let cs = solve_cascade(problem, f)?;
    Ok(problem.model.conormal_trace(&cs.phi, problem.model.sigma1()))
}

/// The linear data of the dual functional: `(c0, c1)`.
#[derive(Debug, Clone)]
pub struct DualData {
    pub c0: Vec<f64>,
    pub c1: Vec<f64>,
}

impl DualData {
    /// `shift` is the frozen `g(T)` used when `δ > 0`.
    pub fn new(problem: &LeaderProblem, target: &ControllabilityTarget, affine: &AffinePart, shift: Option<&[f64]>) -> Self {
        let tp = &affine.terminal;
        let n = problem.nodes();
        let mut c0: Vec<f64> = (0..n).map(|j| target.v1_target[j] - tp.velocity[j]).collect();
        if let Some(gt) = shift {
            for j in 0..n {
                c0[j] += problem.delta * gt[j];
            }
        }
        let c1 = (0..n).map(|j| tp.position[j] - target.v0_target[j]).collect();
        let mut d = Self { c0, c1 };
        let last = n - 1;
        for v in [&mut d.c0, &mut d.c1] {
            v[0] = 0.0;
            v[last] = 0.0;
        }
        d
    }

    /// `⟨c0, f0⟩ + ⟨c1, f1⟩`
    pub fn pairing(&self, f: &DualVariable) -> f64 {
        inner_l2_omega(&self.c0, &f.f0) + inner_l2_omega(&self.c1, &f.f1)
    }
}

/// `J(f)` evaluated with a fresh cascade solve.
pub fn dual_functional(
    problem: &LeaderProblem,
    target: &ControllabilityTarget,
    data: &DualData,
    f: &DualVariable,
) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    let w = apply_A_star(problem, f)?;
    Ok(0.5 * w.dot(&w) - data.pairing(f) + f.penalty(target))
}

/// Output of the leader solve.
#[derive(Debug, Clone)]
pub struct LeaderResult {
    pub f_star: DualVariable,
    pub w1: BoundaryControl,
    pub w2: BoundaryControl,
    pub state: SpaceTimeField,
    pub terminal: TerminalPair,
    pub dist0: f64,
    pub dist1: f64,
    pub rho0: f64,
    pub rho1: f64,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub holmgren_ok: bool,
    /// Dual objective after each accepted iteration.
    pub history: Vec<f64>,
    pub converged: bool,
}

/// The JSON summary of a leader run.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LeaderSummary {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub dist0: f64,
    pub dist1: f64,
    pub rho0: f64,
    pub rho1: f64,
    pub iterations: usize,
    pub holmgren_ok: bool,
}

impl LeaderResult {
    pub fn summary(&self) -> LeaderSummary {
        LeaderSummary {
            primal: self.primal_value,
            dual: self.dual_value,
            gap: self.gap,
            dist0: self.dist0,
            dist1: self.dist1,
            rho0: self.rho0,
            rho1: self.rho1,
            iterations: self.iterations,
            holmgren_ok: self.holmgren_ok,
        }
    }
}

/// Distances of a terminal pair to the target centres: `(|v(T) - v0|_{L²}, |v'(T) - v1|_{H⁻¹})`.
pub fn terminal_distances(terminal: &TerminalPair, target: &ControllabilityTarget) -> (f64, f64) {
    let d0: Vec<f64> = terminal.position.iter().zip(&target.v0_target).map(|(a, b)| a - b).collect();
    let d1: Vec<f64> = terminal.velocity.iter().zip(&target.v1_target).map(|(a, b)| a - b).collect();
    (
        norm_l2_omega(&d0),
        norm_hm1_omega(&d1).expect("terminal data and targets have zero ends"),
    )
}

/// Most negative value of the variational inequality over the probes
/// (`0` for an empty list).
pub fn check_variational_inequality(
    f_star: &DualVariable,
    terminal: &TerminalPair,
    target: &ControllabilityTarget,
    probes: &[DualVariable],
) -> f64 {
    let r0: Vec<f64> = terminal.velocity.iter().zip(&target.v1_target).map(|(a, b)| a - b).collect();
    let r1: Vec<f64> = terminal.position.iter().zip(&target.v0_target).map(|(a, b)| a - b).collect();
    let n0 = norm_h01_omega(&f_star.f0).expect("zero ends");
    let n1 = norm_l2_omega(&f_star.f1);
    probes
        .iter()
        .map(|p| {
            let d0: Vec<f64> = p.f0.iter().zip(&f_star.f0).map(|(a, b)| a - b).collect();
            let d1: Vec<f64> = p.f1.iter().zip(&f_star.f1).map(|(a, b)| a - b).collect();
            inner_l2_omega(&r0, &d0) - inner_l2_omega(&r1, &d1)
                + target.rho1 * (norm_h01_omega(&p.f0).expect("zero ends") - n0)
                + target.rho0 * (norm_l2_omega(&p.f1) - n1)
        })
        .fold(0.0, f64::min)
}

/// The four coupled fields at `f⋆` and the residuals of every equation.
#[derive(Debug, Clone)]
pub struct LeaderOptimalitySystem {
    pub phi: SpaceTimeField,
    pub psi: SpaceTimeField,
    pub follower: FollowerSolution,
    pub residuals: OptimalityResiduals,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimalityResiduals {
    /// Transposed-scheme residual of `φ` (source `k^n ψ`, terminal `f`), scaled by `dt dy`.
    pub phi_equation: f64,
    /// Forward residual of `ψ`.
    pub psi_equation: f64,
    pub v_equation: f64,
    pub p_equation: f64,
    /// `|sigma ψ|Σ2 + C2 φ|`
    pub psi_boundary: f64,
    /// `|v|Σ1 - C1 φ|` (the leader trace)
    pub leader_boundary: f64,
    /// `|sigma w2 + C2 p|`
    pub follower_boundary: f64,
    /// Initial data of `v` and `ψ` (both zero).
    pub initial_data: f64,
}

impl OptimalityResiduals {
    pub fn max(&self) -> f64 {
        [
            self.phi_equation,
            self.psi_equation,
            self.v_equation,
            self.p_equation,
            self.psi_boundary,
            self.leader_boundary,
            self.follower_boundary,
            self.initial_data,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn assemble_leader_optimality_system(
    problem: &LeaderProblem,
    f_star: &DualVariable,
    tol: f64,
) -> Result<LeaderOptimalitySystem> {
    let md = problem.model;
    let g = md.grid();
    let cs = solve_cascade(problem, f_star)?;
    let w1 = md.conormal_trace(&cs.phi, md.sigma1());
    let fp = FollowerProblem::new(md, w1.clone(), problem.v2.clone(), problem.sigma)?;
    let follower = solve_follower(&fp, tol, problem.max_iter)?;
    let term = cascade_terminal(problem, f_star);
    let unit = g.dt() * g.dy();
    let kn_psi = md.kn_times(&cs.psi);
    let kn_misfit = md.kn_times(&follower.v.sub(&problem.v2));

    let psi_trace = BoundaryControl::from_traces(md.sigma2(), g, cs.psi.boundary_traces())?;
    let mut psi_boundary = md.conormal_trace(&cs.phi, md.sigma2());
    psi_boundary.axpy(problem.sigma, &psi_trace);

    let v_traces = follower.v.boundary_traces();
    let expect = w1.traces().add(follower.w2.traces());
    let leader_boundary = v_traces
        .left
        .iter()
        .zip(&expect.left)
        .chain(v_traces.right.iter().zip(&expect.right))
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let mut follower_boundary = md.conormal_trace(&follower.p, md.sigma2());
    follower_boundary.axpy(problem.sigma, &follower.w2);
    let initial_data = follower.v.level(0)[1..g.nx]
        .iter()
        .chain(&cs.psi.level(0)[1..g.nx])
        .fold(0.0f64, |m, v| m.max(v.abs()));

    let residuals = OptimalityResiduals {
        phi_equation: md.adjoint_residual_full(&cs.phi, Some(&kn_psi), Some(&term)) * unit,
        psi_equation: md.forward_residual(&cs.psi, None) * g.dt() * g.dt(),
        v_equation: md.forward_residual(&follower.v, None) * g.dt() * g.dt(),
        p_equation: md.adjoint_residual_full(&follower.p, Some(&kn_misfit), None) * unit,
        psi_boundary: psi_boundary.norm(),
        leader_boundary,
        follower_boundary: follower_boundary.norm(),
        initial_data,
    };
    Ok(LeaderOptimalitySystem {
        phi: cs.phi,
        psi: cs.psi,
        follower,
        residuals,
    })
}

/// Holmgren and coupling-mode gates of the leader solve.
pub(crate) fn check_gates(problem: &LeaderProblem, opts: &LeaderOptions) -> Result<bool> {
    let geom = problem.model.geometry();
    let ok = problem.holmgren_ok();
    if !ok && !opts.override_holmgren {
        return Err(Error::HolmgrenViolation {
            horizon: problem.model.grid().horizon,
            two_d: 2.0 * geom.observation_distance(),
        });
    }
    if geom.mode != CouplingMode::Additive && !opts.override_mode {
        return Err(Error::ModeGate);
    }
    Ok(ok)
}
