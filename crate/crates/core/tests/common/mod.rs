#![allow(dead_code)]

use hicontrol::discretization::norms::norm_l2_omega;
use hicontrol::discretization::{BoundaryControl, Grid, SpaceTimeField, Traces, WaveModel};
use hicontrol::scale::{BoundaryPart, CouplingMode, Geometry, ScaleFunction, Segment, Side};
use hicontrol::leader::{apply_A, ControllabilityTarget, DualVariable, LeaderProblem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn model(k: ScaleFunction, nx: usize, nt: usize, horizon: f64, gamma0: BoundaryPart, mode: CouplingMode) -> WaveModel {
    let grid = Grid::new(nx, nt, horizon).unwrap();
    WaveModel::new(grid, k, Geometry::new(1, gamma0, mode)).unwrap()
}

pub fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> SpaceTimeField {
    let mut f = SpaceTimeField::zeros(grid);
    for m in 0..grid.levels() {
        for j in 1..grid.nx {
            f.set(m, j, rng.gen_range(-1.0..1.0));
        }
    }
    f
}

pub fn random_control(segment: Segment, grid: Grid, rng: &mut ChaCha8Rng) -> BoundaryControl {
    let mut tr = Traces::zeros(grid.nt);
    for m in 0..grid.levels() {
        tr.left[m] = rng.gen_range(-1.0..1.0);
        tr.right[m] = rng.gen_range(-1.0..1.0);
    }
    BoundaryControl::from_traces(segment, grid, tr).unwrap()
}

pub fn random_profile(grid: Grid, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..grid.nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    v[0] = 0.0;
    v[grid.nx] = 0.0;
    v
}

/// Active `(side, level)` entries of a segment, in a fixed order.
pub fn active_entries(segment: Segment, grid: Grid) -> Vec<(Side, usize)> {
    let mut out = Vec::new();
    for side in [Side::Left, Side::Right] {
        for m in 0..grid.levels() {
            if segment.is_active(side, m) {
                out.push((side, m));
            }
        }
    }
    out
}

pub fn unit_control(segment: Segment, grid: Grid, entry: (Side, usize)) -> BoundaryControl {
    let mut tr = Traces::zeros(grid.nt);
    tr.side_mut(entry.0)[entry.1] = 1.0;
    BoundaryControl::from_traces(segment, grid, tr).unwrap()
}

pub fn to_vector(c: &BoundaryControl, entries: &[(Side, usize)]) -> DVector<f64> {
    DVector::from_iterator(entries.len(), entries.iter().map(|&(s, m)| c.samples(s)[m]))
}

pub fn from_vector(x: &DVector<f64>, segment: Segment, grid: Grid, entries: &[(Side, usize)]) -> BoundaryControl {
    let mut tr = Traces::zeros(grid.nt);
    for (i, &(s, m)) in entries.iter().enumerate() {
        tr.side_mut(s)[m] = x[i];
    }
    BoundaryControl::from_traces(segment, grid, tr).unwrap()
}

/// Interior nodal values of a field, level by level.
pub fn field_vector(f: &SpaceTimeField) -> DVector<f64> {
    let g = f.grid();
    let mut v = Vec::new();
    for m in 0..g.levels() {
        v.extend_from_slice(&f.level(m)[1..g.nx]);
    }
    DVector::from_vec(v)
}

/// Diagonal of the `Q` quadrature times `k^n`, matching `field_vector`.
pub fn weighted_q_diagonal(model: &WaveModel) -> DVector<f64> {
    let g = model.grid();
    let ones = SpaceTimeField::from_fn(g, |_, _| 1.0);
    let kn = model.kn_times(&ones);
    let mut d = Vec::new();
    for m in 0..g.levels() {
        for j in 1..g.nx {
            d.push(g.time_weight(m) * g.dt() * g.dy() * kn.get(m, j));
        }
    }
    DVector::from_vec(d)
}

/// Dense control-to-state matrix on the active entries of `segment`.
pub fn dense_state_matrix(model: &WaveModel, segment: Segment, entries: &[(Side, usize)]) -> DMatrix<f64> {
    let g = model.grid();
    let cols: Vec<DVector<f64>> = entries
        .iter()
        .map(|&e| field_vector(&model.boundary_to_state(&unit_control(segment, g, e)).unwrap()))
        .collect();
    DMatrix::from_columns(&cols)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn bench_model(nx: usize, horizon: f64) -> WaveModel {
    let k = ScaleFunction::sinusoidal(0.1, 1.0, 1.0);
    let nt = WaveModel::steps_for_cfl(nx, horizon, &k, 0.9).unwrap();
    model(k, nx, nt, horizon, BoundaryPart::Right, CouplingMode::Additive)
}

pub fn sine_target(nx: usize, amp: f64, radius_factor: f64) -> ControllabilityTarget {
    let v0: Vec<f64> = (0..=nx).map(|j| amp * (PI * j as f64 / nx as f64).sin()).collect();
    let rho = radius_factor * norm_l2_omega(&v0);
    ControllabilityTarget::new(v0, vec![0.0; nx + 1], rho, rho).unwrap()
}

pub fn random_dual(nodes: usize, rng: &mut ChaCha8Rng) -> DualVariable {
    let coords: Vec<f64> = (0..2 * (nodes - 2)).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DualVariable::from_coords(&coords)
}

/// Primal value of `min 1/2 |w|²` subject to both ball constraints, through
/// the Lagrangian dual in the two multipliers (nested bisection on the
/// concave dual; each multiplier's derivative is a constraint residual).
pub fn dense_qp_oracle(pb: &LeaderProblem, target: &ControllabilityTarget) -> f64 {
    let md = pb.model;
    let g = md.grid();
    let seg = md.sigma1();
    let entries = active_entries(seg, g);
    let m = entries.len();
    let n = g.nx - 1;
    let dy = g.dy();
    let mut a0 = DMatrix::zeros(n, m);
    let mut a1 = DMatrix::zeros(n, m);
    let mut d = DMatrix::zeros(m, m);
    let units: Vec<_> = entries.iter().map(|&e| unit_control(seg, g, e)).collect();
    for (c, u) in units.iter().enumerate() {
        let (eta, zeta) = apply_A(pb, u).unwrap();
        for i in 0..n {
            a0[(i, c)] = eta[i + 1];
            a1[(i, c)] = zeta[i + 1];
        }
        for (c2, u2) in units.iter().enumerate() {
            d[(c, c2)] = u.dot(u2);
        }
    }
    // centres of the balls in A-coordinates (v2 = 0, so the affine part vanishes)
    let c0 = DVector::from_iterator(n, (1..=n).map(|j| target.v1_target[j]));
    let c1 = DVector::from_iterator(n, (1..=n).map(|j| -target.v0_target[j]));
    let stiff = DMatrix::from_fn(n, n, |i, j| match (i as i64 - j as i64).abs() {
        0 => 2.0 / (dy * dy),
        1 => -1.0 / (dy * dy),
        _ => 0.0,
    });
    let m0 = stiff.try_inverse().unwrap() * dy; // H⁻¹ Gram
    let m1 = DMatrix::identity(n, n) * dy;
    let q0 = a0.transpose() * &m0 * &a0;
    let q1 = a1.transpose() * &m1 * &a1;
    let b0 = a0.transpose() * &m0 * &c0;
    let b1 = a1.transpose() * &m1 * &c1;
    let solve = |l0: f64, l1: f64| -> (DVector<f64>, f64, f64) {
        let lhs = &d + &q1 * l0 + &q0 * l1;
        let w = lhs.lu().solve(&(&b1 * l0 + &b0 * l1)).unwrap();
        let r0 = &a0 * &w - &c0;
        let r1 = &a1 * &w - &c1;
        let h1 = (r0.transpose() * &m0 * &r0)[(0, 0)] - target.rho1 * target.rho1;
        let h0 = (r1.transpose() * &m1 * &r1)[(0, 0)] - target.rho0 * target.rho0;
        (w, h0, h1)
    };
    // maximizer in one multiplier: derivative decreasing in it
    let argmax = |deriv: &dyn Fn(f64) -> f64| -> f64 {
        if deriv(0.0) <= 0.0 {
            return 0.0;
        }
        let mut hi = 1.0;
        while deriv(hi) > 0.0 {
            hi *= 4.0;
            assert!(hi < 1e14, "multiplier diverges");
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if deriv(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let inner = |l0: f64| argmax(&|l1| solve(l0, l1).2);
    let l0 = argmax(&|l0| solve(l0, inner(l0)).1);
    let l1 = inner(l0);
    let (w, h0, h1) = solve(l0, l1);
    assert!(h0 <= 1e-9 && h1 <= 1e-9, "oracle infeasible {h0} {h1}");
    0.5 * (w.transpose() * &d * &w)[(0, 0)]
}
