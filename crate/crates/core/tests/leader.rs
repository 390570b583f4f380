mod common;

use common::*;
use hicontrol::discretization::norms::{inner_l2_omega, norm_l2_omega};
use hicontrol::discretization::{SpaceTimeField, WaveModel};
use hicontrol::leader::*;
use hicontrol::scale::{BoundaryPart, CouplingMode, ScaleFunction};
use hicontrol::Error;
use std::time::Instant;

#[test]
fn duality_identity_on_random_pairs() {
    let md = model(ScaleFunction::linear(1.0, 0.1), 16, 64, 2.0, BoundaryPart::Right, CouplingMode::Additive);
    let g = md.grid();
    let mut r = rng(4);
    for delta in [0.0, 0.7] {
        let pb = LeaderProblem::new(&md, SpaceTimeField::zeros(g), 10.0, delta).unwrap();
        for _ in 0..10 {
            let w = random_control(md.sigma1(), g, &mut r);
            let f = random_dual(g.nodes(), &mut r);
            let (eta, zeta) = apply_A(&pb, &w).unwrap();
            let lhs = inner_l2_omega(&eta, &f.f0) + inner_l2_omega(&zeta, &f.f1);
            let astar = apply_A_star(&pb, &f).unwrap();
            let rhs = w.dot(&astar);
            let scale = lhs.abs().max(rhs.abs()).max(1e-30);
            assert!((lhs - rhs).abs() <= 1e-10 * scale, "{lhs} {rhs}");
        }
    }
}

#[test]
fn benchmark_reaches_the_balls() {
    let start = Instant::now();
    let md = bench_model(64, 2.4);
    let pb = LeaderProblem::new(&md, SpaceTimeField::zeros(md.grid()), 10.0, 0.0).unwrap();
    let target = sine_target(64, 0.3, 0.1);
    let res = minimize_dual(&pb, &target, &LeaderOptions::default()).unwrap();
    eprintln!(
        "nt {} primal {} dual {} gap {} dist0 {} dist1 {} rho {} iters {} conv {} time {:?}",
        md.grid().nt, res.primal_value, res.dual_value, res.gap, res.dist0, res.dist1, target.rho0, res.iterations, res.converged,
        start.elapsed()
    );
    assert!(res.dist0 <= target.rho0 + 1e-3);
    assert!(res.dist1 <= target.rho1 + 1e-3);
    assert!(res.gap.abs() <= 1e-4 * res.primal_value.max(1.0));
}

#[test]
fn holmgren_gate() {
    let md = bench_model(16, 1.5);
    let pb = LeaderProblem::new(&md, SpaceTimeField::zeros(md.grid()), 10.0, 0.0).unwrap();
    let err = minimize_dual(&pb, &sine_target(16, 0.3, 0.1), &LeaderOptions::default()).unwrap_err();
    assert!(matches!(err, Error::HolmgrenViolation { .. }));
    assert_eq!(err.exit_code(), 5);
}

#[test]
fn primal_matches_dense_qp_oracle() {
    let md = model(ScaleFunction::sinusoidal(0.1, 1.0, 1.0), 8, 32, 2.4, BoundaryPart::Right, CouplingMode::Additive);
    let pb = LeaderProblem::new(&md, SpaceTimeField::zeros(md.grid()), 10.0, 0.0).unwrap();
    let mut target = sine_target(8, 0.3, 0.1);
    target.rho0 = 0.1;
    target.rho1 = 0.1;
    let opts = LeaderOptions { tol: 1e-12, ..Default::default() };
    let res = minimize_dual(&pb, &target, &opts).unwrap();
    let oracle = dense_qp_oracle(&pb, &target);
    eprintln!("primal {} oracle {} iters {}", res.primal_value, oracle, res.iterations);
    assert!(rel_diff(res.primal_value, oracle) <= 1e-4);
}

fn small_setup() -> (WaveModel, ControllabilityTarget) {
    let md = model(ScaleFunction::sinusoidal(0.1, 1.0, 1.0), 16, 64, 2.4, BoundaryPart::Right, CouplingMode::Additive);
    (md, sine_target(16, 0.3, 0.1))
}

#[test]
fn variational_inequality_at_the_optimum() {
    let (md, target) = small_setup();
    let pb = LeaderProblem::new(&md, SpaceTimeField::zeros(md.grid()), 10.0, 0.0).unwrap();
    let res = minimize_dual(&pb, &target, &LeaderOptions { tol: 1e-12, ..Default::default() }).unwrap();
    let f = &res.f_star;
    assert_eq!(check_variational_inequality(f, &res.terminal, &target, &[f.clone()]), 0.0);
    let scale = f.f0.iter().chain(&f.f1).fold(0.0f64, |m, v| m.max(v.abs()));
    let mut r = rng(77);
    let probes: Vec<DualVariable> = (0..50)
        .map(|_| {
            let d = random_dual(md.grid().nodes(), &mut r);
            let coords: Vec<f64> = f.to_coords().iter().zip(d.to_coords()).map(|(a, b)| a + scale * b).collect();
            DualVariable::from_coords(&coords)
        })
        .collect();
    let worst = check_variational_inequality(f, &res.terminal, &target, &probes);
    assert!(worst >= -1e-6 * scale.max(1.0), "{worst}");
}

#[test]
fn inside_ball_target_is_an_exact_fixed_point() {
    let (md, mut target) = small_setup();
    target.rho0 = 2.0 * norm_l2_omega(&target.v0_target);
    let pb = LeaderProblem::new(&md, SpaceTimeField::zeros(md.grid()), 10.0, 0.0).unwrap();
    let res = minimize_dual(&pb, &target, &LeaderOptions::default()).unwrap();
    assert!(res.f_star.is_zero());
    assert_eq!(res.w1.max_abs(), 0.0);
    assert_eq!(res.gap, 0.0);
    assert_eq!(res.iterations, 1);
}

#[test]
fn objective_history_is_monotone_and_bounds_the_primal() {
    let (md, target) = small_setup();
    let pb = LeaderProblem::new(&md, SpaceTimeField::zeros(md.grid()), 10.0, 0.0).unwrap();
    let res = minimize_dual(&pb, &target, &LeaderOptions::default()).unwrap();
    assert!(res.history.windows(2).all(|w| w[1] <= w[0]));
    let scale = res.primal_value.max(1.0);
    assert!(res.history.iter().all(|&d| res.primal_value >= -d - 1e-8 * scale));
}

#[test]
fn matrix_free_agrees_with_assembled() {
    let (md, target) = small_setup();
    let pb = LeaderProblem::new(&md, SpaceTimeField::zeros(md.grid()), 10.0, 0.0).unwrap();
    let a = minimize_dual(&pb, &target, &LeaderOptions { assemble: Some(true), tol: 1e-12, ..Default::default() }).unwrap();
    let b = minimize_dual(&pb, &target, &LeaderOptions { assemble: Some(false), tol: 1e-12, ..Default::default() }).unwrap();
    assert!(rel_diff(a.primal_value, b.primal_value) < 1e-6, "{} {}", a.primal_value, b.primal_value);
}

#[test]
fn larger_balls_never_cost_more() {
    let (md, target) = small_setup();
    let pb = LeaderProblem::new(&md, SpaceTimeField::zeros(md.grid()), 10.0, 0.0).unwrap();
    let mut last = f64::INFINITY;
    for factor in [0.05, 0.1, 0.2] {
        let mut t = target.clone();
        t.rho0 = factor * norm_l2_omega(&t.v0_target);
        t.rho1 = t.rho0;
        let res = minimize_dual(&pb, &t, &LeaderOptions { tol: 1e-12, ..Default::default() }).unwrap();
        assert!(res.primal_value <= last * (1.0 + 1e-6));
        last = res.primal_value;
    }
}

#[test]
fn prox_case_split() {
    let x = vec![0.0, 3.0, 4.0, 0.0];
    assert_eq!(prox_block(&x, 5.0, 5.0), vec![0.0; 4]);
    assert_eq!(prox_block(&x, 5.0, 6.0), vec![0.0; 4]);
    let y = prox_block(&x, 5.0, 1.0);
    assert!((y[1] - 2.4).abs() < 1e-15 && (y[2] - 3.2).abs() < 1e-15);
}

#[test]
fn zero_inputs_give_zero_outputs() {
    let (md, target) = small_setup();
    let g = md.grid();
    let pb = LeaderProblem::new(&md, SpaceTimeField::zeros(g), 10.0, 0.0).unwrap();
    let zero = DualVariable::zeros(g.nodes());
    assert_eq!(apply_A_star(&pb, &zero).unwrap().max_abs(), 0.0);
    let cs = solve_cascade(&pb, &zero).unwrap();
    assert_eq!(cs.phi.max_abs() + cs.psi.max_abs(), 0.0);
    let (eta, zeta) = apply_A(&pb, &hicontrol::discretization::BoundaryControl::zeros(md.sigma1(), g)).unwrap();
    assert!(eta.iter().chain(&zeta).all(|&v| v == 0.0));
    let aff = solve_affine_part(&pb).unwrap();
    assert_eq!(aff.v0.max_abs() + aff.p0.max_abs(), 0.0);
    let data = DualData::new(&pb, &target, &aff, None);
    assert_eq!(dual_functional(&pb, &target, &data, &zero).unwrap(), 0.0);
    let sys = assemble_leader_optimality_system(&pb, &zero, 1e-12).unwrap();
    assert_eq!(sys.phi.max_abs() + sys.psi.max_abs() + sys.follower.v.max_abs() + sys.follower.p.max_abs(), 0.0);
}

#[test]
fn cascade_decouples_for_huge_sigma() {
    let (md, _) = small_setup();
    let g = md.grid();
    let mut r = rng(8);
    let f = random_dual(g.nodes(), &mut r);
    let term = hicontrol::discretization::TerminalPair { position: f.f0.clone(), velocity: f.f1.clone() };
    let bare = md.march_backward_transpose(None, Some(&term)).unwrap();
    let mut diffs = Vec::new();
    for sigma in [1e4, 1e6] {
        let pb = LeaderProblem::new(&md, SpaceTimeField::zeros(g), sigma, 0.0).unwrap();
        let cs = solve_cascade(&pb, &f).unwrap();
        diffs.push(cs.phi.sub(&bare).max_abs() / bare.max_abs());
        assert!(cs.residual < 1e-9);
    }
    assert!(diffs[1] < 1e-4 && diffs[1] < 0.02 * diffs[0], "{diffs:?}");
}

#[test]
fn affine_part_solves_its_equations_and_scales_with_sigma() {
    let (md, _) = small_setup();
    let g = md.grid();
    let mut r = rng(12);
    let v2 = random_field(g, &mut r);
    let pb = LeaderProblem::new(&md, v2.clone(), 10.0, 0.0).unwrap();
    let aff = solve_affine_part(&pb).unwrap();
    let unit = g.dt() * g.dt();
    assert!(md.forward_residual(&aff.v0, None) * unit <= 1e-8);
    let rhs = md.kn_times(&aff.v0.sub(&v2));
    assert!(md.adjoint_residual_full(&aff.p0, Some(&rhs), None) * g.dt() * g.dy() <= 1e-8);
    let big = |s: f64| solve_affine_part(&LeaderProblem::new(&md, v2.clone(), s, 0.0).unwrap()).unwrap().w2.max_abs();
    let ratio = big(1e5) / big(1e6);
    assert!((ratio - 10.0).abs() < 0.1, "{ratio}");
}

#[test]
fn optimality_system_matches_follower_path() {
    let (md, target) = small_setup();
    let g = md.grid();
    let mut r = rng(31);
    let v2 = random_field(g, &mut r).scaled(0.01);
    let pb = LeaderProblem::new(&md, v2.clone(), 10.0, 0.0).unwrap();
    let res = minimize_dual(&pb, &target, &LeaderOptions::default()).unwrap();
    let sys = assemble_leader_optimality_system(&pb, &res.f_star, 1e-12).unwrap();
    assert!(sys.residuals.max() <= 1e-6, "{:?}", sys.residuals);
    assert!(sys.follower.v.sub(&res.state).max_abs() <= 1e-8);
}

#[test]
fn positive_delta_converges_to_the_same_balls() {
    let (md, target) = small_setup();
    let pb = LeaderProblem::new(&md, SpaceTimeField::zeros(md.grid()), 10.0, 0.5).unwrap();
    let res = minimize_dual(&pb, &target, &LeaderOptions { tol: 1e-12, ..Default::default() }).unwrap();
    assert!(res.converged);
    assert!(res.dist0 <= target.rho0 + 1e-3 && res.dist1 <= target.rho1 + 1e-3);
}

#[test]
fn disjoint_mode_is_gated() {
    let md = model(ScaleFunction::constant(1.0), 16, 64, 2.4, BoundaryPart::Right, CouplingMode::Disjoint);
    let pb = LeaderProblem::new(&md, SpaceTimeField::zeros(md.grid()), 10.0, 0.0).unwrap();
    let err = minimize_dual(&pb, &sine_target(16, 0.3, 0.1), &LeaderOptions::default()).unwrap_err();
    assert!(matches!(err, Error::ModeGate));
}
