mod common;

use common::*;
use hicontrol::diagnostics::*;
use hicontrol::discretization::csvio::*;
use hicontrol::discretization::norms::*;
use hicontrol::discretization::*;
use hicontrol::scale::{BoundaryPart, CouplingMode, Geometry, ScaleFunction, Side};
use rand::Rng;
use std::f64::consts::PI;

#[test]
fn manufactured_solutions_converge_at_second_order() {
    for case in [Manufactured::standing_wave(), Manufactured::oscillating_scale(), Manufactured::polynomial()] {
        let levels = [(16, 80), (32, 160), (64, 320)];
        let rep = convergence_study(&levels, |nx, nt| case.error(nx, nt)).unwrap();
        for r in rep.ratios() {
            assert!((3.2..=4.8).contains(&r), "{}: {:?}", case.name, rep);
        }
    }
}

#[test]
fn manufactured_residual_is_round_off() {
    let case = Manufactured::oscillating_scale();
    let (v, _, f) = case.solve(32, 160).unwrap();
    let md = case.model(32, 160).unwrap();
    let g = md.grid();
    let scale = f.max_abs().max(v.max_abs() / (g.dt() * g.dt()));
    assert!(residual_pde(&md, &v, Some(&f), Stencil::L) <= 1e-11 * scale);
}

#[test]
fn corrupting_one_value_shows_in_the_residual() {
    let case = Manufactured::standing_wave();
    let (mut v, _, f) = case.solve(16, 64).unwrap();
    let md = case.model(16, 64).unwrap();
    let dt = md.grid().dt();
    v.set(20, 5, v.get(20, 5) + 1.0);
    let r = residual_pde(&md, &v, Some(&f), Stencil::L);
    assert!(r >= 0.5 / (dt * dt) && r <= 4.0 / (dt * dt), "{r}");
}

#[test]
fn energy_is_conserved_for_constant_scale() {
    let md = model(ScaleFunction::constant(1.0), 32, 128, 3.0, BoundaryPart::Both, CouplingMode::Additive);
    let g = md.grid();
    let mut r = rng(1);
    let pos = random_profile(g, &mut r);
    let vel = random_profile(g, &mut r);
    let v = md
        .march_forward(&ForwardData { position: Some(&pos), velocity: Some(&vel), ..Default::default() })
        .unwrap();
    assert!(energy_drift(&v) <= 1e-10, "{}", energy_drift(&v));
}

#[test]
fn transpose_is_exact() {
    for k in [ScaleFunction::constant(1.0), ScaleFunction::sinusoidal(0.1, 1.0, 1.0), ScaleFunction::linear(0.8, 0.3)] {
        let md = model(k, 16, 64, 2.0, BoundaryPart::Both, CouplingMode::Additive);
        let rep = adjointness_check(&md, 50, 17).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}

#[test]
fn impulse_stays_in_the_causal_cone_for_constant_scale() {
    let md = model(ScaleFunction::constant(1.0), 32, 128, 2.0, BoundaryPart::Both, CouplingMode::Additive);
    let g = md.grid();
    let m0 = 10;
    let v = md
        .march_forward(&ForwardData { traces: Some(&impulse(g, Side::Left, m0)), ..Default::default() })
        .unwrap();
    for j in 1..g.nx {
        // leapfrog moves information one cell per step; plus one stencil cell
        let arrival = first_arrival(&v, j, 0.0).unwrap_or(g.levels());
        assert!(arrival + 1 >= m0 + j, "node {j} reached at {arrival}");
    }
    for m in 0..=m0 {
        assert!(v.level(m)[1..g.nx].iter().all(|&x| x == 0.0));
    }
}

#[test]
fn boundary_map_is_linear() {
    let md = model(ScaleFunction::sinusoidal(0.1, 1.0, 1.0), 16, 64, 2.0, BoundaryPart::Both, CouplingMode::Additive);
    let g = md.grid();
    let seg = Geometry::new(1, BoundaryPart::Both, CouplingMode::Additive).sigma0(g.nt);
    let mut r = rng(3);
    let (w, z) = (random_control(seg, g, &mut r), random_control(seg, g, &mut r));
    let mut mix = w.scaled(0.4);
    mix.axpy(-1.3, &z);
    let mut expect = md.boundary_to_state(&w).unwrap().scaled(0.4);
    expect.axpy(-1.3, &md.boundary_to_state(&z).unwrap());
    assert!(md.boundary_to_state(&mix).unwrap().sub(&expect).max_abs() < 1e-12);
    assert_eq!(md.boundary_to_state(&BoundaryControl::zeros(seg, g)).unwrap().max_abs(), 0.0);
}

#[test]
fn conormal_trace_is_the_one_sided_difference_for_constant_scale() {
    // with b = 0 the transpose of the Dirichlet lifting reduces to (p_{N-1} - p_N)/dy
    let md = model(ScaleFunction::constant(1.0), 32, 128, 1.0, BoundaryPart::Both, CouplingMode::Additive);
    let g = md.grid();
    let rhs = SpaceTimeField::from_fn(g, |y, t| (PI * y).sin() * (1.0 - t).powi(2));
    let p = md.march_backward_transpose(Some(&rhs), None).unwrap();
    let c = md.conormal_traces(&p);
    let scale = p.max_abs() / g.dy();
    for m in 0..g.nt {
        let right = (p.get(m, g.nx - 1) - p.get(m, g.nx)) / g.dy();
        let left = (p.get(m, 1) - p.get(m, 0)) / g.dy();
        assert!((c.right[m] - right).abs() <= 1e-12 * scale);
        assert!((c.left[m] - left).abs() <= 1e-12 * scale);
    }
    assert_eq!(md.conormal_traces(&SpaceTimeField::zeros(g)), Traces::zeros(g.nt));
}

#[test]
fn norms_of_the_first_eigenfunction() {
    let nx = 256;
    let v: Vec<f64> = (0..=nx).map(|j| (PI * j as f64 / nx as f64).sin()).collect();
    assert!((norm_l2_omega(&v) - 0.5f64.sqrt()).abs() < 1e-10);
    assert!((norm_hm1_omega(&v).unwrap() - 1.0 / (PI * 2f64.sqrt())).abs() < 1e-5);
    let f = riesz_h01(&v);
    let err = f.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b / (PI * PI)).abs()));
    assert!(err < 1e-5);
    let z = vec![0.0; nx + 1];
    assert_eq!(norm_l2_omega(&z) + norm_h01_omega(&z).unwrap() + norm_hm1_omega(&z).unwrap(), 0.0);
}

#[test]
fn negative_norm_is_dominated_by_l2() {
    let mut r = rng(4);
    for nx in [8, 32, 128] {
        let grid = Grid::new(nx, 16, 1.0).unwrap();
        for _ in 0..10 {
            let v = random_profile(grid, &mut r);
            // |v|_{H⁻¹} <= |v|_{L²} / sqrt(λ1) with λ1 the first discrete Dirichlet eigenvalue
            let dy = grid.dy();
            let lambda1 = 4.0 / (dy * dy) * (PI * dy / 2.0).sin().powi(2);
            let ratio = norm_hm1_omega(&v).unwrap() / norm_l2_omega(&v);
            assert!(ratio <= (1.0 + 1e-12) / lambda1.sqrt() && ratio <= 0.33, "{ratio}");
        }
    }
}

#[test]
fn riesz_identity_on_random_functionals() {
    let mut r = rng(5);
    let grid = Grid::new(24, 16, 1.0).unwrap();
    let l = random_profile(grid, &mut r);
    let f = riesz_h01(&l);
    for _ in 0..10 {
        let g = random_profile(grid, &mut r);
        let (a, b) = (inner_h01_omega(&f, &g), inner_l2_omega(&l, &g));
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
}

#[test]
fn standing_wave_terminal_pair() {
    let case = Manufactured::standing_wave();
    let (v, _, _) = case.solve(64, 320).unwrap();
    let tp = terminal_of(&v);
    let g = v.grid();
    for j in 0..=g.nx {
        let y = g.y(j);
        assert!((tp.position[j] - (PI * y).sin()).abs() < 5e-3);
        assert!(tp.velocity[j].abs() < 5e-2);
    }
    assert_eq!(terminal_of(&SpaceTimeField::zeros(g)), TerminalPair::zeros(g));
}

#[test]
fn csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::new(8, 20, 1.7).unwrap();
    let mut r = rng(6);
    let field = SpaceTimeField::from_fn(grid, |y, t| (3.1 * y + t).sin() / 7.0);
    let path = dir.path().join("field.csv");
    write_field_csv(&path, &field).unwrap();
    let back = read_field_csv(&path).unwrap();
    assert_eq!(back.values(), field.values());
    assert_eq!(back.grid().nx, 8);
    assert_eq!(back.grid().nt, 20);

    for gamma in [BoundaryPart::Right, BoundaryPart::Both] {
        let seg = Geometry::new(1, gamma, CouplingMode::Additive).sigma0(grid.nt);
        let c = random_control(seg, grid, &mut r).scaled(r.gen_range(0.5..2.0));
        let path = dir.path().join("w.csv");
        write_control_csv(&path, &c, grid).unwrap();
        assert_eq!(read_control_csv(&path, seg, grid).unwrap(), c);
    }
}

#[test]
fn cfl_and_grid_limits() {
    assert!(Grid::new(7, 16, 1.0).is_err());
    assert!(Grid::new(8, 15, 1.0).is_err());
    let g = Grid::new(64, 64, 2.0).unwrap();
    let err = WaveModel::new(g, ScaleFunction::constant(1.0), Geometry::new(1, BoundaryPart::Right, CouplingMode::Additive));
    assert!(matches!(err, Err(hicontrol::Error::CflViolation { .. })));
}
