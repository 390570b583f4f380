use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::RunConfig;
use crate::diagnostics::{
    adjointness_check, convergence_study, discrete_energy, duality_identity_check, energy_drift, residual_pde,
    CheckReport, ConvergenceReport, Manufactured, Stencil,
};
use crate::discretization::csvio::{read_control_csv, write_control_csv, write_field_csv};
use crate::discretization::{terminal_of, BoundaryControl, ForwardData, Grid, TerminalPair, Traces, WaveModel};
use crate::follower::{j2_gradient, j2_value, solve_follower, FollowerProblem};
use crate::leader::{
    apply_A_star, assemble_leader_optimality_system, check_variational_inequality, minimize_dual,
    solve_affine_part, terminal_distances, DualData, DualVariable, LeaderOptions, LeaderProblem,
};
use crate::{Error, Result};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn prepare(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn write_terminal_csv(path: &Path, grid: Grid, tp: &TerminalPair) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["y", "position", "velocity"])?;
    for j in 0..grid.nodes() {
        w.write_record([grid.y(j).to_string(), tp.position[j].to_string(), tp.velocity[j].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_profile_csv(path: &Path, grid: Grid, name: &str, v: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["y", name])?;
    for (j, x) in v.iter().enumerate() {
        w.write_record([grid.y(j).to_string(), x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn read_profile(path: &Path, grid: Grid) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::with_capacity(grid.nodes());
    for rec in r.records() {
        let rec = rec?;
        let v = rec
            .get(1)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Shape(format!("bad row in {}", path.display())))?;
        out.push(v);
    }
    if out.len() != grid.nodes() {
        return Err(Error::Shape(format!("{} needs {} rows", path.display(), grid.nodes())));
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct SimulateSummary {
    energy_drift: f64,
    residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_error: Option<f64>,
}

/// Forward march with the configured data; writes `state.csv`, `terminal.csv`
/// and `summary.json`.
pub fn cmd_simulate(cfg: &RunConfig, base: &Path, out: &Path) -> Result<()> {
    let model = cfg.model()?;
    let g = model.grid();
    prepare(out)?;
    let (v, source, exact) = match &cfg.simulate.manufactured {
        Some(name) => {
            let mut case = Manufactured::by_name(name)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown manufactured solution {name}")))?;
            case.scale = model.scale().clone();
            case.horizon = g.horizon;
            let (v, exact, f) = case.solve(g.nx, g.nt)?;
            (v, Some(f), Some(exact))
        }
        None => {
            let pos = cfg.simulate.position.profile(g, base)?;
            let vel = cfg.simulate.velocity.profile(g, base)?;
            let v = model.march_forward(&ForwardData {
                position: Some(&pos),
                velocity: Some(&vel),
                ..Default::default()
            })?;
            (v, None, None)
        }
    };
    let drift = if discrete_energy(&v)[0] == 0.0 { 0.0 } else { energy_drift(&v) };
    let summary = SimulateSummary {
        energy_drift: drift,
        residual: residual_pde(&model, &v, source.as_ref(), Stencil::L),
        max_error: exact.map(|e| v.sub(&e).max_abs()),
    };
    write_field_csv(&out.join("state.csv"), &v)?;
    write_terminal_csv(&out.join("terminal.csv"), g, &terminal_of(&v))?;
    write_json(&out.join("summary.json"), &summary)
}

#[derive(Debug, Clone, Default)]
pub struct FollowerArgs {
    pub w1: Option<PathBuf>,
    /// Re-check the Nash property on random perturbations.
    pub audit: bool,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct NashAudit {
    seed: u64,
    samples: usize,
    min_change: f64,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct FollowerSummary {
    j2: f64,
    euler_residual: f64,
    iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    audit: Option<NashAudit>,
}

fn random_control(model: &WaveModel, segment: crate::scale::Segment, rng: &mut ChaCha8Rng) -> Result<BoundaryControl> {
    let g = model.grid();
    let mut tr = Traces::zeros(g.nt);
    for v in tr.left.iter_mut().chain(tr.right.iter_mut()) {
        *v = rng.gen_range(-1.0..1.0);
    }
    BoundaryControl::from_traces(segment, g, tr)
}

/// Nash follower for the leader control in `args.w1` (zero when absent).
pub fn cmd_follower(cfg: &RunConfig, base: &Path, out: &Path, args: &FollowerArgs) -> Result<()> {
    let model = cfg.model()?;
    let g = model.grid();
    let w1 = match &args.w1 {
        Some(p) => read_control_csv(p, model.sigma1(), g)?,
        None => BoundaryControl::zeros(model.sigma1(), g),
    };
    let v2 = cfg.v2.field(g, base)?;
    let problem = FollowerProblem::new(&model, w1, v2, cfg.problem.sigma)?;
    let sol = solve_follower(&problem, cfg.solver.tol, cfg.solver.max_iter)?;
    prepare(out)?;
    write_control_csv(&out.join("w2.csv"), &sol.w2, g)?;
    write_field_csv(&out.join("state.csv"), &sol.v)?;
    write_field_csv(&out.join("adjoint.csv"), &sol.p)?;
    let audit = if args.audit {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let samples = 20;
        let mut min_change = f64::INFINITY;
        for _ in 0..samples {
            let z = random_control(&model, model.sigma2(), &mut rng)?;
            for eps in [1e-2, 1e-3] {
                let mut w = sol.w2.clone();
                w.axpy(eps, &z);
                min_change = min_change.min(j2_value(&problem, &w)? - sol.j2);
            }
        }
        Some(NashAudit {
            seed: args.seed,
            samples,
            min_change,
            pass: min_change >= -1e-12,
        })
    } else {
        None
    };
    let failed_audit = audit.as_ref().is_some_and(|a| !a.pass);
    write_json(
        &out.join("summary.json"),
        &FollowerSummary {
            j2: sol.j2,
            euler_residual: sol.euler_residual,
            iterations: sol.iterations,
            audit,
        },
    )?;
    if failed_audit {
        return Err(Error::CheckFailed("Nash perturbation audit".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct LeaderArgs {
    pub override_holmgren: bool,
}

fn leader_problem<'a>(cfg: &RunConfig, model: &'a WaveModel, base: &Path) -> Result<LeaderProblem<'a>> {
    let v2 = cfg.v2.field(model.grid(), base)?;
    let mut pb = LeaderProblem::new(model, v2, cfg.problem.sigma, cfg.problem.delta)?;
    pb.relaxation = cfg.solver.relaxation;
    pb.max_iter = cfg.solver.max_iter.max(1000);
    Ok(pb)
}

/// Leader control through the dual problem; refuses when the time condition fails.
pub fn cmd_leader(cfg: &RunConfig, base: &Path, out: &Path, args: &LeaderArgs) -> Result<()> {
    let model = cfg.model()?;
    let g = model.grid();
    let problem = leader_problem(cfg, &model, base)?;
    let target = cfg.target(g, base)?;
    let opts = LeaderOptions {
        tol: cfg.solver.tol,
        max_iter: cfg.solver.dual_max_iter,
        override_holmgren: cfg.solver.override_holmgren || args.override_holmgren,
        ..Default::default()
    };
    let res = minimize_dual(&problem, &target, &opts)?;
    prepare(out)?;
    write_control_csv(&out.join("w1.csv"), &res.w1, g)?;
    write_control_csv(&out.join("w2.csv"), &res.w2, g)?;
    write_profile_csv(&out.join("f0.csv"), g, "f0", &res.f_star.f0)?;
    write_profile_csv(&out.join("f1.csv"), g, "f1", &res.f_star.f1)?;
    write_field_csv(&out.join("state.csv"), &res.state)?;
    write_json(&out.join("summary.json"), &res.summary())?;
    if !res.converged {
        return Err(Error::NoConvergence {
            iterations: res.iterations,
            residual: res.gap,
            detail: "dual minimizer hit its iteration cap; best iterate written".into(),
        });
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct VerifySummary {
    pub checks: Vec<CheckReport>,
    pub pass: bool,
}

/// Re-runs the diagnostics against the artifacts in `dir`; writes `summary.json`
/// to `out`.
pub fn cmd_verify(cfg: &RunConfig, base: &Path, dir: &Path, out: &Path, seed: u64) -> Result<VerifySummary> {
    let has = |name: &str| dir.join(name).is_file();
    if !dir.is_dir() || !["w2.csv", "f0.csv", "f1.csv", "state.csv"].iter().any(|n| has(n)) {
        return Err(Error::InvalidConfig(format!("no artifacts found in {}", dir.display())));
    }
    let model = cfg.model()?;
    let g = model.grid();
    let mut checks = vec![adjointness_check(&model, 10, seed)?];
    let v2 = cfg.v2.field(g, base)?;

    if has("w2.csv") && !has("f0.csv") {
        let w1 = if has("w1.csv") {
            read_control_csv(&dir.join("w1.csv"), model.sigma1(), g)?
        } else {
            BoundaryControl::zeros(model.sigma1(), g)
        };
        let w2 = read_control_csv(&dir.join("w2.csv"), model.sigma2(), g)?;
        let problem = FollowerProblem::new(&model, w1, v2.clone(), cfg.problem.sigma)?;
        let grad = j2_gradient(&problem, &w2)?;
        let scale = (cfg.problem.sigma * w2.norm()).max(1.0);
        checks.push(CheckReport::new(
            "euler",
            seed,
            1,
            grad.norm() / scale,
            (10.0 * cfg.solver.tol).max(1e-10),
        ));
    }

    if has("f0.csv") && has("f1.csv") {
        let problem = leader_problem(cfg, &model, base)?;
        let target = cfg.target(g, base)?;
        checks.push(duality_identity_check(&problem, 5, seed)?);
        let f = DualVariable::new(read_profile(&dir.join("f0.csv"), g)?, read_profile(&dir.join("f1.csv"), g)?)?;
        let w1 = apply_A_star(&problem, &f)?;
        let sys = assemble_leader_optimality_system(&problem, &f, 1e-12)?;
        let terminal = terminal_of(&sys.follower.v);
        let (d0, d1) = terminal_distances(&terminal, &target);
        checks.push(CheckReport::new(
            "terminal_feasibility",
            seed,
            2,
            (d0 - target.rho0).max(d1 - target.rho1).max(0.0),
            1e-3,
        ));
        checks.push(CheckReport::new("optimality_system", seed, 1, sys.residuals.max(), 1e-6));

        // variational inequality on random probes at the scale of f
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = f.f0.iter().chain(&f.f1).fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let probes: Vec<DualVariable> = (0..50)
            .map(|_| {
                let coords: Vec<f64> = f
                    .to_coords()
                    .iter()
                    .map(|c| c + scale * rng.gen_range(-1.0..1.0))
                    .collect();
                DualVariable::from_coords(&coords)
            })
            .collect();
        let vi = check_variational_inequality(&f, &terminal, &target, &probes);
        checks.push(CheckReport::new("variational_inequality", seed, probes.len(), (-vi).max(0.0), 1e-6 * scale));

        // duality gap with the stored dual variable
        let primal = 0.5 * w1.dot(&w1);
        let aff = solve_affine_part(&problem)?;
        // with δ > 0 the frozen shift is g(T) = v(T) - v_aff(T) at the stored optimum
        let shift: Vec<f64> = terminal.position.iter().zip(&aff.terminal.position).map(|(a, b)| a - b).collect();
        let data = DualData::new(&problem, &target, &aff, (problem.delta > 0.0).then_some(shift.as_slice()));
        let dual = if f.is_zero() {
            0.0
        } else {
            primal - data.pairing(&f) + f.penalty(&target)
        };
        checks.push(CheckReport::new(
            "duality_gap",
            seed,
            1,
            (primal + dual).abs() / primal.max(1.0),
            1e-4,
        ));
        if has("w2.csv") {
            let w2 = read_control_csv(&dir.join("w2.csv"), model.sigma2(), g)?;
            let fp = FollowerProblem::new(&model, w1, v2, cfg.problem.sigma)?;
            let grad = j2_gradient(&fp, &w2)?;
            let scale = (cfg.problem.sigma * w2.norm()).max(1.0);
            checks.push(CheckReport::new(
                "euler",
                seed,
                1,
                grad.norm() / scale,
                (10.0 * cfg.solver.tol).max(1e-10),
            ));
        }
    }

    let pass = checks.iter().all(|c| c.pass);
    let summary = VerifySummary { checks, pass };
    prepare(out)?;
    write_json(&out.join("summary.json"), &summary)?;
    if !pass {
        let failed: Vec<&str> = summary.checks.iter().filter(|c| !c.pass).map(|c| c.check.as_str()).collect();
        return Err(Error::CheckFailed(failed.join(", ")));
    }
    Ok(summary)
}

/// Parses `32x160,64x320`.
pub fn parse_levels(text: &str) -> Result<Vec<(usize, usize)>> {
    text.split(',')
        .map(|item| {
            let (a, b) = item
                .trim()
                .split_once('x')
                .ok_or_else(|| Error::InvalidConfig(format!("level {item:?} is not NXxNT")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidConfig(format!("level {item:?} is not NXxNT")))
            };
            Ok((parse(a)?, parse(b)?))
        })
        .collect()
}

/// Manufactured-solution refinement study; the exact solution is named by
/// `convergence.case` (default `standing_wave`), scale and `T` come from the config.
pub fn cmd_convergence(cfg: &RunConfig, levels: Option<Vec<(usize, usize)>>, out: &Path) -> Result<ConvergenceReport> {
    let name = cfg.convergence.case.as_deref().unwrap_or("standing_wave");
    let mut case =
        Manufactured::by_name(name).ok_or_else(|| Error::InvalidConfig(format!("unknown manufactured solution {name}")))?;
    case.scale = cfg.scale_function()?;
    case.horizon = cfg.grid.horizon;
    let levels = match levels {
        Some(l) => l,
        None if !cfg.convergence.levels.is_empty() => cfg.convergence.levels.clone(),
        None => vec![(cfg.grid()?.nx, cfg.grid()?.nt)],
    };
    if levels.is_empty() {
        return Err(Error::InvalidConfig("no levels given".into()));
    }
    let report = convergence_study(&levels, |nx, nt| case.error(nx, nt))?;
    prepare(out)?;
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}
