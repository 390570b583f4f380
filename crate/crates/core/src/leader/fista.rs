//! Monotone FISTA on the dual functional in the `H¹₀ × L²` metric.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::discretization::norms::{inner_h01_omega, riesz_h01};

#[derive(Debug, Clone)]
pub struct LeaderOptions {
    /// Relative objective decrease over `window` iterations that ends the run.
    pub tol: f64,
    pub max_iter: usize,
    pub window: usize,
    pub override_holmgren: bool,
    pub override_mode: bool,
    /// Assemble the Gram matrix of `A*` (default: when the dual has at most 600 coordinates).
    pub assemble: Option<bool>,
    /// Cap on the outer freeze-and-iterate loop used when `δ > 0`.
    pub outer_max_iter: usize,
}

impl Default for LeaderOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 20_000,
            window: 25,
            override_holmgren: false,
            override_mode: false,
            assemble: None,
            outer_max_iter: 50,
        }
    }
}

/// `⟨A* e_i, A* e_j⟩_{Σ1}` over the interior coordinates of the dual variable.
#[derive(Debug, Clone)]
pub struct GramOperator {
    n: usize,
    dy: f64,
    gram: Vec<f64>,
}

impl GramOperator {
    pub fn assemble(problem: &LeaderProblem) -> Result<Self> {
        let nodes = problem.nodes();
        let n = 2 * (nodes - 2);
        let threads = std::thread::available_parallelism().map_or(1, |p| p.get()).min(n);
        let columns: Vec<Result<BoundaryControl>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    s.spawn(move || {
                        (t..n)
                            .step_by(threads)
                            .map(|i| {
                                let mut e = vec![0.0; n];
                                e[i] = 1.0;
                                apply_A_star(problem, &DualVariable::from_coords(&e)).map(|c| (i, c))
                            })
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            let mut cols: Vec<Option<Result<BoundaryControl>>> = (0..n).map(|_| None).collect();
            for h in handles {
                for r in h.join().expect("assembly worker panicked") {
                    match r {
                        Ok((i, c)) => cols[i] = Some(Ok(c)),
                        Err(e) => cols[0] = Some(Err(e)),
                    }
                }
            }
            cols.into_iter().map(|c| c.expect("every column computed")).collect()
        });
        let columns = columns.into_iter().collect::<Result<Vec<_>>>()?;
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = columns[i].dot(&columns[j]);
                gram[i * n + j] = v;
                gram[j * n + i] = v;
            }
        }
        Ok(Self {
            n,
            dy: problem.model.grid().dy(),
            gram,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.n + j]
    }

    /// Coordinates of `A A* f`.
    fn apply(&self, coords: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let row = &self.gram[i * self.n..(i + 1) * self.n];
                row.iter().zip(coords).map(|(a, b)| a * b).sum::<f64>() / self.dy
            })
            .collect()
    }
}

enum Curvature<'p, 'a> {
    Assembled(GramOperator),
    MatrixFree(&'p LeaderProblem<'a>),
}

impl Curvature<'_, '_> {
    /// `A A* f` as a dual-shaped pair `(η, ζ)`.
    fn apply(&self, f: &DualVariable) -> Result<DualVariable> {
        if f.is_zero() {
            return Ok(DualVariable::zeros(f.nodes()));
        }
        match self {
            Curvature::Assembled(g) => Ok(DualVariable::from_coords(&g.apply(&f.to_coords()))),
            Curvature::MatrixFree(p) => {
                let w = apply_A_star(p, f)?;
                let (mut eta, mut zeta) = apply_A(p, &w)?;
                let n = eta.len() - 1;
                for v in [&mut eta, &mut zeta] {
                    v[0] = 0.0;
                    v[n] = 0.0;
                }
                Ok(DualVariable { f0: eta, f1: zeta })
            }
        }
    }
}

/// Smooth part `1/2 ⟨⟨A A* f, f⟩⟩ - ⟨⟨c, f⟩⟩` and its gradient in the `H¹₀ × L²` metric.
struct Smooth<'c, 'p, 'a> {
    curv: &'c Curvature<'p, 'a>,
    data: DualData,
}

impl Smooth<'_, '_, '_> {
    fn eval(&self, f: &DualVariable) -> Result<(f64, DualVariable)> {
        let af = self.curv.apply(f)?;
        let quad = 0.5 * (inner_l2_omega(&af.f0, &f.f0) + inner_l2_omega(&af.f1, &f.f1));
        let value = quad - self.data.pairing(f);
        let r0: Vec<f64> = af.f0.iter().zip(&self.data.c0).map(|(a, c)| a - c).collect();
        let g1 = af.f1.iter().zip(&self.data.c1).map(|(a, c)| a - c).collect();
        Ok((value, DualVariable { f0: riesz_h01(&r0), f1: g1 }))
    }
}

fn metric_inner(a: &DualVariable, b: &DualVariable) -> f64 {
    inner_h01_omega(&a.f0, &b.f0) + inner_l2_omega(&a.f1, &b.f1)
}

fn combine(a: &DualVariable, alpha: f64, b: &DualVariable) -> DualVariable {
    DualVariable {
        f0: a.f0.iter().zip(&b.f0).map(|(x, y)| x + alpha * y).collect(),
        f1: a.f1.iter().zip(&b.f1).map(|(x, y)| x + alpha * y).collect(),
    }
}

/// Block shrinkage: `0` if `norm <= thresh`, else `x (1 - thresh / norm)`.
pub fn prox_block(x: &[f64], norm: f64, thresh: f64) -> Vec<f64> {
    if norm <= thresh {
        vec![0.0; x.len()]
    } else {
        let s = 1.0 - thresh / norm;
        x.iter().map(|v| v * s).collect()
    }
}

fn prox(x: &DualVariable, tau: f64, target: &ControllabilityTarget) -> DualVariable {
    let n0 = norm_h01_omega(&x.f0).expect("zero ends");
    let n1 = norm_l2_omega(&x.f1);
    DualVariable {
        f0: prox_block(&x.f0, n0, tau * target.rho1),
        f1: prox_block(&x.f1, n1, tau * target.rho0),
    }
}

/// Largest eigenvalue of the smooth Hessian in the product metric.
fn curvature_estimate(curv: &Curvature, nodes: usize, iterations: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let coords: Vec<f64> = (0..2 * (nodes - 2)).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut f = DualVariable::from_coords(&coords);
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let nrm = metric_inner(&f, &f).sqrt();
        if nrm == 0.0 {
            break;
        }
        f = combine(&DualVariable::zeros(nodes), 1.0 / nrm, &f);
        let af = curv.apply(&f)?;
        let mf = DualVariable {
            f0: riesz_h01(&af.f0),
            f1: af.f1,
        };
        lambda = metric_inner(&mf, &mf).sqrt();
        f = mf;
    }
    Ok(lambda)
}

struct FistaOutcome {
    f: DualVariable,
    value: f64,
    iterations: usize,
    history: Vec<f64>,
    converged: bool,
}

fn fista(
    smooth: &Smooth,
    target: &ControllabilityTarget,
    start: DualVariable,
    lipschitz: f64,
    opts: &LeaderOptions,
) -> Result<FistaOutcome> {
    let objective = |f: &DualVariable, s: f64| s + f.penalty(target);
    let mut tau = if lipschitz > 0.0 { 1.0 / (1.05 * lipschitz) } else { 1.0 };
    let mut x = start;
    let mut fx = objective(&x, smooth.eval(&x)?.0);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut history = Vec::new();
    for k in 1..=opts.max_iter {
        let (sy, gy) = smooth.eval(&y)?;
        let (z, fz) = loop {
            let z = prox(&combine(&y, -tau, &gy), tau, target);
            if z == y {
                // exact fixed point of the prox-gradient map
                let fz = objective(&z, sy);
                if fz <= fx {
                    x = z;
                    fx = fz;
                }
                history.push(fx);
                return Ok(FistaOutcome {
                    f: x,
                    value: fx,
                    iterations: k,
                    history,
                    converged: true,
                });
            }
            let (sz, _) = smooth.eval(&z)?;
            let d = combine(&z, -1.0, &y);
            let model = sy + metric_inner(&gy, &d) + metric_inner(&d, &d) / (2.0 * tau);
            if sz <= model + 1e-13 * sy.abs().max(sz.abs()) {
                break (z.clone(), objective(&z, sz));
            }
            tau *= 0.5;
        };
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let (x_next, f_next) = if fz <= fx { (z.clone(), fz) } else { (x.clone(), fx) };
        if fz > fx {
            // restart the momentum
            y = x_next.clone();
            t = 1.0;
        } else {
            let a = combine(&z, -1.0, &x_next);
            let b = combine(&x_next, -1.0, &x);
            y = combine(&combine(&x_next, t / t_next, &a), (t - 1.0) / t_next, &b);
            t = t_next;
        }
        x = x_next;
        fx = f_next;
        history.push(fx);
        if k > opts.window {
            let old = history[k - 1 - opts.window];
            if old - fx <= opts.tol * fx.abs().max(1e-300) {
                return Ok(FistaOutcome {
                    f: x,
                    value: fx,
                    iterations: k,
                    history,
                    converged: true,
                });
            }
        }
    }
    Ok(FistaOutcome {
        f: x,
        value: fx,
        iterations: opts.max_iter,
        history,
        converged: false,
    })
}

/// Solves the dual problem and recovers the leader `w1 = A* f⋆`, the follower
/// response and the terminal state.
pub fn minimize_dual(
    problem: &LeaderProblem,
    target: &ControllabilityTarget,
    opts: &LeaderOptions,
) -> Result<LeaderResult> {
    let holmgren_ok = check_gates(problem, opts)?;
    let nodes = problem.nodes();
    if target.v0_target.len() != nodes {
        return Err(Error::Shape("targets do not match the grid".into()));
    }
    let affine = solve_affine_part(problem)?;
    let dual_dim = 2 * (nodes - 2);
    let curv = if opts.assemble.unwrap_or(dual_dim <= 600) {
        Curvature::Assembled(GramOperator::assemble(problem)?)
    } else {
        Curvature::MatrixFree(problem)
    };
    let lipschitz = curvature_estimate(&curv, nodes, 60)?;

    let mut shift: Option<Vec<f64>> = None;
    let mut f = DualVariable::zeros(nodes);
    let mut total_iterations = 0;
    let mut history = Vec::new();
    let mut converged;
    let mut outer = 0;
    loop {
        outer += 1;
        let smooth = Smooth {
            curv: &curv,
            data: DualData::new(problem, target, &affine, shift.as_deref()),
        };
        let out = fista(&smooth, target, f, lipschitz, opts)?;
        total_iterations += out.iterations;
        history.extend(out.history);
        converged = out.converged;
        f = out.f;
        let _ = out.value;
        if problem.delta == 0.0 {
            break;
        }
        // freeze-and-iterate on the δ g(T) shift
        let af = curv.apply(&f)?;
        let g_t: Vec<f64> = af.f1.iter().map(|z| -z).collect();
        let change = match &shift {
            Some(old) => old.iter().zip(&g_t).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())),
            None => f64::INFINITY,
        };
        let scale = g_t.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        shift = Some(g_t);
        if change <= 1e-10 * scale {
            break;
        }
        if outer >= opts.outer_max_iter {
            converged = false;
            break;
        }
    }

    let w1 = apply_A_star(problem, &f)?;
    let fp = FollowerProblem::new(problem.model, w1.clone(), problem.v2.clone(), problem.sigma)?;
    let follower = solve_follower(&fp, problem.inner_tol, problem.max_iter)?;
    let terminal = terminal_of(&follower.v);
    let (dist0, dist1) = terminal_distances(&terminal, target);
    let data = DualData::new(problem, target, &affine, shift.as_deref());
    let primal_value = 0.5 * w1.dot(&w1);
    let dual_value = if f.is_zero() {
        0.0
    } else {
        primal_value - data.pairing(&f) + f.penalty(target)
    };
    Ok(LeaderResult {
        f_star: f,
        w1,
        w2: follower.w2,
        state: follower.v,
        terminal,
        dist0,
        dist1,
        rho0: target.rho0,
        rho1: target.rho1,
        primal_value,
        dual_value,
        gap: primal_value + dual_value,
        iterations: total_iterations,
        holmgren_ok,
        history,
        converged,
    })
}
