//! The Nash follower: for a fixed leader control `w1`, the unique minimizer of
//!
//! ```text
//! J2(w2) = 1/2 ⟨k^n (v - v2), v - v2⟩_Q + sigma/2 |w2|²_{Σ2}
//! ```
//!
//! where `v` is driven by the boundary trace `w1 + w2` (the two controls live on
//! disjoint segments, or share one in additive mode). `J2` is a strictly convex
//! quadratic; its Hessian is `sigma I + C2 B*(k^n B .)`, applied matrix-free with
//! one forward and one transposed march.

use crate::discretization::{BoundaryControl, ForwardData, SpaceTimeField, TerminalPair, Traces, WaveModel};
use crate::scale::Segment;
use crate::{Error, Result};

/// Linear pieces shared by the follower and the leader machinery.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TraceOperator<'a> {
    pub model: &'a WaveModel,
    pub sigma: f64,
    pub seg2: Segment,
}

impl<'a> TraceOperator<'a> {
    pub fn new(model: &'a WaveModel, sigma: f64) -> Self {
        Self {
            model,
            sigma,
            seg2: model.sigma2(),
        }
    }

    pub fn state(&self, traces: &Traces) -> Result<SpaceTimeField> {
        self.model.march_forward(&ForwardData {
            traces: Some(traces),
            ..Default::default()
        })
    }

    /// Adjoint field for the given loads and its conormal trace on `Σ2`.
    pub fn pullback(
        &self,
        rhs: Option<&SpaceTimeField>,
        terminal: Option<&TerminalPair>,
    ) -> Result<(SpaceTimeField, BoundaryControl)> {
        let p = self.model.march_backward_transpose(rhs, terminal)?;
        let c = self.model.conormal_trace(&p, self.seg2);
        Ok((p, c))
    }

    /// `C2 B*(k^n B z)`
    pub fn coupling(&self, z: &BoundaryControl) -> Result<BoundaryControl> {
        let v = self.state(z.traces())?;
        Ok(self.pullback(Some(&self.model.kn_times(&v)), None)?.1)
    }

    /// `sigma z + C2 B*(k^n B z)`
    pub fn hessian(&self, z: &BoundaryControl) -> Result<BoundaryControl> {
        let mut out = self.coupling(z)?;
        out.axpy(self.sigma, z);
        Ok(out)
    }

    /// Solves `hessian(w) = b`: relaxed Picard on `w = (b - coupling(w)) / sigma`,
    /// falling back to conjugate gradients when the iteration stalls or diverges.
    pub fn solve_coupled(&self, b: &BoundaryControl, theta: f64, tol: f64, max_iter: usize) -> Result<Solved> {
        let scale = b.norm().max(1.0);
        let mut w = BoundaryControl::zeros(self.seg2, self.model.grid());
        if b.max_abs() == 0.0 {
            return Ok(Solved { x: w, iterations: 1 });
        }
        let mut history = Vec::new();
        let mut stalled = 0;
        let mut iterations = 0;
        while iterations < max_iter {
            iterations += 1;
            let mut target = b.clone();
            target.axpy(-1.0, &self.coupling(&w)?);
            let target = target.scaled(1.0 / self.sigma);
            let mut next = w.scaled(1.0 - theta);
            next.axpy(theta, &target);
            let mut diff = next.clone();
            diff.axpy(-1.0, &w);
            let d = diff.norm();
            w = next;
            if let Some(&last) = history.last() {
                if d > 0.95 * last {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
            }
            history.push(d);
            if d <= tol * scale || stalled >= 5 || !d.is_finite() {
                break;
            }
        }
        if !w.max_abs().is_finite() {
            w = BoundaryControl::zeros(self.seg2, self.model.grid());
        }
        let cg = conjugate_gradient(|z| self.hessian(z), b, w, tol * scale, max_iter)?;
        Ok(Solved {
            iterations: iterations + cg.iterations,
            ..cg
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Solved {
    pub x: BoundaryControl,
    pub iterations: usize,
}

/// Conjugate gradients in the `Σ` inner product, stopping on the true residual.
pub(crate) fn conjugate_gradient(
    apply: impl Fn(&BoundaryControl) -> Result<BoundaryControl>,
    b: &BoundaryControl,
    x0: BoundaryControl,
    tol: f64,
    max_iter: usize,
) -> Result<Solved> {
    let mut x = x0;
    let mut iterations = 0;
    // restarts guard against drift of the recursive residual
    for _restart in 0..4 {
        let mut r = b.clone();
        r.axpy(-1.0, &apply(&x)?);
        let mut rr = r.dot(&r);
        if rr.sqrt() <= tol {
            return Ok(Solved { x, iterations });
        }
        let mut d = r.clone();
        while iterations < max_iter {
            iterations += 1;
            let hd = apply(&d)?;
            let curv = d.dot(&hd);
            if !(curv > 0.0) {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: rr.sqrt(),
                    detail: "operator lost positive definiteness".into(),
                });
            }
            let alpha = rr / curv;
            x.axpy(alpha, &d);
            r.axpy(-alpha, &hd);
            let rr_new = r.dot(&r);
            if rr_new.sqrt() <= 0.5 * tol {
                break;
            }
            d = d.scaled(rr_new / rr);
            d.axpy(1.0, &r);
            rr = rr_new;
        }
        if iterations >= max_iter {
            break;
        }
    }
    let mut r = b.clone();
    r.axpy(-1.0, &apply(&x)?);
    let residual = r.norm();
    if residual <= tol {
        Ok(Solved { x, iterations })
    } else {
        Err(Error::NoConvergence {
            iterations,
            residual,
            detail: "conjugate gradients hit the iteration cap".into(),
        })
    }
}

/// Data of one follower problem. The model fixes grid, scale and geometry.
#[derive(Debug, Clone)]
pub struct FollowerProblem<'a> {
    pub model: &'a WaveModel,
    pub w1: BoundaryControl,
    pub v2: SpaceTimeField,
    pub sigma: f64,
}

impl<'a> FollowerProblem<'a> {
    pub fn new(model: &'a WaveModel, w1: BoundaryControl, v2: SpaceTimeField, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")));
        }
        if v2.grid() != model.grid() {
            return Err(Error::Shape("tracking target does not match the grid".into()));
        }
        if w1.traces().left.len() != model.grid().levels() {
            return Err(Error::Shape("leader control does not match the grid".into()));
        }
        Ok(Self { model, w1, v2, sigma })
    }

    pub(crate) fn operator(&self) -> TraceOperator<'a> {
        TraceOperator::new(self.model, self.sigma)
    }

    pub fn segment(&self) -> Segment {
        self.model.sigma2()
    }

    /// State driven by `w1 + w2`.
    pub fn state(&self, w2: &BoundaryControl) -> Result<SpaceTimeField> {
        self.operator().state(&self.w1.traces().add(w2.traces()))
    }

    fn misfit(&self, v: &SpaceTimeField) -> SpaceTimeField {
        v.sub(&self.v2)
    }

    /// Adjoint of the tracking term at state `v`.
    pub fn adjoint(&self, v: &SpaceTimeField) -> Result<SpaceTimeField> {
        let rhs = self.model.kn_times(&self.misfit(v));
        self.model.march_backward_transpose(Some(&rhs), None)
    }

    fn value_at(&self, v: &SpaceTimeField, w2: &BoundaryControl) -> f64 {
        let e = self.misfit(v);
        0.5 * self.model.kn_times(&e).inner_q(&e) + 0.5 * self.sigma * w2.dot(w2)
    }

    /// Right-hand side of the normal equations: `-C2 B*(k^n (B w1 - v2))`.
    pub(crate) fn normal_rhs(&self) -> Result<BoundaryControl> {
        let v = self.operator().state(self.w1.traces())?;
        let rhs = self.model.kn_times(&self.misfit(&v));
        let (_, c) = self.operator().pullback(Some(&rhs), None)?;
        Ok(c.scaled(-1.0))
    }

    fn finish(&self, w2: BoundaryControl, iterations: usize) -> Result<FollowerSolution> {
        let v = self.state(&w2)?;
        let p = self.adjoint(&v)?;
        let mut grad = self.model.conormal_trace(&p, self.segment());
        grad.axpy(self.sigma, &w2);
        Ok(FollowerSolution {
            j2: self.value_at(&v, &w2),
            euler_residual: grad.norm(),
            w2,
            v,
            p,
            iterations,
        })
    }
}

#[derive(Debug, Clone)]
pub struct FollowerSolution {
    pub w2: BoundaryControl,
    pub v: SpaceTimeField,
    pub p: SpaceTimeField,
    pub j2: f64,
    /// `|sigma w2 + C2 p|_Σ`, the norm of the discrete Euler equation.
    pub euler_residual: f64,
    pub iterations: usize,
}

pub fn j2_value(problem: &FollowerProblem, w2: &BoundaryControl) -> Result<f64> {
    let v = problem.state(w2)?;
    Ok(problem.value_at(&v, w2))
}

/// Gradient of `J2` in the `Σ` inner product.
pub fn j2_gradient(problem: &FollowerProblem, w2: &BoundaryControl) -> Result<BoundaryControl> {
    let v = problem.state(w2)?;
    let p = problem.adjoint(&v)?;
    let mut g = problem.model.conormal_trace(&p, problem.segment());
    g.axpy(problem.sigma, &w2.restricted(problem.segment()));
    Ok(g)
}

/// Minimizes `J2` by conjugate gradients; `tol` bounds the gradient norm
/// relative to `max(1, |rhs|)`.
pub fn solve_follower(problem: &FollowerProblem, tol: f64, max_iter: usize) -> Result<FollowerSolution> {
    let op = problem.operator();
    let b = problem.normal_rhs()?;
    let x0 = BoundaryControl::zeros(problem.segment(), problem.model.grid());
    let out = conjugate_gradient(|z| op.hessian(z), &b, x0, tol * b.norm().max(1.0), max_iter)?;
    problem.finish(out.x, out.iterations)
}

/// Relaxed fixed-point iteration on the coupled state/adjoint system:
/// march `v`, march `p` back from `k^n (v - v2)`, set `w2 <- -(1/sigma) C2 p`.
/// Stops when successive iterates differ by at most `tol`.
pub fn solve_optimality_system(
    problem: &FollowerProblem,
    tol: f64,
    relaxation: f64,
    max_iter: usize,
) -> Result<FollowerSolution> {
    if !(relaxation > 0.0 && relaxation <= 1.0) {
        return Err(Error::InvalidConfig(format!("relaxation must lie in (0, 1], got {relaxation}")));
    }
    let seg = problem.segment();
    let mut w2 = BoundaryControl::zeros(seg, problem.model.grid());
    let mut history: Vec<f64> = Vec::new();
    for it in 1..=max_iter {
        let v = problem.state(&w2)?;
        let p = problem.adjoint(&v)?;
        let target = problem.model.conormal_trace(&p, seg).scaled(-1.0 / problem.sigma);
        let mut next = w2.scaled(1.0 - relaxation);
        next.axpy(relaxation, &target);
        let mut diff = next.clone();
        diff.axpy(-1.0, &w2);
        let d = diff.norm();
        w2 = next;
        history.push(d);
        if d <= tol {
            return problem.finish(w2, it);
        }
        let n = history.len();
        if !d.is_finite() || (n > 10 && history[n - 1] > history[n - 6]) {
            break;
        }
    }
    let tail: Vec<String> = history.iter().rev().take(5).map(|d| format!("{d:.3e}")).collect();
    Err(Error::NoConvergence {
        iterations: history.len(),
        residual: history.last().copied().unwrap_or(f64::NAN),
        detail: format!(
            "fixed-point differences (latest first) [{}]; try a smaller relaxation or the CG solver",
            tail.join(", ")
        ),
    })
}
