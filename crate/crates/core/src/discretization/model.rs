//! The semi-implicit leapfrog scheme for `v'' + L v = f` and its exact transpose.
//!
//! Equation `e` (centred at `t_e`) links levels `e-1, e, e+1`:
//!
//! ```text
//! (v^{e+1} - 2v^e + v^{e-1})/dt² + K^e v^e + c^e D v^e + b^e (D v^{e+1} - D v^{e-1})/(2dt) = f^e
//! ```
//!
//! with `K` the conservative three-point stencil of `-(a v_y)_y` (a at half nodes)
//! and `D` the centred first difference. Equation 0 is the Taylor start
//! `(2/dt²)(v¹ - v⁰) - (2/dt) v₁ + K⁰v⁰ + c⁰Dv⁰ + b⁰Dv₁ = f⁰`.
//! Writing the whole march as one block lower-triangular system in the interior
//! unknowns, the adjoint sweep solves the block upper-triangular transpose.
//! Multipliers `μ_e` are stored as the adjoint field `p^e = μ_e / (dt dy)`.

use super::field::{BoundaryControl, SpaceTimeField, TerminalPair, Traces};
use super::tridiag::solve_in_place;
use super::Grid;
use crate::scale::{eval_coefficients, Geometry, ScaleFunction, Segment};
use crate::{Error, Result};

/// Stability margin on `dt max sqrt(a) / dy`.
pub const CFL_LIMIT: f64 = 0.9;

/// Rows `j = 1..nx-1` of a tri-band `(nx-1) x (nx+1)` matrix.
#[derive(Debug, Clone)]
struct Band {
    lo: Vec<f64>,
    di: Vec<f64>,
    up: Vec<f64>,
}

impl Band {
    fn zeros(n: usize) -> Self {
        Self {
            lo: vec![0.0; n],
            di: vec![0.0; n],
            up: vec![0.0; n],
        }
    }

    /// `out += alpha * B v` for a full nodal vector `v`.
    fn apply(&self, v: &[f64], out: &mut [f64], alpha: f64) {
        for i in 0..self.di.len() {
            out[i] += alpha * (self.lo[i] * v[i] + self.di[i] * v[i + 1] + self.up[i] * v[i + 2]);
        }
    }

    /// `out += alpha * B_Iᵀ mu`, interior columns only.
    fn apply_t(&self, mu: &[f64], out: &mut [f64], alpha: f64) {
        let n = self.di.len();
        for i in 0..n {
            let mut s = self.di[i] * mu[i];
            if i > 0 {
                s += self.up[i - 1] * mu[i - 1];
            }
            if i + 1 < n {
                s += self.lo[i + 1] * mu[i + 1];
            }
            out[i] += alpha * s;
        }
    }

    /// Boundary columns of `Bᵀ mu`: `(left, right)`.
    fn boundary_t(&self, mu: &[f64]) -> (f64, f64) {
        let n = self.di.len();
        (self.lo[0] * mu[0], self.up[n - 1] * mu[n - 1])
    }

    fn transposed(&self) -> Self {
        let n = self.di.len();
        let mut t = Band::zeros(n);
        for i in 0..n {
            t.di[i] = self.di[i];
            if i > 0 {
                t.lo[i] = self.up[i - 1];
            }
            if i + 1 < n {
                t.up[i] = self.lo[i + 1];
            }
        }
        t
    }
}

/// Grid samples of the coefficients of `L`.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    /// `a` at half nodes `j + 1/2`, per level.
    pub a_half: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    /// `k(t_m)^n`
    pub kn: Vec<f64>,
    pub max_sqrt_a: f64,
}

impl CoefficientTable {
    pub fn new(grid: Grid, scale: &ScaleFunction, n: u32) -> Result<Self> {
        let mut a_half = Vec::with_capacity(grid.levels());
        let mut b = Vec::with_capacity(grid.levels());
        let mut c = Vec::with_capacity(grid.levels());
        let mut kn = Vec::with_capacity(grid.levels());
        let mut max_a = 0.0f64;
        for m in 0..grid.levels() {
            let t = grid.t(m);
            let mut ah = Vec::with_capacity(grid.nx);
            for j in 0..grid.nx {
                let y = (j as f64 + 0.5) * grid.dy();
                let co = eval_coefficients(scale, y, t, n)?;
                ah.push(co.a);
                max_a = max_a.max(co.a);
            }
            let mut bm = Vec::with_capacity(grid.nodes());
            let mut cm = Vec::with_capacity(grid.nodes());
            for j in 0..grid.nodes() {
                let co = eval_coefficients(scale, grid.y(j), t, n)?;
                max_a = max_a.max(co.a);
                bm.push(co.b);
                cm.push(co.c);
            }
            a_half.push(ah);
            b.push(bm);
            c.push(cm);
            kn.push(scale.value(t).powi(n as i32));
        }
        Ok(Self {
            a_half,
            b,
            c,
            kn,
            max_sqrt_a: max_a.sqrt(),
        })
    }
}

/// Inputs of a forward march; `None` means zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct ForwardData<'a> {
    pub traces: Option<&'a Traces>,
    pub source: Option<&'a SpaceTimeField>,
    pub position: Option<&'a [f64]>,
    pub velocity: Option<&'a [f64]>,
}

/// Discretized cylinder problem: grid, scale, geometry and the per-level stencils.
#[derive(Debug, Clone)]
pub struct WaveModel {
    grid: Grid,
    scale: ScaleFunction,
    geometry: Geometry,
    table: CoefficientTable,
    curr: Vec<Band>,
    next: Vec<Band>,
    next_t: Vec<Band>,
    prev: Vec<Band>,
}

impl WaveModel {
    pub fn new(grid: Grid, scale: ScaleFunction, geometry: Geometry) -> Result<Self> {
        if geometry.n != 1 {
            return Err(Error::InvalidConfig(format!(
                "the solver is one-dimensional (n = 1), got n = {}",
                geometry.n
            )));
        }
        scale.validate(grid.horizon)?;
        let table = CoefficientTable::new(grid, &scale, geometry.n)?;
        let ratio = grid.dt() * table.max_sqrt_a / grid.dy();
        if ratio > CFL_LIMIT {
            return Err(Error::CflViolation {
                ratio,
                limit: CFL_LIMIT,
            });
        }
        let (curr, next, prev) = build_bands(grid, &table);
        let next_t = next.iter().map(Band::transposed).collect();
        Ok(Self {
            grid,
            scale,
            geometry,
            table,
            curr,
            next,
            next_t,
            prev,
        })
    }

    /// Smallest `nt` meeting `dt max sqrt(a) / dy <= cfl` (at least 16).
    pub fn steps_for_cfl(nx: usize, horizon: f64, scale: &ScaleFunction, cfl: f64) -> Result<usize> {
        let probe = Grid::new(nx.max(super::grid::MIN_CELLS), super::grid::MIN_STEPS, horizon)?;
        scale.validate(horizon)?;
        // a is maximal at y = 0 where it equals k^-2
        let kmin = (0..=4000)
            .map(|i| scale.value(horizon * i as f64 / 4000.0))
            .fold(f64::INFINITY, f64::min);
        let sqrt_a = 1.0 / kmin;
        let nt = (horizon * sqrt_a * probe.nx as f64 / cfl * (1.0 + 1e-9)).ceil() as usize;
        Ok(nt.max(super::grid::MIN_STEPS))
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn scale(&self) -> &ScaleFunction {
        &self.scale
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn table(&self) -> &CoefficientTable {
        &self.table
    }

    pub fn cfl_ratio(&self) -> f64 {
        self.grid.dt() * self.table.max_sqrt_a / self.grid.dy()
    }

    pub fn sigma1(&self) -> Segment {
        self.geometry.sigma1(self.grid.nt)
    }

    pub fn sigma2(&self) -> Segment {
        self.geometry.sigma2(self.grid.nt)
    }

    /// Multiplies every level by `k(t_m)^n`.
    pub fn kn_times(&self, field: &SpaceTimeField) -> SpaceTimeField {
        let mut out = field.clone();
        for m in 0..self.grid.levels() {
            let w = self.table.kn[m];
            for v in out.level_mut(m) {
                *v *= w;
            }
        }
        out
    }

    pub fn march_forward(&self, data: &ForwardData) -> Result<SpaceTimeField> {
        let g = self.grid;
        let (nx, nt, dt, dy) = (g.nx, g.nt, g.dt(), g.dy());
        let n = nx - 1;
        self.check_data(data)?;
        let mut v = SpaceTimeField::zeros(g);
        if let Some(pos) = data.position {
            v.level_mut(0)[1..nx].copy_from_slice(&pos[1..nx]);
        }
        if let Some(tr) = data.traces {
            v.set(0, 0, tr.left[0]);
            v.set(0, nx, tr.right[0]);
        }
        let mut rhs = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        for e in 0..nt {
            rhs.iter_mut().for_each(|r| *r = 0.0);
            if let Some(f) = data.source {
                rhs.copy_from_slice(&f.level(e)[1..nx]);
            }
            if e == 0 {
                if let Some(vel) = data.velocity {
                    let b = &self.table.b[0];
                    for i in 0..n {
                        let j = i + 1;
                        rhs[i] += 2.0 / dt * vel[j] - b[j] * (vel[j + 1] - vel[j - 1]) / (2.0 * dy);
                    }
                }
            }
            self.curr[e].apply(v.level(e), &mut rhs, -1.0);
            if e >= 1 {
                self.prev[e].apply(v.level(e - 1), &mut rhs, -1.0);
            }
            let (gl, gr) = data
                .traces
                .map(|tr| (tr.left[e + 1], tr.right[e + 1]))
                .unwrap_or((0.0, 0.0));
            rhs[0] -= self.next[e].lo[0] * gl;
            rhs[n - 1] -= self.next[e].up[n - 1] * gr;
            let nb = &self.next[e];
            if !solve_in_place(&nb.lo, &nb.di, &nb.up, &mut rhs, &mut scratch) {
                return Err(Error::SingularStep { level: e + 1 });
            }
            let row = v.level_mut(e + 1);
            row[1..nx].copy_from_slice(&rhs);
            row[0] = gl;
            row[nx] = gr;
        }
        Ok(v)
    }

    fn check_data(&self, data: &ForwardData) -> Result<()> {
        let g = self.grid;
        if let Some(tr) = data.traces {
            if tr.left.len() != g.levels() || tr.right.len() != g.levels() {
                return Err(Error::Shape("trace length must be nt + 1".into()));
            }
        }
        for v in [data.position, data.velocity].into_iter().flatten() {
            if v.len() != g.nodes() {
                return Err(Error::Shape("initial data length must be nx + 1".into()));
            }
        }
        if let Some(f) = data.source {
            if f.grid() != g {
                return Err(Error::Shape("source grid mismatch".into()));
            }
        }
        Ok(())
    }

    /// Euclidean right-hand sides of the transposed system for the functional
    /// `⟨u, rhs⟩_Q + ⟨u'(T), P⟩ - ⟨u(T), V⟩`.
    fn adjoint_loads(&self, rhs: Option<&SpaceTimeField>, terminal: Option<&TerminalPair>) -> Vec<Vec<f64>> {
        let g = self.grid;
        let (nx, nt, dt, dy) = (g.nx, g.nt, g.dt(), g.dy());
        let mut rho = vec![vec![0.0; nx - 1]; g.levels()];
        if let Some(r) = rhs {
            for (l, row) in rho.iter_mut().enumerate().skip(1) {
                let w = dt * dy * g.time_weight(l);
                for (i, x) in row.iter_mut().enumerate() {
                    *x = w * r.get(l, i + 1);
                }
            }
        }
        if let Some(tp) = terminal {
            for i in 0..nx - 1 {
                let (p, q) = (tp.position[i + 1], tp.velocity[i + 1]);
                rho[nt][i] += dy * (1.5 / dt * p - q);
                rho[nt - 1][i] -= dy * 2.0 / dt * p;
                rho[nt - 2][i] += dy * 0.5 / dt * p;
            }
        }
        rho
    }

    /// Exact transpose of the homogeneous-data forward march.
    ///
    /// Returns the adjoint field `p`; `conormal_trace(p)` is then the transpose
    /// of the trace-to-state map applied to the loads.
    pub fn march_backward_transpose(
        &self,
        rhs: Option<&SpaceTimeField>,
        terminal: Option<&TerminalPair>,
    ) -> Result<SpaceTimeField> {
        let g = self.grid;
        if let Some(r) = rhs {
            if r.grid() != g {
                return Err(Error::Shape("rhs grid mismatch".into()));
            }
        }
        let (nx, nt) = (g.nx, g.nt);
        let n = nx - 1;
        let rho = self.adjoint_loads(rhs, terminal);
        let mut mu = vec![vec![0.0; n]; nt];
        let mut scratch = vec![0.0; n];
        for e in (0..nt).rev() {
            let l = e + 1;
            let mut r = rho[l].clone();
            if l < nt {
                self.curr[l].apply_t(&mu[l], &mut r, -1.0);
            }
            if l + 1 < nt {
                self.prev[l + 1].apply_t(&mu[l + 1], &mut r, -1.0);
            }
            let bt = &self.next_t[e];
            if !solve_in_place(&bt.lo, &bt.di, &bt.up, &mut r, &mut scratch) {
                return Err(Error::SingularStep { level: e });
            }
            mu[e] = r;
        }
        let scale = 1.0 / (g.dt() * g.dy());
        let mut p = SpaceTimeField::zeros(g);
        for (e, m) in mu.iter().enumerate() {
            let row = p.level_mut(e);
            for i in 0..n {
                row[i + 1] = m[i] * scale;
            }
        }
        if let Some(tp) = terminal {
            p.level_mut(nt)[1..nx].copy_from_slice(&tp.position[1..nx]);
        }
        Ok(p)
    }

    /// Trace-space gradient on both ends (all levels) from an adjoint field.
    pub fn conormal_traces(&self, p: &SpaceTimeField) -> Traces {
        let g = self.grid;
        let (nt, nx) = (g.nt, g.nx);
        let mu_scale = g.dt() * g.dy();
        let mu = |e: usize| -> Vec<f64> { p.level(e)[1..nx].iter().map(|v| v * mu_scale).collect() };
        let mus: Vec<Vec<f64>> = (0..nt).map(mu).collect();
        let mut out = Traces::zeros(nt);
        for l in 0..=nt {
            let (mut sl, mut sr) = (0.0, 0.0);
            let mut add = |(a, b): (f64, f64)| {
                sl += a;
                sr += b;
            };
            if l >= 1 {
                add(self.next[l - 1].boundary_t(&mus[l - 1]));
            }
            if l < nt {
                add(self.curr[l].boundary_t(&mus[l]));
            }
            if l + 1 < nt {
                add(self.prev[l + 1].boundary_t(&mus[l + 1]));
            }
            out.left[l] = -sl / g.dt();
            out.right[l] = -sr / g.dt();
        }
        out
    }

    /// Discrete conormal trace of `p` on `segment` (the operator `B*`).
    pub fn conormal_trace(&self, p: &SpaceTimeField, segment: Segment) -> BoundaryControl {
        BoundaryControl::from_traces(segment, self.grid, self.conormal_traces(p))
            .expect("conormal traces have grid shape")
    }

    /// The control-to-state map `B` (zero initial data and source).
    pub fn boundary_to_state(&self, control: &BoundaryControl) -> Result<SpaceTimeField> {
        self.march_forward(&ForwardData {
            traces: Some(control.traces()),
            ..Default::default()
        })
    }

    /// Max interior stencil residual of `v'' + L v - f` over equations `1..nt-1`.
    pub fn forward_residual(&self, v: &SpaceTimeField, source: Option<&SpaceTimeField>) -> f64 {
        let g = self.grid;
        let n = g.nx - 1;
        let mut worst = 0.0f64;
        let mut r = vec![0.0; n];
        for e in 1..g.nt {
            self.forward_equation(v, e, &mut r);
            if let Some(f) = source {
                for i in 0..n {
                    r[i] -= f.get(e, i + 1);
                }
            }
            worst = r.iter().fold(worst, |m, x| m.max(x.abs()));
        }
        worst
    }

    fn forward_equation(&self, v: &SpaceTimeField, e: usize, r: &mut [f64]) {
        r.iter_mut().for_each(|x| *x = 0.0);
        self.next[e].apply(v.level(e + 1), r, 1.0);
        self.curr[e].apply(v.level(e), r, 1.0);
        if e >= 1 {
            self.prev[e].apply(v.level(e - 1), r, 1.0);
        }
    }

    /// Residual of every forward equation including the start, boundary and initial data.
    pub fn forward_residual_full(&self, v: &SpaceTimeField, data: &ForwardData) -> f64 {
        let g = self.grid;
        let (nx, dt, dy) = (g.nx, g.dt(), g.dy());
        let n = nx - 1;
        let mut worst = self.forward_residual(v, data.source);
        let mut r = vec![0.0; n];
        self.forward_equation(v, 0, &mut r);
        for i in 0..n {
            let j = i + 1;
            let mut f = data.source.map_or(0.0, |s| s.get(0, j));
            if let Some(vel) = data.velocity {
                f += 2.0 / dt * vel[j] - self.table.b[0][j] * (vel[j + 1] - vel[j - 1]) / (2.0 * dy);
            }
            worst = worst.max((r[i] - f).abs());
        }
        let zero = Traces::zeros(g.nt);
        let tr = data.traces.unwrap_or(&zero);
        for m in 0..g.levels() {
            worst = worst.max((v.get(m, 0) - tr.left[m]).abs());
            worst = worst.max((v.get(m, nx) - tr.right[m]).abs());
        }
        for j in 1..nx {
            let p0 = data.position.map_or(0.0, |p| p[j]);
            worst = worst.max((v.get(0, j) - p0).abs());
        }
        worst
    }

    /// Transposed equation at level `l`, in adjoint-field units.
    fn adjoint_equation(&self, p: &SpaceTimeField, l: usize, r: &mut [f64]) {
        let nt = self.grid.nt;
        let nx = self.grid.nx;
        r.iter_mut().for_each(|x| *x = 0.0);
        if l >= 1 {
            self.next[l - 1].apply_t(&p.level(l - 1)[1..nx], r, 1.0);
        }
        if l < nt {
            self.curr[l].apply_t(&p.level(l)[1..nx], r, 1.0);
        }
        if l + 1 < nt {
            self.prev[l + 1].apply_t(&p.level(l + 1)[1..nx], r, 1.0);
        }
    }

    /// Max interior residual of the transposed scheme (the discrete `p'' + L* p - rhs`)
    /// over levels `1..nt-3`, which do not see terminal data.
    pub fn adjoint_residual(&self, p: &SpaceTimeField, rhs: Option<&SpaceTimeField>) -> f64 {
        let g = self.grid;
        let n = g.nx - 1;
        let mut r = vec![0.0; n];
        let mut worst = 0.0f64;
        for l in 1..g.nt.saturating_sub(2) {
            self.adjoint_equation(p, l, &mut r);
            for i in 0..n {
                let f = rhs.map_or(0.0, |s| g.time_weight(l) * s.get(l, i + 1));
                worst = worst.max((r[i] - f).abs());
            }
        }
        worst
    }

    /// Residual of every transposed equation including the terminal loads.
    pub fn adjoint_residual_full(
        &self,
        p: &SpaceTimeField,
        rhs: Option<&SpaceTimeField>,
        terminal: Option<&TerminalPair>,
    ) -> f64 {
        let g = self.grid;
        let n = g.nx - 1;
        let loads = self.adjoint_loads(rhs, terminal);
        let unit = 1.0 / (g.dt() * g.dy());
        let mut r = vec![0.0; n];
        let mut worst = 0.0f64;
        for l in 1..=g.nt {
            self.adjoint_equation(p, l, &mut r);
            for i in 0..n {
                worst = worst.max((r[i] - loads[l][i] * unit).abs());
            }
        }
        for m in 0..g.levels() {
            worst = worst.max(p.get(m, 0).abs()).max(p.get(m, g.nx).abs());
        }
        worst
    }
}

fn build_bands(grid: Grid, table: &CoefficientTable) -> (Vec<Band>, Vec<Band>, Vec<Band>) {
    let (nx, nt, dt, dy) = (grid.nx, grid.nt, grid.dt(), grid.dy());
    let n = nx - 1;
    let (idt2, idy2) = (1.0 / (dt * dt), 1.0 / (dy * dy));
    let mut curr = Vec::with_capacity(nt);
    let mut next = Vec::with_capacity(nt);
    let mut prev = Vec::with_capacity(nt);
    for e in 0..nt {
        let (ah, b, c) = (&table.a_half[e], &table.b[e], &table.c[e]);
        let mut cu = Band::zeros(n);
        let mut ne = Band::zeros(n);
        let mut pr = Band::zeros(n);
        for i in 0..n {
            let j = i + 1;
            let (am, ap) = (ah[j - 1], ah[j]);
            cu.lo[i] = -am * idy2 - c[j] / (2.0 * dy);
            cu.di[i] = (am + ap) * idy2 - 2.0 * idt2;
            cu.up[i] = -ap * idy2 + c[j] / (2.0 * dy);
            if e == 0 {
                ne.di[i] = 2.0 * idt2;
            } else {
                let mixed = b[j] / (4.0 * dt * dy);
                ne.lo[i] = -mixed;
                ne.di[i] = idt2;
                ne.up[i] = mixed;
                pr.lo[i] = mixed;
                pr.di[i] = idt2;
                pr.up[i] = -mixed;
            }
        }
        curr.push(cu);
        next.push(ne);
        prev.push(pr);
    }
    (curr, next, prev)
}
