//! The JSON run configuration.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::discretization::{csvio, Grid, SpaceTimeField, WaveModel, CFL_LIMIT};
use crate::leader::ControllabilityTarget;
use crate::scale::{BoundaryPart, CouplingMode, Geometry, SampledScale, ScaleFamily, ScaleFunction};
use crate::{Error, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scale: ScaleConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub problem: ProblemConfig,
    /// Tracking target of the follower.
    #[serde(default)]
    pub v2: FunctionSpec,
    #[serde(default)]
    pub target: TargetConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleConfig {
    pub family: String,
    #[serde(default)]
    pub params: Vec<f64>,
    /// Samples for `custom-sampled`.
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default)]
    pub values: Vec<f64>,
    #[serde(default)]
    pub derivatives: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    /// Number of steps; derived from `cfl` when absent.
    #[serde(default)]
    pub nt: Option<usize>,
    #[serde(default)]
    pub cfl: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default = "default_gamma0")]
    pub gamma0: BoundaryPart,
    #[serde(default = "default_mode")]
    pub mode: CouplingMode,
    #[serde(default = "default_n")]
    pub n: u32,
}

fn default_gamma0() -> BoundaryPart {
    BoundaryPart::Right
}
fn default_mode() -> CouplingMode {
    CouplingMode::Additive
}
fn default_n() -> u32 {
    1
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            gamma0: default_gamma0(),
            mode: default_mode(),
            n: default_n(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub rho0: Option<f64>,
    #[serde(default)]
    pub rho1: Option<f64>,
}

fn default_sigma() -> f64 {
    1.0
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            sigma: default_sigma(),
            delta: 0.0,
            rho0: None,
            rho1: None,
        }
    }
}

/// Named profile families in `y`; space-time targets are constant in time
/// unless read from a field CSV.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FunctionSpec {
    #[default]
    Zero,
    /// `amplitude * sin(k π y)`
    Sine {
        #[serde(default = "one")]
        k: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `amplitude * cos²(π (y - center) / (2 width))` on `|y - center| < width`
    Bump {
        center: f64,
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Field CSV for space-time targets, `y,value` CSV for profiles.
    Csv { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

impl FunctionSpec {
    fn eval(&self, y: f64) -> f64 {
        match *self {
            FunctionSpec::Zero | FunctionSpec::Csv { .. } => 0.0,
            FunctionSpec::Sine { k, amplitude } => amplitude * (k * std::f64::consts::PI * y).sin(),
            FunctionSpec::Bump { center, width, amplitude } => {
                let s = (y - center) / width;
                if s.abs() < 1.0 {
                    amplitude * (0.5 * std::f64::consts::PI * s).cos().powi(2)
                } else {
                    0.0
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            FunctionSpec::Bump { width, .. } if !(*width > 0.0) => {
                Err(Error::InvalidConfig(format!("bump width must be positive, got {width}")))
            }
            _ => Ok(()),
        }
    }

    /// Nodal profile; end values are set to zero.
    pub fn profile(&self, grid: Grid, base: &Path) -> Result<Vec<f64>> {
        self.validate()?;
        let mut v: Vec<f64> = match self {
            FunctionSpec::Csv { path } => read_profile_csv(&base.join(path), grid)?,
            _ => (0..grid.nodes()).map(|j| self.eval(grid.y(j))).collect(),
        };
        v[0] = 0.0;
        v[grid.nx] = 0.0;
        Ok(v)
    }

    /// Space-time field (constant in time for the analytic families).
    pub fn field(&self, grid: Grid, base: &Path) -> Result<SpaceTimeField> {
        self.validate()?;
        match self {
            FunctionSpec::Csv { path } => {
                let f = csvio::read_field_csv(&base.join(path))?;
                let g = f.grid();
                if g.nx != grid.nx || g.nt != grid.nt || (g.horizon - grid.horizon).abs() > 1e-12 * grid.horizon {
                    return Err(Error::Shape("field CSV does not match the configured grid".into()));
                }
                SpaceTimeField::from_values(grid, f.values().to_vec())
            }
            _ => Ok(SpaceTimeField::from_fn(grid, |y, _| self.eval(y))),
        }
    }
}

fn read_profile_csv(path: &Path, grid: Grid) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Shape("profile CSV needs columns y,value".into()));
        }
        out.push(
            rec[1]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Shape(format!("not a number: {:?}", &rec[1])))?,
        );
    }
    if out.len() != grid.nodes() {
        return Err(Error::Shape(format!("profile CSV needs {} rows, got {}", grid.nodes(), out.len())));
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    #[serde(default)]
    pub v0: FunctionSpec,
    #[serde(default)]
    pub v1: FunctionSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_relaxation")]
    pub relaxation: f64,
    #[serde(default)]
    pub override_holmgren: bool,
    /// Iteration cap of the dual minimizer.
    #[serde(default = "default_dual_max_iter")]
    pub dual_max_iter: usize,
}

fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    500
}
fn default_relaxation() -> f64 {
    0.5
}
fn default_dual_max_iter() -> usize {
    20_000
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: default_max_iter(),
            relaxation: default_relaxation(),
            override_holmgren: false,
            dual_max_iter: default_dual_max_iter(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub position: FunctionSpec,
    #[serde(default)]
    pub velocity: FunctionSpec,
    /// Name of a manufactured solution (`standing_wave`, `polynomial`); its
    /// source and initial data replace `position`/`velocity`.
    #[serde(default)]
    pub manufactured: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    #[serde(default)]
    pub case: Option<String>,
    #[serde(default)]
    pub levels: Vec<(usize, usize)>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        let cfg = Self::from_json(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.grid.horizon;
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidConfig(format!("T must be positive, got {t}")));
        }
        if self.grid.nt.is_some() && self.grid.cfl.is_some() {
            return Err(Error::InvalidConfig("give either grid.nt or grid.cfl, not both".into()));
        }
        if let Some(c) = self.grid.cfl {
            if !(c > 0.0 && c <= CFL_LIMIT) {
                return Err(Error::InvalidConfig(format!("cfl must lie in (0, {CFL_LIMIT}], got {c}")));
            }
        }
        if self.geometry.n != 1 {
            return Err(Error::InvalidConfig(format!("only n = 1 is supported, got {}", self.geometry.n)));
        }
        let p = &self.problem;
        if !(p.sigma > 0.0) || !p.sigma.is_finite() {
            return Err(Error::InvalidConfig(format!("sigma must be positive, got {}", p.sigma)));
        }
        if !(p.delta >= 0.0) || !p.delta.is_finite() {
            return Err(Error::InvalidConfig(format!("delta must be nonnegative, got {}", p.delta)));
        }
        for r in [p.rho0, p.rho1].into_iter().flatten() {
            if !(r > 0.0) {
                return Err(Error::InvalidConfig(format!("ball radii must be positive, got {r}")));
            }
        }
        let s = &self.solver;
        if !(s.tol > 0.0) || s.max_iter == 0 || s.dual_max_iter == 0 {
            return Err(Error::InvalidConfig("tol and iteration caps must be positive".into()));
        }
        if !(s.relaxation > 0.0 && s.relaxation <= 1.0) {
            return Err(Error::InvalidConfig(format!("relaxation must lie in (0, 1], got {}", s.relaxation)));
        }
        self.scale_function()?;
        Ok(())
    }

    pub fn scale_function(&self) -> Result<ScaleFunction> {
        let t = self.grid.horizon;
        let sc = &self.scale;
        if sc.family == "custom-sampled" {
            if !sc.params.is_empty() {
                return Err(Error::InvalidConfig("custom-sampled scale takes times/values/derivatives".into()));
            }
            let s = SampledScale::new(sc.times.clone(), sc.values.clone(), sc.derivatives.clone())?;
            if s.times()[0] > 0.0 || *s.times().last().expect("nonempty") < t {
                return Err(Error::InvalidConfig("scale samples must cover [0, T]".into()));
            }
            return ScaleFunction::new(ScaleFamily::Sampled(s), t);
        }
        if !(sc.times.is_empty() && sc.values.is_empty() && sc.derivatives.is_empty()) {
            return Err(Error::InvalidConfig("samples are only accepted for custom-sampled scales".into()));
        }
        ScaleFunction::from_params(&sc.family, &sc.params, t)
    }

    pub fn geometry(&self) -> Geometry {
        Geometry::new(self.geometry.n, self.geometry.gamma0, self.geometry.mode)
    }

    pub fn grid(&self) -> Result<Grid> {
        let nt = match self.grid.nt {
            Some(nt) => nt,
            None => WaveModel::steps_for_cfl(
                self.grid.nx,
                self.grid.horizon,
                &self.scale_function()?,
                self.grid.cfl.unwrap_or(CFL_LIMIT),
            )?,
        };
        Grid::new(self.grid.nx, nt, self.grid.horizon)
    }

    pub fn model(&self) -> Result<WaveModel> {
        WaveModel::new(self.grid()?, self.scale_function()?, self.geometry())
    }

    /// Balls around the configured targets; radii are required here.
    pub fn target(&self, grid: Grid, base: &Path) -> Result<ControllabilityTarget> {
        let (Some(rho0), Some(rho1)) = (self.problem.rho0, self.problem.rho1) else {
            return Err(Error::InvalidConfig("problem.rho0 and problem.rho1 are required".into()));
        };
        ControllabilityTarget::new(
            self.target.v0.profile(grid, base)?,
            self.target.v1.profile(grid, base)?,
            rho0,
            rho1,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"scale": {"family": "constant", "params": [1.0]}, "grid": {"nx": 16, "T": 2.0}}"#;

    #[test]
    fn defaults_are_filled() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.solver.tol, 1e-8);
        assert_eq!(cfg.solver.max_iter, 500);
        assert_eq!(cfg.solver.relaxation, 0.5);
        assert_eq!(cfg.v2, FunctionSpec::Zero);
        let g = cfg.grid().unwrap();
        assert!(g.dt() / g.dy() <= 0.9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("\"nx\": 16", "\"nx\": 16, \"ny\": 3");
        assert!(matches!(RunConfig::from_json(&bad), Err(Error::InvalidConfig(_))));
        let bad = r#"{"scale": {"family": "constant", "params": [1.0]}, "grid": {"nx": 16, "T": 2.0},
                     "v2": {"kind": "sine", "k": 1, "phase": 2}}"#;
        assert!(RunConfig::from_json(bad).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        let cfg = RunConfig::from_json(&MINIMAL.replace("[1.0]", "[1.0, 2.0]")).unwrap();
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::from_json(MINIMAL).unwrap();
        cfg.problem.sigma = 0.0;
        assert!(cfg.validate().is_err());
        let cfg = RunConfig::from_json(r#"{"scale": {"family": "linear", "params": [1.0, 1.2]}, "grid": {"nx": 16, "T": 1.0}}"#).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::HyperbolicityViolation(_))));
    }

    #[test]
    fn profiles_vanish_at_the_ends() {
        let g = Grid::new(8, 16, 1.0).unwrap();
        let p = FunctionSpec::Bump { center: 0.0, width: 0.5, amplitude: 2.0 }.profile(g, Path::new(".")).unwrap();
        assert_eq!(p[0], 0.0);
        assert!((p[1] - 2.0 * (std::f64::consts::PI / 8.0).cos().powi(2)).abs() < 1e-14);
    }
}
