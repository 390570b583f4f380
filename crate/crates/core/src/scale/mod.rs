//! The scaling function `k(t)`, the boundary geometry and the coefficients of
//! the cylinder operators `L` and `L*` obtained from `y = x / k(t)`.

mod geometry;
mod spline;

pub use geometry::{BoundaryPart, CouplingMode, Geometry, Segment, Side, Window};
pub use spline::{SampledScale, DERIVATIVE_CONSISTENCY_TOL};

use crate::discretization::SpaceTimeField;
use crate::{Error, Result};

/// Number of uniformly spaced probes used when validating `k` on `[0, T]`.
const VALIDATION_SAMPLES: usize = 4001;

#[derive(Debug, Clone, PartialEq)]
pub enum ScaleFamily {
    Constant { value: f64 },
    /// `k(t) = offset + slope * t`
    Linear { offset: f64, slope: f64 },
    /// `k(t) = offset + amplitude * sin(frequency * t)`
    Sinusoidal {
        amplitude: f64,
        frequency: f64,
        offset: f64,
    },
    Sampled(SampledScale),
}

/// Domain scaling `k(t)` together with `k'` and `k''`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleFunction {
    family: ScaleFamily,
}

impl ScaleFunction {
    /// Builds the scale function and checks `k > 0` and `sup |k'| < 1` on `[0, horizon]`.
    pub fn new(family: ScaleFamily, horizon: f64) -> Result<Self> {
        let scale = Self { family };
        scale.validate(horizon)?;
        Ok(scale)
    }

    /// Builds from the config form `{family, params}`.
    pub fn from_params(family: &str, params: &[f64], horizon: f64) -> Result<Self> {
        let want = |n: usize| -> Result<()> {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "scale family {family} takes {n} params, got {}",
                    params.len()
                )))
            }
        };
        let family = match family {
            "constant" => {
                want(1)?;
                ScaleFamily::Constant { value: params[0] }
            }
            "linear" => {
                want(2)?;
                ScaleFamily::Linear {
                    offset: params[0],
                    slope: params[1],
                }
            }
            "sinusoidal" => {
                want(3)?;
                ScaleFamily::Sinusoidal {
                    amplitude: params[0],
                    frequency: params[1],
                    offset: params[2],
                }
            }
            other => return Err(Error::InvalidConfig(format!("unknown scale family {other}"))),
        };
        Self::new(family, horizon)
    }

    pub fn constant(value: f64) -> Self {
        Self {
            family: ScaleFamily::Constant { value },
        }
    }

    pub fn linear(offset: f64, slope: f64) -> Self {
        Self {
            family: ScaleFamily::Linear { offset, slope },
        }
    }

    pub fn sinusoidal(amplitude: f64, frequency: f64, offset: f64) -> Self {
        Self {
            family: ScaleFamily::Sinusoidal {
                amplitude,
                frequency,
                offset,
            },
        }
    }

    pub fn sampled(samples: SampledScale) -> Self {
        Self {
            family: ScaleFamily::Sampled(samples),
        }
    }

    pub fn family(&self) -> &ScaleFamily {
        &self.family
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidConfig(format!("horizon must be positive, got {horizon}")));
        }
        let mut sup = 0.0f64;
        for i in 0..VALIDATION_SAMPLES {
            let t = horizon * i as f64 / (VALIDATION_SAMPLES - 1) as f64;
            let (k, dk, ddk) = self.eval(t);
            if !(k > 0.0) || !k.is_finite() || !dk.is_finite() || !ddk.is_finite() {
                return Err(Error::HyperbolicityViolation(format!("k({t}) = {k} is not positive")));
            }
            sup = sup.max(dk.abs());
        }
        if sup >= 1.0 {
            return Err(Error::HyperbolicityViolation(format!(
                "sup |k'| = {sup} >= 1 on [0, {horizon}]"
            )));
        }
        Ok(())
    }

    /// `(k(t), k'(t), k''(t))`
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        match &self.family {
            ScaleFamily::Constant { value } => (*value, 0.0, 0.0),
            ScaleFamily::Linear { offset, slope } => (offset + slope * t, *slope, 0.0),
            ScaleFamily::Sinusoidal {
                amplitude,
                frequency,
                offset,
            } => {
                let (s, c) = (frequency * t).sin_cos();
                (
                    offset + amplitude * s,
                    amplitude * frequency * c,
                    -amplitude * frequency * frequency * s,
                )
            }
            ScaleFamily::Sampled(s) => s.eval(t),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.eval(t).1
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        self.eval(t).2
    }

    /// Sampled `sup |k'|` on `[0, horizon]`.
    pub fn sup_abs_derivative(&self, horizon: f64) -> f64 {
        (0..VALIDATION_SAMPLES)
            .map(|i| self.derivative(horizon * i as f64 / (VALIDATION_SAMPLES - 1) as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Coercivity constant `1 - sup |k'|^2` of `a` on the unit interval (times `k^-2`).
    pub fn coercivity(&self, horizon: f64) -> f64 {
        1.0 - self.sup_abs_derivative(horizon).powi(2)
    }
}

/// Coefficients of `L v = -(a v_y)_y + b v'_y + c v_y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Coefficients of the formal adjoint
/// `L* p = -(a p_y)_y + mixed p'_y + velocity p' + gradient p_y + zeroth p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjointCoefficients {
    pub a: f64,
    pub mixed: f64,
    pub velocity: f64,
    pub gradient: f64,
    pub zeroth: f64,
}

fn check_hyperbolic(a: f64, y: f64, t: f64) -> Result<()> {
    if a > 0.0 {
        Ok(())
    } else {
        Err(Error::HyperbolicityViolation(format!("a({y}, {t}) = {a} <= 0")))
    }
}

pub fn eval_coefficients(k: &ScaleFunction, y: f64, t: f64, n: u32) -> Result<Coefficients> {
    let (kv, dk, ddk) = k.eval(t);
    let n = n as f64;
    let k2 = kv * kv;
    let a = (1.0 - dk * dk * y * y) / k2;
    check_hyperbolic(a, y, t)?;
    Ok(Coefficients {
        a,
        b: -2.0 * dk * y / kv,
        c: ((1.0 - n) * dk * dk - ddk * kv) * y / k2,
    })
}

pub fn eval_adjoint_coefficients(
    k: &ScaleFunction,
    y: f64,
    t: f64,
    n: u32,
) -> Result<AdjointCoefficients> {
    let (kv, dk, ddk) = k.eval(t);
    let n = n as f64;
    let k2 = kv * kv;
    let a = (1.0 - dk * dk * y * y) / k2;
    check_hyperbolic(a, y, t)?;
    Ok(AdjointCoefficients {
        a,
        mixed: -2.0 * dk * y / kv,
        velocity: -2.0 * n * dk / kv,
        gradient: ((n + 1.0) * dk * dk - ddk * kv) * y / k2,
        zeroth: (n * (n + 1.0) * dk * dk - n * ddk * kv) / k2,
    })
}

/// Time condition `T > 2 d(Omega, Gamma0)` for the unit interval.
pub fn holmgren_time_ok(horizon: f64, geometry: &Geometry) -> bool {
    horizon > 2.0 * geometry.observation_distance()
}

/// Samples `u(x, t_m) = v(x / k(t_m), t_m)` with linear interpolation in `y`.
pub fn pull_back_state(
    field: &SpaceTimeField,
    k: &ScaleFunction,
    level: usize,
    xs: &[f64],
) -> Result<Vec<f64>> {
    let grid = field.grid();
    if level > grid.nt {
        return Err(Error::Shape(format!("time level {level} beyond nt = {}", grid.nt)));
    }
    let kt = k.value(grid.t(level));
    let row = field.level(level);
    xs.iter()
        .map(|&x| {
            if !(0.0..=kt).contains(&x) {
                return Err(Error::OutOfDomain { x, k: kt });
            }
            let s = (x / kt) * grid.nx as f64;
            let j = (s.floor() as usize).min(grid.nx - 1);
            let w = s - j as f64;
            Ok((1.0 - w) * row[j] + w * row[j + 1])
        })
        .collect()
}
