use crate::discretization::tridiag::solve_tridiagonal;
use crate::{Error, Result};

/// Clamped cubic spline through `(t_i, k_i)` with end slopes taken from the
/// supplied derivative samples. Second derivative is continuous.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledScale {
    times: Vec<f64>,
    values: Vec<f64>,
    derivatives: Vec<f64>,
    // second derivatives at the knots
    moments: Vec<f64>,
}

/// Relative tolerance between derivative samples and central differences.
pub const DERIVATIVE_CONSISTENCY_TOL: f64 = 1e-6;

impl SampledScale {
    pub fn new(times: Vec<f64>, values: Vec<f64>, derivatives: Vec<f64>) -> Result<Self> {
        let n = times.len();
        if n < 3 || values.len() != n || derivatives.len() != n {
            return Err(Error::InvalidConfig(
                "custom-sampled scale needs >= 3 samples of equal length".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig("sample times must increase strictly".into()));
        }
        if values.iter().chain(&derivatives).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite scale sample".into()));
        }
        let dmax = derivatives.iter().fold(0.0f64, |m, d| m.max(d.abs())).max(1e-9);
        for i in 1..n - 1 {
            let fd = (values[i + 1] - values[i - 1]) / (times[i + 1] - times[i - 1]);
            if (fd - derivatives[i]).abs() > DERIVATIVE_CONSISTENCY_TOL * dmax {
                return Err(Error::InvalidConfig(format!(
                    "derivative sample {i} ({}) inconsistent with finite difference ({fd})",
                    derivatives[i]
                )));
            }
        }
        let moments = clamped_moments(&times, &values, derivatives[0], derivatives[n - 1])?;
        Ok(Self {
            times,
            values,
            derivatives,
            moments,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.derivatives
    }

    fn locate(&self, t: f64) -> usize {
        let n = self.times.len();
        match self.times.partition_point(|&x| x <= t) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    /// Returns `(k, k', k'')` at `t`; linear extension of the end cubic outside the knots.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let i = self.locate(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.moments[i], self.moments[i + 1]);
        let a = (t1 - t) / h;
        let b = (t - t0) / h;
        let value = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let slope = (y1 - y0) / h + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let curvature = a * m0 + b * m1;
        (value, slope, curvature)
    }
}

fn clamped_moments(t: &[f64], y: &[f64], d0: f64, dn: f64) -> Result<Vec<f64>> {
    let n = t.len();
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let mut lo = vec![0.0; n];
    let mut di = vec![0.0; n];
    let mut up = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    di[0] = h[0] / 3.0;
    up[0] = h[0] / 6.0;
    rhs[0] = (y[1] - y[0]) / h[0] - d0;
    for i in 1..n - 1 {
        lo[i] = h[i - 1] / 6.0;
        di[i] = (h[i - 1] + h[i]) / 3.0;
        up[i] = h[i] / 6.0;
        rhs[i] = (y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1];
    }
    lo[n - 1] = h[n - 2] / 6.0;
    di[n - 1] = h[n - 2] / 3.0;
    rhs[n - 1] = dn - (y[n - 1] - y[n - 2]) / h[n - 2];
    solve_tridiagonal(&lo, &di, &up, &rhs).ok_or_else(|| Error::InvalidConfig("degenerate spline".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sampled_sine(count: usize) -> SampledScale {
        let ts: Vec<f64> = (0..count).map(|i| 3.0 * i as f64 / (count - 1) as f64).collect();
        let ks = ts.iter().map(|t| 1.0 + 0.1 * t.sin()).collect();
        let ds = ts.iter().map(|t| 0.1 * t.cos()).collect();
        SampledScale::new(ts, ks, ds).unwrap()
    }

    #[test]
    fn spline_reproduces_smooth_scale() {
        let s = sampled_sine(2001);
        for &t in &[0.0, 0.37, 1.5, 2.999, 3.0] {
            let (k, dk, ddk) = s.eval(t);
            assert!((k - (1.0 + 0.1 * f64::sin(t))).abs() < 1e-10);
            assert!((dk - 0.1 * f64::cos(t)).abs() < 1e-7);
            assert!((ddk + 0.1 * f64::sin(t)).abs() < 1e-4);
        }
    }

    #[test]
    fn rejects_inconsistent_derivatives() {
        let ts = vec![0.0, 0.5, 1.0, 1.5];
        let ks = vec![1.0, 1.05, 1.1, 1.15];
        let ds = vec![0.1, 0.2, 0.1, 0.1];
        assert!(SampledScale::new(ts, ks, ds).is_err());
    }

    #[test]
    fn second_derivative_is_continuous_at_knots() {
        let s = sampled_sine(1501);
        let knot = s.times()[500];
        let left = s.eval(knot - 1e-12).2;
        let right = s.eval(knot + 1e-12).2;
        assert!((left - right).abs() < 1e-8);
    }
}
