//! Discrete norms on `Omega = (0,1)` for nodal vectors with zero end values.

use super::field::BoundaryControl;
use super::tridiag::solve_tridiagonal;
use crate::{Error, Result};

const END_TOL: f64 = 1e-12;

fn dy_of(v: &[f64]) -> f64 {
    1.0 / (v.len() - 1) as f64
}

fn check_ends(v: &[f64]) -> Result<()> {
    let (l, r) = (v[0], v[v.len() - 1]);
    if l.abs() > END_TOL || r.abs() > END_TOL {
        return Err(Error::NonhomogeneousBoundary { left: l, right: r });
    }
    Ok(())
}

/// `dy * sum_{interior} u v`
pub fn inner_l2_omega(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len() - 1;
    dy_of(u) * (1..n).map(|j| u[j] * v[j]).sum::<f64>()
}

pub fn norm_l2_omega(v: &[f64]) -> f64 {
    inner_l2_omega(v, v).sqrt()
}

/// `⟨D⁺u, D⁺v⟩` over all cells.
pub fn inner_h01_omega(u: &[f64], v: &[f64]) -> f64 {
    let dy = dy_of(u);
    u.windows(2)
        .zip(v.windows(2))
        .map(|(a, b)| (a[1] - a[0]) * (b[1] - b[0]))
        .sum::<f64>()
        / dy
}

/// Gradient seminorm; the vector must vanish at both ends.
pub fn norm_h01_omega(v: &[f64]) -> Result<f64> {
    check_ends(v)?;
    Ok(inner_h01_omega(v, v).sqrt())
}

/// Solves `-D² f = l` with `f = 0` at the ends. This is the H¹₀ Riesz map of
/// the functional `g -> ⟨l, g⟩_{L²}`.
pub fn riesz_h01(l: &[f64]) -> Vec<f64> {
    let n = l.len() - 1;
    let dy = dy_of(l);
    let m = n - 1;
    let off = vec![-1.0 / (dy * dy); m];
    let di = vec![2.0 / (dy * dy); m];
    let mut out = vec![0.0; n + 1];
    let z = solve_tridiagonal(&off, &di, &off, &l[1..n]).expect("discrete Laplacian is SPD");
    out[1..n].copy_from_slice(&z);
    out
}

/// Dual norm of H¹₀: `sqrt(⟨v, (-D²)^{-1} v⟩)`.
pub fn norm_hm1_omega(v: &[f64]) -> Result<f64> {
    check_ends(v)?;
    let z = riesz_h01(v);
    Ok(inner_l2_omega(v, &z).max(0.0).sqrt())
}

/// `sqrt(dt sum w²)` over both sides.
pub fn norm_l2_sigma(control: &BoundaryControl) -> f64 {
    control.norm()
}
