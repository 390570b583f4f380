//! Thomas algorithm for tridiagonal systems.

/// Solves `lo[i] x[i-1] + di[i] x[i] + up[i] x[i+1] = rhs[i]`.
/// `lo[0]` and `up[n-1]` are ignored. Returns `None` on a vanishing pivot.
pub fn solve_tridiagonal(lo: &[f64], di: &[f64], up: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = di.len();
    let mut x = rhs.to_vec();
    let mut c = vec![0.0; n];
    solve_in_place(lo, di, up, &mut x, &mut c).then_some(x)
}

/// In-place variant; `scratch` must have the same length as `di`.
pub(crate) fn solve_in_place(
    lo: &[f64],
    di: &[f64],
    up: &[f64],
    x: &mut [f64],
    scratch: &mut [f64],
) -> bool {
    let n = di.len();
    if n == 0 {
        return true;
    }
    let scale = di.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tiny = 1e-14 * scale;
    let mut piv = di[0];
    if !(piv.abs() > tiny) || !piv.is_finite() {
        return false;
    }
    scratch[0] = if n > 1 { up[0] / piv } else { 0.0 };
    x[0] /= piv;
    for i in 1..n {
        piv = di[i] - lo[i] * scratch[i - 1];
        if !(piv.abs() > tiny) || !piv.is_finite() {
            return false;
        }
        scratch[i] = if i + 1 < n { up[i] / piv } else { 0.0 };
        x[i] = (x[i] - lo[i] * x[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        x[i] -= scratch[i] * x[i + 1];
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let lo = [0.0, -1.0, -1.0, -1.0];
        let di = [2.0, 2.0, 2.0, 2.0];
        let up = [-1.0, -1.0, -1.0, 0.0];
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let rhs: Vec<f64> = (0..4)
            .map(|i| {
                let mut r = di[i] * x_true[i];
                if i > 0 {
                    r += lo[i] * x_true[i - 1];
                }
                if i < 3 {
                    r += up[i] * x_true[i + 1];
                }
                r
            })
            .collect();
        let x = solve_tridiagonal(&lo, &di, &up, &rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn detects_singular_pivot() {
        assert!(solve_tridiagonal(&[0.0, 1.0], &[1.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]).is_none());
    }
}
