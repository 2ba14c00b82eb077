//! Scalar quadrature helpers: trapezoid sums on grids and adaptive Simpson.

/// Trapezoid rule over node values `ys` at abscissae `xs`.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let mut acc = 0.0;
    for k in 1..xs.len() {
        acc += 0.5 * (ys[k] + ys[k - 1]) * (xs[k] - xs[k - 1]);
    }
    acc
}

/// Running trapezoid integral; entry `k` is the integral up to `xs[k]`.
pub fn trapezoid_running(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; xs.len()];
    for k in 1..xs.len() {
        out[k] = out[k - 1] + 0.5 * (ys[k] + ys[k - 1]) * (xs[k] - xs[k - 1]);
    }
    out
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || !delta.is_finite() {
        left + right + delta / 15.0
    } else {
        adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Adaptive Simpson quadrature of a smooth integrand on `[a, b]`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive_step(&f, a, b, fa, fm, fb, whole, tol, 24)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn simpson_matches_closed_forms() {
        let v = adaptive_simpson(|x| x * x, 0.0, 1.0, 1e-12);
        assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-10);
        let v = adaptive_simpson(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn trapezoid_running_is_consistent() {
        let xs: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let run = trapezoid_running(&xs, &ys);
        assert_abs_diff_eq!(run[100], trapezoid(&xs, &ys), epsilon = 1e-14);
        assert_abs_diff_eq!(run[100], std::f64::consts::E - 1.0, epsilon = 1e-4);
    }
}
