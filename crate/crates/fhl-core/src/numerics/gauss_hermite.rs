//! Gauss-Hermite quadrature for expectations of Gaussian functionals.
//!
//! Nodes are the roots of the physicists' Hermite polynomial, found by
//! Newton iteration on the orthonormal three-term recurrence.

/// Nodes and weights of the `n`-point Gauss-Hermite rule
/// (weight function `exp(-x^2)` on the whole line).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        // Standard initial guesses, largest root first.
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut dp = 0.0;
        for _ in 0..200 {
            // Orthonormal Hermite recurrence: p_{j+1} = x sqrt(2/(j+1)) p_j - sqrt(j/(j+1)) p_{j-1}.
            let mut p0 = std::f64::consts::PI.powf(-0.25);
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                let jf = j as f64;
                p0 = z * (2.0 / (jf + 1.0)).sqrt() * p1 - (jf / (jf + 1.0)).sqrt() * p2;
            }
            dp = (2.0 * nf).sqrt() * p1;
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (dp * dp);
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

/// `E[f(Z)]` for `Z ~ N(mean, var)` by an `n`-point Gauss-Hermite rule.
pub fn gaussian_expectation(mean: f64, var: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    assert!(var >= 0.0);
    if var == 0.0 {
        return f(mean);
    }
    let (nodes, weights) = gauss_hermite(n);
    let scale = (2.0 * var).sqrt();
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        acc += w * f(mean + scale * x);
    }
    acc / std::f64::consts::PI.sqrt()
}
