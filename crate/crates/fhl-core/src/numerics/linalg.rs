//! Dense symmetric factorization for covariance sampling.

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    /// Row-major lower triangle, full n*n storage.
    l: Vec<f64>,
}

impl Cholesky {
    /// Factorizes `a` (row-major, n*n, symmetric). Fails if a pivot drops
    /// below `1e-12` times the largest diagonal entry.
    pub fn new(a: &[f64], n: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0f64, f64::max);
        let floor = 1e-12 * scale.max(f64::MIN_POSITIVE);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= floor {
                        return Err(Error::InvalidGrid(format!(
                            "covariance factorization failed at pivot {i} (value {s:e})"
                        )));
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `y = L x`, turning i.i.d. standard normals into correlated draws.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let row = &self.l[i * self.n..i * self.n + i + 1];
            let mut s = 0.0;
            for (k, &lk) in row.iter().enumerate() {
                s += lk * x[k];
            }
            y[i] = s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn factors_spd_matrix() {
        // A = [[4, 2], [2, 3]] => L = [[2, 0], [1, sqrt(2)]]
        let c = Cholesky::new(&[4.0, 2.0, 2.0, 3.0], 2).unwrap();
        assert_abs_diff_eq!(c.l[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.l[2], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.l[3], 2.0f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn rejects_singular_matrix() {
        // rank-1 matrix
        let err = Cholesky::new(&[1.0, 1.0, 1.0, 1.0], 2).unwrap_err();
        assert!(matches!(err, Error::InvalidGrid(_)));
    }
}
