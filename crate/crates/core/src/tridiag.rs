//! Tridiagonal matrices and a partially pivoted direct solver.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("tridiagonal system is singular at row {row}")]
pub struct SingularMatrix {
    pub row: usize,
}

/// Square tridiagonal matrix stored by diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    /// Sub-diagonal, `lower[i] = A[i + 1][i]`.
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    /// Super-diagonal, `upper[i] = A[i][i + 1]`.
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n.saturating_sub(1)],
            diag: vec![0.0; n],
            upper: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Entry `(row, col)`, zero outside the band.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        if row == col {
            self.diag[row]
        } else if row + 1 == col {
            self.upper[row]
        } else if col + 1 == row {
            self.lower[col]
        } else {
            0.0
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * x[i];
                if i > 0 {
                    acc += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    acc += self.upper[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }

    /// Solves `A x = rhs` by Gaussian elimination with partial pivoting
    /// (the LAPACK `gtsv` scheme, one extra super-diagonal of fill-in).
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SingularMatrix> {
        let n = self.dim();
        assert_eq!(rhs.len(), n, "right-hand side length mismatch");
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut d = self.diag.clone();
        let mut du = self.upper.clone();
        let mut dl = self.lower.clone();
        let mut fill = vec![0.0; n.saturating_sub(2)];
        let mut b = rhs.to_vec();
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    return Err(SingularMatrix { row: i });
                }
                let fact = dl[i] / d[i];
                d[i + 1] -= fact * du[i];
                b[i + 1] -= fact * b[i];
            } else {
                // swap rows i and i + 1
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                let tmp = d[i + 1];
                d[i + 1] = du[i] - fact * tmp;
                if i + 2 < n {
                    fill[i] = du[i + 1];
                    du[i + 1] = -fact * fill[i];
                }
                du[i] = tmp;
                let tb = b[i];
                b[i] = b[i + 1];
                b[i + 1] = tb - fact * b[i + 1];
            }
            dl[i] = 0.0;
        }
        if d[n - 1] == 0.0 || !d[n - 1].is_finite() {
            return Err(SingularMatrix { row: n - 1 });
        }
        b[n - 1] /= d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - du[i] * b[i + 1] - fill[i] * b[i + 2]) / d[i];
        }
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Dense Gaussian elimination with partial pivoting.
    fn dense_solve(a: &Tridiagonal, rhs: &[f64]) -> Vec<f64> {
        let n = a.dim();
        let mut m: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row: Vec<f64> = (0..n).map(|j| a.get(i, j)).collect();
                row.push(rhs[i]);
                row
            })
            .collect();
        for col in 0..n {
            let pivot = (col..n).max_by(|&p, &q| m[p][col].abs().total_cmp(&m[q][col].abs())).unwrap();
            m.swap(col, pivot);
            for row in col + 1..n {
                let f = m[row][col] / m[col][col];
                for k in col..=n {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
            x[i] = (m[i][n] - s) / m[i][i];
        }
        x
    }

    #[test]
    fn requires_pivoting() {
        // zero leading diagonal entry
        let a = Tridiagonal {
            lower: vec![1.0, 2.0],
            diag: vec![0.0, 1.0, 3.0],
            upper: vec![2.0, 1.0],
        };
        let x = a.solve(&[2.0, 3.0, 7.0]).unwrap();
        let back = a.mul_vec(&x);
        for (u, v) in back.iter().zip([2.0, 3.0, 7.0]) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = Tridiagonal {
            lower: vec![1.0],
            diag: vec![1.0, 1.0],
            upper: vec![1.0],
        };
        assert!(a.solve(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn scalar_system() {
        let a = Tridiagonal {
            lower: vec![],
            diag: vec![4.0],
            upper: vec![],
        };
        assert_eq!(a.solve(&[2.0]).unwrap(), vec![0.5]);
    }

    proptest! {
        #[test]
        fn matches_dense_elimination(
            n in 1usize..12,
            seed in proptest::collection::vec(-1.0f64..1.0, 36..=36),
        ) {
            let a = Tridiagonal {
                lower: seed[..n - 1].to_vec(),
                diag: seed[12..12 + n].iter().map(|v| v + 3.0 * v.signum()).collect(),
                upper: seed[24..24 + n - 1].to_vec(),
            };
            let rhs: Vec<f64> = (0..n).map(|i| seed[(i * 7) % 36]).collect();
            let x = a.solve(&rhs).unwrap();
            let y = dense_solve(&a, &rhs);
            for (u, v) in x.iter().zip(&y) {
                prop_assert!((u - v).abs() <= 1e-10 * (1.0 + v.abs()));
            }
        }
    }
}
