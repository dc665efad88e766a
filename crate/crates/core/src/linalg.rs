//! Row-pivoted LU for the small dense systems assembled by the boundary
//! solver, and the infinity-norm condition number.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivots smaller than this fraction of their row's original max-abs entry
/// are treated as zero.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// Explicit inversion is only offered up to this dimension.
pub const MAX_INVERT_DIM: usize = 512;

#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: DMatrix<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn new(matrix: &DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: matrix.ncols(),
            });
        }
        let mut lu = matrix.clone();
        let mut row_scale: Vec<f64> = (0..n)
            .map(|r| lu.row(r).iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect();
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let mut piv = k;
            let mut best = lu[(k, k)].abs();
            for r in k + 1..n {
                let v = lu[(r, k)].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if !(best > PIVOT_TOLERANCE * row_scale[piv]) || !best.is_finite() {
                return Err(Error::SingularSystem {
                    column: k,
                    pivot: best,
                });
            }
            if piv != k {
                lu.swap_rows(k, piv);
                perm.swap(k, piv);
                row_scale.swap(k, piv);
            }
            let pivot = lu[(k, k)];
            for r in k + 1..n {
                let factor = lu[(r, k)] / pivot;
                lu[(r, k)] = factor;
                if factor != 0.0 {
                    for c in k + 1..n {
                        let upd = factor * lu[(k, c)];
                        lu[(r, c)] -= upd;
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: rhs.len(),
            });
        }
        let mut x = DVector::from_iterator(n, self.perm.iter().map(|&p| rhs[p]));
        for r in 0..n {
            let mut s = x[r];
            for c in 0..r {
                s -= self.lu[(r, c)] * x[c];
            }
            x[r] = s;
        }
        for r in (0..n).rev() {
            let mut s = x[r];
            for c in r + 1..n {
                s -= self.lu[(r, c)] * x[c];
            }
            x[r] = s / self.lu[(r, r)];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if n > MAX_INVERT_DIM {
            return Err(Error::MatrixTooLarge(n));
        }
        let mut inv = DMatrix::zeros(n, n);
        let mut e = DVector::zeros(n);
        for c in 0..n {
            e.fill(0.0);
            e[c] = 1.0;
            inv.set_column(c, &self.solve(&e)?);
        }
        Ok(inv)
    }
}

pub fn solve(matrix: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    LuFactors::new(matrix)?.solve(rhs)
}

/// Maximum absolute row sum.
pub fn norm_inf(matrix: &DMatrix<f64>) -> f64 {
    matrix
        .row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    pub norm_inf: f64,
    pub norm_inv_inf: f64,
    pub condition: f64,
}

/// `‖A‖∞ · ‖A⁻¹‖∞` with the inverse formed explicitly.
pub fn condition_inf(matrix: &DMatrix<f64>) -> Result<ConditionReport> {
    if matrix.nrows() > MAX_INVERT_DIM {
        return Err(Error::MatrixTooLarge(matrix.nrows()));
    }
    let inv = LuFactors::new(matrix)?.inverse()?;
    let norm = norm_inf(matrix);
    let norm_inv = norm_inf(&inv);
    Ok(ConditionReport {
        norm_inf: norm,
        norm_inv_inf: norm_inv,
        condition: norm * norm_inv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_and_diagonal() {
        for n in [1, 3, 17] {
            let r = condition_inf(&DMatrix::identity(n, n)).unwrap();
            assert_eq!(r.condition, 1.0);
        }
        let r = condition_inf(&DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(r.norm_inf, 2.0);
        assert_eq!(r.norm_inv_inf, 1.0);
        assert_eq!(r.condition, 2.0);
    }

    #[test]
    fn near_singular_two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.99, 0.99, 1.0]);
        // [[a, b], [b, a]]^-1 = [[a, -b], [-b, a]] / (a^2 - b^2)
        let det = 1.0 - 0.99 * 0.99;
        let inv_norm = (1.0 + 0.99) / det;
        let expected = 1.99 * inv_norm;
        let r = condition_inf(&a).unwrap();
        assert_relative_eq!(r.condition, expected, max_relative = 1e-12);
        assert_relative_eq!(r.condition, 199.0, max_relative = 1e-9);
    }

    #[test]
    fn solves_with_pivoting() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0]);
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let b = &a * &x;
        let got = solve(&a, &b).unwrap();
        for i in 0..3 {
            assert_relative_eq!(got[i], x[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(LuFactors::new(&a), Err(Error::SingularSystem { .. })));
        assert!(condition_inf(&DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn refuses_oversized_inversion() {
        let big = DMatrix::<f64>::identity(MAX_INVERT_DIM + 1, MAX_INVERT_DIM + 1);
        assert!(matches!(condition_inf(&big), Err(Error::MatrixTooLarge(_))));
    }
}
