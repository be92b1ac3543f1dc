//! Dense linear algebra kernels shared by decoder construction and the
//! projection-based evaluation metrics.
//!
//! Everything here works on row-major `&[f64]` buffers. Sizes stay small
//! (decoder builds solve kernel_size x kernel_size systems, evaluation
//! solves (J * filter_len) square systems), so a partial-pivot LU without
//! blocking is fast enough and keeps the crate allocation-only.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::CoreError;

/// LU factorization with partial pivoting, stored in-place.
///
/// `lu` holds L (unit diagonal, below) and U (on and above the diagonal);
/// `perm[i]` is the original row index that ended up in row `i`.
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    /// Factors a dense row-major `n x n` matrix.
    ///
    /// Fails with `SingularSystem` when a pivot column is exactly zero,
    /// which for the callers here means the inputs were degenerate
    /// (e.g. linearly dependent reference signals).
    pub fn new(a: &[f64], n: usize) -> Result<Self, CoreError> {
        if n == 0 {
            return Err(CoreError::EmptyInput(format!("cannot factor a 0 x 0 system")));
        }
        if a.len() != n * n {
            return Err(CoreError::ShapeMismatch(format!(
                "matrix buffer holds {} entries, expected {} for n = {}",
                a.len(),
                n * n,
                n
            )));
        }
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_mag = lu[col * n + col].abs();
            for row in (col + 1)..n {
                let mag = lu[row * n + col].abs();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = row;
                }
            }
            if pivot_mag == 0.0 {
                return Err(CoreError::SingularSystem(format!(
                    "zero pivot in column {col} of a {n} x {n} system"
                )));
            }
            if pivot_row != col {
                for k in 0..n {
                    lu.swap(col * n + k, pivot_row * n + k);
                }
                perm.swap(col, pivot_row);
            }
            let pivot = lu[col * n + col];
            for row in (col + 1)..n {
                let factor = lu[row * n + col] / pivot;
                lu[row * n + col] = factor;
                for k in (col + 1)..n {
                    lu[row * n + k] -= factor * lu[col * n + k];
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    /// Solves `A x = b` for one right-hand side.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, CoreError> {
        let n = self.n;
        if b.len() != n {
            return Err(CoreError::ShapeMismatch(format!(
                "right-hand side has {} entries, expected {}",
                b.len(),
                n
            )));
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[i] = b[self.perm[i]];
        }
        for i in 0..n {
            for k in 0..i {
                x[i] = x[i] - self.lu[i * n + k] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] = x[i] - self.lu[i * n + k] * x[k];
            }
            x[i] /= self.lu[i * n + i];
        }
        Ok(x)
    }

    /// Solves `A X = B` for a row-major `n x m` right-hand side block.
    pub fn solve_block(&self, b: &[f64], m: usize) -> Result<Vec<f64>, CoreError> {
        let n = self.n;
        if b.len() != n * m {
            return Err(CoreError::ShapeMismatch(format!(
                "right-hand block holds {} entries, expected {} for {} columns",
                b.len(),
                n * m,
                m
            )));
        }
        let mut out = vec![0.0; n * m];
        let mut col = vec![0.0; n];
        for j in 0..m {
            for i in 0..n {
                col[i] = b[i * m + j];
            }
            let x = self.solve(&col)?;
            for i in 0..n {
                out[i * m + j] = x[i];
            }
        }
        Ok(out)
    }
}

/// Row-major matrix product `C = A B` with `A` of shape `n x k` and `B` of
/// shape `k x m`.
pub fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), k * m);
    let mut c = vec![0.0; n * m];
    for i in 0..n {
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * m..(p + 1) * m];
            let crow = &mut c[i * m..(i + 1) * m];
            for j in 0..m {
                crow[j] += aip * brow[j];
            }
        }
    }
    c
}
