//! Modified Cholesky factor `(L, D)` with `Omega = L D^-1 L^T`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Unit lower triangular factor `L` together with the positive diagonal `D`
/// of the decomposition `Omega = L D^-1 L^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    l: DMatrix<f64>,
    diag_d: DVector<f64>,
}

impl CholeskyFactor {
    /// Validate and wrap `(L, D)`. `L` must be square unit lower triangular
    /// and every entry of `D` strictly positive.
    pub fn new(l: DMatrix<f64>, diag_d: DVector<f64>) -> Result<Self> {
        let p = l.nrows();
        if l.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: l.ncols(),
            });
        }
        if diag_d.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: diag_d.len(),
            });
        }
        for j in 0..p {
            if l[(j, j)] != 1.0 {
                return Err(Error::InvalidPattern(alloc::format!(
                    "diagonal entry ({j}, {j}) of L is {v}, expected exactly 1",
                    v = l[(j, j)]
                )));
            }
            for k in 0..j {
                if l[(k, j)] != 0.0 {
                    return Err(Error::InvalidPattern(alloc::format!(
                        "entry ({k}, {j}) above the diagonal of L is nonzero"
                    )));
                }
            }
            if !(diag_d[j] > 0.0) {
                return Err(Error::NotPositiveDefinite(alloc::format!(
                    "diagonal d[{j}] = {v} is not positive",
                    v = diag_d[j]
                )));
            }
        }
        Ok(CholeskyFactor { l, diag_d })
    }

    /// Identity factor: `L = I`, `D = I`.
    pub fn identity(p: usize) -> Self {
        CholeskyFactor {
            l: DMatrix::identity(p, p),
            diag_d: DVector::from_element(p, 1.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.l[(row, col)]
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn diag_d(&self) -> &DVector<f64> {
        &self.diag_d
    }

    /// True when `D` is exactly the identity.
    pub fn has_unit_diag(&self) -> bool {
        self.diag_d.iter().all(|&d| d == 1.0)
    }

    /// Reassemble `L D^-1 L^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let p = self.dim();
        let mut scaled = self.l.clone();
        for j in 0..p {
            let inv = 1.0 / self.diag_d[j];
            for k in j..p {
                scaled[(k, j)] *= inv;
            }
        }
        &scaled * self.l.transpose()
    }
}
