//! Sample statistics, Schur-complement conditional variances, submatrix
//! log-determinants, the modified Cholesky decomposition, and Gaussian
//! sampling.
//!
//! Every scoring quantity is built from the augmented covariance
//! `S~ = S + I / (n tau^2)`, which is positive definite whenever the
//! sample covariance `S` is positive semidefinite.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::factor::CholeskyFactor;
use crate::math;

/// Conditional variances at or below this value are treated as a
/// conditioning failure instead of being propagated into logarithms.
pub const VARIANCE_FLOOR: f64 = 1e-300;

/// Sample size, dimension, sample covariance `S`, and augmented covariance
/// `S~ = S + I / (n tau^2)`.
///
/// Immutable after construction; all operations borrow it, so one instance
/// can be shared freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStats {
    n: usize,
    p: usize,
    tau_sq: f64,
    s: DMatrix<f64>,
    s_tilde: DMatrix<f64>,
}

impl SampleStats {
    /// Statistics of a zero-mean data matrix (`n` rows of dimension `p`):
    /// `S = Y^T Y / n`.
    pub fn from_data(y: &DMatrix<f64>, tau_sq: f64) -> Result<Self> {
        let n = y.nrows();
        let p = y.ncols();
        if n < 1 || p < 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: p,
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("data matrix".into()));
        }
        let mut s = y.tr_mul(y) / (n as f64);
        // Kill last-ulp asymmetry from the matrix product so downstream
        // submatrix extraction is order-independent.
        let st = s.transpose();
        s += st;
        s *= 0.5;
        Self::from_covariance(s, n, tau_sq)
    }

    /// Statistics from a precomputed sample covariance.
    pub fn from_covariance(s: DMatrix<f64>, n: usize, tau_sq: f64) -> Result<Self> {
        let p = s.nrows();
        if s.ncols() != p || p < 2 {
            return Err(Error::DimensionMismatch {
                expected: p.max(2),
                found: s.ncols(),
            });
        }
        if n < 1 {
            return Err(Error::InvalidHyper("sample size must be positive".into()));
        }
        if !(tau_sq > 0.0) || !tau_sq.is_finite() {
            return Err(Error::InvalidHyper(alloc::format!(
                "tau_sq = {tau_sq} must be a positive finite real"
            )));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample covariance".into()));
        }
        let scale = s.iter().fold(1.0f64, |m, &v| m.max(math::abs(v)));
        for i in 0..p {
            for j in 0..i {
                if math::abs(s[(i, j)] - s[(j, i)]) > 1e-12 * scale {
                    return Err(Error::InvalidPattern(alloc::format!(
                        "covariance is asymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let mut s_tilde = s.clone();
        let ridge = 1.0 / (n as f64 * tau_sq);
        for i in 0..p {
            s_tilde[(i, i)] += ridge;
        }
        Ok(SampleStats {
            n,
            p,
            tau_sq,
            s,
            s_tilde,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn tau_sq(&self) -> f64 {
        self.tau_sq
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn s_tilde(&self) -> &DMatrix<f64> {
        &self.s_tilde
    }

    /// Principal submatrix of `S~` on `indices` (strictly increasing).
    pub(crate) fn tilde_principal(&self, indices: &[usize]) -> DMatrix<f64> {
        let m = indices.len();
        DMatrix::from_fn(m, m, |r, c| self.s_tilde[(indices[r], indices[c])])
    }

    /// Column vector `S~[indices, col]`.
    pub(crate) fn tilde_column(&self, indices: &[usize], col: usize) -> DVector<f64> {
        DVector::from_fn(indices.len(), |r, _| self.s_tilde[(indices[r], col)])
    }

    /// Conditional (residual) variance of variable `col` given the
    /// variables in `support`: `S~_jj - v^T (S~_ZZ)^-1 v` with
    /// `v = S~[Z, j]`. Empty support returns `S~_jj`.
    pub fn conditional_variance(&self, col: usize, support: &[usize]) -> Result<f64> {
        Ok(self.column_parts(col, support)?.0)
    }

    /// Conditional variance of `col` given `support` together with the
    /// log-determinant of `S~[support, support]`, from one factorization.
    pub(crate) fn column_parts(&self, col: usize, support: &[usize]) -> Result<(f64, f64)> {
        self.validate_support(col, support)?;
        let base = self.s_tilde[(col, col)];
        let (cv, logdet) = if support.is_empty() {
            (base, 0.0)
        } else {
            let sub = self.tilde_principal(support);
            let v = self.tilde_column(support, col);
            let chol = nalgebra::linalg::Cholesky::new(sub).ok_or_else(|| {
                Error::NotPositiveDefinite(alloc::format!(
                    "support submatrix of column {col} is numerically singular"
                ))
            })?;
            let logdet = 2.0
                * chol
                    .l_dirty()
                    .diagonal()
                    .iter()
                    .map(|&d| math::ln(d))
                    .sum::<f64>();
            (base - v.dot(&chol.solve(&v)), logdet)
        };
        if !cv.is_finite() || cv <= VARIANCE_FLOOR {
            return Err(Error::Conditioning {
                column: col,
                value: cv,
            });
        }
        Ok((cv, logdet))
    }

    /// Log-determinant of the principal submatrix of `S~` on `indices`;
    /// an empty index list yields 0 (empty product).
    pub fn logdet_submatrix(&self, indices: &[usize]) -> Result<f64> {
        if indices.is_empty() {
            return Ok(0.0);
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) || *indices.last().unwrap() >= self.p {
            return Err(Error::InvalidPattern(
                "submatrix indices must be strictly increasing and in range".into(),
            ));
        }
        let sub = self.tilde_principal(indices);
        let chol = nalgebra::linalg::Cholesky::new(sub).ok_or_else(|| {
            Error::NotPositiveDefinite("principal submatrix is not positive definite".into())
        })?;
        Ok(2.0 * chol.l_dirty().diagonal().iter().map(|&d| math::ln(d)).sum::<f64>())
    }

    fn validate_support(&self, col: usize, support: &[usize]) -> Result<()> {
        if col >= self.p {
            return Err(Error::InvalidPattern(alloc::format!(
                "column {col} out of range (p = {})",
                self.p
            )));
        }
        for &k in support {
            if k <= col || k >= self.p {
                return Err(Error::InvalidPattern(alloc::format!(
                    "support row {k} invalid for column {col}"
                )));
            }
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPattern(alloc::format!(
                "support of column {col} is not strictly increasing"
            )));
        }
        Ok(())
    }
}

/// Modified Cholesky decomposition of a symmetric positive definite matrix:
/// `W = L D^-1 L^T` with unit lower triangular `L` and positive diagonal
/// `D`. This is the plain `L Lam L^T` factorization with `D = Lam^-1`.
pub fn modified_cholesky(w: &DMatrix<f64>) -> Result<CholeskyFactor> {
    let p = w.nrows();
    if w.ncols() != p || p == 0 {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: w.ncols(),
        });
    }
    let chol = nalgebra::linalg::Cholesky::new(w.clone())
        .ok_or_else(|| Error::NotPositiveDefinite("modified Cholesky input".into()))?;
    let g = chol.unpack();
    let mut l = DMatrix::zeros(p, p);
    let mut diag_d = DVector::zeros(p);
    for j in 0..p {
        let gjj = g[(j, j)];
        if !(gjj > 0.0) {
            return Err(Error::NotPositiveDefinite(alloc::format!(
                "pivot {j} is not positive"
            )));
        }
        diag_d[j] = 1.0 / (gjj * gjj);
        for k in j..p {
            l[(k, j)] = g[(k, j)] / gjj;
        }
    }
    CholeskyFactor::new(l, diag_d)
}

/// Draw `n` observations with covariance `(L0 L0^T)^-1` by solving
/// `L0^T y = eps` for standard normal `eps`, one row at a time.
///
/// Requires `D = I` on the factor. Normal variates are drawn row by row in
/// column order, so output is reproducible for a given generator state.
pub fn sample_gaussian<R: Rng>(
    l0: &CholeskyFactor,
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if !l0.has_unit_diag() {
        return Err(Error::InvalidPattern(
            "sampling requires a factor with D = I".into(),
        ));
    }
    let p = l0.dim();
    let l = l0.lower();
    let mut out = DMatrix::zeros(n, p);
    let mut eps: Vec<f64> = alloc::vec![0.0; p];
    for i in 0..n {
        for e in eps.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        // Back substitution on the upper triangular L0^T.
        for j in (0..p).rev() {
            let mut v = eps[j];
            for k in j + 1..p {
                let lkj = l[(k, j)];
                if lkj != 0.0 {
                    v -= lkj * out[(i, k)];
                }
            }
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_pd(p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(p, p, |_, _| rng.random::<f64>() - 0.5);
        let mut w = &g * g.transpose() / (p as f64);
        for i in 0..p {
            w[(i, i)] += 0.5;
        }
        w
    }

    #[test]
    fn single_observation_covariance() {
        let mut y = DMatrix::zeros(1, 4);
        y[(0, 0)] = 1.0;
        let st = SampleStats::from_data(&y, 1.0).unwrap();
        assert_eq!(st.s()[(0, 0)], 1.0);
        assert_eq!(st.s()[(1, 1)], 0.0);
        assert_eq!(st.s()[(0, 1)], 0.0);
    }

    #[test]
    fn zero_data_gives_pure_ridge() {
        let y = DMatrix::zeros(5, 3);
        let st = SampleStats::from_data(&y, 2.0).unwrap();
        let ridge = 1.0 / (5.0 * 2.0);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { ridge } else { 0.0 };
                assert_eq!(st.s_tilde()[(i, j)], expect);
            }
        }
    }

    #[test]
    fn augmentation_is_exactly_a_diagonal_shift() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let y = DMatrix::from_fn(20, 6, |_, _| rng.random::<f64>() - 0.5);
        let st = SampleStats::from_data(&y, 3.0).unwrap();
        let ridge = 1.0 / (20.0 * 3.0);
        for i in 0..6 {
            for j in 0..6 {
                let diff = st.s_tilde()[(i, j)] - st.s()[(i, j)];
                let expect = if i == j { ridge } else { 0.0 };
                assert!((diff - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn conditional_variance_identity_and_hand_case() {
        let st = SampleStats::from_covariance(DMatrix::identity(4, 4), 10, 1e12, ).unwrap();
        // S~ is I up to a 1e-13 ridge.
        assert!((st.conditional_variance(0, &[1, 2]).unwrap() - 1.0).abs() < 1e-9);
        assert!((st.conditional_variance(2, &[]).unwrap() - st.s_tilde()[(2, 2)]).abs() == 0.0);

        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        // Large n*tau_sq so S~ ~= S; check the 2x2 Schur complement by hand.
        let st = SampleStats::from_covariance(m, 1_000_000, 1e6).unwrap();
        let cv = st.conditional_variance(0, &[1]).unwrap();
        assert!((cv - 1.5).abs() < 1e-6, "cv = {cv}");
    }

    #[test]
    fn logdet_examples() {
        let st = SampleStats::from_covariance(DMatrix::identity(5, 5), 10, 1e12).unwrap();
        assert!((st.logdet_submatrix(&[1, 3, 4]).unwrap()).abs() < 1e-9);
        assert_eq!(st.logdet_submatrix(&[]).unwrap(), 0.0);

        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let st = SampleStats::from_covariance(m, 1_000_000, 1e6).unwrap();
        assert!((st.logdet_submatrix(&[0, 1]).unwrap() - 3.0f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn determinant_identity_links_schur_and_logdet() {
        for seed in 0..20u64 {
            let p = 8;
            let st = SampleStats::from_covariance(random_pd(p, seed), 50, 2.0).unwrap();
            let col = (seed as usize) % (p - 2);
            let support: Vec<usize> = (col + 1..p).step_by(2).collect();
            let mut with_col = alloc::vec![col];
            with_col.extend_from_slice(&support);
            let lhs = st.logdet_submatrix(&with_col).unwrap();
            let rhs = st.logdet_submatrix(&support).unwrap()
                + st.conditional_variance(col, &support).unwrap().ln();
            assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn conditional_variance_shrinks_with_larger_support() {
        let st = SampleStats::from_covariance(random_pd(7, 99), 40, 1.5).unwrap();
        let mut support: Vec<usize> = Vec::new();
        let mut prev = st.conditional_variance(0, &support).unwrap();
        for k in 1..7 {
            support.push(k);
            let cv = st.conditional_variance(0, &support).unwrap();
            assert!(cv <= prev + 1e-12);
            prev = cv;
        }
    }

    #[test]
    fn conditional_variance_dominates_smallest_eigenvalue() {
        let st = SampleStats::from_covariance(random_pd(6, 7), 30, 1.0).unwrap();
        let eig = st.s_tilde().clone().symmetric_eigen().eigenvalues;
        let min_eig = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let cv = st.conditional_variance(1, &[2, 4, 5]).unwrap();
        assert!(cv >= min_eig - 1e-12);
    }

    #[test]
    fn modified_cholesky_identity_and_hand_case() {
        let f = modified_cholesky(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(f.lower(), &DMatrix::identity(3, 3));
        assert!(f.diag_d().iter().all(|&d| (d - 1.0).abs() < 1e-15));

        let w = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let f = modified_cholesky(&w).unwrap();
        assert!((f.entry(1, 0) - 0.5).abs() < 1e-15);
        assert!((f.diag_d()[0] - 0.5).abs() < 1e-15);
        assert!((f.diag_d()[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn modified_cholesky_round_trips_up_to_p_200() {
        for &(p, seed) in &[(5usize, 1u64), (40, 2), (200, 3)] {
            let w = random_pd(p, seed);
            let f = modified_cholesky(&w).unwrap();
            let back = f.reconstruct();
            let err = (&back - &w).abs().max();
            assert!(err < 1e-10, "p = {p}: max abs error {err}");
        }
    }

    #[test]
    fn modified_cholesky_rejects_indefinite_input() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            modified_cholesky(&w),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn gaussian_sampling_is_deterministic_and_calibrated() {
        let a = sample_gaussian(
            &CholeskyFactor::identity(3),
            8,
            &mut ChaCha12Rng::seed_from_u64(10),
        )
        .unwrap();
        let b = sample_gaussian(
            &CholeskyFactor::identity(3),
            8,
            &mut ChaCha12Rng::seed_from_u64(10),
        )
        .unwrap();
        assert_eq!(a, b);

        // p = 2 with one off-diagonal entry: empirical covariance converges
        // to (L0 L0^T)^-1.
        let mut l = DMatrix::identity(2, 2);
        l[(1, 0)] = 0.5;
        let f = CholeskyFactor::new(l.clone(), nalgebra::DVector::from_element(2, 1.0)).unwrap();
        let n = 100_000;
        let y = sample_gaussian(&f, n, &mut ChaCha12Rng::seed_from_u64(77)).unwrap();
        let emp = y.tr_mul(&y) / (n as f64);
        let target = (&l * l.transpose()).try_inverse().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (emp[(i, j)] - target[(i, j)]).abs() < 0.05,
                    "entry ({i}, {j}): {} vs {}",
                    emp[(i, j)],
                    target[(i, j)]
                );
            }
        }
    }

    #[test]
    fn non_finite_data_is_rejected() {
        let mut y = DMatrix::zeros(3, 3);
        y[(1, 2)] = f64::NAN;
        assert!(matches!(
            SampleStats::from_data(&y, 1.0),
            Err(Error::NonFinite(_))
        ));
    }
}
