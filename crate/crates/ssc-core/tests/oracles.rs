//! Cross-module oracle checks: the closed-form scorer against a direct
//! numerical evaluation of the hierarchical model, and the determinant
//! identity that links the two score forms.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use ssc_core::experiments::{generate_truth, TruthSpec};
use ssc_core::scoring::total_score;
use ssc_core::stats::sample_gaussian;
use ssc_core::{Hyperparameters, PriorKind, SampleStats, SparsityPattern};

fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

fn all_patterns(p: usize) -> Vec<SparsityPattern> {
    let m = p * (p - 1) / 2;
    (0u32..(1 << m))
        .map(|bits| {
            let mut edges = Vec::new();
            let mut idx = 0;
            for j in 0..p - 1 {
                for k in j + 1..p {
                    if bits >> idx & 1 == 1 {
                        edges.push((k, j));
                    }
                    idx += 1;
                }
            }
            SparsityPattern::from_edges(p, &edges).unwrap()
        })
        .collect()
}

/// Midpoint-rule log integral of `q^(a-1) (1-q)^(b-1)` over a 10^4-point
/// grid on (0, 1). For `a < 1` the integrand is singular at the origin, so
/// the grid runs over `u = q^a` (the integral becomes
/// `(1/a) (1 - u^(1/a))^(b-1) du`, which is bounded).
fn log_beta_mass_by_grid(a: f64, b: f64) -> f64 {
    let m = 10_000usize;
    let h = 1.0 / m as f64;
    let logs: Vec<f64> = (0..m)
        .map(|i| {
            let u = (i as f64 + 0.5) * h;
            if a < 1.0 {
                let q = u.powf(1.0 / a);
                (b - 1.0) * (1.0 - q).ln() - a.ln() + h.ln()
            } else {
                (a - 1.0) * u.ln() + (b - 1.0) * (1.0 - u).ln() + h.ln()
            }
        })
        .collect();
    log_sum_exp(&logs)
}

/// Marginal log likelihood of column `col` by direct conjugate
/// integration on the raw data: the slab entries and the conditional
/// variance are integrated analytically through the n x n matrix
/// `M = I + tau^2 X X^T` built from the parent columns, never touching
/// the augmented covariance or any Schur complement.
fn column_marginal_by_conjugacy(
    y: &DMatrix<f64>,
    col: usize,
    support: &[usize],
    tau_sq: f64,
    lambda1: f64,
    lambda2: f64,
) -> f64 {
    let n = y.nrows();
    let mut m = DMatrix::identity(n, n);
    for &k in support {
        let xk = y.column(k);
        for r in 0..n {
            for c in 0..n {
                m[(r, c)] += tau_sq * xk[r] * xk[c];
            }
        }
    }
    let chol = nalgebra::linalg::Cholesky::new(m).expect("gram matrix is positive definite");
    let logdet = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d: &f64| d.ln())
            .sum::<f64>();
    let yj = DVector::from_column_slice(y.column(col).as_slice());
    let qform = yj.dot(&chol.solve(&yj));
    let nf = n as f64;
    -nf / 2.0 * (2.0 * core::f64::consts::PI).ln() - 0.5 * logdet
        + ln_gamma(nf / 2.0 + lambda1)
        + lambda1 * lambda2.ln()
        - ln_gamma(lambda1)
        - (nf / 2.0 + lambda1) * (qform / 2.0 + lambda2).ln()
}

/// Criterion: at p = 3 and n = 20, the normalized beta-mixture posterior
/// over all 8 patterns matches the direct evaluation within 1e-4 relative.
#[test]
fn beta_mixture_posterior_matches_numeric_oracle() {
    let p = 3usize;
    let n = 20usize;
    let truth = TruthSpec::new(p, 0.34, 99); // one true edge
    let (l0, _) = generate_truth(&truth).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(1234);
    let y = sample_gaussian(&l0, n, &mut rng).unwrap();

    for (alpha1, alpha2, tau_sq) in [(1.0, 2.0, 2.0), (0.05, 9.0, 20.0)] {
        let hyper = Hyperparameters {
            tau_sq,
            lambda1: 0.05,
            lambda2: 0.05,
            alpha1,
            alpha2,
            c: 2.0,
            max_col_support: p - 1,
            prior_kind: PriorKind::BetaMixture,
            q: 0.05,
        };
        let stats = SampleStats::from_data(&y, hyper.tau_sq).unwrap();
        let patterns = all_patterns(p);

        let impl_logs: Vec<f64> = patterns
            .iter()
            .map(|z| total_score(z, &stats, &hyper).unwrap().total)
            .collect();
        let impl_norm = log_sum_exp(&impl_logs);

        let m_total = (p * (p - 1) / 2) as f64;
        let oracle_logs: Vec<f64> = patterns
            .iter()
            .map(|z| {
                let k = z.edge_count() as f64;
                // One shared edge probability integrated over its beta
                // prior; the Beta(a1, a2) normalizer cancels in the
                // normalization below.
                let prior = log_beta_mass_by_grid(alpha1 + k, alpha2 + m_total - k);
                let mut lik = 0.0;
                for j in 0..p {
                    let support = if j < p - 1 { z.support(j) } else { &[] };
                    lik += column_marginal_by_conjugacy(
                        &y,
                        j,
                        support,
                        hyper.tau_sq,
                        hyper.lambda1,
                        hyper.lambda2,
                    );
                }
                prior + lik
            })
            .collect();
        let oracle_norm = log_sum_exp(&oracle_logs);

        for (i, z) in patterns.iter().enumerate() {
            let p_impl = (impl_logs[i] - impl_norm).exp();
            let p_oracle = (oracle_logs[i] - oracle_norm).exp();
            let rel = (p_impl - p_oracle).abs() / p_oracle;
            assert!(
                rel < 1e-4,
                "alpha=({alpha1},{alpha2}) pattern {i} ({} edges): {p_impl:.10} vs {p_oracle:.10} rel {rel:.2e}",
                z.edge_count()
            );
        }
    }
}

/// Criterion: on 100 random positive definite matrices up to p = 50, the
/// determinant of the bordered support submatrix splits into the support
/// determinant and the conditional variance within 1e-8 relative.
#[test]
fn determinant_identity_holds_at_scale() {
    let mut rng = ChaCha12Rng::seed_from_u64(7002);
    for trial in 0..100 {
        let p = rng.random_range(3..=50usize);
        let g = DMatrix::from_fn(p, p, |_, _| rng.random::<f64>() - 0.5);
        let mut w = &g * g.transpose() / p as f64;
        for i in 0..p {
            w[(i, i)] += 0.3;
        }
        let stats = SampleStats::from_covariance(w, 40, 1.7).unwrap();
        let col = rng.random_range(0..p - 1);
        let support: Vec<usize> = (col + 1..p)
            .filter(|_| rng.random::<f64>() < 0.4)
            .collect();
        let mut bordered = vec![col];
        bordered.extend_from_slice(&support);
        let lhs = stats.logdet_submatrix(&bordered).unwrap();
        let rhs = stats.logdet_submatrix(&support).unwrap()
            + stats.conditional_variance(col, &support).unwrap().ln();
        let rel = (lhs - rhs).abs() / lhs.abs().max(1.0);
        assert!(rel < 1e-8, "trial {trial} p {p}: {lhs} vs {rhs}");
    }
}
