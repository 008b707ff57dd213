//! Per-column log marginal likelihood terms and the total log marginal
//! posterior score of a pattern.
//!
//! Scores are natural-log and unnormalized within one `(data,
//! hyperparameter, prior)` context; every [`ScoredPattern`] carries a
//! fingerprint of that context and refuses comparisons across contexts.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hyper::Hyperparameters;
use crate::math;
use crate::pattern::SparsityPattern;
use crate::priors;
use crate::stats::{SampleStats, VARIANCE_FLOOR};

/// A pattern together with its score and per-column breakdown.
///
/// `total = prior_term + sum(column_terms)` exactly (the sum is formed once
/// and stored). Patterns whose largest column support exceeds the cap carry
/// zero prior mass: their score is `-inf` and `cap_exceeded` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPattern {
    pub pattern: SparsityPattern,
    pub total: f64,
    pub prior_term: f64,
    pub column_terms: Vec<f64>,
    /// Fingerprint of `(n, p, hyperparameters)`; scores only compare within
    /// one fingerprint.
    pub context: u64,
    /// Set when the support cap forced the `-inf` sentinel.
    pub cap_exceeded: bool,
}

impl ScoredPattern {
    /// Log posterior ratio `self` over `other`; errors when the two scores
    /// come from different contexts.
    pub fn ratio_to(&self, other: &ScoredPattern) -> Result<f64> {
        if self.context != other.context {
            return Err(Error::ContextMismatch(self.context, other.context));
        }
        if self.pattern == other.pattern {
            return Ok(0.0);
        }
        Ok(self.total - other.total)
    }
}

/// Log marginal likelihood contribution of column `col` with support
/// `support`:
///
/// ```text
/// -(n/2 + l1) ln(n S~_{j|Z} / 2 - 1/(2 tau^2) + l2)
///   - ln det(S~_ZZ) / 2 - |Z| ln(n tau^2) / 2
/// ```
///
/// A support larger than the cap means zero prior mass; the term is the
/// `-inf` sentinel so any total containing it collapses. A likelihood
/// bracket that falls below `lambda2 / 2` (it is mathematically at least
/// `lambda2` for positive semidefinite `S`) is a conditioning error.
pub fn column_loglik(
    stats: &SampleStats,
    col: usize,
    support: &[usize],
    hyper: &Hyperparameters,
) -> Result<f64> {
    if support.len() > hyper.max_col_support {
        return Ok(f64::NEG_INFINITY);
    }
    let cv = stats.conditional_variance(col, support)?;
    let logdet = stats.logdet_submatrix(support)?;
    column_term_from_parts(stats, hyper, col, cv, logdet, support.len())
}

/// Assemble a column term from its conditional variance and support
/// log-determinant. The bracket `n cv / 2 - 1/(2 tau^2) + lambda2` is a
/// cancellation-prone difference; values below `lambda2 / 2` or within
/// relative rounding distance of zero are conditioning errors rather than
/// `-inf` logs.
pub(crate) fn column_term_from_parts(
    stats: &SampleStats,
    hyper: &Hyperparameters,
    col: usize,
    cv: f64,
    logdet: f64,
    support_len: usize,
) -> Result<f64> {
    if !cv.is_finite() || cv <= VARIANCE_FLOOR {
        return Err(Error::Conditioning {
            column: col,
            value: cv,
        });
    }
    let n = stats.n() as f64;
    let scale = n * cv / 2.0;
    let bracket = scale - 1.0 / (2.0 * hyper.tau_sq) + hyper.lambda2;
    if !(bracket >= hyper.lambda2 / 2.0) || bracket <= 1e-12 * scale {
        return Err(Error::Conditioning {
            column: col,
            value: bracket,
        });
    }
    Ok(-(n / 2.0 + hyper.lambda1) * math::ln(bracket)
        - 0.5 * logdet
        - support_len as f64 / 2.0 * math::ln(n * hyper.tau_sq))
}

/// Total log marginal posterior score of `z`: the pattern prior term plus
/// every column's likelihood term.
pub fn total_score(
    z: &SparsityPattern,
    stats: &SampleStats,
    hyper: &Hyperparameters,
) -> Result<ScoredPattern> {
    hyper.validate()?;
    if z.dim() != stats.p() {
        return Err(Error::DimensionMismatch {
            expected: stats.p(),
            found: z.dim(),
        });
    }
    let cap_exceeded = z.max_support_size() > hyper.max_col_support;
    let prior_term = priors::log_prior(z, hyper)?;
    let p = z.dim();
    let mut column_terms = Vec::with_capacity(p - 1);
    for j in 0..p - 1 {
        column_terms.push(column_loglik(stats, j, z.support(j), hyper)?);
    }
    let total = prior_term + column_terms.iter().sum::<f64>();
    Ok(ScoredPattern {
        pattern: z.clone(),
        total,
        prior_term,
        column_terms,
        context: hyper.fingerprint(stats.n(), stats.p()),
        cap_exceeded,
    })
}

/// `total_score(z) - total_score(z0)`. Zero for identical patterns.
pub fn log_posterior_ratio(
    z: &SparsityPattern,
    z0: &SparsityPattern,
    stats: &SampleStats,
    hyper: &Hyperparameters,
) -> Result<f64> {
    let a = total_score(z, stats, hyper)?;
    let b = total_score(z0, stats, hyper)?;
    a.ratio_to(&b)
}
