//! Log prior mass of a sparsity pattern under the three pattern priors,
//! plus the hyperparameter diagnostics.
//!
//! Erdos-Renyi and beta-mixture masses are exact (the latter up to the
//! normalizing constant shared by every pattern of the same dimension).
//! The multiplicative prior has no closed form; [`multiplicative::laplace`]
//! approximates it and [`quadrature::log_mass`] integrates it directly for
//! small dimensions as an oracle.

pub mod multiplicative;
pub mod quadrature;

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hyper::{Hyperparameters, PriorKind};
use crate::math;
use crate::pattern::SparsityPattern;

pub use multiplicative::LaplaceResult;

/// Exact log mass under independent Bernoulli(`q`) edges:
/// `K ln q + (p(p-1)/2 - K) ln(1-q)`.
pub fn log_prior_erdos_renyi(z: &SparsityPattern, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidHyper(alloc::format!(
            "edge probability q = {q} must lie strictly inside (0, 1)"
        )));
    }
    let k = z.edge_count() as f64;
    let m = z.position_count() as f64;
    Ok(k * math::ln(q) + (m - k) * math::ln_1p(-q))
}

/// Log mass under the beta-mixture prior: edges are exchangeable Bernoulli
/// indicators with one shared probability `q ~ Beta(a1, a2)`, so
/// integrating `q` out gives the exact mass
/// `B(a1 + K, a2 + p(p-1)/2 - K) / B(a1, a2)` with `K` the edge count.
///
/// Depends on the pattern only through `K`.
pub fn log_prior_beta_mixture(z: &SparsityPattern, alpha1: f64, alpha2: f64) -> Result<f64> {
    log_prior_beta_mixture_by_edges(z.dim(), z.edge_count(), alpha1, alpha2)
}

/// Edge-count form of [`log_prior_beta_mixture`].
pub fn log_prior_beta_mixture_by_edges(
    p: usize,
    edges: usize,
    alpha1: f64,
    alpha2: f64,
) -> Result<f64> {
    if !(alpha1 > 0.0 && alpha2 > 0.0) {
        return Err(Error::InvalidHyper(alloc::format!(
            "beta shapes alpha1 = {alpha1}, alpha2 = {alpha2} must be positive"
        )));
    }
    let m = (p * (p - 1) / 2) as f64;
    let a = alpha1 + edges as f64;
    let b = alpha2 + m - edges as f64;
    if !(b > 0.0) {
        return Err(Error::InvalidHyper(alloc::format!(
            "second beta argument {b} is not positive (edge count {edges} exceeds capacity?)"
        )));
    }
    Ok(math::ln_beta(a, b) - math::ln_beta(alpha1, alpha2))
}

/// Log mass of `z` under `hyper.prior_kind`, with the per-column support
/// cap applied: patterns exceeding the cap carry zero prior mass and
/// return `-inf`.
///
/// The multiplicative prior routes through the Laplace approximation; its
/// value is used even when Newton reports non-convergence (the result flag
/// is only available through [`multiplicative::laplace`] directly).
pub fn log_prior(z: &SparsityPattern, hyper: &Hyperparameters) -> Result<f64> {
    if z.max_support_size() > hyper.max_col_support {
        return Ok(f64::NEG_INFINITY);
    }
    match hyper.prior_kind {
        PriorKind::BetaMixture => log_prior_beta_mixture(z, hyper.alpha1, hyper.alpha2),
        PriorKind::ErdosRenyi => log_prior_erdos_renyi(z, hyper.q),
        PriorKind::Multiplicative => {
            Ok(multiplicative::laplace(z, hyper.alpha1, hyper.alpha2)?.log_value)
        }
    }
}

/// Log mass when it depends on the pattern only through the edge count:
/// `Some` for beta-mixture and Erdos-Renyi, `None` for multiplicative.
/// The support cap cannot be checked from an edge count alone, so callers
/// enforcing it must do so themselves.
pub fn log_prior_by_edges(p: usize, edges: usize, hyper: &Hyperparameters) -> Option<Result<f64>> {
    match hyper.prior_kind {
        PriorKind::BetaMixture => Some(log_prior_beta_mixture_by_edges(
            p,
            edges,
            hyper.alpha1,
            hyper.alpha2,
        )),
        PriorKind::ErdosRenyi => {
            if !(hyper.q > 0.0 && hyper.q < 1.0) {
                return Some(Err(Error::InvalidHyper(alloc::format!(
                    "edge probability q = {} must lie strictly inside (0, 1)",
                    hyper.q
                ))));
            }
            let m = (p * (p - 1) / 2) as f64;
            Some(Ok(edges as f64 * math::ln(hyper.q)
                + (m - edges as f64) * math::ln_1p(-hyper.q)))
        }
        PriorKind::Multiplicative => None,
    }
}

/// One non-fatal hyperparameter warning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Stable identifier of the violated growth condition.
    pub id: &'static str,
    pub message: String,
}

impl core::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "WARN {}: {}", self.id, self.message)
    }
}

/// Check the hyperparameters against the growth conditions the selection
/// theory asks for, evaluated at the given dimension `p`, sample size `n`,
/// and an estimate `d_estimate` of the largest true column support.
///
/// Emitted ids:
///
/// * `support-cap` — the per-column cap exceeds `n / ln n`;
/// * `alpha2-rate` — `alpha2` is off its nominal growth target (`p^c` for
///   the beta-mixture, `max(p^c, d^(2c/(c-2)))` for the multiplicative
///   prior) by more than a factor of 10;
/// * `rate-exponent` — the multiplicative prior wants `c > 2`;
/// * `slab-scale` — `tau^2` violates one of its two growth directions
///   (`d / (tau^2 ln p)` small, and `sqrt(n / tau^2)` small against
///   `p^(c/4) ln n`; the second direction is evaluated at kappa = 2).
pub fn check_hyperparameters(
    hyper: &Hyperparameters,
    p: usize,
    n: usize,
    d_estimate: usize,
) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let pf = p as f64;
    let nf = n as f64;
    let d = d_estimate.max(1) as f64;

    if n >= 2 && hyper.max_col_support as f64 > nf / math::ln(nf) {
        out.push(Diagnostic {
            id: "support-cap",
            message: alloc::format!(
                "max_col_support = {} exceeds n / ln n = {:.2}; patterns this dense should carry zero prior mass",
                hyper.max_col_support,
                nf / math::ln(nf)
            ),
        });
    }

    if hyper.prior_kind != PriorKind::ErdosRenyi {
        let base = math::powf(pf, hyper.c);
        let target = if hyper.prior_kind == PriorKind::Multiplicative && hyper.c > 2.0 {
            base.max(math::powf(d, 2.0 * hyper.c / (hyper.c - 2.0)))
        } else {
            base
        };
        let ratio = hyper.alpha2 / target;
        if !(0.1..=10.0).contains(&ratio) {
            out.push(Diagnostic {
                id: "alpha2-rate",
                message: alloc::format!(
                    "alpha2 = {:.4e} is off its growth target {target:.4e} by a factor of {ratio:.2e}",
                    hyper.alpha2
                ),
            });
        }
    }

    if hyper.prior_kind == PriorKind::Multiplicative && hyper.c <= 2.0 {
        out.push(Diagnostic {
            id: "rate-exponent",
            message: alloc::format!(
                "multiplicative prior expects rate exponent c > 2, got c = {}",
                hyper.c
            ),
        });
    }

    if p >= 2 && n >= 2 {
        let dir1 = d / (hyper.tau_sq * math::ln(pf));
        if dir1 > 1.0 {
            out.push(Diagnostic {
                id: "slab-scale",
                message: alloc::format!(
                    "tau^2 = {} is too small: d / (tau^2 ln p) = {dir1:.3} should be well below 1",
                    hyper.tau_sq
                ),
            });
        }
        let dir2 = math::sqrt(nf / hyper.tau_sq) / (math::powf(pf, hyper.c / 4.0) * math::ln(nf));
        if dir2 > 1.0 {
            out.push(Diagnostic {
                id: "slab-scale",
                message: alloc::format!(
                    "tau^2 = {} grows too slowly: sqrt(n / tau^2) / (p^(c/4) ln n) = {dir2:.3} should be well below 1",
                    hyper.tau_sq
                ),
            });
        }
    }

    out
}
