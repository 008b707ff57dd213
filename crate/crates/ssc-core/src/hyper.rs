//! Hyperparameters of the spike-and-slab Cholesky model and the pattern
//! prior.

use crate::error::{Error, Result};
use crate::math::{self, Fnv1a};

/// Which prior is placed on the sparsity pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PriorKind {
    /// Shared edge probability with a beta hyperprior; closed-form mass.
    BetaMixture,
    /// Per-node beta weights, edge probability `w_j w_k`; Laplace mass.
    Multiplicative,
    /// Fixed edge probability `q`.
    ErdosRenyi,
}

impl PriorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PriorKind::BetaMixture => "beta-mixture",
            PriorKind::Multiplicative => "multiplicative",
            PriorKind::ErdosRenyi => "erdos-renyi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "beta-mixture" => Some(PriorKind::BetaMixture),
            "multiplicative" => Some(PriorKind::Multiplicative),
            "erdos-renyi" => Some(PriorKind::ErdosRenyi),
            _ => None,
        }
    }
}

/// All scalar knobs of the hierarchical model.
///
/// `tau_sq` scales the slab variance, `lambda1`/`lambda2` are the
/// inverse-gamma shape/scale on the conditional variances, `alpha1`/`alpha2`
/// shape the beta prior of the pattern prior, `c` is the nominal growth
/// exponent of `alpha2`, and `max_col_support` caps per-column supports
/// (patterns over the cap carry zero prior mass). `q` is only read by the
/// Erdos-Renyi prior.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    pub tau_sq: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub c: f64,
    pub max_col_support: usize,
    pub prior_kind: PriorKind,
    pub q: f64,
}

impl Hyperparameters {
    /// Validate ranges: `tau_sq, alpha1, alpha2, c > 0`, `lambda1, lambda2
    /// >= 0`, `max_col_support >= 1`, and `0 < q < 1` for Erdos-Renyi.
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_sq > 0.0) || !self.tau_sq.is_finite() {
            return Err(Error::InvalidHyper(alloc::format!(
                "tau_sq = {} must be a positive finite real",
                self.tau_sq
            )));
        }
        if !(self.lambda1 >= 0.0) || !(self.lambda2 >= 0.0) {
            return Err(Error::InvalidHyper(alloc::format!(
                "lambda1 = {}, lambda2 = {} must be nonnegative",
                self.lambda1,
                self.lambda2
            )));
        }
        if !(self.alpha1 > 0.0) || !(self.alpha2 > 0.0) {
            return Err(Error::InvalidHyper(alloc::format!(
                "alpha1 = {}, alpha2 = {} must be positive",
                self.alpha1,
                self.alpha2
            )));
        }
        if !(self.c > 0.0) {
            return Err(Error::InvalidHyper(alloc::format!(
                "c = {} must be positive",
                self.c
            )));
        }
        if self.max_col_support == 0 {
            return Err(Error::InvalidHyper(
                "max_col_support must be at least 1".into(),
            ));
        }
        if self.prior_kind == PriorKind::ErdosRenyi && !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidHyper(alloc::format!(
                "q = {} must lie strictly inside (0, 1)",
                self.q
            )));
        }
        Ok(())
    }

    /// Data-size-scaled defaults used by the simulation experiments:
    /// `tau_sq = n`, `lambda1 = lambda2 = 0.05`, `alpha1 = 0.05`,
    /// `alpha2 = p^c` with `c = 2`, per-column support uncapped, and
    /// `q = 0.05` as an inert placeholder for non-Erdos-Renyi priors.
    pub fn scaled_to(p: usize, n: usize, prior_kind: PriorKind) -> Self {
        let c = 2.0;
        Hyperparameters {
            tau_sq: n as f64,
            lambda1: 0.05,
            lambda2: 0.05,
            alpha1: 0.05,
            alpha2: math::powf(p as f64, c),
            c,
            max_col_support: p.saturating_sub(1).max(1),
            prior_kind,
            q: 0.05,
        }
    }

    /// Same defaults with the support cap tightened to `floor(n / ln n)`,
    /// the strongest cap the zero-mass rule allows; used for model search.
    pub fn scaled_to_capped(p: usize, n: usize, prior_kind: PriorKind) -> Self {
        let mut h = Self::scaled_to(p, n, prior_kind);
        if n >= 3 {
            h.max_col_support = (math::floor(n as f64 / math::ln(n as f64)) as usize)
                .min(p - 1)
                .max(1);
        }
        h
    }

    /// Defaults for finite-sample model selection: as
    /// [`Hyperparameters::scaled_to_capped`] but with the slab variance
    /// fixed at `tau_sq = 1`, matching unit conditional variances rather
    /// than growing with `n`. A slab that wide costs `ln(n tau^2) / 2`
    /// per edge, which at desk scale suppresses moderate signals the
    /// search should keep.
    pub fn selection_defaults(p: usize, n: usize, prior_kind: PriorKind) -> Self {
        let mut h = Self::scaled_to_capped(p, n, prior_kind);
        h.tau_sq = 1.0;
        h
    }

    /// Hash of everything that determines a score's scale, so that scores
    /// from different data/hyperparameter contexts cannot be compared.
    pub fn fingerprint(&self, n: usize, p: usize) -> u64 {
        let mut h = Fnv1a::new();
        h.write_u64(n as u64);
        h.write_u64(p as u64);
        h.write_f64(self.tau_sq);
        h.write_f64(self.lambda1);
        h.write_f64(self.lambda2);
        h.write_f64(self.alpha1);
        h.write_f64(self.alpha2);
        h.write_f64(self.c);
        h.write_u64(self.max_col_support as u64);
        h.write_u64(match self.prior_kind {
            PriorKind::BetaMixture => 0,
            PriorKind::Multiplicative => 1,
            PriorKind::ErdosRenyi => 2,
        });
        if self.prior_kind == PriorKind::ErdosRenyi {
            h.write_f64(self.q);
        }
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_catches_bad_ranges() {
        let mut h = Hyperparameters::scaled_to(10, 30, PriorKind::BetaMixture);
        h.validate().unwrap();
        h.tau_sq = 0.0;
        assert!(h.validate().is_err());
        h = Hyperparameters::scaled_to(10, 30, PriorKind::ErdosRenyi);
        h.q = 1.0;
        assert!(h.validate().is_err());
        h.q = 0.3;
        h.validate().unwrap();
    }

    #[test]
    fn fingerprint_separates_contexts() {
        let a = Hyperparameters::scaled_to(10, 30, PriorKind::BetaMixture);
        let mut b = a.clone();
        assert_eq!(a.fingerprint(30, 10), b.fingerprint(30, 10));
        b.tau_sq += 1.0;
        assert_ne!(a.fingerprint(30, 10), b.fingerprint(30, 10));
        assert_ne!(a.fingerprint(30, 10), a.fingerprint(31, 10));
    }

    #[test]
    fn capped_defaults_respect_the_support_rule() {
        let h = Hyperparameters::scaled_to_capped(300, 100, PriorKind::BetaMixture);
        // floor(100 / ln 100) = floor(21.71) = 21.
        assert_eq!(h.max_col_support, 21);
    }
}
