//! Tensor-product Gauss-Legendre oracle for the multiplicative prior mass.
//!
//! Only usable for small dimensions (the point count is `nodes^p`); the
//! scorer never calls this, it exists to validate the Laplace
//! approximation.

use crate::error::{Error, Result};
use crate::math;
use crate::pattern::SparsityPattern;
use crate::priors::multiplicative::log_integrand;

/// Largest dimension the oracle accepts.
pub const MAX_DIM: usize = 6;

/// Smallest admissible per-axis node count.
pub const MIN_NODES: usize = 64;

/// Log prior mass of `z` by `nodes^p` Gauss-Legendre quadrature of the
/// multiplicative integrand over `(0, 1)^p`, accumulated in the log domain.
///
/// Includes the `Beta(a1, a2)^p` normalizer, so masses over all patterns of
/// a dimension sum to one (up to quadrature error).
pub fn log_mass(z: &SparsityPattern, alpha1: f64, alpha2: f64, nodes: usize) -> Result<f64> {
    if !(alpha1 > 0.0 && alpha2 > 0.0) {
        return Err(Error::InvalidHyper(alloc::format!(
            "beta shapes alpha1 = {alpha1}, alpha2 = {alpha2} must be positive"
        )));
    }
    let p = z.dim();
    if p > MAX_DIM {
        return Err(Error::DimensionTooLarge {
            p,
            max: MAX_DIM,
            what: "tensor-product quadrature",
        });
    }
    if nodes < MIN_NODES {
        return Err(Error::InvalidHyper(alloc::format!(
            "quadrature needs at least {MIN_NODES} nodes per axis, got {nodes}"
        )));
    }
    let (x, w) = math::gauss_legendre_unit(nodes);
    let log_w: alloc::vec::Vec<f64> = w.iter().map(|&wi| math::ln(wi)).collect();

    // Odometer over the p-dimensional node grid; log-sum-exp accumulation.
    let mut idx = alloc::vec![0usize; p];
    let mut omega = alloc::vec![0.0f64; p];
    let mut acc = f64::NEG_INFINITY;
    loop {
        let mut log_weight = 0.0;
        for d in 0..p {
            omega[d] = x[idx[d]];
            log_weight += log_w[idx[d]];
        }
        let h = log_integrand(z, &omega, alpha1, alpha2)?;
        acc = math::log_add_exp(acc, h + log_weight);

        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < nodes {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == p {
                return Ok(acc - p as f64 * math::ln_beta(alpha1, alpha2));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{ln, log_sum_exp};

    fn all_patterns(p: usize) -> alloc::vec::Vec<SparsityPattern> {
        let m = p * (p - 1) / 2;
        (0u32..(1 << m))
            .map(|bits| {
                let mut edges = alloc::vec::Vec::new();
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

    #[test]
    fn two_node_masses_hit_the_analytic_values() {
        let edge = SparsityPattern::from_edges(2, &[(1, 0)]).unwrap();
        let v = log_mass(&edge, 1.0, 1.0, 64).unwrap();
        assert!((v - ln(0.25)).abs() < 1e-6, "{v}");
        let empty = SparsityPattern::empty(2);
        let v = log_mass(&empty, 1.0, 1.0, 64).unwrap();
        assert!((v - ln(0.75)).abs() < 1e-6, "{v}");
    }

    #[test]
    fn three_node_masses_sum_to_one() {
        let logs: alloc::vec::Vec<f64> = all_patterns(3)
            .iter()
            .map(|z| log_mass(z, 1.0, 1.0, 64).unwrap())
            .collect();
        assert!(log_sum_exp(&logs).abs() < 1e-5);
    }

    #[test]
    fn doubling_nodes_is_converged_at_the_stated_tolerance() {
        let z = SparsityPattern::from_edges(3, &[(1, 0), (2, 1)]).unwrap();
        let a = log_mass(&z, 1.0, 1.0, 64).unwrap();
        let b = log_mass(&z, 1.0, 1.0, 128).unwrap();
        assert!((a - b).abs() < 1e-6 * a.abs().max(1.0));
    }

    #[test]
    fn full_pattern_carries_less_mass_than_empty_in_the_sparse_regime() {
        let pats = all_patterns(3);
        let empty = &pats[0];
        let full = pats.iter().max_by_key(|z| z.edge_count()).unwrap();
        let m_empty = log_mass(empty, 1.0, 1.0, 64).unwrap();
        let m_full = log_mass(full, 1.0, 1.0, 64).unwrap();
        assert!(m_full < m_empty);
    }

    #[test]
    fn oversized_dimension_is_rejected() {
        let z = SparsityPattern::empty(7);
        assert!(matches!(
            log_mass(&z, 1.0, 1.0, 64),
            Err(Error::DimensionTooLarge { .. })
        ));
        let z = SparsityPattern::empty(2);
        assert!(log_mass(&z, 1.0, 1.0, 16).is_err());
    }
}
