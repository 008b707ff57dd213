//! Float math shims and small numeric helpers.
//!
//! Float intrinsics (`ln`, `exp`, ...) live in `std`, not `core`, so the
//! `no_std` build routes them through `libm`. `ln_gamma` always comes from
//! `libm` because the standard library has no log-gamma at all.

#![allow(dead_code)]

use alloc::vec::Vec;

#[cfg(feature = "std")]
mod imp {
    #[inline(always)]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    #[inline(always)]
    pub fn ln_1p(x: f64) -> f64 {
        x.ln_1p()
    }
    #[inline(always)]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[inline(always)]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    #[inline(always)]
    pub fn powf(x: f64, y: f64) -> f64 {
        x.powf(y)
    }
    #[inline(always)]
    pub fn abs(x: f64) -> f64 {
        x.abs()
    }
    #[inline(always)]
    pub fn round(x: f64) -> f64 {
        x.round()
    }
    #[inline(always)]
    pub fn floor(x: f64) -> f64 {
        x.floor()
    }
    #[inline(always)]
    pub fn ceil(x: f64) -> f64 {
        x.ceil()
    }
    #[inline(always)]
    pub fn cos(x: f64) -> f64 {
        x.cos()
    }
}

#[cfg(not(feature = "std"))]
mod imp {
    #[inline(always)]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline(always)]
    pub fn ln_1p(x: f64) -> f64 {
        libm::log1p(x)
    }
    #[inline(always)]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline(always)]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[inline(always)]
    pub fn powf(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }
    #[inline(always)]
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }
    #[inline(always)]
    pub fn round(x: f64) -> f64 {
        libm::round(x)
    }
    #[inline(always)]
    pub fn floor(x: f64) -> f64 {
        libm::floor(x)
    }
    #[inline(always)]
    pub fn ceil(x: f64) -> f64 {
        libm::ceil(x)
    }
    #[inline(always)]
    pub fn cos(x: f64) -> f64 {
        libm::cos(x)
    }
}

pub use imp::*;

/// Natural log of the gamma function.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

/// `ln B(a, b)` for positive arguments.
#[inline]
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `log(sum(exp(xs)))` with the usual max shift; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let sum: f64 = xs.iter().map(|&x| exp(x - m)).sum();
    m + ln(sum)
}

/// Streaming variant of [`log_sum_exp`]: combine two log-domain values.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + ln_1p(exp(lo - hi))
}

/// SplitMix64 step; used to derive independent sub-stream seeds.
#[inline]
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a base seed with a sequence of tags into a fresh sub-seed.
pub fn mix_seed(base: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix64(base ^ 0xa076_1d64_78bd_642f);
    for &t in tags {
        s = splitmix64(s ^ t);
    }
    s
}

/// FNV-1a over a byte stream, for context fingerprints and pattern hashes.
pub struct Fnv1a(u64);

impl Fnv1a {
    pub fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x1000_0000_01b3);
        }
    }

    pub fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }

    pub fn write_f64(&mut self, v: f64) {
        self.write_u64(v.to_bits());
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv1a {
    fn default() -> Self {
        Self::new()
    }
}

/// Gauss-Legendre nodes and weights on `(0, 1)`.
///
/// Nodes of the degree-`n` Legendre polynomial on `(-1, 1)` are found by
/// Newton iteration from the Chebyshev initial guess, then mapped to the
/// unit interval. Accuracy is at the 1e-15 level for the orders used here.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "need at least two quadrature nodes");
    let mut nodes = alloc::vec![0.0; n];
    let mut weights = alloc::vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess for the i-th root (descending order).
        let mut x = cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_n' via the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if abs(dx) < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        weights[i] = w;
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = w;
    }
    // Map (-1, 1) -> (0, 1); weights scale by the Jacobian 1/2.
    for i in 0..n {
        nodes[i] = 0.5 * (1.0 - nodes[i]);
        weights[i] *= 0.5;
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_beta_matches_small_integer_cases() {
        // B(1, 2) = 1/2, B(2, 5) = 1/30.
        assert!((ln_beta(1.0, 2.0) - ln(0.5)).abs() < 1e-14);
        assert!((ln_beta(2.0, 5.0) - ln(1.0 / 30.0)).abs() < 1e-13);
    }

    #[test]
    fn log_sum_exp_handles_shift_and_empty() {
        let v = [1000.0, 1000.0];
        assert!((log_sum_exp(&v) - (1000.0 + ln(2.0))).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_add_exp(0.0, 0.0) - ln(2.0)).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre_unit(8);
        // Weights sum to the interval length.
        let total: f64 = w.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        // Exact for x^k up to degree 2n-1: int_0^1 x^k = 1/(k+1).
        for k in 0..=15usize {
            let got: f64 = x
                .iter()
                .zip(&w)
                .map(|(&xi, &wi)| wi * powf(xi, k as f64))
                .sum();
            assert!(
                (got - 1.0 / (k as f64 + 1.0)).abs() < 1e-13,
                "degree {k}: {got}"
            );
        }
    }

    #[test]
    fn seed_mixing_is_stable_and_tag_sensitive() {
        let a = mix_seed(7, &[1, 2, 3]);
        let b = mix_seed(7, &[1, 2, 3]);
        let c = mix_seed(7, &[1, 2, 4]);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
