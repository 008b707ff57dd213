//! Multiplicative pattern prior: per-node weights `w_j ~ Beta(a1, a2)` and
//! edge probability `w_j w_k`.
//!
//! The pattern mass is the `p`-dimensional integral of `exp(h(w))` over the
//! open unit cube with
//!
//! ```text
//! h(w) = sum_{j<k} [ Z_kj (ln w_j + ln w_k) + (1 - Z_kj) ln(1 - w_j w_k) ]
//!      + sum_j [ (a1 - 1) ln w_j + (a2 - 1) ln(1 - w_j) ]
//! ```
//!
//! (the `Beta(a1, a2)^p` normalizer is applied at the end). With `a1 < 1`
//! the integrand blows up at the origin, so the mode is found on the logit
//! scale `t_j = ln(w_j / (1 - w_j))`, where the change-of-variables
//! Jacobian `sum_j ln(w_j (1 - w_j))` regularizes the problem and Newton
//! iteration runs unconstrained.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::math;
use crate::pattern::SparsityPattern;

/// Gradient max-norm (logit scale) below which the mode search stops.
const GRAD_TOL: f64 = 1e-8;

/// Newton iteration budget per start point.
const MAX_ITERS: usize = 200;

/// Laplace approximation of a multiplicative-prior log mass.
#[derive(Debug, Clone)]
pub struct LaplaceResult {
    /// Approximate `ln pi(Z)` (normalizer included).
    pub log_value: f64,
    /// Maximizing node weights, strictly inside `(0, 1)^p`.
    pub mode: Vec<f64>,
    /// Newton iterations spent (across restarts).
    pub newton_iters: usize,
    /// Whether the gradient tolerance was reached.
    pub converged: bool,
    /// `ln det(-H)` of the logit-scale objective at the mode.
    pub hessian_logdet: f64,
}

fn check_open_unit(omega: &[f64]) -> Result<()> {
    if omega.iter().any(|&w| !(w > 0.0 && w < 1.0)) {
        return Err(Error::OutOfDomain(
            "node weights must lie strictly inside (0, 1)".into(),
        ));
    }
    Ok(())
}

/// Symmetric adjacency lookup for a pattern.
struct Adjacency {
    p: usize,
    mask: Vec<bool>,
}

impl Adjacency {
    fn new(z: &SparsityPattern) -> Self {
        let p = z.dim();
        let mut mask = alloc::vec![false; p * p];
        for (k, j) in z.edges() {
            mask[k * p + j] = true;
            mask[j * p + k] = true;
        }
        Adjacency { p, mask }
    }

    #[inline]
    fn linked(&self, a: usize, b: usize) -> bool {
        self.mask[a * self.p + b]
    }
}

/// Log integrand `h(w)` of the multiplicative prior mass.
pub fn log_integrand(z: &SparsityPattern, omega: &[f64], alpha1: f64, alpha2: f64) -> Result<f64> {
    let p = z.dim();
    if omega.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: omega.len(),
        });
    }
    check_open_unit(omega)?;
    let adj = Adjacency::new(z);
    Ok(log_integrand_inner(&adj, omega, alpha1, alpha2))
}

fn log_integrand_inner(adj: &Adjacency, omega: &[f64], alpha1: f64, alpha2: f64) -> f64 {
    let p = adj.p;
    let mut h = 0.0;
    for j in 0..p {
        for k in j + 1..p {
            if adj.linked(k, j) {
                h += math::ln(omega[j]) + math::ln(omega[k]);
            } else {
                h += math::ln_1p(-omega[j] * omega[k]);
            }
        }
    }
    for &w in omega {
        h += (alpha1 - 1.0) * math::ln(w) + (alpha2 - 1.0) * math::ln_1p(-w);
    }
    h
}

/// Analytic gradient of `h` with respect to the node weights.
pub fn log_integrand_gradient(
    z: &SparsityPattern,
    omega: &[f64],
    alpha1: f64,
    alpha2: f64,
) -> Result<Vec<f64>> {
    let p = z.dim();
    if omega.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: omega.len(),
        });
    }
    check_open_unit(omega)?;
    let adj = Adjacency::new(z);
    let deg = z.degrees();
    Ok(gradient_inner(&adj, &deg, omega, alpha1, alpha2))
}

fn gradient_inner(
    adj: &Adjacency,
    deg: &[usize],
    omega: &[f64],
    alpha1: f64,
    alpha2: f64,
) -> Vec<f64> {
    let p = adj.p;
    let mut g = alloc::vec![0.0; p];
    for j in 0..p {
        let mut v = (deg[j] as f64 + alpha1 - 1.0) / omega[j] - (alpha2 - 1.0) / (1.0 - omega[j]);
        for k in 0..p {
            if k != j && !adj.linked(j, k) {
                v -= omega[k] / (1.0 - omega[j] * omega[k]);
            }
        }
        g[j] = v;
    }
    g
}

/// Analytic Hessian of `h`; cross terms come only from the absent-edge
/// factors `ln(1 - w_j w_k)`.
pub fn log_integrand_hessian(
    z: &SparsityPattern,
    omega: &[f64],
    alpha1: f64,
    alpha2: f64,
) -> Result<DMatrix<f64>> {
    let p = z.dim();
    if omega.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: omega.len(),
        });
    }
    check_open_unit(omega)?;
    let adj = Adjacency::new(z);
    let deg = z.degrees();
    Ok(hessian_inner(&adj, &deg, omega, alpha1, alpha2))
}

fn hessian_inner(
    adj: &Adjacency,
    deg: &[usize],
    omega: &[f64],
    alpha1: f64,
    alpha2: f64,
) -> DMatrix<f64> {
    let p = adj.p;
    let mut h = DMatrix::zeros(p, p);
    for j in 0..p {
        let om = 1.0 - omega[j];
        let mut d = -(deg[j] as f64 + alpha1 - 1.0) / (omega[j] * omega[j])
            - (alpha2 - 1.0) / (om * om);
        for k in 0..p {
            if k != j && !adj.linked(j, k) {
                let r = 1.0 - omega[j] * omega[k];
                d -= omega[k] * omega[k] / (r * r);
                h[(j, k)] = -1.0 / (r * r);
            }
        }
        h[(j, j)] = d;
    }
    h
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + math::exp(-t))
    } else {
        let e = math::exp(t);
        e / (1.0 + e)
    }
}

#[inline]
fn logit(w: f64) -> f64 {
    math::ln(w / (1.0 - w))
}

/// Logit-scale objective `g(t) = h(w(t)) + sum_j ln(w_j (1 - w_j))`.
fn objective(adj: &Adjacency, omega: &[f64], alpha1: f64, alpha2: f64) -> f64 {
    let mut g = log_integrand_inner(adj, omega, alpha1, alpha2);
    for &w in omega {
        g += math::ln(w) + math::ln_1p(-w);
    }
    g
}

fn objective_gradient(
    adj: &Adjacency,
    deg: &[usize],
    omega: &[f64],
    alpha1: f64,
    alpha2: f64,
) -> Vec<f64> {
    let hw = gradient_inner(adj, deg, omega, alpha1, alpha2);
    omega
        .iter()
        .zip(hw)
        .map(|(&w, hj)| w * (1.0 - w) * hj + (1.0 - 2.0 * w))
        .collect()
}

fn objective_hessian(
    adj: &Adjacency,
    deg: &[usize],
    omega: &[f64],
    alpha1: f64,
    alpha2: f64,
) -> DMatrix<f64> {
    let p = adj.p;
    let hw = gradient_inner(adj, deg, omega, alpha1, alpha2);
    let mut hh = hessian_inner(adj, deg, omega, alpha1, alpha2);
    // Chain rule: dw/dt = w (1 - w), d2w/dt2 = w (1 - w) (1 - 2w); the
    // Jacobian term ln(w (1 - w)) contributes -2 w (1 - w) on the diagonal.
    for j in 0..p {
        let s_j = omega[j] * (1.0 - omega[j]);
        for k in 0..p {
            if k != j {
                let s_k = omega[k] * (1.0 - omega[k]);
                hh[(j, k)] *= s_j * s_k;
            }
        }
        hh[(j, j)] = hh[(j, j)] * s_j * s_j + hw[j] * s_j * (1.0 - 2.0 * omega[j]) - 2.0 * s_j;
    }
    hh
}

/// Cholesky of `-H` with escalating diagonal jitter; returns the factor and
/// whether jitter was needed.
fn neg_hessian_cholesky(h: &DMatrix<f64>) -> Option<(nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>, bool)> {
    let neg = -h;
    if let Some(ch) = nalgebra::linalg::Cholesky::new(neg.clone()) {
        return Some((ch, false));
    }
    let scale = neg.diagonal().iter().fold(1.0f64, |m, &v| m.max(math::abs(v)));
    let mut jitter = 1e-10 * scale;
    for _ in 0..15 {
        let mut trym = neg.clone();
        for i in 0..trym.nrows() {
            trym[(i, i)] += jitter;
        }
        if let Some(ch) = nalgebra::linalg::Cholesky::new(trym) {
            return Some((ch, true));
        }
        jitter *= 10.0;
    }
    None
}

struct NewtonOutcome {
    theta: DVector<f64>,
    iters: usize,
    converged: bool,
}

fn newton_from(
    adj: &Adjacency,
    deg: &[usize],
    start: DVector<f64>,
    alpha1: f64,
    alpha2: f64,
) -> NewtonOutcome {
    let mut theta = start;
    let mut omega: Vec<f64> = theta.iter().map(|&t| sigmoid(t)).collect();
    let mut value = objective(adj, &omega, alpha1, alpha2);
    let mut iters = 0;
    let mut converged = false;

    while iters < MAX_ITERS {
        iters += 1;
        let grad = objective_gradient(adj, deg, &omega, alpha1, alpha2);
        let gmax = grad.iter().fold(0.0f64, |m, &g| m.max(math::abs(g)));
        if gmax < GRAD_TOL {
            converged = true;
            break;
        }
        let hess = objective_hessian(adj, deg, &omega, alpha1, alpha2);
        let Some((chol, _)) = neg_hessian_cholesky(&hess) else {
            break;
        };
        let dir = chol.solve(&DVector::from_vec(grad));
        // Damped step with halving until the objective improves.
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand = &theta + &dir * step;
            let cand_omega: Vec<f64> = cand.iter().map(|&t| sigmoid(t)).collect();
            if cand_omega.iter().all(|&w| w > 0.0 && w < 1.0) {
                let cand_value = objective(adj, &cand_omega, alpha1, alpha2);
                if cand_value > value {
                    theta = cand;
                    omega = cand_omega;
                    value = cand_value;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved {
            // No ascent available along the Newton direction; accept the
            // point if the gradient is already tolerable.
            let grad = objective_gradient(adj, deg, &omega, alpha1, alpha2);
            converged = grad.iter().all(|&g| math::abs(g) < GRAD_TOL);
            break;
        }
    }
    NewtonOutcome {
        theta,
        iters,
        converged,
    }
}

/// Laplace approximation of the log prior mass of `z`:
/// maximize `g(t)` by damped Newton, then return
/// `g(t^) + (p/2) ln(2 pi) - ln det(-H)/2 - p ln B(a1, a2)`.
///
/// Newton starts from the moment-style guess
/// `w_j = (a1 + degree_j) / (a1 + a2 + p)` and restarts from `w = 1/2` if
/// the first run stalls. A run that exhausts its iteration budget is
/// returned with `converged = false`; a mode whose curvature is not
/// negative definite is an error.
pub fn laplace(z: &SparsityPattern, alpha1: f64, alpha2: f64) -> Result<LaplaceResult> {
    if !(alpha1 > 0.0 && alpha2 > 0.0) {
        return Err(Error::InvalidHyper(alloc::format!(
            "beta shapes alpha1 = {alpha1}, alpha2 = {alpha2} must be positive"
        )));
    }
    let p = z.dim();
    let adj = Adjacency::new(z);
    let deg = z.degrees();

    let start = DVector::from_iterator(
        p,
        deg.iter().map(|&d| {
            let w = (alpha1 + d as f64) / (alpha1 + alpha2 + p as f64);
            logit(w.clamp(1e-12, 1.0 - 1e-12))
        }),
    );
    let mut outcome = newton_from(&adj, &deg, start, alpha1, alpha2);
    let mut total_iters = outcome.iters;
    if !outcome.converged {
        let restart = DVector::from_element(p, 0.0);
        let second = newton_from(&adj, &deg, restart, alpha1, alpha2);
        total_iters += second.iters;
        let first_val = {
            let w: Vec<f64> = outcome.theta.iter().map(|&t| sigmoid(t)).collect();
            objective(&adj, &w, alpha1, alpha2)
        };
        let second_val = {
            let w: Vec<f64> = second.theta.iter().map(|&t| sigmoid(t)).collect();
            objective(&adj, &w, alpha1, alpha2)
        };
        if second.converged || second_val > first_val {
            outcome = second;
        }
    }

    let omega: Vec<f64> = outcome.theta.iter().map(|&t| sigmoid(t)).collect();
    check_open_unit(&omega).map_err(|_| {
        Error::LaplaceFailure("mode escaped to the boundary of the unit cube".into())
    })?;
    let hess = objective_hessian(&adj, &deg, &omega, alpha1, alpha2);
    let chol = nalgebra::linalg::Cholesky::new(-hess).ok_or_else(|| {
        Error::LaplaceFailure("curvature at the mode is not negative definite".into())
    })?;
    let hessian_logdet: f64 = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|&d| math::ln(d))
            .sum::<f64>();
    let g_at_mode = objective(&adj, &omega, alpha1, alpha2);
    let log_value = g_at_mode + 0.5 * p as f64 * math::ln(2.0 * core::f64::consts::PI)
        - 0.5 * hessian_logdet
        - p as f64 * math::ln_beta(alpha1, alpha2);

    Ok(LaplaceResult {
        log_value,
        mode: omega,
        newton_iters: total_iters,
        converged: outcome.converged,
        hessian_logdet,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::ln;

    #[test]
    fn integrand_matches_hand_value_at_flat_shapes() {
        // p = 2, no edge, w = (0.5, 0.5), a1 = a2 = 1: the beta terms
        // vanish and h = ln(1 - 0.25).
        let z = SparsityPattern::empty(2);
        let h = log_integrand(&z, &[0.5, 0.5], 1.0, 1.0).unwrap();
        assert!((h - ln(0.75)).abs() < 1e-14);
    }

    #[test]
    fn integrand_rejects_boundary_points() {
        let z = SparsityPattern::empty(2);
        assert!(matches!(
            log_integrand(&z, &[0.0, 0.5], 1.0, 1.0),
            Err(Error::OutOfDomain(_))
        ));
        assert!(matches!(
            log_integrand_gradient(&z, &[0.5, 1.0], 1.0, 1.0),
            Err(Error::OutOfDomain(_))
        ));
    }

    fn fd_gradient(z: &SparsityPattern, omega: &[f64], a1: f64, a2: f64, step: f64) -> Vec<f64> {
        (0..omega.len())
            .map(|j| {
                let mut hi = omega.to_vec();
                let mut lo = omega.to_vec();
                hi[j] += step;
                lo[j] -= step;
                (log_integrand(z, &hi, a1, a2).unwrap() - log_integrand(z, &lo, a1, a2).unwrap())
                    / (2.0 * step)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_central_differences() {
        let z = SparsityPattern::from_edges(4, &[(1, 0), (3, 1), (3, 2)]).unwrap();
        let omega = [0.3, 0.55, 0.42, 0.61];
        let (a1, a2) = (0.7, 2.3);
        let grad = log_integrand_gradient(&z, &omega, a1, a2).unwrap();
        let fd = fd_gradient(&z, &omega, a1, a2, 1e-5);
        for j in 0..4 {
            assert!(
                (grad[j] - fd[j]).abs() < 1e-6,
                "component {j}: {} vs {}",
                grad[j],
                fd[j]
            );
        }
    }

    #[test]
    fn hessian_matches_differenced_gradient() {
        let z = SparsityPattern::from_edges(4, &[(2, 0), (3, 2)]).unwrap();
        let omega = [0.35, 0.5, 0.62, 0.28];
        let (a1, a2) = (1.4, 0.9);
        let hess = log_integrand_hessian(&z, &omega, a1, a2).unwrap();
        let step = 1e-5;
        for k in 0..4 {
            let mut hi = omega.to_vec();
            let mut lo = omega.to_vec();
            hi[k] += step;
            lo[k] -= step;
            let ghi = log_integrand_gradient(&z, &hi, a1, a2).unwrap();
            let glo = log_integrand_gradient(&z, &lo, a1, a2).unwrap();
            for j in 0..4 {
                let fd = (ghi[j] - glo[j]) / (2.0 * step);
                assert!(
                    (hess[(j, k)] - fd).abs() < 1e-5,
                    "entry ({j}, {k}): {} vs {fd}",
                    hess[(j, k)]
                );
            }
        }
    }

    #[test]
    fn laplace_is_close_to_the_analytic_two_node_masses() {
        // At a1 = a2 = 1 the exact masses are E[w1 w2] = 1/4 (edge present)
        // and 1 - 1/4 = 3/4 (edge absent).
        let edge = SparsityPattern::from_edges(2, &[(1, 0)]).unwrap();
        let res = laplace(&edge, 1.0, 1.0).unwrap();
        assert!(res.converged);
        assert!(
            (res.log_value - ln(0.25)).abs() < 0.35,
            "log value {} vs {}",
            res.log_value,
            ln(0.25)
        );
        assert!(res.mode.iter().all(|&w| w > 0.0 && w < 1.0));

        let empty = SparsityPattern::empty(2);
        let res = laplace(&empty, 1.0, 1.0).unwrap();
        assert!(res.converged);
        assert!((res.log_value - ln(0.75)).abs() < 0.35);
    }

    #[test]
    fn laplace_handles_sparse_shapes_with_large_alpha2() {
        // Experiment-style shapes: a1 = 0.05, a2 = p^2. The mode sits near
        // the origin on the weight scale; Newton must still converge.
        let z = SparsityPattern::from_edges(8, &[(1, 0), (5, 2), (7, 3)]).unwrap();
        let res = laplace(&z, 0.05, 64.0).unwrap();
        assert!(res.converged, "iters = {}", res.newton_iters);
        assert!(res.log_value.is_finite());
        assert!(res.mode.iter().all(|&w| w > 0.0 && w < 0.5));
        // The gradient at the reported mode is tolerably flat.
        let theta_grad = {
            let adj = Adjacency::new(&z);
            let deg = z.degrees();
            objective_gradient(&adj, &deg, &res.mode, 0.05, 64.0)
        };
        assert!(theta_grad.iter().all(|&g| g.abs() < 1e-6));
    }
}
