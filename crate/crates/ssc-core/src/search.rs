//! Candidate generation by threshold grid, shotgun stochastic hill
//! climbing, and the exhaustive enumeration oracle.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::hyper::{Hyperparameters, PriorKind};
use crate::math;
use crate::par::par_map;
use crate::pattern::{pattern_of_factor, SparsityPattern};
use crate::priors;
use crate::scoring::{column_loglik, total_score, ScoredPattern};
use crate::stats::{modified_cholesky, SampleStats, VARIANCE_FLOOR};

/// Threshold grid, ridge, and search budget knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// First threshold of the grid.
    pub grid_start: f64,
    /// Exclusive upper end of the grid.
    pub grid_end: f64,
    pub grid_step: f64,
    /// Ridge added to `S` before inversion.
    pub ridge: f64,
    /// Hill-climbing step budget per seed.
    pub sss_iterations: usize,
    /// Retained model count (and the seed budget the selection driver
    /// hands to the refiner).
    pub sss_top_m: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            grid_start: 0.1,
            grid_end: 0.5,
            grid_step: 0.0001,
            ridge: 0.5,
            sss_iterations: 1000,
            sss_top_m: 20,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grid_start < self.grid_end) || !(self.grid_start >= 0.0) {
            return Err(Error::InvalidHyper(alloc::format!(
                "threshold grid [{}, {}) is empty or negative",
                self.grid_start,
                self.grid_end
            )));
        }
        if !(self.grid_step > 0.0) {
            return Err(Error::InvalidHyper("grid step must be positive".into()));
        }
        if !(self.ridge > 0.0) {
            return Err(Error::InvalidHyper("ridge must be positive".into()));
        }
        if self.sss_top_m == 0 {
            return Err(Error::InvalidHyper("sss_top_m must be at least 1".into()));
        }
        Ok(())
    }
}

/// Deduplicated threshold-grid candidates, in first-occurrence order.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub patterns: Vec<SparsityPattern>,
    /// Number of (pattern, column) pairs whose support was truncated to the
    /// cap among the retained candidates.
    pub truncated_columns: usize,
}

/// Threshold the modified Cholesky factor of `(S + ridge I)^-1` over the
/// grid, truncating any over-cap column to its largest-magnitude entries.
pub fn threshold_candidates(
    stats: &SampleStats,
    cfg: &SearchConfig,
    max_col_support: usize,
) -> Result<CandidateSet> {
    cfg.validate()?;
    let p = stats.p();
    let mut w = stats.s().clone();
    for i in 0..p {
        w[(i, i)] += cfg.ridge;
    }
    let chol = nalgebra::linalg::Cholesky::new(w)
        .ok_or_else(|| Error::NotPositiveDefinite("ridged sample covariance".into()))?;
    let factor = modified_cholesky(&chol.inverse())?;

    let steps = math::ceil((cfg.grid_end - cfg.grid_start) / cfg.grid_step - 1e-9) as usize;
    let mut seen = alloc::collections::BTreeSet::new();
    let mut patterns = Vec::new();
    let mut truncated_columns = 0usize;
    for k in 0..=steps {
        let t = cfg.grid_start + k as f64 * cfg.grid_step;
        if t >= cfg.grid_end {
            break;
        }
        let mut pat = pattern_of_factor(&factor, t);
        let truncated = truncate_to_cap(&mut pat, &factor, max_col_support);
        if seen.insert(pat.clone()) {
            truncated_columns += truncated;
            patterns.push(pat);
        }
    }
    Ok(CandidateSet {
        patterns,
        truncated_columns,
    })
}

/// Truncate over-cap columns to the `cap` largest-magnitude factor entries;
/// returns how many columns were cut.
fn truncate_to_cap(
    pat: &mut SparsityPattern,
    factor: &crate::factor::CholeskyFactor,
    cap: usize,
) -> usize {
    let p = pat.dim();
    let mut cut = 0usize;
    for j in 0..p - 1 {
        if pat.support(j).len() > cap {
            let mut rows: Vec<usize> = pat.support(j).to_vec();
            rows.sort_by(|&a, &b| {
                math::abs(factor.entry(b, j))
                    .total_cmp(&math::abs(factor.entry(a, j)))
                    .then(a.cmp(&b))
            });
            for &row in &rows[cap..] {
                pat.remove(row, j).expect("row came from the support");
            }
            cut += 1;
        }
    }
    cut
}

/// Search outcome: the best pattern, the retained top list, and bookkeeping.
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best: ScoredPattern,
    /// Distinct scored patterns, best first, at most `sss_top_m` entries.
    pub top: Vec<ScoredPattern>,
    /// Scoring evaluations performed (seeds and neighbors).
    pub candidates_evaluated: usize,
    /// Running best score, one entry per completed hill-climbing iteration
    /// (walks concatenated in seed order); non-decreasing.
    pub trace: Vec<f64>,
    /// Messages from neighbors that failed to score and were skipped.
    pub errors: Vec<String>,
}

/// Ranking order for scored patterns: higher total first, ties broken by
/// fewer edges, then by lexicographically smaller edge list.
pub(crate) fn rank_cmp(a: &ScoredPattern, b: &ScoredPattern) -> core::cmp::Ordering {
    b.total
        .total_cmp(&a.total)
        .then_with(|| a.pattern.edge_count().cmp(&b.pattern.edge_count()))
        .then_with(|| edge_lex_cmp(&a.pattern, &b.pattern))
}

/// Lexicographic order on the column-major edge list.
fn edge_lex_cmp(a: &SparsityPattern, b: &SparsityPattern) -> core::cmp::Ordering {
    let mut ea = a.edges().map(|(k, j)| (j, k));
    let mut eb = b.edges().map(|(k, j)| (j, k));
    loop {
        match (ea.next(), eb.next()) {
            (None, None) => return core::cmp::Ordering::Equal,
            (None, Some(_)) => return core::cmp::Ordering::Less,
            (Some(_), None) => return core::cmp::Ordering::Greater,
            (Some(x), Some(y)) => {
                let c = x.cmp(&y);
                if c != core::cmp::Ordering::Equal {
                    return c;
                }
            }
        }
    }
}

fn insert_top(top: &mut Vec<ScoredPattern>, cand: ScoredPattern, m: usize) {
    if top.iter().any(|t| t.pattern == cand.pattern) {
        return;
    }
    let pos = top.partition_point(|t| rank_cmp(t, &cand) != core::cmp::Ordering::Greater);
    top.insert(pos, cand);
    top.truncate(m);
}

/// One candidate move in the add / delete / within-column swap
/// neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Move {
    Add { col: usize, row: usize },
    Del { col: usize, row: usize },
    Swap { col: usize, out: usize, inn: usize },
}

impl Move {
    fn col(&self) -> usize {
        match *self {
            Move::Add { col, .. } | Move::Del { col, .. } | Move::Swap { col, .. } => col,
        }
    }

    fn edge_delta(&self) -> isize {
        match self {
            Move::Add { .. } => 1,
            Move::Del { .. } => -1,
            Move::Swap { .. } => 0,
        }
    }

    fn apply(&self, pat: &mut SparsityPattern) {
        match *self {
            Move::Add { col, row } => {
                pat.insert(row, col).expect("add move is in range");
            }
            Move::Del { col, row } => {
                pat.remove(row, col).expect("del move is in range");
            }
            Move::Swap { col, out, inn } => {
                pat.remove(out, col).expect("swap source present");
                pat.insert(inn, col).expect("swap target absent");
            }
        }
    }

    fn new_support(&self, current: &[usize]) -> Vec<usize> {
        let mut sup = current.to_vec();
        match *self {
            Move::Add { row, .. } => {
                let pos = sup.binary_search(&row).unwrap_err();
                sup.insert(pos, row);
            }
            Move::Del { row, .. } => {
                let pos = sup.binary_search(&row).unwrap();
                sup.remove(pos);
            }
            Move::Swap { out, inn, .. } => {
                let pos = sup.binary_search(&out).unwrap();
                sup.remove(pos);
                let pos = sup.binary_search(&inn).unwrap_err();
                sup.insert(pos, inn);
            }
        }
        sup
    }
}

/// Cached factorization of one column's support submatrix, for O(|Z|^2)
/// add-move evaluation by a bordered Cholesky update.
struct ColumnAugment {
    /// Lower Cholesky factor of `S~[Z, Z]`.
    chol: DMatrix<f64>,
    /// `chol^-1 S~[Z, j]`.
    u: DVector<f64>,
    logdet: f64,
    condvar: f64,
}

impl ColumnAugment {
    fn build(stats: &SampleStats, col: usize, support: &[usize]) -> Option<Self> {
        let sub = stats.tilde_principal(support);
        let chol = nalgebra::linalg::Cholesky::new(sub)?;
        let l = chol.unpack();
        let v = stats.tilde_column(support, col);
        let u = l.solve_lower_triangular(&v)?;
        let logdet = 2.0 * l.diagonal().iter().map(|&d| math::ln(d)).sum::<f64>();
        let condvar = stats.s_tilde()[(col, col)] - u.norm_squared();
        Some(ColumnAugment {
            chol: l,
            u,
            logdet,
            condvar,
        })
    }

    /// Conditional variance and support log-determinant after adding `row`.
    fn with_row(&self, stats: &SampleStats, col: usize, support: &[usize], row: usize) -> Option<(f64, f64)> {
        let v = stats.tilde_column(support, row);
        let w = self.chol.solve_lower_triangular(&v)?;
        let d = stats.s_tilde()[(row, row)] - w.norm_squared();
        if !(d > VARIANCE_FLOOR) {
            return None;
        }
        let r = stats.s_tilde()[(row, col)] - w.dot(&self.u);
        let cv = self.condvar - r * r / d;
        Some((cv, self.logdet + math::ln(d)))
    }
}

use crate::scoring::column_term_from_parts as term_from_parts;

struct WalkOutcome {
    top: Vec<ScoredPattern>,
    iteration_best: Vec<f64>,
    evaluated: usize,
    errors: Vec<String>,
}

const WALK_ERROR_LIMIT: usize = 16;

fn record_error(errors: &mut Vec<String>, overflow: &mut usize, message: String) {
    if errors.len() < WALK_ERROR_LIMIT {
        errors.push(message);
    } else {
        *overflow += 1;
    }
}

/// Hill-climb from one seed with best-improvement moves.
fn walk_one(
    seed: &SparsityPattern,
    stats: &SampleStats,
    hyper: &Hyperparameters,
    cfg: &SearchConfig,
) -> WalkOutcome {
    let mut errors = Vec::new();
    let mut overflow = 0usize;
    let mut rng = ChaCha12Rng::seed_from_u64(math::mix_seed(cfg.seed, &[seed.content_hash()]));
    let p = stats.p();
    let cap = hyper.max_col_support;
    let swap_budget = 10 * p;

    let mut current = match total_score(seed, stats, hyper) {
        Ok(s) => s,
        Err(e) => {
            return WalkOutcome {
                top: Vec::new(),
                iteration_best: Vec::new(),
                evaluated: 0,
                errors: alloc::vec![alloc::format!("seed failed to score: {e}")],
            }
        }
    };
    let mut evaluated = 1usize;
    let mut top = Vec::new();
    insert_top(&mut top, current.clone(), cfg.sss_top_m);
    let mut iteration_best = Vec::new();

    // Fast prior lookups when the mass depends on the edge count alone.
    let prior_fast = hyper.prior_kind != PriorKind::Multiplicative;

    for _ in 0..cfg.sss_iterations {
        let k_now = current.pattern.edge_count();
        let prior_at = |edges: usize| -> Result<f64> {
            match priors::log_prior_by_edges(p, edges, hyper) {
                Some(r) => r,
                None => unreachable!("fast prior queried for multiplicative kind"),
            }
        };
        let mut prior_cache = [f64::NAN; 3]; // K-1, K, K+1
        if prior_fast {
            prior_cache[1] = match prior_at(k_now) {
                Ok(v) => v,
                Err(e) => {
                    record_error(&mut errors, &mut overflow, e.to_string());
                    break;
                }
            };
            if k_now > 0 {
                prior_cache[0] = prior_at(k_now - 1).unwrap_or(f64::NAN);
            }
            if k_now < current.pattern.position_count() {
                prior_cache[2] = prior_at(k_now + 1).unwrap_or(f64::NAN);
            }
        }

        // Per-column augments (for adds) and absent-row lists.
        let mut augments: Vec<Option<ColumnAugment>> = Vec::with_capacity(p - 1);
        let mut absents: Vec<Vec<usize>> = Vec::with_capacity(p - 1);
        for j in 0..p - 1 {
            let sup = current.pattern.support(j);
            augments.push(ColumnAugment::build(stats, j, sup));
            let mut absent = Vec::with_capacity(p - 1 - j - sup.len());
            let mut s_iter = sup.iter().peekable();
            for row in j + 1..p {
                if s_iter.peek() == Some(&&row) {
                    s_iter.next();
                } else {
                    absent.push(row);
                }
            }
            absents.push(absent);
        }

        let mut best: Option<(f64, Move, f64, f64)> = None;
        let mut consider = |mv: Move,
                            new_col: f64,
                            new_prior: f64,
                            current: &ScoredPattern,
                            top: &mut Vec<ScoredPattern>,
                            evaluated: &mut usize| {
            *evaluated += 1;
            let col = mv.col();
            let total =
                current.total - current.column_terms[col] - current.prior_term + new_col + new_prior;
            if total.is_nan() {
                return;
            }
            let improves = match &best {
                None => true,
                Some((bt, ..)) => total > *bt,
            };
            if improves {
                best = Some((total, mv, new_col, new_prior));
            }
            // Retain in the top list when it beats the current cutoff.
            let qualifies = top.len() < cfg.sss_top_m
                || total > top.last().map(|t| t.total).unwrap_or(f64::NEG_INFINITY);
            if qualifies {
                let mut pat = current.pattern.clone();
                mv.apply(&mut pat);
                let mut column_terms = current.column_terms.clone();
                column_terms[col] = new_col;
                let scored = ScoredPattern {
                    pattern: pat,
                    total,
                    prior_term: new_prior,
                    column_terms,
                    context: current.context,
                    cap_exceeded: false,
                };
                insert_top(top, scored, cfg.sss_top_m);
            }
        };

        // Multiplicative prior needs the full pattern per neighbor.
        let neighbor_prior = |mv: &Move, current: &ScoredPattern| -> Result<f64> {
            if prior_fast {
                let v = match mv.edge_delta() {
                    -1 => prior_cache[0],
                    0 => prior_cache[1],
                    _ => prior_cache[2],
                };
                if v.is_nan() {
                    return Err(Error::InvalidHyper("prior unavailable at edge count".into()));
                }
                Ok(v)
            } else {
                let mut pat = current.pattern.clone();
                mv.apply(&mut pat);
                priors::log_prior(&pat, hyper)
            }
        };

        // Phase A: adds, skipping full columns.
        for col in 0..p - 1 {
            let sup = current.pattern.support(col);
            if sup.len() >= cap {
                continue;
            }
            for &row in &absents[col] {
                let mv = Move::Add { col, row };
                let parts = augments[col]
                    .as_ref()
                    .and_then(|a| a.with_row(stats, col, sup, row));
                let term = match parts {
                    Some((cv, logdet)) => {
                        term_from_parts(stats, hyper, col, cv, logdet, sup.len() + 1)
                    }
                    None => column_loglik(stats, col, &mv.new_support(sup), hyper),
                };
                match (term, neighbor_prior(&mv, &current)) {
                    (Ok(t), Ok(pr)) => consider(mv, t, pr, &current, &mut top, &mut evaluated),
                    (Err(e), _) | (_, Err(e)) => {
                        record_error(&mut errors, &mut overflow, e.to_string())
                    }
                }
            }
        }
        // Phase B: deletes.
        for col in 0..p - 1 {
            let sup = current.pattern.support(col);
            for &row in sup {
                let mv = Move::Del { col, row };
                let term = column_loglik(stats, col, &mv.new_support(sup), hyper);
                match (term, neighbor_prior(&mv, &current)) {
                    (Ok(t), Ok(pr)) => consider(mv, t, pr, &current, &mut top, &mut evaluated),
                    (Err(e), _) | (_, Err(e)) => {
                        record_error(&mut errors, &mut overflow, e.to_string())
                    }
                }
            }
        }
        // Phase C: within-column swaps, subsampled above the budget.
        let mut swap_offsets = Vec::with_capacity(p);
        let mut total_swaps = 0usize;
        for col in 0..p - 1 {
            swap_offsets.push(total_swaps);
            total_swaps += current.pattern.support(col).len() * absents[col].len();
        }
        swap_offsets.push(total_swaps);
        let chosen: Vec<usize> = if total_swaps > swap_budget {
            let mut idx = rand::seq::index::sample(&mut rng, total_swaps, swap_budget).into_vec();
            idx.sort_unstable();
            idx
        } else {
            (0..total_swaps).collect()
        };
        for flat in chosen {
            let col = swap_offsets.partition_point(|&o| o <= flat) - 1;
            let local = flat - swap_offsets[col];
            let n_absent = absents[col].len();
            let sup = current.pattern.support(col);
            let mv = Move::Swap {
                col,
                out: sup[local / n_absent],
                inn: absents[col][local % n_absent],
            };
            let term = column_loglik(stats, col, &mv.new_support(sup), hyper);
            match (term, neighbor_prior(&mv, &current)) {
                (Ok(t), Ok(pr)) => consider(mv, t, pr, &current, &mut top, &mut evaluated),
                (Err(e), _) | (_, Err(e)) => record_error(&mut errors, &mut overflow, e.to_string()),
            }
        }

        match best {
            Some((total, mv, new_col, new_prior)) if total > current.total => {
                let col = mv.col();
                mv.apply(&mut current.pattern);
                current.column_terms[col] = new_col;
                current.prior_term = new_prior;
                current.total = new_prior + current.column_terms.iter().sum::<f64>();
                current.cap_exceeded = false;
                iteration_best.push(current.total);
            }
            _ => {
                iteration_best.push(current.total);
                break;
            }
        }
    }

    if overflow > 0 {
        errors.push(alloc::format!("... and {overflow} more scoring errors"));
    }
    WalkOutcome {
        top,
        iteration_best,
        evaluated,
        errors,
    }
}

/// Refine seed patterns by shotgun stochastic hill climbing.
///
/// Each seed gets its own deterministic walk (the walk generator is derived
/// from the configured seed and the pattern content, so duplicated seeds
/// are idempotent). Every scored pattern competes for the retained top
/// list; the move taken at each step is the best-improvement neighbor.
pub fn sss_refine(
    seeds: &[SparsityPattern],
    stats: &SampleStats,
    hyper: &Hyperparameters,
    cfg: &SearchConfig,
) -> Result<SearchResult> {
    cfg.validate()?;
    hyper.validate()?;
    if seeds.is_empty() {
        return Err(Error::SearchExhausted("no seeds supplied".into()));
    }
    for s in seeds {
        if s.dim() != stats.p() {
            return Err(Error::DimensionMismatch {
                expected: stats.p(),
                found: s.dim(),
            });
        }
    }

    let outcomes = par_map(seeds, |seed| walk_one(seed, stats, hyper, cfg));

    let mut top: Vec<ScoredPattern> = Vec::new();
    let mut trace = Vec::new();
    let mut evaluated = 0usize;
    let mut errors = Vec::new();
    let mut running = f64::NEG_INFINITY;
    for out in outcomes {
        evaluated += out.evaluated;
        errors.extend(out.errors);
        for v in out.iteration_best {
            running = running.max(v);
            trace.push(running);
        }
        for cand in out.top {
            insert_top(&mut top, cand, cfg.sss_top_m);
        }
    }
    let best = top.first().cloned().ok_or_else(|| {
        Error::SearchExhausted(
            errors
                .first()
                .cloned()
                .unwrap_or_else(|| "every seed failed".to_string()),
        )
    })?;
    Ok(SearchResult {
        best,
        top,
        candidates_evaluated: evaluated,
        trace,
        errors,
    })
}

/// Default cap on the exhaustively enumerable model space.
pub const EXHAUSTIVE_LIMIT: u128 = 1 << 15;

/// Score every pattern and return the maximizer (ties: fewer edges, then
/// lexicographically smaller edge list). Guarded by [`EXHAUSTIVE_LIMIT`].
pub fn exhaustive_mode(stats: &SampleStats, hyper: &Hyperparameters) -> Result<ScoredPattern> {
    exhaustive_mode_with_limit(stats, hyper, EXHAUSTIVE_LIMIT)
}

/// [`exhaustive_mode`] with a caller-chosen guard.
pub fn exhaustive_mode_with_limit(
    stats: &SampleStats,
    hyper: &Hyperparameters,
    limit: u128,
) -> Result<ScoredPattern> {
    hyper.validate()?;
    let p = stats.p();
    let positions = p * (p - 1) / 2;
    if positions >= 128 || (1u128 << positions) > limit {
        return Err(Error::SearchSpaceTooLarge {
            patterns: if positions >= 128 {
                u128::MAX
            } else {
                1u128 << positions
            },
            limit,
        });
    }
    let edges: Vec<(usize, usize)> = {
        let mut v = Vec::with_capacity(positions);
        for j in 0..p - 1 {
            for k in j + 1..p {
                v.push((k, j));
            }
        }
        v
    };
    let total = 1u64 << positions;
    let codes: Vec<u64> = (0..total).collect();
    let scored = par_map(&codes, |&bits| {
        let active: Vec<(usize, usize)> = edges
            .iter()
            .enumerate()
            .filter(|(i, _)| bits >> i & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        let z = SparsityPattern::from_edges(p, &active).expect("enumerated edges are valid");
        total_score(&z, stats, hyper)
    });
    let mut best: Option<ScoredPattern> = None;
    for s in scored {
        let s = s?;
        best = Some(match best {
            None => s,
            Some(b) => {
                if rank_cmp(&s, &b) == core::cmp::Ordering::Less {
                    s
                } else {
                    b
                }
            }
        });
    }
    Ok(best.expect("at least the empty pattern was scored"))
}
