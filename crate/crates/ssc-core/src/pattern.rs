//! Sparsity patterns over the below-diagonal entries of a unit lower
//! triangular factor, plus the perturbations and comparisons used by the
//! simulation drivers.
//!
//! Columns and rows are 0-based throughout the API. Column `j` of a `p x p`
//! factor can hold nonzeros in rows `j+1..p`; a pattern stores, per column,
//! the strictly increasing list of active row indices. Edges are written
//! `(row, col)` with `row > col` and enumerate in column-major order.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::factor::CholeskyFactor;
use crate::math::{self, Fnv1a};

/// Below-diagonal support of a unit lower triangular factor.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SparsityPattern {
    p: usize,
    /// `supports[j]` lists the active rows of column `j`, for `j < p - 1`.
    supports: Vec<Vec<usize>>,
}

impl SparsityPattern {
    /// Pattern with no active entries. Panics if `p < 2`.
    pub fn empty(p: usize) -> Self {
        assert!(p >= 2, "pattern dimension must be at least 2");
        SparsityPattern {
            p,
            supports: vec![Vec::new(); p - 1],
        }
    }

    /// Build from per-column support lists (one list per column `0..p-1`).
    pub fn new(p: usize, supports: Vec<Vec<usize>>) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidPattern(alloc::format!(
                "dimension {p} is below 2"
            )));
        }
        if supports.len() != p - 1 {
            return Err(Error::DimensionMismatch {
                expected: p - 1,
                found: supports.len(),
            });
        }
        for (j, sup) in supports.iter().enumerate() {
            for &k in sup {
                if k <= j || k >= p {
                    return Err(Error::InvalidPattern(alloc::format!(
                        "row {k} out of range for column {j} (p = {p})"
                    )));
                }
            }
            if sup.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidPattern(alloc::format!(
                    "support of column {j} is not strictly increasing"
                )));
            }
        }
        Ok(SparsityPattern { p, supports })
    }

    /// Build from `(row, col)` edge pairs in any order.
    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut pat = SparsityPattern::empty(p);
        for &(row, col) in edges {
            if !pat.insert(row, col)? {
                return Err(Error::InvalidPattern(alloc::format!(
                    "duplicate edge ({row}, {col})"
                )));
            }
        }
        Ok(pat)
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    /// Number of below-diagonal positions, `p (p - 1) / 2`.
    pub fn position_count(&self) -> usize {
        self.p * (self.p - 1) / 2
    }

    /// Support of column `j` (strictly increasing row indices).
    pub fn support(&self, j: usize) -> &[usize] {
        &self.supports[j]
    }

    pub fn supports(&self) -> &[Vec<usize>] {
        &self.supports
    }

    /// Total number of active entries.
    pub fn edge_count(&self) -> usize {
        self.supports.iter().map(Vec::len).sum()
    }

    /// Largest per-column support size.
    pub fn max_support_size(&self) -> usize {
        self.supports.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        col < self.supports.len() && self.supports[col].binary_search(&row).is_ok()
    }

    /// Active `(row, col)` pairs in column-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.supports
            .iter()
            .enumerate()
            .flat_map(|(j, sup)| sup.iter().map(move |&k| (k, j)))
    }

    /// Insert an edge; `Ok(false)` when already present.
    pub fn insert(&mut self, row: usize, col: usize) -> Result<bool> {
        if col >= self.p - 1 || row <= col || row >= self.p {
            return Err(Error::InvalidPattern(alloc::format!(
                "entry ({row}, {col}) is not below the diagonal of a {p} x {p} factor",
                p = self.p
            )));
        }
        match self.supports[col].binary_search(&row) {
            Ok(_) => Ok(false),
            Err(pos) => {
                self.supports[col].insert(pos, row);
                Ok(true)
            }
        }
    }

    /// Remove an edge; `Ok(false)` when absent.
    pub fn remove(&mut self, row: usize, col: usize) -> Result<bool> {
        if col >= self.p - 1 || row <= col || row >= self.p {
            return Err(Error::InvalidPattern(alloc::format!(
                "entry ({row}, {col}) is not below the diagonal of a {p} x {p} factor",
                p = self.p
            )));
        }
        match self.supports[col].binary_search(&row) {
            Ok(pos) => {
                self.supports[col].remove(pos);
                Ok(true)
            }
            Err(_) => Ok(false),
        }
    }

    /// True when every edge of `self` is an edge of `other`.
    pub fn is_submodel_of(&self, other: &SparsityPattern) -> bool {
        self.p == other.p && self.edges().all(|(k, j)| other.contains(k, j))
    }

    /// Node degrees over the undirected edge set (both endpoints count).
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.p];
        for (k, j) in self.edges() {
            deg[k] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Order-insensitive content hash (FNV-1a over dimension and edges).
    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write_u64(self.p as u64);
        for (k, j) in self.edges() {
            h.write_u64(k as u64);
            h.write_u64(j as u64);
        }
        h.finish()
    }
}

/// Support of the below-diagonal entries of `factor` exceeding `threshold`
/// in absolute value.
pub fn pattern_of_factor(factor: &CholeskyFactor, threshold: f64) -> SparsityPattern {
    assert!(threshold >= 0.0, "threshold must be nonnegative");
    let p = factor.dim();
    let mut supports = vec![Vec::new(); p - 1];
    for j in 0..p - 1 {
        for k in j + 1..p {
            if math::abs(factor.entry(k, j)) > threshold {
                supports[j].push(k);
            }
        }
    }
    SparsityPattern { p, supports }
}

/// The four "non-true model" constructions used in the posterior-ratio
/// experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PerturbCase {
    /// Uniform submodel with half (rounded up) of the edges.
    SubmodelHalf,
    /// Uniform supermodel with twice the edges.
    SupermodelDouble,
    /// Uniform pattern (any positions) with half the edges.
    RandomHalf,
    /// Uniform pattern (any positions) with twice the edges.
    RandomDouble,
}

impl PerturbCase {
    pub const ALL: [PerturbCase; 4] = [
        PerturbCase::SubmodelHalf,
        PerturbCase::SupermodelDouble,
        PerturbCase::RandomHalf,
        PerturbCase::RandomDouble,
    ];

    /// Conventional 1-based case number used in experiment tables.
    pub fn index(self) -> u8 {
        match self {
            PerturbCase::SubmodelHalf => 1,
            PerturbCase::SupermodelDouble => 2,
            PerturbCase::RandomHalf => 3,
            PerturbCase::RandomDouble => 4,
        }
    }

    pub fn from_index(i: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.index() == i)
    }
}

/// Offsets of each column's first position in the column-major enumeration
/// of below-diagonal entries.
fn column_offsets(p: usize) -> Vec<usize> {
    let mut off = Vec::with_capacity(p);
    let mut acc = 0usize;
    for j in 0..p - 1 {
        off.push(acc);
        acc += p - 1 - j;
    }
    off.push(acc);
    off
}

fn position_to_edge(offsets: &[usize], idx: usize) -> (usize, usize) {
    // Last offset entry is the total count; partition_point yields the column.
    let col = offsets.partition_point(|&o| o <= idx) - 1;
    let row = col + 1 + (idx - offsets[col]);
    (row, col)
}

fn pattern_from_positions(p: usize, offsets: &[usize], positions: &[usize]) -> SparsityPattern {
    let mut supports = vec![Vec::new(); p - 1];
    for &idx in positions {
        let (row, col) = position_to_edge(offsets, idx);
        supports[col].push(row);
    }
    for sup in &mut supports {
        sup.sort_unstable();
    }
    SparsityPattern { p, supports }
}

/// Draw a perturbed pattern around `z0` according to `case`.
///
/// Cases with a fixed edge budget sample uniformly without replacement;
/// the free-position cases redraw until the result differs from `z0`.
pub fn perturb<R: Rng>(
    z0: &SparsityPattern,
    case: PerturbCase,
    rng: &mut R,
) -> Result<SparsityPattern> {
    let edge_count = z0.edge_count();
    if edge_count == 0 {
        return Err(Error::InvalidPattern(
            "perturbation requires a nonempty pattern".into(),
        ));
    }
    let p = z0.dim();
    let capacity = z0.position_count();
    let half = edge_count.div_ceil(2);
    let double = 2 * edge_count;
    let offsets = column_offsets(p);

    match case {
        PerturbCase::SubmodelHalf => {
            let edges: Vec<(usize, usize)> = z0.edges().collect();
            let picked = rand::seq::index::sample(rng, edges.len(), half);
            let chosen: Vec<(usize, usize)> = picked.iter().map(|i| edges[i]).collect();
            SparsityPattern::from_edges(p, &chosen)
        }
        PerturbCase::SupermodelDouble => {
            if double > capacity {
                return Err(Error::InfeasibleEdgeCount {
                    requested: double,
                    capacity,
                });
            }
            let absent: Vec<usize> = (0..capacity)
                .filter(|&i| {
                    let (row, col) = position_to_edge(&offsets, i);
                    !z0.contains(row, col)
                })
                .collect();
            let picked = rand::seq::index::sample(rng, absent.len(), edge_count);
            let mut out = z0.clone();
            for i in picked.iter() {
                let (row, col) = position_to_edge(&offsets, absent[i]);
                out.insert(row, col)?;
            }
            Ok(out)
        }
        PerturbCase::RandomHalf | PerturbCase::RandomDouble => {
            let target = if case == PerturbCase::RandomHalf {
                half
            } else {
                double
            };
            if target > capacity {
                return Err(Error::InfeasibleEdgeCount {
                    requested: target,
                    capacity,
                });
            }
            loop {
                let picked: Vec<usize> = rand::seq::index::sample(rng, capacity, target).into_vec();
                let candidate = pattern_from_positions(p, &offsets, &picked);
                if candidate != *z0 {
                    return Ok(candidate);
                }
            }
        }
    }
}

/// Below-diagonal confusion counts of an estimated pattern against a
/// reference pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }
}

/// Confusion counts of `z` (estimate) against `z0` (truth) over all
/// `p (p - 1) / 2` below-diagonal positions.
pub fn confusion_counts(z: &SparsityPattern, z0: &SparsityPattern) -> Result<ConfusionCounts> {
    if z.dim() != z0.dim() {
        return Err(Error::DimensionMismatch {
            expected: z0.dim(),
            found: z.dim(),
        });
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fneg = 0usize;
    for j in 0..z.dim() - 1 {
        let (a, b) = (z.support(j), z0.support(j));
        let mut ia = 0;
        let mut ib = 0;
        while ia < a.len() && ib < b.len() {
            match a[ia].cmp(&b[ib]) {
                core::cmp::Ordering::Equal => {
                    tp += 1;
                    ia += 1;
                    ib += 1;
                }
                core::cmp::Ordering::Less => {
                    fp += 1;
                    ia += 1;
                }
                core::cmp::Ordering::Greater => {
                    fneg += 1;
                    ib += 1;
                }
            }
        }
        fp += a.len() - ia;
        fneg += b.len() - ib;
    }
    let total = z.position_count();
    Ok(ConfusionCounts {
        true_pos: tp,
        false_pos: fp,
        false_neg: fneg,
        true_neg: total - tp - fp - fneg,
    })
}
