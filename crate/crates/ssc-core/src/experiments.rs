//! Ground-truth generation, the posterior-ratio and selection experiments,
//! and support-recovery metrics.
//!
//! Replications are independent jobs keyed by `(p, rep)`; every random
//! stream is derived from the experiment seed and the job key, so tables
//! are reproducible at any thread count and rows are emitted in sorted
//! order regardless of execution order.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::factor::CholeskyFactor;
use crate::hyper::{Hyperparameters, PriorKind};
use crate::math;
use crate::par::par_map;
use crate::pattern::{
    confusion_counts, pattern_of_factor, perturb, ConfusionCounts, PerturbCase, SparsityPattern,
};
use crate::scoring::total_score;
use crate::search::{rank_cmp, sss_refine, threshold_candidates, SearchConfig};
use crate::stats::{sample_gaussian, SampleStats};

/// Ground-truth description: dimension, fraction of active below-diagonal
/// entries, and their common value.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSpec {
    pub p: usize,
    pub sparsity: f64,
    pub signal: f64,
    pub seed: u64,
}

impl TruthSpec {
    pub fn new(p: usize, sparsity: f64, seed: u64) -> Self {
        TruthSpec {
            p,
            sparsity,
            signal: 0.5,
            seed,
        }
    }
}

/// Draw a true factor: `round(sparsity * p(p-1)/2)` positions chosen
/// uniformly without replacement are set to `signal`, `D = I`.
pub fn generate_truth(spec: &TruthSpec) -> Result<(CholeskyFactor, SparsityPattern)> {
    if spec.p < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: spec.p,
        });
    }
    if !(spec.sparsity > 0.0 && spec.sparsity < 1.0) {
        return Err(Error::InvalidHyper(alloc::format!(
            "sparsity = {} must lie strictly inside (0, 1)",
            spec.sparsity
        )));
    }
    if spec.signal == 0.0 || !spec.signal.is_finite() {
        return Err(Error::InvalidHyper("signal must be nonzero".into()));
    }
    let positions = spec.p * (spec.p - 1) / 2;
    let edges = math::round(spec.sparsity * positions as f64) as usize;
    if edges < 1 {
        return Err(Error::InfeasibleEdgeCount {
            requested: edges,
            capacity: positions,
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let picked = rand::seq::index::sample(&mut rng, positions, edges);

    let mut l = nalgebra::DMatrix::identity(spec.p, spec.p);
    let mut flat_to_edge = Vec::with_capacity(positions);
    for j in 0..spec.p - 1 {
        for k in j + 1..spec.p {
            flat_to_edge.push((k, j));
        }
    }
    for idx in picked.iter() {
        let (k, j) = flat_to_edge[idx];
        l[(k, j)] = spec.signal;
    }
    let factor = CholeskyFactor::new(l, nalgebra::DVector::from_element(spec.p, 1.0))?;
    let z0 = pattern_of_factor(&factor, 0.0);
    Ok((factor, z0))
}

/// PPV, TPR, and MCC of a confusion table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub ppv: f64,
    pub tpr: f64,
    pub mcc: f64,
    pub counts: ConfusionCounts,
}

/// Compute PPV = TP/(TP+FP), TPR = TP/(TP+FN), and Matthews correlation
/// `(TP TN - FP FN) / sqrt((TP+FP)(TP+FN)(TN+FP)(TN+FN))`.
///
/// Any zero factor in a denominator maps the metric to 0.
pub fn metrics(counts: ConfusionCounts) -> MetricsRow {
    let tp = counts.true_pos as f64;
    let fp = counts.false_pos as f64;
    let fneg = counts.false_neg as f64;
    let tn = counts.true_neg as f64;
    let ppv = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let tpr = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
    let denom_sq = (tp + fp) * (tp + fneg) * (tn + fp) * (tn + fneg);
    let mcc = if denom_sq > 0.0 {
        (tp * tn - fp * fneg) / math::sqrt(denom_sq)
    } else {
        0.0
    };
    MetricsRow {
        ppv,
        tpr,
        mcc,
        counts,
    }
}

/// One posterior-ratio measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioRow {
    pub p: usize,
    pub n: usize,
    /// 1-based perturbation case number.
    pub case: u8,
    pub prior: PriorKind,
    pub rep: usize,
    pub log_ratio: f64,
}

fn prior_rank(k: PriorKind) -> u8 {
    match k {
        PriorKind::BetaMixture => 0,
        PriorKind::Multiplicative => 1,
        PriorKind::ErdosRenyi => 2,
    }
}

/// Posterior-ratio experiment: for each dimension, draw a truth at the
/// given sparsity, sample `n = floor(p / 3)` observations, and measure
/// `log posterior(Z_case) - log posterior(Z_0)` for all four perturbation
/// cases under each requested prior.
///
/// Hyperparameters default to [`Hyperparameters::scaled_to`] (with
/// `prior_kind` replaced per prior); pass `overrides` to pin them. The
/// per-column support cap stays uncapped here so that doubled supermodels
/// score finitely.
pub fn ratio_experiment(
    p_list: &[usize],
    sparsity: f64,
    overrides: Option<&Hyperparameters>,
    priors: &[PriorKind],
    reps: usize,
    seed: u64,
) -> Result<Vec<RatioRow>> {
    if priors.is_empty() || p_list.is_empty() || reps == 0 {
        return Err(Error::InvalidHyper(
            "ratio experiment needs dimensions, priors, and at least one rep".into(),
        ));
    }
    let mut jobs = Vec::new();
    for &p in p_list {
        if p < 6 {
            return Err(Error::DimensionMismatch {
                expected: 6,
                found: p,
            });
        }
        for rep in 0..reps {
            jobs.push((p, rep));
        }
    }

    let results = par_map(&jobs, |&(p, rep)| -> Result<Vec<RatioRow>> {
        let context = |what: &str| alloc::format!("p={p} rep={rep} {what}");
        let n = p / 3;
        let truth = TruthSpec {
            p,
            sparsity,
            signal: 0.5,
            seed: math::mix_seed(seed, &[0x74, p as u64, rep as u64]),
        };
        let (l0, z0) = generate_truth(&truth).map_err(|e| e.in_context(context("truth")))?;
        let mut data_rng =
            ChaCha12Rng::seed_from_u64(math::mix_seed(seed, &[0x64, p as u64, rep as u64]));
        let y = sample_gaussian(&l0, n, &mut data_rng)
            .map_err(|e| e.in_context(context("data")))?;

        let mut rows = Vec::with_capacity(4 * priors.len());
        for &prior in priors {
            let hyper = match overrides {
                Some(h) => {
                    let mut h = h.clone();
                    h.prior_kind = prior;
                    h
                }
                None => Hyperparameters::scaled_to(p, n, prior),
            };
            let stats = SampleStats::from_data(&y, hyper.tau_sq)
                .map_err(|e| e.in_context(context("stats")))?;
            let base = total_score(&z0, &stats, &hyper)
                .map_err(|e| e.in_context(context("truth score")))?;
            for case in PerturbCase::ALL {
                let ctx = alloc::format!("p={p} case={} rep={rep}", case.index());
                let mut case_rng = ChaCha12Rng::seed_from_u64(math::mix_seed(
                    seed,
                    &[0x70, p as u64, rep as u64, case.index() as u64],
                ));
                let z = perturb(&z0, case, &mut case_rng)
                    .map_err(|e| e.in_context(ctx.clone()))?;
                let scored =
                    total_score(&z, &stats, &hyper).map_err(|e| e.in_context(ctx.clone()))?;
                let log_ratio = scored.ratio_to(&base).map_err(|e| e.in_context(ctx))?;
                rows.push(RatioRow {
                    p,
                    n,
                    case: case.index(),
                    prior,
                    rep,
                    log_ratio,
                });
            }
        }
        Ok(rows)
    });

    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| {
        (a.p, a.case, prior_rank(a.prior), a.rep).cmp(&(b.p, b.case, prior_rank(b.prior), b.rep))
    });
    Ok(rows)
}

/// One selection replication.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub p: usize,
    pub n: usize,
    pub rep: usize,
    pub counts: ConfusionCounts,
    pub ppv: f64,
    pub tpr: f64,
    pub mcc: f64,
    pub best_total: f64,
    pub edges_true: usize,
    pub edges_selected: usize,
    /// Distinct threshold candidates scored.
    pub candidates: usize,
    /// Candidate columns truncated to the support cap.
    pub truncated_columns: usize,
}

/// Per-dimension means.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionSummary {
    pub p: usize,
    pub n: usize,
    pub reps: usize,
    pub mean_ppv: f64,
    pub mean_tpr: f64,
    pub mean_mcc: f64,
}

#[derive(Debug, Clone)]
pub struct SelectionOutcome {
    pub rows: Vec<SelectionRow>,
    pub summaries: Vec<SelectionSummary>,
}

/// Selection experiment: generate truth and data per `(p, rep)`, build
/// threshold candidates, refine around the best-scoring `sss_top_m` of
/// them, and compare the winner's support against the truth.
///
/// Every threshold candidate is scored and eligible to win; walks start
/// only from the retained top so the budget stays bounded. `n` defaults to
/// `floor(p / 3)`; hyperparameters default to
/// [`Hyperparameters::selection_defaults`] for the given prior.
pub fn selection_experiment(
    p_list: &[usize],
    n_override: Option<usize>,
    sparsity: f64,
    search: &SearchConfig,
    hyper_override: Option<&Hyperparameters>,
    prior: PriorKind,
    reps: usize,
    seed: u64,
) -> Result<SelectionOutcome> {
    if p_list.is_empty() || reps == 0 {
        return Err(Error::InvalidHyper(
            "selection experiment needs dimensions and at least one rep".into(),
        ));
    }
    search.validate()?;
    let mut jobs = Vec::new();
    for &p in p_list {
        if p < 6 {
            return Err(Error::DimensionMismatch {
                expected: 6,
                found: p,
            });
        }
        for rep in 0..reps {
            jobs.push((p, rep));
        }
    }

    let results = par_map(&jobs, |&(p, rep)| -> Result<SelectionRow> {
        let context = alloc::format!("p={p} rep={rep}");
        let n = n_override.unwrap_or(p / 3).max(2);
        let hyper = match hyper_override {
            Some(h) => {
                let mut h = h.clone();
                h.prior_kind = prior;
                h
            }
            None => Hyperparameters::selection_defaults(p, n, prior),
        };
        let truth = TruthSpec {
            p,
            sparsity,
            signal: 0.5,
            seed: math::mix_seed(seed, &[0x74, p as u64, rep as u64]),
        };
        let (l0, z0) = generate_truth(&truth).map_err(|e| e.in_context(context.clone()))?;
        let mut data_rng =
            ChaCha12Rng::seed_from_u64(math::mix_seed(seed, &[0x64, p as u64, rep as u64]));
        let y = sample_gaussian(&l0, n, &mut data_rng)
            .map_err(|e| e.in_context(context.clone()))?;
        let stats =
            SampleStats::from_data(&y, hyper.tau_sq).map_err(|e| e.in_context(context.clone()))?;

        let cands = threshold_candidates(&stats, search, hyper.max_col_support)
            .map_err(|e| e.in_context(context.clone()))?;
        let scored = par_map(&cands.patterns, |z| total_score(z, &stats, &hyper));
        let mut ranked: Vec<crate::scoring::ScoredPattern> = Vec::new();
        for s in scored {
            ranked.push(s.map_err(|e| e.in_context(context.clone()))?);
        }
        ranked.sort_by(rank_cmp);
        let seeds: Vec<SparsityPattern> = ranked
            .iter()
            .take(search.sss_top_m)
            .map(|s| s.pattern.clone())
            .collect();

        let mut cfg_rep = search.clone();
        cfg_rep.seed = math::mix_seed(seed, &[0x73, p as u64, rep as u64, search.seed]);
        let result = sss_refine(&seeds, &stats, &hyper, &cfg_rep)
            .map_err(|e| e.in_context(context.clone()))?;

        let counts =
            confusion_counts(&result.best.pattern, &z0).map_err(|e| e.in_context(context))?;
        let m = metrics(counts);
        Ok(SelectionRow {
            p,
            n,
            rep,
            counts,
            ppv: m.ppv,
            tpr: m.tpr,
            mcc: m.mcc,
            best_total: result.best.total,
            edges_true: z0.edge_count(),
            edges_selected: result.best.pattern.edge_count(),
            candidates: cands.patterns.len(),
            truncated_columns: cands.truncated_columns,
        })
    });

    let mut rows = Vec::new();
    for r in results {
        rows.push(r?);
    }
    rows.sort_by(|a, b| (a.p, a.rep).cmp(&(b.p, b.rep)));

    let mut summaries = Vec::new();
    let mut ps: Vec<usize> = rows.iter().map(|r| r.p).collect();
    ps.dedup();
    for p in ps {
        let group: Vec<&SelectionRow> = rows.iter().filter(|r| r.p == p).collect();
        let count = group.len() as f64;
        summaries.push(SelectionSummary {
            p,
            n: group[0].n,
            reps: group.len(),
            mean_ppv: group.iter().map(|r| r.ppv).sum::<f64>() / count,
            mean_tpr: group.iter().map(|r| r.tpr).sum::<f64>() / count,
            mean_mcc: group.iter().map(|r| r.mcc).sum::<f64>() / count,
        });
    }
    Ok(SelectionOutcome { rows, summaries })
}
