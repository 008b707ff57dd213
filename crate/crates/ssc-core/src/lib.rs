//! Bayesian sparsity selection for the Cholesky factor of a Gaussian
//! precision matrix.
//!
//! A zero-mean Gaussian with precision matrix `Omega = L D^-1 L^T` (modified
//! Cholesky decomposition, `L` unit lower triangular, `D` positive diagonal)
//! is a Gaussian DAG model: the below-diagonal support of `L` encodes the
//! graph. This crate scores candidate supports by their log marginal
//! posterior under a spike-and-slab prior on the entries of `L`, an
//! inverse-gamma prior on `D`, and one of three priors on the support
//! pattern itself:
//!
//! * **beta-mixture** — shared edge probability `q ~ Beta(a1, a2)`; the
//!   pattern mass is a beta function and the posterior is closed form,
//! * **multiplicative** — per-node weights `w_j ~ Beta(a1, a2)` with edge
//!   probability `w_j * w_k`; the pattern mass is a `p`-dimensional integral
//!   approximated by Laplace's method (with a quadrature oracle for small
//!   `p`),
//! * **Erdos-Renyi** — fixed edge probability `q`.
//!
//! On top of the scorer sit a threshold-grid candidate generator, a shotgun
//! stochastic hill-climbing search, an exhaustive enumeration oracle, and
//! simulation drivers that measure posterior-ratio behaviour and support
//! recovery (PPV / TPR / MCC) on synthetic data.
//!
//! The crate is `no_std`-compatible (with `alloc`); the default `std`
//! feature only switches float math to the standard-library intrinsics and
//! the optional `parallel` feature adds multi-threaded scoring. File
//! formats, CSV emission, and the command-line driver live in the companion
//! `ssc-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod experiments;
pub mod factor;
pub mod hyper;
pub(crate) mod math;
pub(crate) mod par;
pub mod pattern;
pub mod priors;
pub mod scoring;
pub mod search;
pub mod stats;

pub use error::{Error, Result};
pub use factor::CholeskyFactor;
pub use hyper::{Hyperparameters, PriorKind};
pub use pattern::{ConfusionCounts, PerturbCase, SparsityPattern};
pub use scoring::ScoredPattern;
pub use search::{SearchConfig, SearchResult};
pub use stats::SampleStats;
