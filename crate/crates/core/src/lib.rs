//! Toolkit for probing cross-lingual transfer with parallel benchmarks.
//!
//! The pipeline runs in five steps:
//!
//! 1. [`corpus`] parses XNLI / PAWS-X TSV and SQuAD-shaped JSON into
//!    canonical instances and aligns them into a [`ParallelCorpus`].
//! 2. [`setgen`] materializes within-language `(l, l)` and across-language
//!    `(l1, l2)` sets, where the two input fields of every instance come from
//!    different translations, and word-shuffled control variants.
//! 3. [`scoring`] joins externally produced predictions and computes
//!    accuracy, per-label accuracy and QA exact match / F1.
//! 4. [`diagnostics`] measures lexical-overlap artifacts.
//! 5. [`report`] aggregates scores into language-pair matrices and tables.
//!
//! Metric code is generic over [`Scalar`], so the same functions run on
//! `f64`, `f32` or exact rationals ([`Exact`]).

pub mod corpus;
pub mod diagnostics;
pub mod error;
pub mod lang;
pub mod report;
pub mod scalar;
pub mod scoring;
pub mod setgen;
pub mod tokenize;

pub use corpus::{Instance, Label, ParallelCorpus, Task};
pub use error::{Error, Result};
pub use lang::Lang;
pub use scalar::{Exact, Scalar};
pub use scoring::PredictionSet;
pub use setgen::EvalSet;

pub type ScoreRecord = scoring::ScoreRecord<f64>;
pub type ExactScoreRecord = scoring::ScoreRecord<Exact>;
pub type PairMatrix = report::PairMatrix<f64>;
pub type ExactPairMatrix = report::PairMatrix<Exact>;
pub type DistanceRecord = diagnostics::DistanceRecord<f64>;
pub type ExactDistanceRecord = diagnostics::DistanceRecord<Exact>;
