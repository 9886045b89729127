//! Ground-truth label extraction from unreliable annotators.
//!
//! The central routine, [`OpinionRank`], compares every pair of annotators,
//! turns their agreement frequencies into a Markov chain of
//! "recommendations", and uses the chain's stationary distribution as a
//! reliability weight for each annotator. Weighted votes then decide the
//! label of every instance.
//!
//! Alongside the ranking pipeline the crate ships
//!
//! - [`baselines`]: majority vote and Dawid–Skene EM,
//! - [`simgen`]: generators for the classic noisy-labeler models and a
//!   seeded Monte-Carlo trial runner,
//! - [`io`]: the CSV data contract used by the command-line tool,
//! - [`bench`]: the wall-clock scaling harness.
//!
//! ```
//! use opinionrank::{OpinionMatrix, OpinionRank};
//!
//! // One row per source, one column per instance.
//! let m = OpinionMatrix::from_rows(2, &[
//!     vec![Some(1), Some(0), Some(1)],
//!     vec![Some(1), Some(0), None],
//!     vec![Some(0), Some(1), Some(1)],
//! ])?;
//! let out = OpinionRank::new().with_top_n(2).run(&m)?;
//! assert_eq!(out.decide().labels(), Some(&[1, 0, 1][..]));
//! # Ok::<(), opinionrank::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
mod error;
pub mod io;
mod opinions;
pub mod rank;
pub mod simgen;

pub use error::{Error, Result};
pub use opinions::{BinaryMembershipMatrix, ClassId, OpinionMatrix, MAX_CLASSES};
pub use rank::{
    AgreementCounts, CorroborationMatrix, OpinionRank, Predictions, RankOutput, RankingVector,
    Task, TopNWeighting, WeightedScores,
};
