//! Bug localization that mixes TF-IDF similar-report transfer with a
//! graph-regularized vector space over bug reports, terms, source files and
//! code-metric buckets.
//!
//! The usual flow is [`pipeline::Dataset::load`], [`pipeline::Localizer::fit`],
//! then [`pipeline::Localizer::rank`] or [`eval::Evaluation::run`].
//! [`synthgen`] writes corpora with a planted signal for experiments.

pub mod cli;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod network;
pub mod pipeline;
pub mod ranker;
pub mod regularizer;
pub mod synthgen;

pub use error::{Error, Result};
