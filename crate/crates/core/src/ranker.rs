//! Scoring and ranking source files for a query report.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use crate::corpus::{BowVector, Vocabulary};
use crate::embeddings::{embed_tokens, EmbeddingTable};
use crate::error::{Error, Result};
use crate::network::NodeKind;
use crate::regularizer::RepresentationModel;

/// Raw per-file scores, keyed by path.
pub type FileScores = BTreeMap<String, f64>;

/// Cosine similarity of dense vectors, 0 when either norm is 0.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!(
            "cosine of vectors with dimensions {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(cosine_unchecked(a, b))
}

fn cosine_unchecked(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    let denom = na.sqrt() * nb.sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (dot / denom).clamp(-1.0, 1.0)
    }
}

/// A training report as seen by the BoW scorer.
pub struct IndexedReport<'a> {
    pub bow: &'a BowVector,
    pub fixed_files: &'a [String],
}

/// Similar-report transfer: each training report passes its cosine with the
/// query, split evenly over its fixed files.
///
/// Every file in `universe` gets an entry; files no report fixed keep 0.
pub fn bow_file_scores<'a>(
    query: &BowVector,
    train: impl IntoIterator<Item = IndexedReport<'a>>,
    universe: &BTreeSet<String>,
) -> FileScores {
    let mut scores: FileScores = universe.iter().map(|p| (p.clone(), 0.0)).collect();
    for report in train {
        let fixed: BTreeSet<&String> = report.fixed_files.iter().collect();
        if fixed.is_empty() {
            continue;
        }
        let share = query.cosine(report.bow) / fixed.len() as f64;
        if share == 0.0 {
            continue;
        }
        for f in fixed {
            if let Some(s) = scores.get_mut(f) {
                *s += share;
            }
        }
    }
    scores
}

/// Cosine between `query` and each file vector.
pub fn cosine_file_scores<'a>(
    query: &[f64],
    files: impl IntoIterator<Item = (&'a str, &'a [f64])>,
) -> FileScores {
    files
        .into_iter()
        .map(|(p, v)| (p.to_string(), cosine_unchecked(query, v)))
        .collect()
}

/// Embeds the query with its TF-IDF weights, then scores every source node of
/// the learned model by cosine. Returns the scores and the query's OOV count.
pub fn bulner_file_scores(
    query_tokens: &[String],
    model: &RepresentationModel,
    table: &EmbeddingTable,
    vocab: &Vocabulary,
) -> (FileScores, usize) {
    let weights = vocab.term_weights(query_tokens);
    let (query, oov) = embed_tokens(query_tokens, &weights, table);
    if query.iter().all(|&v| v == 0.0) {
        log::warn!("query has no embedded terms; bug-code scores are all zero");
    }
    let files = model.of_kind(NodeKind::S).map(|(n, v)| (n.key.as_str(), v));
    (cosine_file_scores(&query, files), oov)
}

/// Min–max rescale to `[0, 1]`; a constant map becomes all zeros.
pub fn min_max_normalize(scores: &FileScores) -> FileScores {
    let min = scores.values().copied().fold(f64::INFINITY, f64::min);
    let max = scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    scores
        .iter()
        .map(|(p, &v)| (p.clone(), if span > 0.0 { (v - min) / span } else { 0.0 }))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedFile {
    pub path: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub query_id: String,
    pub ranking: Vec<RankedFile>,
}

impl QueryResult {
    pub fn paths(&self) -> Vec<&str> {
        self.ranking.iter().map(|r| r.path.as_str()).collect()
    }

    /// CSV `rank,path,score`, ranks from 1.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "path", "score"])?;
        for (i, r) in self.ranking.iter().enumerate() {
            w.write_record([(i + 1).to_string(), r.path.clone(), r.score.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<query output>", e))?;
        Ok(())
    }
}

/// Sorts by descending score, ties by ascending path, and keeps the top `k`.
pub fn rank_scores(query_id: &str, scores: &FileScores, k: usize) -> QueryResult {
    let mut ranking: Vec<RankedFile> = scores
        .iter()
        .map(|(p, &s)| RankedFile {
            path: p.clone(),
            score: s,
        })
        .collect();
    ranking.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.path.cmp(&b.path))
    });
    ranking.truncate(k);
    QueryResult {
        query_id: query_id.to_string(),
        ranking,
    }
}

/// `(1 − α)·bow + α·bulner` over per-query min–max normalized components.
///
/// A file missing from one map scores 0 in that component.
pub fn combine_and_rank(
    query_id: &str,
    bow_scores: &FileScores,
    bulner_scores: &FileScores,
    alpha: f64,
    k: usize,
) -> Result<QueryResult> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Validation(format!("alpha {alpha} outside [0, 1]")));
    }
    if k == 0 {
        return Err(Error::Validation("k must be positive".into()));
    }
    Ok(rank_scores(
        query_id,
        &combine(bow_scores, bulner_scores, alpha),
        k,
    ))
}

pub(crate) fn combine(
    bow_scores: &FileScores,
    other_scores: &FileScores,
    alpha: f64,
) -> FileScores {
    let (bow, other) = (
        min_max_normalize(bow_scores),
        min_max_normalize(other_scores),
    );
    let paths: BTreeSet<&String> = bow.keys().chain(other.keys()).collect();
    paths
        .into_iter()
        .map(|p| {
            let x = bow.get(p).copied().unwrap_or(0.0);
            let y = other.get(p).copied().unwrap_or(0.0);
            (p.clone(), ((1.0 - alpha) * x + alpha * y).clamp(0.0, 1.0))
        })
        .collect()
}
