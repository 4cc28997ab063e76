//! Bug reports, source documents, tokenization and TF-IDF vectors.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// One bug report with its ground-truth fix links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugReport {
    pub id: String,
    #[serde(default)]
    pub summary: String,
    #[serde(default)]
    pub description: String,
    #[serde(deserialize_with = "deserialize_timestamp")]
    pub report_time: DateTime<Utc>,
    #[serde(default)]
    pub status: String,
    #[serde(default)]
    pub fixed_files: Vec<String>,
}

impl BugReport {
    /// Summary and description joined, the text that gets tokenized.
    pub fn text(&self) -> String {
        format!("{} {}", self.summary, self.description)
    }

    pub fn is_resolved(&self) -> bool {
        self.status.to_lowercase().contains("resolved")
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty report id".into());
        }
        if self.fixed_files.iter().any(|f| f.trim().is_empty()) {
            return Err(format!(
                "report {:?} has an empty fixed_files entry",
                self.id
            ));
        }
        Ok(())
    }
}

/// Accepts RFC 3339 plus the two space-separated forms common in tracker exports.
pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(t.and_utc());
        }
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc())
}

fn deserialize_timestamp<'de, D: Deserializer<'de>>(
    de: D,
) -> std::result::Result<DateTime<Utc>, D::Error> {
    let raw = String::deserialize(de)?;
    parse_timestamp(&raw)
        .ok_or_else(|| serde::de::Error::custom(format!("unparseable report_time {raw:?}")))
}

/// Tokenized content of one source file.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceDoc {
    pub path: String,
    pub tokens: Vec<String>,
}

#[derive(Deserialize)]
struct RawSourceDoc {
    path: String,
    #[serde(default)]
    content: String,
}

/// Reads bug reports from JSONL and returns them sorted by report time.
///
/// Blank lines are skipped. Ties in `report_time` keep file order.
pub fn load_bug_reports(path: impl AsRef<Path>) -> Result<Vec<BugReport>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_bug_reports(&text, path)
}

pub(crate) fn parse_bug_reports(text: &str, origin: &Path) -> Result<Vec<BugReport>> {
    let mut reports = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let report: BugReport = serde_json::from_str(line)
            .map_err(|e| Error::parse(origin, lineno + 1, e.to_string()))?;
        report
            .check()
            .map_err(|msg| Error::parse(origin, lineno + 1, msg))?;
        if !seen.insert(report.id.clone()) {
            return Err(Error::DuplicateId(report.id));
        }
        reports.push(report);
    }
    reports.sort_by_key(|r| r.report_time);
    Ok(reports)
}

/// Keeps only reports whose status mentions "resolved".
pub fn retain_resolved(reports: &mut Vec<BugReport>) -> usize {
    let before = reports.len();
    reports.retain(BugReport::is_resolved);
    before - reports.len()
}

/// Reads source documents (`{"path", "content"}` per line) and tokenizes them.
pub fn load_source_docs(path: impl AsRef<Path>, config: &TokenConfig) -> Result<Vec<SourceDoc>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawSourceDoc = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        if raw.path.trim().is_empty() {
            return Err(Error::parse(path, lineno + 1, "empty source path"));
        }
        if !seen.insert(raw.path.clone()) {
            return Err(Error::DuplicateId(raw.path));
        }
        docs.push(SourceDoc {
            tokens: tokenize(&raw.content, config),
            path: raw.path,
        });
    }
    Ok(docs)
}

/// Token rules: stoplist, minimum length, optional English stemming.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenConfig {
    pub min_len: usize,
    pub stopwords: BTreeSet<String>,
    pub stem: bool,
}

impl Default for TokenConfig {
    fn default() -> Self {
        Self {
            min_len: 2,
            stopwords: parse_stoplist(DEFAULT_STOPWORDS),
            stem: false,
        }
    }
}

impl TokenConfig {
    pub fn with_stopwords<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.stopwords = words.into_iter().map(|w| w.into().to_lowercase()).collect();
        self
    }

    pub fn load_stoplist(mut self, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.stopwords = parse_stoplist(&text);
        Ok(self)
    }
}

/// One term per line; `#` starts a comment line.
pub fn parse_stoplist(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Splits text into lowercase terms.
///
/// Identifiers break at non-alphanumeric characters and at case transitions
/// (`fooBar`, `HTTPServer`); digits stay attached to the preceding letters.
pub fn tokenize(text: &str, config: &TokenConfig) -> Vec<String> {
    let stemmer = config
        .stem
        .then(|| rust_stemmers::Stemmer::create(rust_stemmers::Algorithm::English));
    let keep = |t: &str| t.chars().count() >= config.min_len && !config.stopwords.contains(t);

    let mut out = Vec::new();
    for piece in split_identifiers(text) {
        let term = piece.to_lowercase();
        if !keep(&term) {
            continue;
        }
        match &stemmer {
            Some(s) => {
                let stemmed = s.stem(&term).into_owned();
                if keep(&stemmed) {
                    out.push(stemmed);
                }
            }
            None => out.push(term),
        }
    }
    out
}

fn split_identifiers(text: &str) -> Vec<String> {
    let mut pieces = Vec::new();
    for run in text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|r| !r.is_empty())
    {
        let chars: Vec<char> = run.chars().collect();
        let mut current = String::new();
        for i in 0..chars.len() {
            let c = chars[i];
            if i > 0 && !current.is_empty() {
                let prev = chars[i - 1];
                let lower_to_upper = (prev.is_lowercase() || prev.is_numeric()) && c.is_uppercase();
                let acronym_end = prev.is_uppercase()
                    && c.is_uppercase()
                    && chars.get(i + 1).is_some_and(|n| n.is_lowercase());
                if lower_to_upper || acronym_end {
                    pieces.push(std::mem::take(&mut current));
                }
            }
            current.push(c);
        }
        if !current.is_empty() {
            pieces.push(current);
        }
    }
    pieces
}

/// Term dictionary with document frequencies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<usize>,
    num_docs: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> Option<&str> {
        self.terms.get(index).map(String::as_str)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.index_of(term).map_or(0, |i| self.doc_freq[i])
    }

    /// `ln(num_docs / doc_freq)`, or `None` for terms outside the vocabulary.
    pub fn idf(&self, term: &str) -> Option<f64> {
        let i = self.index_of(term)?;
        Some(idf(self.num_docs, self.doc_freq[i]))
    }

    /// TF-IDF weight for every distinct token, including ones the vocabulary
    /// has never seen; those are treated as occurring in a single document.
    pub fn term_weights(&self, tokens: &[String]) -> BTreeMap<String, f64> {
        let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
        for t in tokens {
            *tf.entry(t.as_str()).or_default() += 1;
        }
        tf.into_iter()
            .map(|(t, count)| {
                let df = self.index_of(t).map_or(1, |i| self.doc_freq[i]);
                (t.to_string(), count as f64 * idf(self.num_docs.max(df), df))
            })
            .collect()
    }
}

fn idf(num_docs: usize, doc_freq: usize) -> f64 {
    (num_docs as f64 / doc_freq as f64).ln()
}

/// Builds a vocabulary over tokenized documents. Indices follow term order.
pub fn build_vocabulary<D: AsRef<[String]>>(docs: &[D]) -> Vocabulary {
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        let distinct: BTreeSet<&str> = doc.as_ref().iter().map(String::as_str).collect();
        for t in distinct {
            *df.entry(t).or_default() += 1;
        }
    }
    let mut vocab = Vocabulary {
        num_docs: docs.len(),
        ..Vocabulary::default()
    };
    for (i, (term, count)) in df.into_iter().enumerate() {
        vocab.terms.push(term.to_string());
        vocab.index.insert(term.to_string(), i);
        vocab.doc_freq.push(count);
    }
    vocab
}

/// Sparse TF-IDF vector keyed by vocabulary index. Only positive weights are stored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BowVector {
    entries: Vec<(usize, f64)>,
}

impl BowVector {
    /// Builds from arbitrary entries, dropping zeros and sorting by index.
    pub fn from_entries(entries: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, w) in entries {
            *merged.entry(i).or_default() += w;
        }
        Self {
            entries: merged.into_iter().filter(|&(_, w)| w > 0.0).collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map_or(0.0, |pos| self.entries[pos].1)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &BowVector) -> f64 {
        let (mut a, mut b) = (
            self.entries.iter().peekable(),
            other.entries.iter().peekable(),
        );
        let mut sum = 0.0;
        while let (Some(&&(i, x)), Some(&&(j, y))) = (a.peek(), b.peek()) {
            match i.cmp(&j) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    sum += x * y;
                    a.next();
                    b.next();
                }
            }
        }
        sum
    }

    /// Cosine similarity; 0 when either vector is empty.
    pub fn cosine(&self, other: &BowVector) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            self.dot(other) / denom
        }
    }
}

/// `tf · ln(N / df)` for every in-vocabulary term of the document.
pub fn bow_vectorize(tokens: &[String], vocab: &Vocabulary) -> BowVector {
    let mut tf: BTreeMap<usize, usize> = BTreeMap::new();
    for t in tokens {
        if let Some(i) = vocab.index_of(t) {
            *tf.entry(i).or_default() += 1;
        }
    }
    BowVector::from_entries(
        tf.into_iter()
            .map(|(i, count)| (i, count as f64 * idf(vocab.num_docs, vocab.doc_freq[i]))),
    )
}
