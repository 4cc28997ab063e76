//! Pre-trained word embeddings in word2vec text format.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Term → d-dimensional vector lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            vectors: HashMap::new(),
        }
    }

    /// Inserts a vector. Fails on a dimension mismatch, non-finite component, or repeated token.
    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let token = token.into();
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                token,
                expected: self.dim,
                found: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite component for token {token:?}"
            )));
        }
        if self.vectors.contains_key(&token) {
            return Err(Error::DuplicateId(token));
        }
        self.vectors.insert(token, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    /// Serializes to word2vec text, tokens sorted.
    pub fn to_word2vec_text(&self) -> String {
        let sorted: BTreeMap<_, _> = self.vectors.iter().collect();
        let mut out = format!("{} {}\n", self.len(), self.dim);
        for (token, v) in sorted {
            out.push_str(token);
            for x in v {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        }
        out
    }
}

/// Loads a word2vec text file: a `<count> <dim>` header, then one `<token> <f1> … <fd>` row per entry.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_word2vec(&text, path)
}

pub(crate) fn parse_word2vec(text: &str, origin: &Path) -> Result<EmbeddingTable> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(origin, 1, "missing \"<count> <dim>\" header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (count, dim) = match fields.as_slice() {
        [c, d] => match (c.parse::<usize>(), d.parse::<usize>()) {
            (Ok(c), Ok(d)) if d > 0 => (c, d),
            _ => return Err(Error::parse(origin, 1, format!("bad header {header:?}"))),
        },
        _ => return Err(Error::parse(origin, 1, format!("bad header {header:?}"))),
    };

    let mut table = EmbeddingTable::new(dim);
    for (lineno, line) in lines {
        let mut parts = line.split_whitespace();
        let token = parts.next().unwrap_or_default();
        let vector = parts
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(origin, lineno + 1, format!("token {token:?}: {e}")))?;
        table.insert(token, vector)?;
    }
    if table.len() != count {
        return Err(Error::Validation(format!(
            "{}: header declares {count} entries, body has {}",
            origin.display(),
            table.len()
        )));
    }
    Ok(table)
}

/// Weighted mean of the embeddings of the in-table tokens.
///
/// Tokens missing from `weights` get weight 0. Returns the vector and the
/// number of distinct tokens absent from the table; the vector is zero when
/// no in-table token carries positive weight.
pub fn embed_tokens(
    tokens: &[String],
    weights: &BTreeMap<String, f64>,
    table: &EmbeddingTable,
) -> (Vec<f64>, usize) {
    let distinct: std::collections::BTreeSet<&str> = tokens.iter().map(String::as_str).collect();
    let mut acc = vec![0.0; table.dim()];
    let mut total = 0.0;
    let mut oov = 0;
    for token in distinct {
        let Some(y) = table.get(token) else {
            oov += 1;
            continue;
        };
        let w = weights.get(token).copied().unwrap_or(0.0);
        if w <= 0.0 {
            continue;
        }
        total += w;
        for (a, v) in acc.iter_mut().zip(y) {
            *a += w * v;
        }
    }
    if total > 0.0 {
        acc.iter_mut().for_each(|a| *a /= total);
    }
    (acc, oov)
}
