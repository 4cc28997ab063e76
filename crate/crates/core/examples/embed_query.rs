//! Load a word2vec text file and embed a query as the TF-IDF weighted mean of
//! its known terms.
//!
//! ```bash
//! cargo run --example embed_query -- path/to/embeddings.txt "query text"
//! ```
//!
//! Without arguments a small built-in table is used.

use std::collections::BTreeMap;

use bugloc::corpus::{tokenize, TokenConfig};
use bugloc::embeddings::{embed_tokens, load_embeddings, EmbeddingTable};
use bugloc::ranker::cosine;

fn builtin() -> EmbeddingTable {
    let mut table = EmbeddingTable::new(3);
    for (word, v) in [
        ("crash", [1.0, 0.1, 0.0]),
        ("exception", [0.9, 0.2, 0.1]),
        ("render", [0.0, 1.0, 0.2]),
        ("canvas", [0.1, 0.9, 0.3]),
    ] {
        table
            .insert(word, v.to_vec())
            .expect("consistent dimension");
    }
    table
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let table = match args.next() {
        Some(path) => load_embeddings(path)?,
        None => builtin(),
    };
    let query = args
        .next()
        .unwrap_or_else(|| "Canvas crash on render".into());
    let tokens = tokenize(&query, &TokenConfig::default());

    let uniform: BTreeMap<String, f64> = tokens.iter().map(|t| (t.clone(), 1.0)).collect();
    let (vector, oov) = embed_tokens(&tokens, &uniform, &table);
    println!("tokens {tokens:?}, {oov} out of vocabulary");
    println!("embedding {vector:.3?}");

    let mut nearest: Vec<(&str, f64)> = ["crash", "exception", "render", "canvas"]
        .into_iter()
        .filter_map(|w| table.get(w).map(|y| (w, cosine(&vector, y).unwrap_or(0.0))))
        .collect();
    nearest.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (word, sim) in nearest {
        println!("  {word:<10} {sim:.4}");
    }
    Ok(())
}
