//! Tokenize a few report texts and print their TF-IDF vectors and pairwise
//! cosine similarities.
//!
//! ```bash
//! cargo run --example tokenize_and_tfidf
//! ```

use bugloc::corpus::{bow_vectorize, build_vocabulary, tokenize, TokenConfig};

fn main() {
    let texts = [
        "NullPointerException in getUserName when the session expires",
        "Session timeout leaves userName null in LoginFilter",
        "HTTP2 parser rejects valid headers after reconnect",
    ];
    let config = TokenConfig::default();
    let docs: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t, &config)).collect();
    let vocab = build_vocabulary(&docs);

    for (text, tokens) in texts.iter().zip(&docs) {
        println!("{text}\n  tokens: {tokens:?}");
        let weights = vocab.term_weights(tokens);
        let shown: Vec<String> = weights.iter().map(|(t, w)| format!("{t}={w:.3}")).collect();
        println!("  tf-idf: {}", shown.join(" "));
    }

    let vectors: Vec<_> = docs.iter().map(|d| bow_vectorize(d, &vocab)).collect();
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            println!("cos(#{i}, #{j}) = {:.4}", vectors[i].cosine(&vectors[j]));
        }
    }
}
