//! Write a synthetic planted corpus in the interchange formats.
//!
//! ```bash
//! cargo run --example generate_synthetic -- out/planted [seed] [noise_rate]
//! ```

use bugloc::synthgen::{generate, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().unwrap_or_else(|| "planted".into());
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);
    let noise_rate = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.1);

    let spec = SynthSpec {
        seed,
        noise_rate,
        ..SynthSpec::default()
    };
    let corpus = generate(&spec)?;
    corpus.write_to(&dir)?;
    println!(
        "{dir}: {} reports, {} files, {} embedding rows",
        corpus.reports_jsonl.lines().count(),
        corpus.sources_jsonl.lines().count(),
        corpus.embeddings_txt.lines().count().saturating_sub(1)
    );
    Ok(())
}
