//! Rank files for one report with each method.
//!
//! ```bash
//! cargo run --release --example rank_query -- [alpha] [k]
//! ```

use bugloc::corpus::TokenConfig;
use bugloc::pipeline::{Dataset, DatasetPaths, Localizer, Method, PipelineConfig};
use bugloc::synthgen::{generate, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let alpha = args.next().map(|a| a.parse()).transpose()?.unwrap_or(0.5);
    let k = args.next().map(|a| a.parse()).transpose()?.unwrap_or(5);

    let dir = std::env::temp_dir().join("bugloc-rank-demo");
    generate(&SynthSpec::default())?.write_to(&dir)?;
    let dataset = Dataset::load(
        "demo",
        &DatasetPaths::in_dir(&dir),
        &TokenConfig::default(),
        true,
    )?;
    let localizer = Localizer::fit(&dataset, &PipelineConfig::default())?;

    let query = &localizer.queries()[0];
    println!("{}: {}", query.id, query.text());
    println!("fixed: {:?}", query.fixed_files);
    for method in Method::ALL {
        let result = localizer.rank(query, method, alpha, k)?;
        println!("{method}:");
        for (rank, file) in result.ranking.iter().enumerate() {
            let hit = if query.fixed_files.contains(&file.path) {
                "*"
            } else {
                " "
            };
            println!("  {:>2}{hit} {:<28} {:.4}", rank + 1, file.path, file.score);
        }
    }
    Ok(())
}
