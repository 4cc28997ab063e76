//! Build the typed report/term/file/metric network for a dataset directory and
//! print its structural summary.
//!
//! ```bash
//! cargo run --example build_network -- [dataset_dir] [edges.csv]
//! ```
//!
//! Without a directory a small synthetic corpus is generated first.

use std::fs::File;

use bugloc::corpus::TokenConfig;
use bugloc::network::validate_network;
use bugloc::pipeline::{Dataset, DatasetPaths, Localizer, PipelineConfig};
use bugloc::synthgen::{generate, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = match args.next() {
        Some(d) => d.into(),
        None => {
            let dir = std::env::temp_dir().join("bugloc-network-demo");
            let spec = SynthSpec {
                num_reports: 60,
                num_files: 20,
                vocab_size: 120,
                ..SynthSpec::default()
            };
            generate(&spec)?.write_to(&dir)?;
            dir
        }
    };

    let dataset = Dataset::load(
        "demo",
        &DatasetPaths::in_dir(&dir),
        &TokenConfig::default(),
        true,
    )?;
    let localizer = Localizer::build(&dataset, &PipelineConfig::default())?;
    let report = validate_network(localizer.network());
    for (kind, n) in &report.node_counts {
        println!("{kind} nodes: {n}");
    }
    for ((a, b), n) in &report.edge_counts {
        println!("{a}-{b} edges: {n}");
    }
    for issue in &report.issues {
        println!("diagnostic: {issue}");
    }
    println!("valid: {}", report.is_valid());

    if let Some(out) = args.next() {
        localizer.network().write_edge_list(File::create(&out)?)?;
        println!("edge list written to {out}");
    }
    Ok(())
}
