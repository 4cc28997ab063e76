//! Split code metrics into equal-frequency buckets.
//!
//! ```bash
//! cargo run --example discretize_metrics -- [metrics.csv] [buckets]
//! ```

use bugloc::metrics::{discretize, load_metrics, MetricRecord};

fn demo_records() -> Vec<MetricRecord> {
    (1..=10)
        .flat_map(|i| {
            [
                MetricRecord {
                    path: format!("src/File{i:02}.java"),
                    metric: "LOC".into(),
                    value: (i * i * 10) as f64,
                },
                MetricRecord {
                    path: format!("src/File{i:02}.java"),
                    metric: "CC".into(),
                    value: (i % 4) as f64,
                },
            ]
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let records = match args.next() {
        Some(path) => load_metrics(path)?,
        None => demo_records(),
    };
    let buckets = args.next().map(|b| b.parse()).transpose()?.unwrap_or(3);

    for (path, assigned) in discretize(&records, buckets) {
        let keys: Vec<String> = assigned
            .iter()
            .map(|b| format!("{} [{}, {}]", b.key(), b.lo, b.hi))
            .collect();
        println!("{path:<20} {}", keys.join("  "));
    }
    Ok(())
}
