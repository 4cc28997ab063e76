//! MAP@k across the α grid, as CSV on stdout.
//!
//! ```bash
//! cargo run --release --example alpha_sweep -- [seed] > sweep.csv
//! ```

use bugloc::corpus::TokenConfig;
use bugloc::eval::{write_rows, EvalConfig, Evaluation};
use bugloc::pipeline::{Dataset, DatasetPaths, Localizer, PipelineConfig};
use bugloc::synthgen::{generate, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(7);
    let dir = std::env::temp_dir().join(format!("bugloc-sweep-{seed}"));
    generate(&SynthSpec {
        seed,
        ..SynthSpec::default()
    })?
    .write_to(&dir)?;

    let dataset = Dataset::load(
        "planted",
        &DatasetPaths::in_dir(&dir),
        &TokenConfig::default(),
        true,
    )?;
    let localizer = Localizer::fit(&dataset, &PipelineConfig::default())?;
    let evaluation = Evaluation::run(&localizer, &EvalConfig::default())?;
    write_rows(&evaluation.sweep_rows()?, std::io::stdout().lock())?;
    Ok(())
}
