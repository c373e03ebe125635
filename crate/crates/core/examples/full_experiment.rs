//! End-to-end run on a generated two-language corpus: dummy, TF-IDF linear
//! and per-layer probes on question type and combined complexity, each with
//! three control permutations, then the summary tables.
//!
//! ```text
//! cargo run --release --example full_experiment [OUT_DIR]
//! ```

use std::path::PathBuf;

use qprobe::report::{emit_tables, render_classification_table, render_regression_table, TableFormat};
use qprobe::runner::run_experiment;
use qprobe::synthetic::{write_synthetic_experiment, SyntheticSetup};

fn main() -> qprobe::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("qprobe-full-experiment"));
    let config = write_synthetic_experiment(&dir, &SyntheticSetup::default())?;
    println!("{} cells planned", config.expected_cell_count());

    let started = std::time::Instant::now();
    let results = run_experiment(&config)?;
    println!("{} rows in {:.1?}\n", results.len(), started.elapsed());

    println!("{}", render_classification_table(&results, TableFormat::Md));
    println!("{}", render_regression_table(&results, TableFormat::Md));
    for path in emit_tables(&results, TableFormat::Tsv, &config.output_dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
