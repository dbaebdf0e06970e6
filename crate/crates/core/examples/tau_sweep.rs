//! Sweep tau for sex on Adult and print the accuracy / disparate impact table.
//!
//!     cargo run --release --example tau_sweep [out-dir]

use pfr::experiment::{run_experiment, ExperimentConfig};
use pfr::pfr::PfrConfig;

fn main() -> pfr::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("pfr-tau-sweep"));
    let cfg = ExperimentConfig {
        dataset: concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/adult/adult.toml").into(),
        sensitive_sets: vec![vec!["sex".into()]],
        tau_grid: vec![0.9, 0.8, 0.7, 0.65, 0.6],
        split_fraction: 0.8,
        seed: 42,
        output_dir: out,
        workers: None,
        pfr: PfrConfig::default(),
    };
    let outcome = run_experiment(&cfg)?;
    println!("{:>8} {:>9} {:>8} {:>8}", "tau", "accuracy", "DI", "removed");
    for row in outcome.rows() {
        let tau = row.tau.map_or("baseline".to_string(), |t| t.to_string());
        match &row.error {
            Some(e) => println!("{tau:>8} failed: {e}"),
            None => println!(
                "{tau:>8} {:>9.4} {:>8.4} {:>8}",
                row.accuracy.unwrap_or(f64::NAN),
                row.di_binary.unwrap_or(f64::NAN),
                row.n_removed
            ),
        }
    }
    println!("outputs in {}", outcome.output_dir.display());
    Ok(())
}
