//! Load a CSV through a dataset config, one-hot encode it and min-max scale it.
//!
//!     cargo run --example encode_and_scale [dataset.toml]

use pfr::prelude::*;

fn main() -> Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/adult/adult.toml").into());
    let cfg = DatasetConfig::from_file(&path)?;
    let loaded = cfg.load()?;
    println!(
        "read {} rows, dropped {} with missing values",
        loaded.rows_read, loaded.rows_dropped
    );

    let ds = &loaded.dataset;
    for col in ds.schema() {
        println!("  {:<16} {:?} ({} categories)", col.name, col.kind, col.categories.len());
    }
    for s in ds.sensitive_columns() {
        println!("  sensitive {} privileged={}", s.name(), s.spec.privileged_value);
    }

    let encoded = one_hot_encode(ds);
    let scaled = min_max_scale(&encoded)?;
    println!("encoded matrix: {} x {}", scaled.n_rows(), scaled.n_cols());
    for (j, id) in scaled.column_ids().take(8).enumerate() {
        let col = scaled.column(j);
        let max = col.iter().copied().fold(f64::MIN, f64::max);
        println!("  {id:<28} raw {:>10.1} scaled max {max}", encoded.get(0, j));
    }
    Ok(())
}
