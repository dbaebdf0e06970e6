//! Which Adult features let a model recover race or sex?
//!
//!     cargo run --release --example adult_proxies [race|sex] [tau]

use pfr::experiment::{emit_table_report, prepare};
use pfr::prelude::*;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let attribute = args.next().unwrap_or_else(|| "sex".into());
    let tau: Option<f64> = args.next().map(|t| t.parse().expect("tau must be a number"));

    let data = prepare(&DatasetConfig::from_file(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../data/adult/adult.toml"
    ))?)?;
    let labels = data.sensitive(&attribute)?;
    let cfg = PfrConfig::default();
    let tau = tau.unwrap_or_else(|| cfg.tau_for(labels));

    let (residual, trace) = pfr_run(&data.matrix, labels, tau, &cfg)?;
    println!(
        "{attribute}: auc {:.4} -> {:.4} (tau {tau:.4}), {} of {} columns removed",
        trace.initial_auc,
        trace.final_auc,
        trace.steps.len(),
        data.matrix.n_cols()
    );
    print!("{}", emit_table_report(std::slice::from_ref(&trace)));
    println!("{} columns remain", residual.n_cols());
    Ok(())
}
