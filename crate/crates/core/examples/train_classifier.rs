//! Fit the L2-regularized logistic regression with both solvers and compare.
//!
//!     cargo run --release --example train_classifier

use std::time::Instant;

use pfr::model::{train_logistic_with_summary, Solver};
use pfr::prelude::*;

fn main() -> Result<()> {
    let cfg = DatasetConfig::from_file(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../data/adult/adult.toml"
    ))?;
    let ds = cfg.load()?.dataset;
    let m = min_max_scale(&one_hot_encode(&ds))?;
    let (train, test) = split(&m, ds.target(), 0.8, 42)?;

    for solver in [Solver::Newton, Solver::GradientAscent] {
        let tc = TrainConfig {
            solver,
            max_iterations: if solver == Solver::Newton { 100 } else { 5000 },
            ..TrainConfig::default()
        };
        let start = Instant::now();
        let (model, summary) = train_logistic_with_summary(&train.matrix, &train.labels, &tc, None)?;
        let acc = accuracy(&predict_label(&model, &test.matrix, 0.5)?, &test.labels)?;
        let auc = auc_roc(&predict_proba(&model, &test.matrix)?, &test.labels)?;
        println!(
            "{solver:?}: {} iterations, converged={}, |grad|={:.2e}, test accuracy {acc:.4}, auc {auc:.4}, {:?}",
            summary.iterations,
            summary.converged,
            summary.gradient_norm,
            start.elapsed()
        );
    }

    let model = train_logistic(&train.matrix, &train.labels, &TrainConfig::default())?;
    let mut ranked: Vec<(&str, f64)> = model
        .column_ids()
        .iter()
        .map(String::as_str)
        .zip(model.weights().iter().copied())
        .collect();
    ranked.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    println!("largest weights:");
    for (id, w) in ranked.iter().take(5) {
        println!("  {id:<32} {w:+.3}");
    }
    Ok(())
}
