//! Remove proxies for race and then sex, each loop starting from what the
//! previous one left, and train the target model on the remainder.

use pfr::experiment::{emit_table_report, prepare};
use pfr::prelude::*;

fn main() -> Result<()> {
    let data = prepare(&DatasetConfig::from_file(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../data/adult/adult.toml"
    ))?)?;
    let mut cfg = PfrConfig {
        sensitive_order: vec!["race".into(), "sex".into()],
        ..PfrConfig::default()
    };
    cfg.tau_overrides.insert("race".into(), 0.8);
    cfg.tau_overrides.insert("sex".into(), 0.75);

    let (residual, traces) = pfr_multi(&data.matrix, &data.sensitive, &cfg)?;
    for t in &traces {
        println!(
            "{}: {} removals, auc {:.4} -> {:.4}",
            t.sensitive_column,
            t.steps.len(),
            t.initial_auc,
            t.final_auc
        );
    }
    print!("{}", emit_table_report(&traces));

    let audit = recheck(&residual, &data.sensitive, &cfg)?;
    println!("recheck: {audit:.4?}");

    let model = train_fair_model(&residual, data.target(), &traces, &cfg)?;
    let pred = predict_label(&model, &residual, 0.5)?;
    println!("in-sample accuracy {:.4}", accuracy(&pred, data.target())?);
    for s in &data.sensitive {
        println!(
            "  DI {}: {:.4}",
            s.name,
            disparate_impact_binary(&pred, &s.classes, s.privileged)?
        );
    }
    Ok(())
}
