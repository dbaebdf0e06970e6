//! The removal loop on synthetic data where one feature copies the sensitive
//! attribute. The proxy goes first and the noise features survive.

use pfr::prelude::*;
use pfr::synthetic::{planted_proxy, PlantedProxyConfig};

fn main() -> Result<()> {
    let data = planted_proxy(&PlantedProxyConfig::default());
    let s = SensitiveLabels::binary("s", &data.sensitive);
    let tau = tau_default(&data.sensitive);
    let cfg = PfrConfig::default();

    let (residual, trace) = pfr_run(&data.matrix, &s, tau, &cfg)?;
    println!("tau = {tau:.4}, initial auc = {:.4}", trace.initial_auc);
    for step in &trace.steps {
        println!(
            "  removed {:<4} weight {:+.3}  auc {:.4} -> {:.4}",
            step.removed_column.id, step.weight_of_removed, step.auc_before, step.auc_after
        );
    }
    println!("kept {:?}", residual.column_ids().collect::<Vec<_>>());

    let audit = recheck(&residual, std::slice::from_ref(&s), &cfg)?;
    println!("independent recheck auc = {:.4}", audit["s"]);

    let fair = train_fair_model(&residual, &data.target, std::slice::from_ref(&trace), &cfg)?;
    let full = train_logistic(&data.matrix, &data.target, &cfg.train)?;
    for (name, model, m) in [("full", &full, &data.matrix), ("fair", &fair, &residual)] {
        let pred = predict_label(model, m, 0.5)?;
        let classes: Vec<u32> = data.sensitive.iter().map(|&v| u32::from(v)).collect();
        println!(
            "{name}: accuracy {:.4}, DI {:.4}",
            accuracy(&pred, &data.target)?,
            disparate_impact_binary(&pred, &classes, 1)?
        );
    }
    Ok(())
}
