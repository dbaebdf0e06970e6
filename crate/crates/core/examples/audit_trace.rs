//! Save a removal trace, read it back, replay it on freshly encoded data and
//! retrain an independent predictor to confirm the attribute stays hidden.

use pfr::experiment::prepare;
use pfr::pfr::{replay_steps, steps_from_jsonl};
use pfr::prelude::*;

fn main() -> Result<()> {
    let cfg_path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/adult/adult.toml");
    let data = prepare(&DatasetConfig::from_file(cfg_path)?)?;
    let sex = data.sensitive("sex")?;
    let cfg = PfrConfig::default();
    let (residual, trace) = pfr_run(&data.matrix, sex, 0.7, &cfg)?;

    let path = std::env::temp_dir().join("pfr-sex-trace.jsonl");
    std::fs::write(&path, trace.to_jsonl()).expect("temp dir is writable");
    println!("wrote {} steps to {}", trace.steps.len(), path.display());

    let fresh = prepare(&DatasetConfig::from_file(cfg_path)?)?;
    let steps = steps_from_jsonl(&std::fs::read_to_string(&path).expect("just written"))?;
    let replayed = replay_steps(&fresh.matrix, &steps)?;
    assert!(replayed.column_ids().eq(residual.column_ids()));
    println!("replay reproduces the {} surviving columns", replayed.n_cols());

    let audit = recheck(&replayed, std::slice::from_ref(sex), &cfg)?;
    let limit = trace.tau + cfg.auc_slack;
    println!(
        "recheck auc {:.4} against limit {limit:.4}: {}",
        audit["sex"],
        if audit["sex"] <= limit { "pass" } else { "fail" }
    );
    Ok(())
}
