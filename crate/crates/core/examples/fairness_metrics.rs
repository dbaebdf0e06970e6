//! AUC, accuracy and both disparate impact variants on hand-made vectors.

use pfr::prelude::*;

fn main() -> Result<()> {
    let scores = [0.1, 0.4, 0.35, 0.8, 0.8, 0.2];
    let labels = [0, 0, 1, 1, 0, 1];
    println!("auc = {:.4}", auc_roc(&scores, &labels)?);

    // race: 0 = White (privileged), 1 = Black, 2 = Asian
    let predicted = [1, 1, 0, 1, 0, 0, 1, 0, 1, 0];
    let race = [0, 0, 0, 0, 1, 1, 1, 2, 2, 2];
    let actual = [1, 0, 0, 1, 0, 0, 1, 0, 1, 1];
    println!("accuracy = {:.2}", accuracy(&predicted, &actual)?);
    println!(
        "binary DI (White vs rest) = {:.4}",
        disparate_impact_binary(&predicted, &race, 0)?
    );
    println!(
        "average DI over (Black, White), (Asian, White) = {:.4}",
        disparate_impact_average(&predicted, &race, &[0], &[1, 2])?
    );

    let sex = [1, 1, 1, 0, 1, 0, 1, 1, 0, 1];
    println!("default tau for sex = {}", tau_default(&sex));

    let one_vs_all = pfr::metrics::auc_one_vs_all(
        &[
            vec![0.9, 0.8, 0.7, 0.2, 0.1, 0.3, 0.2, 0.1, 0.4, 0.2],
            vec![0.05, 0.1, 0.2, 0.7, 0.8, 0.6, 0.1, 0.2, 0.3, 0.2],
            vec![0.05, 0.1, 0.1, 0.1, 0.1, 0.1, 0.7, 0.7, 0.3, 0.6],
        ],
        &race,
    )?;
    println!("one-vs-all auc per race class = {one_vs_all:.3?}");
    Ok(())
}
