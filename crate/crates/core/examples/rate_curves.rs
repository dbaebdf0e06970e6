//! Positive-prediction rate of men and women across decision thresholds, for
//! the plain classifier and for the one trained after proxy removal.

use pfr::experiment::{positive_rate_curve, prepare};
use pfr::prelude::*;

fn main() -> Result<()> {
    let data = prepare(&DatasetConfig::from_file(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../data/adult/adult.toml"
    ))?)?;
    let sex = data.sensitive("sex")?;
    let cfg = PfrConfig::default();

    let plain = train_logistic(&data.matrix, data.target(), &cfg.train)?;
    let (residual, trace) = pfr_run(&data.matrix, sex, 0.65, &cfg)?;
    let fair = train_fair_model(&residual, data.target(), &[trace], &cfg)?;

    let before = positive_rate_curve(&plain, &data.matrix, sex)?;
    let after = positive_rate_curve(&fair, &residual, sex)?;
    println!("threshold  plain(M, F)      fair(M, F)");
    for (b, a) in before.iter().zip(&after).step_by(10) {
        println!(
            "{:>9.2}  {:.3}, {:.3}     {:.3}, {:.3}",
            b.threshold, b.rate_privileged, b.rate_unprivileged, a.rate_privileged, a.rate_unprivileged
        );
    }
    let gap = |c: &[pfr::experiment::RatePoint]| {
        c.iter()
            .map(|r| (r.rate_privileged - r.rate_unprivileged).abs())
            .sum::<f64>()
            / c.len() as f64
    };
    println!("mean gap: plain {:.4}, fair {:.4}", gap(&before), gap(&after));
    Ok(())
}
