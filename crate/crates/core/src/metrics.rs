//! AUC-ROC, accuracy, disparate impact and the default AUC threshold.

use serde::{Deserialize, Serialize};

use crate::dataset::{class_counts, ColumnInfo};
use crate::error::{PfrError, Result};

/// Area under the ROC curve via the rank-sum (Mann-Whitney) statistic: the
/// probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn auc_roc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(PfrError::Parameter(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(PfrError::NumericInput(format!("score {i} is NaN")));
    }
    let counts = class_counts(labels)?;
    let (n_neg, n_pos) = (counts[0], counts[1]);
    if n_pos == 0 || n_neg == 0 {
        return Err(PfrError::DegenerateLabels(format!(
            "auc needs both classes, got {n_neg} negatives and {n_pos} positives"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of 1-based ranks of positives, tied groups sharing their mean rank.
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let mean_rank = (start + 1 + end) as f64 / 2.0;
        let positives = order[start..end].iter().filter(|&&i| labels[i] == 1).count();
        rank_sum += mean_rank * positives as f64;
        start = end;
    }
    let (n_pos, n_neg) = (n_pos as f64, n_neg as f64);
    let u = rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    Ok(u / (n_pos * n_neg))
}

/// One AUC per class: class `c` scored by `scores[c]` against membership
/// `classes[i] == c`.
pub fn auc_one_vs_all(scores: &[Vec<f64>], classes: &[u32]) -> Result<Vec<f64>> {
    let k = scores.len();
    if k < 2 {
        return Err(PfrError::Parameter(format!(
            "one-vs-all needs at least 2 classes, got {k}"
        )));
    }
    (0..k)
        .map(|c| {
            let labels: Vec<u8> = classes.iter().map(|&v| u8::from(v as usize == c)).collect();
            auc_roc(&scores[c], &labels).map_err(|e| match e {
                PfrError::DegenerateLabels(_) => {
                    PfrError::DegenerateLabels(format!("class {c} is absent or universal"))
                }
                other => other,
            })
        })
        .collect()
}

pub fn accuracy(predicted: &[u8], actual: &[u8]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(PfrError::Parameter(format!(
            "{} predictions for {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(PfrError::Parameter("accuracy of zero predictions".into()));
    }
    let hits = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Positive-prediction rate among rows whose class satisfies `member`.
fn positive_rate(predicted: &[u8], classes: &[u32], member: impl Fn(u32) -> bool) -> Option<f64> {
    let (mut total, mut positive) = (0usize, 0usize);
    for (&p, &c) in predicted.iter().zip(classes) {
        if member(c) {
            total += 1;
            positive += usize::from(p == 1);
        }
    }
    (total > 0).then(|| positive as f64 / total as f64)
}

/// Ratio of positive rates, unprivileged over privileged. `0/0` is 1 and
/// `x/0` for `x > 0` is `+∞`.
pub fn rate_ratio(unprivileged: f64, privileged: f64) -> f64 {
    if privileged == 0.0 {
        if unprivileged == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        unprivileged / privileged
    }
}

fn check_lengths(predicted: &[u8], classes: &[u32]) -> Result<()> {
    if predicted.len() != classes.len() {
        return Err(PfrError::Parameter(format!(
            "{} predictions for {} sensitive values",
            predicted.len(),
            classes.len()
        )));
    }
    Ok(())
}

/// `Pr(ŷ=1 | unprivileged) / Pr(ŷ=1 | privileged)` with every class other
/// than `privileged` pooled into the unprivileged group.
pub fn disparate_impact_binary(predicted: &[u8], classes: &[u32], privileged: u32) -> Result<f64> {
    check_lengths(predicted, classes)?;
    let priv_rate = positive_rate(predicted, classes, |c| c == privileged)
        .ok_or_else(|| PfrError::DegenerateGroup("privileged group is empty".into()))?;
    let unpriv_rate = positive_rate(predicted, classes, |c| c != privileged)
        .ok_or_else(|| PfrError::DegenerateGroup("unprivileged group is empty".into()))?;
    Ok(rate_ratio(unpriv_rate, priv_rate))
}

/// Mean of the rate ratio over every (unprivileged class, privileged class)
/// pair.
pub fn disparate_impact_average(
    predicted: &[u8],
    classes: &[u32],
    privileged: &[u32],
    unprivileged: &[u32],
) -> Result<f64> {
    check_lengths(predicted, classes)?;
    if privileged.is_empty() || unprivileged.is_empty() {
        return Err(PfrError::DegenerateGroup(
            "need at least one privileged and one unprivileged class".into(),
        ));
    }
    let rate = |c: u32| {
        positive_rate(predicted, classes, |v| v == c)
            .ok_or_else(|| PfrError::DegenerateGroup(format!("class {c} has no rows")))
    };
    let priv_rates = privileged.iter().map(|&c| rate(c)).collect::<Result<Vec<_>>>()?;
    let unpriv_rates = unprivileged.iter().map(|&c| rate(c)).collect::<Result<Vec<_>>>()?;
    let mut sum = 0.0;
    for &u in &unpriv_rates {
        for &p in &priv_rates {
            sum += rate_ratio(u, p);
        }
    }
    Ok(sum / (priv_rates.len() * unpriv_rates.len()) as f64)
}

/// Default AUC threshold: the majority-class proportion of a binary vector.
/// A single-class (or empty) vector yields 1.0, which callers must treat as
/// degenerate.
pub fn tau_default(values: &[u8]) -> f64 {
    let ones = values.iter().filter(|&&v| v == 1).count();
    let zeros = values.len() - ones;
    if values.is_empty() {
        return 1.0;
    }
    ones.max(zeros) as f64 / values.len() as f64
}

/// Multi-class generalization: the largest class's proportion.
pub fn tau_default_multiclass(classes: &[u32], n_classes: usize) -> f64 {
    if classes.is_empty() {
        return 1.0;
    }
    let mut counts = vec![0usize; n_classes.max(1)];
    for &c in classes {
        if let Some(slot) = counts.get_mut(c as usize) {
            *slot += 1;
        }
    }
    *counts.iter().max().unwrap() as f64 / classes.len() as f64
}

/// Outcome of one fair model on one sensitive attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub sensitive_column: String,
    pub tau: f64,
    pub accuracy: f64,
    #[serde(with = "extended_f64")]
    pub disparate_impact_binary: f64,
    #[serde(with = "extended_f64")]
    pub disparate_impact_average: f64,
    pub removed_columns: Vec<ColumnInfo>,
    /// AUC of the sensitive-attribute predictor when the removal loop exited.
    pub final_sensitive_auc: f64,
    /// AUC from an independent retraining on the residual columns.
    pub recheck_auc: Option<f64>,
}

impl FairnessReport {
    pub const CSV_HEADER: &'static str = "sensitive_column,tau,accuracy,disparate_impact_binary,disparate_impact_average,n_removed,removed_columns,final_sensitive_auc,recheck_auc";

    pub fn to_csv_row(&self) -> String {
        let removed: Vec<&str> = self.removed_columns.iter().map(|c| c.id.as_str()).collect();
        format!(
            "{},{},{},{},{},{},\"{}\",{},{}",
            self.sensitive_column,
            self.tau,
            self.accuracy,
            format_extended(self.disparate_impact_binary),
            format_extended(self.disparate_impact_average),
            self.removed_columns.len(),
            removed.join(";").replace('"', "\"\""),
            self.final_sensitive_auc,
            self.recheck_auc.map(|a| a.to_string()).unwrap_or_default()
        )
    }
}

/// Formats `+∞` as `inf`, the only non-finite value a ratio can take here.
pub fn format_extended(x: f64) -> String {
    if x.is_infinite() && x > 0.0 {
        "inf".to_string()
    } else {
        x.to_string()
    }
}

/// Serde adapter writing `+∞` as the string `"inf"`.
pub(crate) mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str("inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad number `{t}`"))),
        }
    }
}
