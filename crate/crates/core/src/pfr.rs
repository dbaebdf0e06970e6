//! Greedy removal of proxy features.
//!
//! For each sensitive attribute a logistic model is trained to predict the
//! attribute from the current feature columns. While that model's AUC exceeds
//! the attribute's threshold `tau`, the column with the largest absolute
//! weight is deleted and the model retrained. The target model is then fitted
//! on the surviving columns.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{drop_columns, oversample_indices, split, ColumnInfo, EncodedMatrix, SensitiveColumn};
use crate::error::{PfrError, Result};
use crate::metrics::{auc_roc, tau_default, tau_default_multiclass};
use crate::model::{
    most_important_feature, predict_proba, train_logistic, train_logistic_with_summary,
    LogisticModel, TrainConfig,
};

/// Tolerance when checking that an input matrix is min-max scaled.
const SCALE_EPS: f64 = 1e-9;
/// Mixed into the master seed for the independent retraining in [`recheck`].
const RECHECK_SALT: u64 = 0x5eed_c0de_0bad_f00d;
/// Mixed into the master seed for oversampling the target in the fair fit.
const TARGET_SALT: u64 = 0x7a46_e7f1_7000_0001;
/// Mixed into the master seed for the holdout split of the sensitive labels.
const HOLDOUT_SALT: u64 = 0x40d0_0a11_5c0e_0002;

/// How an attribute with more than two classes is turned into predictor targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MulticlassStrategy {
    /// One predictor per class; the loop statistic is the largest AUC and the
    /// feature removed comes from that class's predictor.
    #[default]
    OneVsAll,
    /// A single predictor for privileged versus all other classes.
    PrivilegedVsRest,
}

/// Per-row class indices of one sensitive attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitiveLabels {
    pub name: String,
    pub classes: Vec<u32>,
    pub n_classes: usize,
    pub privileged: u32,
}

impl SensitiveLabels {
    /// A 0/1 attribute; 1 is treated as privileged.
    pub fn binary(name: impl Into<String>, values: &[u8]) -> Self {
        SensitiveLabels {
            name: name.into(),
            classes: values.iter().map(|&v| u32::from(v)).collect(),
            n_classes: 2,
            privileged: 1,
        }
    }

    pub fn from_column(col: &SensitiveColumn) -> Self {
        SensitiveLabels {
            name: col.name().to_string(),
            classes: col.values.clone(),
            n_classes: col.n_classes(),
            privileged: col.spec.privileged_index(),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        SensitiveLabels {
            classes: rows.iter().map(|&r| self.classes[r]).collect(),
            ..self.clone()
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn privileged_indicator(&self) -> Vec<u8> {
        self.classes
            .iter()
            .map(|&c| u8::from(c == self.privileged))
            .collect()
    }

    /// Binary label vectors the sensitive predictors are trained on.
    pub fn targets(&self, strategy: MulticlassStrategy) -> Vec<Vec<u8>> {
        if self.n_classes > 2 && strategy == MulticlassStrategy::OneVsAll {
            (0..self.n_classes as u32)
                .map(|k| self.classes.iter().map(|&c| u8::from(c == k)).collect())
                .collect()
        } else {
            vec![self.privileged_indicator()]
        }
    }

    /// Default threshold: the majority proportion of the predictor target, or
    /// the largest class's proportion under one-vs-all.
    pub fn default_tau(&self, strategy: MulticlassStrategy) -> f64 {
        if self.n_classes > 2 && strategy == MulticlassStrategy::OneVsAll {
            tau_default_multiclass(&self.classes, self.n_classes)
        } else {
            tau_default(&self.privileged_indicator())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PfrConfig {
    /// Attributes processed in this order. Empty means the order given.
    pub sensitive_order: Vec<String>,
    /// Per-attribute thresholds in (0.5, 1]; others use the default.
    pub tau_overrides: BTreeMap<String, f64>,
    /// Allowance over tau when an independent retraining re-verifies a trace.
    /// The loop itself always stops at `auc <= tau`.
    pub auc_slack: f64,
    /// Cap on removals per attribute; `None` means all but one column.
    pub max_removals: Option<usize>,
    pub train: TrainConfig,
    /// Oversample the minority class before every model fit.
    pub oversample: bool,
    pub seed: u64,
    pub multiclass: MulticlassStrategy,
    /// Fraction of rows held out to score the sensitive predictor. `None`
    /// scores on the rows it was fitted to.
    pub auc_holdout: Option<f64>,
}

impl Default for PfrConfig {
    fn default() -> Self {
        PfrConfig {
            sensitive_order: Vec::new(),
            tau_overrides: BTreeMap::new(),
            auc_slack: 0.01,
            max_removals: None,
            train: TrainConfig::default(),
            oversample: true,
            seed: 0,
            multiclass: MulticlassStrategy::OneVsAll,
            auc_holdout: None,
        }
    }
}

impl PfrConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, &tau) in &self.tau_overrides {
            check_tau(tau).map_err(|_| {
                PfrError::config(format!("tau_overrides.{name}"), format!("{tau} is outside (0.5, 1]"))
            })?;
        }
        if self.max_removals == Some(0) {
            return Err(PfrError::config("max_removals", "must be at least 1"));
        }
        if let Some(h) = self.auc_holdout {
            if !(h > 0.0 && h < 1.0) {
                return Err(PfrError::config("auc_holdout", "must be in (0, 1)"));
            }
        }
        if !(self.auc_slack >= 0.0 && self.auc_slack.is_finite()) {
            return Err(PfrError::config("auc_slack", "must be nonnegative"));
        }
        self.train.validate()
    }

    pub fn tau_for(&self, labels: &SensitiveLabels) -> f64 {
        self.tau_overrides
            .get(&labels.name)
            .copied()
            .unwrap_or_else(|| labels.default_tau(self.multiclass))
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.5 && tau <= 1.0 {
        Ok(())
    } else {
        Err(PfrError::Parameter(format!("tau {tau} is outside (0.5, 1]")))
    }
}

/// One deleted column.
#[derive(Debug, Clone, PartialEq)]
pub struct RemovalStep {
    pub sensitive_column: String,
    /// 1-based, per attribute.
    pub iteration: usize,
    pub removed_column: ColumnInfo,
    /// AUC of the predictor the column was taken from.
    pub auc_before: f64,
    /// AUC after retraining without the column.
    pub auc_after: f64,
    pub weight_of_removed: f64,
}

/// Flat JSON-lines form of a [`RemovalStep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StepRecord {
    sensitive: String,
    iteration: usize,
    column: String,
    source_attribute: String,
    source_category: Option<String>,
    auc_before: f64,
    auc_after: f64,
    weight: f64,
}

impl From<&RemovalStep> for StepRecord {
    fn from(s: &RemovalStep) -> Self {
        StepRecord {
            sensitive: s.sensitive_column.clone(),
            iteration: s.iteration,
            column: s.removed_column.id.clone(),
            source_attribute: s.removed_column.source_attribute.clone(),
            source_category: s.removed_column.source_category.clone(),
            auc_before: s.auc_before,
            auc_after: s.auc_after,
            weight: s.weight_of_removed,
        }
    }
}

impl From<StepRecord> for RemovalStep {
    fn from(r: StepRecord) -> Self {
        RemovalStep {
            sensitive_column: r.sensitive,
            iteration: r.iteration,
            removed_column: ColumnInfo {
                id: r.column,
                source_attribute: r.source_attribute,
                source_category: r.source_category,
            },
            auc_before: r.auc_before,
            auc_after: r.auc_after,
            weight_of_removed: r.weight,
        }
    }
}

/// Ordered log of one attribute's removal loop.
#[derive(Debug, Clone, PartialEq)]
pub struct RemovalTrace {
    pub sensitive_column: String,
    pub tau: f64,
    pub steps: Vec<RemovalStep>,
    pub initial_columns: Vec<ColumnInfo>,
    pub final_columns: Vec<ColumnInfo>,
    pub initial_auc: f64,
    /// AUC when the loop stopped.
    pub final_auc: f64,
    /// The loop stopped at its removal cap with `final_auc > tau`.
    pub truncated: bool,
}

impl RemovalTrace {
    pub fn removed_columns(&self) -> impl Iterator<Item = &ColumnInfo> {
        self.steps.iter().map(|s| &s.removed_column)
    }

    pub fn removed_ids(&self) -> Vec<&str> {
        self.removed_columns().map(|c| c.id.as_str()).collect()
    }

    /// One JSON object per step, newline-terminated.
    pub fn to_jsonl(&self) -> String {
        steps_to_jsonl(&self.steps)
    }

    /// Drop this trace's columns from `m`, reproducing the loop's output.
    pub fn replay(&self, m: &EncodedMatrix) -> Result<EncodedMatrix> {
        drop_columns(m, &self.removed_ids())
    }
}

pub fn steps_to_jsonl(steps: &[RemovalStep]) -> String {
    let mut out = String::new();
    for s in steps {
        out.push_str(&serde_json::to_string(&StepRecord::from(s)).expect("plain data serializes"));
        out.push('\n');
    }
    out
}

pub fn steps_from_jsonl(text: &str) -> Result<Vec<RemovalStep>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<StepRecord>(l)
                .map(RemovalStep::from)
                .map_err(|e| PfrError::Validation(format!("trace line {}: {e}", i + 1)))
        })
        .collect()
}

/// Replay removal steps (from any number of attributes) onto `m`.
pub fn replay_steps(m: &EncodedMatrix, steps: &[RemovalStep]) -> Result<EncodedMatrix> {
    let ids: Vec<&str> = steps.iter().map(|s| s.removed_column.id.as_str()).collect();
    drop_columns(m, &ids)
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one oversampling draw, a pure function of its coordinates.
fn derive_seed(master: u64, name: &str, iteration: usize, class: usize) -> u64 {
    let mut h = mix(master);
    for b in name.bytes() {
        h = mix(h ^ u64::from(b));
    }
    mix(mix(h ^ iteration as u64) ^ class as u64)
}

/// Sensitive predictors fitted at one loop iteration.
struct Probe {
    auc: f64,
    /// Predictor with the largest AUC (lowest class on ties).
    leader: usize,
    models: Vec<LogisticModel>,
}

/// Rows used to fit and to score one sensitive predictor.
struct Rows {
    fit: Vec<usize>,
    score: Vec<usize>,
}

fn holdout_rows(
    m: &EncodedMatrix,
    targets: &[Vec<u8>],
    cfg: &PfrConfig,
    seed: impl Fn(usize) -> u64,
) -> Result<Option<Vec<Rows>>> {
    let Some(fraction) = cfg.auc_holdout else {
        return Ok(None);
    };
    targets
        .iter()
        .enumerate()
        .map(|(k, y)| {
            let (fit, score) = split(m, y, 1.0 - fraction, seed(k))?;
            Ok(Rows {
                fit: fit.rows,
                score: score.rows,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn probe(
    m: &EncodedMatrix,
    targets: &[Vec<u8>],
    cfg: &PfrConfig,
    seed: impl Fn(usize) -> u64,
    warm: Option<&[LogisticModel]>,
    holdout: Option<&[Rows]>,
) -> Result<Probe> {
    let mut best: Option<(usize, f64)> = None;
    let mut models = Vec::with_capacity(targets.len());
    for (k, y) in targets.iter().enumerate() {
        let init = warm.map(|w| &w[k]);
        let (fit_rows, score_rows) = match holdout {
            Some(h) => (Some(h[k].fit.as_slice()), Some(h[k].score.as_slice())),
            None => (None, None),
        };
        let mut fit_idx: Vec<usize> = fit_rows.map_or_else(|| (0..y.len()).collect(), <[usize]>::to_vec);
        if cfg.oversample {
            let yf: Vec<u8> = fit_idx.iter().map(|&i| y[i]).collect();
            fit_idx = oversample_indices(&yf, seed(k))?
                .into_iter()
                .map(|i| fit_idx[i])
                .collect();
        }
        let mf = m.select_rows(&fit_idx);
        let yf: Vec<u8> = fit_idx.iter().map(|&i| y[i]).collect();
        let (model, _) = train_logistic_with_summary(&mf, &yf, &cfg.train, init)?;
        let auc = match score_rows {
            Some(rows) => {
                let ys: Vec<u8> = rows.iter().map(|&i| y[i]).collect();
                auc_roc(&predict_proba(&model, &m.select_rows(rows))?, &ys)?
            }
            None => auc_roc(&predict_proba(&model, &mf)?, &yf)?,
        };
        if best.is_none_or(|(_, b)| auc > b) {
            best = Some((k, auc));
        }
        models.push(model);
    }
    let (leader, auc) = best.expect("at least one target");
    Ok(Probe {
        auc,
        leader,
        models,
    })
}

fn check_sensitive(m: &EncodedMatrix, sensitive: &SensitiveLabels, targets: &[Vec<u8>]) -> Result<()> {
    if sensitive.len() != m.n_rows() {
        return Err(PfrError::Parameter(format!(
            "sensitive `{}` has {} values for {} rows",
            sensitive.name,
            sensitive.len(),
            m.n_rows()
        )));
    }
    for (k, y) in targets.iter().enumerate() {
        let ones = y.iter().filter(|&&v| v == 1).count();
        if ones == 0 || ones == y.len() {
            return Err(PfrError::DegenerateLabels(format!(
                "sensitive `{}`{} has a single class",
                sensitive.name,
                if targets.len() > 1 {
                    format!(" (one-vs-all target {k})")
                } else {
                    String::new()
                }
            )));
        }
    }
    Ok(())
}

fn check_scaled(m: &EncodedMatrix) -> Result<()> {
    if m.is_degenerate() {
        return Err(PfrError::ExhaustedFeatures {
            sensitive: String::new(),
            trace: None,
        });
    }
    if let Some(x) = m
        .values()
        .iter()
        .find(|&&x| !(-SCALE_EPS..=1.0 + SCALE_EPS).contains(&x))
    {
        return Err(PfrError::Parameter(format!(
            "matrix is not min-max scaled (value {x}); importances need normalized features"
        )));
    }
    Ok(())
}

/// Run the removal loop for one attribute. Returns the residual matrix and the
/// trace; errors with the partial trace if the removal cap is reached while
/// the AUC is still above `tau`.
pub fn pfr_run(
    m: &EncodedMatrix,
    sensitive: &SensitiveLabels,
    tau: f64,
    cfg: &PfrConfig,
) -> Result<(EncodedMatrix, RemovalTrace)> {
    cfg.validate()?;
    check_tau(tau)?;
    check_scaled(m)?;
    let targets = sensitive.targets(cfg.multiclass);
    check_sensitive(m, sensitive, &targets)?;

    let cap = cfg
        .max_removals
        .unwrap_or(usize::MAX)
        .min(m.n_cols().saturating_sub(1));
    let name = sensitive.name.as_str();
    let seeds = |iteration: usize| move |k: usize| derive_seed(cfg.seed, name, iteration, k);

    let mut current = m.clone();
    let holdout = holdout_rows(m, &targets, cfg, |k| derive_seed(cfg.seed ^ HOLDOUT_SALT, name, 0, k))?;
    let mut fit = probe(&current, &targets, cfg, seeds(0), None, holdout.as_deref())?;
    let initial_auc = fit.auc;
    let mut steps: Vec<RemovalStep> = Vec::new();

    while fit.auc > tau {
        if steps.len() >= cap {
            let trace = RemovalTrace {
                sensitive_column: name.to_string(),
                tau,
                steps,
                initial_columns: m.columns().to_vec(),
                final_columns: current.columns().to_vec(),
                initial_auc,
                final_auc: fit.auc,
                truncated: true,
            };
            return Err(PfrError::ExhaustedFeatures {
                sensitive: name.to_string(),
                trace: Some(Box::new(trace)),
            });
        }
        let leader = &fit.models[fit.leader];
        let j = most_important_feature(leader)?;
        let removed = current.columns()[j].clone();
        let weight = leader.weights()[j];
        current = drop_columns(&current, &[removed.id.as_str()])?;
        let iteration = steps.len() + 1;
        let next = probe(
            &current,
            &targets,
            cfg,
            seeds(iteration),
            Some(&fit.models),
            holdout.as_deref(),
        )?;
        steps.push(RemovalStep {
            sensitive_column: name.to_string(),
            iteration,
            removed_column: removed,
            auc_before: fit.auc,
            auc_after: next.auc,
            weight_of_removed: weight,
        });
        fit = next;
    }

    let trace = RemovalTrace {
        sensitive_column: name.to_string(),
        tau,
        steps,
        initial_columns: m.columns().to_vec(),
        final_columns: current.columns().to_vec(),
        initial_auc,
        final_auc: fit.auc,
        truncated: false,
    };
    Ok((current, trace))
}

/// Order in which `sensitive` is processed under `cfg`.
fn ordered<'a>(sensitive: &'a [SensitiveLabels], cfg: &PfrConfig) -> Result<Vec<&'a SensitiveLabels>> {
    if cfg.sensitive_order.is_empty() {
        return Ok(sensitive.iter().collect());
    }
    cfg.sensitive_order
        .iter()
        .map(|name| {
            sensitive.iter().find(|s| &s.name == name).ok_or_else(|| {
                PfrError::config("sensitive_order", format!("unknown sensitive attribute `{name}`"))
            })
        })
        .collect()
}

/// Run the removal loop for each attribute in turn, each starting from the
/// previous attribute's residual matrix.
pub fn pfr_multi(
    m: &EncodedMatrix,
    sensitive: &[SensitiveLabels],
    cfg: &PfrConfig,
) -> Result<(EncodedMatrix, Vec<RemovalTrace>)> {
    cfg.validate()?;
    let mut current = m.clone();
    let mut traces = Vec::new();
    for labels in ordered(sensitive, cfg)? {
        let tau = cfg.tau_for(labels);
        let (residual, trace) = pfr_run(&current, labels, tau, cfg)?;
        current = residual;
        traces.push(trace);
    }
    Ok((current, traces))
}

/// Fit the target model on the residual columns. Fails if any column removed
/// by `traces` is still present.
pub fn train_fair_model(
    residual: &EncodedMatrix,
    target: &[u8],
    traces: &[RemovalTrace],
    cfg: &PfrConfig,
) -> Result<LogisticModel> {
    if residual.is_degenerate() {
        return Err(PfrError::ExhaustedFeatures {
            sensitive: traces
                .iter()
                .map(|t| t.sensitive_column.as_str())
                .collect::<Vec<_>>()
                .join("+"),
            trace: None,
        });
    }
    for id in traces.iter().flat_map(RemovalTrace::removed_ids) {
        if residual.column_index(id).is_some() {
            return Err(PfrError::ColumnMismatch(format!(
                "removed column `{id}` is still present in the residual matrix"
            )));
        }
    }
    cfg.train.validate()?;
    if cfg.oversample {
        if target.len() != residual.n_rows() {
            return Err(PfrError::Parameter(format!(
                "{} labels for {} rows",
                target.len(),
                residual.n_rows()
            )));
        }
        let idx = oversample_indices(target, mix(cfg.seed ^ TARGET_SALT))?;
        let y: Vec<u8> = idx.iter().map(|&i| target[i]).collect();
        train_logistic(&residual.select_rows(&idx), &y, &cfg.train)
    } else {
        train_logistic(residual, target, &cfg.train)
    }
}

/// Retrain a fresh predictor per attribute on `residual` (new oversampling
/// seed, no warm start) and report its AUC.
pub fn recheck(
    residual: &EncodedMatrix,
    sensitive: &[SensitiveLabels],
    cfg: &PfrConfig,
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    if sensitive.is_empty() {
        return Ok(out);
    }
    cfg.validate()?;
    check_scaled(residual)?;
    let seed = cfg.seed ^ RECHECK_SALT;
    for labels in sensitive {
        let targets = labels.targets(cfg.multiclass);
        check_sensitive(residual, labels, &targets)?;
        let name = labels.name.as_str();
        let holdout = holdout_rows(residual, &targets, cfg, |k| derive_seed(seed ^ HOLDOUT_SALT, name, 0, k))?;
        let fit = probe(
            residual,
            &targets,
            cfg,
            |k| derive_seed(seed, name, 0, k),
            None,
            holdout.as_deref(),
        )?;
        out.insert(labels.name.clone(), fit.auc);
    }
    Ok(out)
}
