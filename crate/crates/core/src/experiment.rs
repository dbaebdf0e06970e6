//! Threshold sweeps and their plot-ready outputs.
//!
//! For every sensitive-attribute set and every `tau` in the grid,
//! [`run_experiment`] removes proxy columns on the training split, fits the
//! fair model and measures accuracy and disparate impact on the held-out
//! split. A baseline row (no removals) is produced per set.
//!
//! Output layout under `output_dir`:
//!
//! | file | content |
//! |------|---------|
//! | `sweep.csv` | one [`SweepRow`] per grid point plus baselines, columns [`SWEEP_HEADER`] |
//! | `trace_<set>_<tau>.jsonl` | removal steps, one JSON object per line |
//! | `report_<set>_<tau>.json` | [`PointReport`]: per-attribute [`FairnessReport`]s and the detected-feature table |
//! | `rates_<set>_<tau>.csv` | positive-prediction rates per group across thresholds |
//! | `timings.csv` | wall-clock milliseconds per grid point (not reproducible) |
//!
//! `<set>` joins attribute names with `+`; baselines use `baseline` for `<tau>`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{min_max_scale, one_hot_encode, split, DatasetConfig, EncodedMatrix, LoadedDataset};
use crate::error::{PfrError, Result};
use crate::metrics::{
    accuracy, disparate_impact_average, disparate_impact_binary, extended_f64, format_extended,
    FairnessReport,
};
use crate::model::{predict_label, predict_proba, LogisticModel};
use crate::pfr::{pfr_multi, recheck, train_fair_model, PfrConfig, RemovalTrace, SensitiveLabels};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "PFR_WORKERS";

pub const SWEEP_HEADER: &str =
    "kind,sensitive_set,tau,accuracy,di_binary,di_average,n_removed,final_auc_max,error";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset config file; relative paths resolve against this config's directory.
    pub dataset: PathBuf,
    pub sensitive_sets: Vec<Vec<String>>,
    pub tau_grid: Vec<f64>,
    #[serde(default = "default_split")]
    pub split_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Concurrent grid points; `PFR_WORKERS` takes precedence.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub pfr: PfrConfig,
}

fn default_split() -> f64 {
    0.8
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| PfrError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| PfrError::config(path.display().to_string(), e.to_string()))?;
        if let Some(dir) = path.parent() {
            if cfg.dataset.is_relative() {
                cfg.dataset = dir.join(&cfg.dataset);
            }
            if cfg.output_dir.is_relative() {
                cfg.output_dir = dir.join(&cfg.output_dir);
            }
        }
        Ok(cfg)
    }

    /// Checks that do not need the dataset.
    pub fn validate(&self) -> Result<()> {
        if self.tau_grid.is_empty() {
            return Err(PfrError::config("tau_grid", "must not be empty"));
        }
        for (i, &t) in self.tau_grid.iter().enumerate() {
            if !(t > 0.5 && t <= 1.0) {
                return Err(PfrError::config(
                    format!("tau_grid[{i}]"),
                    format!("{t} is outside (0.5, 1]"),
                ));
            }
        }
        if self.sensitive_sets.is_empty() {
            return Err(PfrError::config("sensitive_sets", "must not be empty"));
        }
        for (i, set) in self.sensitive_sets.iter().enumerate() {
            if set.is_empty() {
                return Err(PfrError::config(format!("sensitive_sets[{i}]"), "must not be empty"));
            }
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(PfrError::config("split_fraction", "must be in (0, 1)"));
        }
        if self.workers == Some(0) {
            return Err(PfrError::config("workers", "must be at least 1"));
        }
        self.pfr.validate().map_err(|e| match e {
            PfrError::Config { field, message } => PfrError::config(format!("pfr.{field}"), message),
            other => other,
        })
    }

    fn worker_count(&self) -> Result<usize> {
        match std::env::var(WORKERS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n >= 1 => Ok(n),
                _ => Err(PfrError::config(WORKERS_ENV, format!("`{v}` is not a positive integer"))),
            },
            Err(_) => Ok(self.workers.unwrap_or_else(|| {
                std::thread::available_parallelism().map_or(1, |n| n.get())
            })),
        }
    }
}

/// A dataset loaded, one-hot encoded and min-max scaled over all rows.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub loaded: LoadedDataset,
    pub matrix: EncodedMatrix,
    /// Every configured sensitive attribute, in config order.
    pub sensitive: Vec<SensitiveLabels>,
}

impl PreparedData {
    pub fn sensitive(&self, name: &str) -> Result<&SensitiveLabels> {
        self.sensitive
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| PfrError::config("sensitive", format!("unknown sensitive attribute `{name}`")))
    }

    pub fn target(&self) -> &[u8] {
        self.loaded.dataset.target()
    }
}

pub fn prepare(cfg: &DatasetConfig) -> Result<PreparedData> {
    let loaded = cfg.load()?;
    let matrix = min_max_scale(&one_hot_encode(&loaded.dataset))?;
    let sensitive = loaded
        .dataset
        .sensitive_columns()
        .iter()
        .map(SensitiveLabels::from_column)
        .collect();
    Ok(PreparedData {
        loaded,
        matrix,
        sensitive,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Pfr,
    Baseline,
}

impl fmt::Display for RowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowKind::Pfr => "pfr",
            RowKind::Baseline => "baseline",
        })
    }
}

/// One line of `sweep.csv`. For a multi-attribute set the disparate-impact
/// fields hold the attribute whose binary value is furthest from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub kind: RowKind,
    pub sensitive_set: String,
    pub tau: Option<f64>,
    pub accuracy: Option<f64>,
    pub di_binary: Option<f64>,
    pub di_average: Option<f64>,
    pub n_removed: usize,
    pub final_auc_max: Option<f64>,
    /// Wall-clock time, written to `timings.csv` only.
    pub runtime_ms: u64,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn to_csv(&self) -> String {
        let num = |x: Option<f64>| x.map(format_extended).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.kind,
            self.sensitive_set,
            num(self.tau),
            num(self.accuracy),
            num(self.di_binary),
            num(self.di_average),
            self.n_removed,
            num(self.final_auc_max),
            self.error.as_deref().map(csv_quote).unwrap_or_default()
        )
    }
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
}

/// Positive-prediction rates of the two groups at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub threshold: f64,
    pub rate_privileged: f64,
    pub rate_unprivileged: f64,
}

/// Rates of predicted positives for privileged and unprivileged rows at
/// thresholds 0.00, 0.01, …, 1.00. A row counts as positive when its
/// probability is at least the threshold, except at 1.00 where it must exceed
/// it, so the curve always ends at (0, 0).
pub fn positive_rate_curve(
    model: &LogisticModel,
    m: &EncodedMatrix,
    sensitive: &SensitiveLabels,
) -> Result<Vec<RatePoint>> {
    if sensitive.len() != m.n_rows() {
        return Err(PfrError::Parameter(format!(
            "{} sensitive values for {} rows",
            sensitive.len(),
            m.n_rows()
        )));
    }
    let proba = predict_proba(model, m)?;
    let privileged = sensitive.privileged_indicator();
    let n_priv = privileged.iter().filter(|&&p| p == 1).count();
    let n_unpriv = privileged.len() - n_priv;
    if n_priv == 0 || n_unpriv == 0 {
        return Err(PfrError::DegenerateGroup(format!(
            "`{}` needs privileged and unprivileged rows, got {n_priv} and {n_unpriv}",
            sensitive.name
        )));
    }
    Ok((0..=100)
        .map(|step| {
            let threshold = f64::from(step) / 100.0;
            let positive = |p: f64| if step == 100 { p > threshold } else { p >= threshold };
            let (mut pos_priv, mut pos_unpriv) = (0usize, 0usize);
            for (&p, &g) in proba.iter().zip(&privileged) {
                if positive(p) {
                    if g == 1 {
                        pos_priv += 1;
                    } else {
                        pos_unpriv += 1;
                    }
                }
            }
            RatePoint {
                threshold,
                rate_privileged: pos_priv as f64 / n_priv as f64,
                rate_unprivileged: pos_unpriv as f64 / n_unpriv as f64,
            }
        })
        .collect())
}

/// Removed columns grouped by source attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub rows: Vec<FeatureTableRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureTableRow {
    pub attribute: String,
    /// Sorted category values, or `["continuous"]` for a numeric column.
    pub values: Vec<String>,
}

impl FeatureTable {
    pub fn attributes(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r.attribute.as_str())
    }
}

impl fmt::Display for FeatureTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "attribute: values")?;
        for row in &self.rows {
            writeln!(f, "{}: {}", row.attribute, row.values.join(", "))?;
        }
        Ok(())
    }
}

/// Group the columns removed by `traces` by source attribute, in order of
/// first removal.
pub fn emit_table_report(traces: &[RemovalTrace]) -> FeatureTable {
    let mut order: Vec<String> = Vec::new();
    let mut values: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for col in traces.iter().flat_map(RemovalTrace::removed_columns) {
        let attr = &col.source_attribute;
        if !values.contains_key(attr) {
            order.push(attr.clone());
        }
        let v = col
            .source_category
            .clone()
            .unwrap_or_else(|| "continuous".to_string());
        let entry = values.entry(attr.clone()).or_default();
        if !entry.contains(&v) {
            entry.push(v);
        }
    }
    FeatureTable {
        rows: order
            .into_iter()
            .map(|attribute| {
                let mut v = values.remove(&attribute).unwrap_or_default();
                v.sort();
                FeatureTableRow { attribute, values: v }
            })
            .collect(),
    }
}

/// Contents of `report_<set>_<tau>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub sensitive_set: String,
    pub kind: RowKind,
    pub tau: Option<f64>,
    pub accuracy: f64,
    pub n_removed: usize,
    pub reports: Vec<FairnessReport>,
    pub detected_features: FeatureTable,
}

/// Everything one grid point produced.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub row: SweepRow,
    pub traces: Vec<RemovalTrace>,
    pub report: Option<PointReport>,
    pub rates: Vec<(String, Vec<RatePoint>)>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    /// Baseline then grid rows, per set in config order.
    pub points: Vec<PointResult>,
    pub rows_used: usize,
    pub output_dir: PathBuf,
}

impl ExperimentOutcome {
    pub fn rows(&self) -> impl Iterator<Item = &SweepRow> {
        self.points.iter().map(|p| &p.row)
    }

    pub fn point(&self, set: &str, tau: Option<f64>) -> Option<&PointResult> {
        self.points
            .iter()
            .find(|p| p.row.sensitive_set == set && p.row.tau == tau)
    }
}

pub fn set_label(set: &[String]) -> String {
    set.join("+")
}

fn tau_label(tau: Option<f64>) -> String {
    tau.map_or_else(|| "baseline".to_string(), |t| t.to_string())
}

struct Split {
    train: EncodedMatrix,
    train_target: Vec<u8>,
    train_sensitive: Vec<SensitiveLabels>,
    eval: EncodedMatrix,
    eval_target: Vec<u8>,
    eval_sensitive: Vec<SensitiveLabels>,
}

/// Run every (set, tau) point and the per-set baselines, then write outputs.
/// Configuration problems are reported before anything is written; failures
/// of individual points land in the `error` column.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let workers = cfg.worker_count()?;
    let dataset_cfg = DatasetConfig::from_file(&cfg.dataset).map_err(|e| match e {
        PfrError::Io { path, source } => {
            PfrError::config("dataset", format!("{}: {source}", path.display()))
        }
        other => other,
    })?;
    if !dataset_cfg.path.is_file() {
        return Err(PfrError::config(
            "dataset.path",
            format!("{} does not exist", dataset_cfg.path.display()),
        ));
    }
    let data = prepare(&dataset_cfg)?;
    for (i, set) in cfg.sensitive_sets.iter().enumerate() {
        for (j, name) in set.iter().enumerate() {
            if data.sensitive(name).is_err() {
                return Err(PfrError::config(
                    format!("sensitive_sets[{i}][{j}]"),
                    format!("`{name}` is not a sensitive column of the dataset"),
                ));
            }
        }
    }

    let (train, eval) = split(&data.matrix, data.target(), cfg.split_fraction, cfg.seed)?;
    let split = Split {
        train_sensitive: data.sensitive.iter().map(|s| s.select_rows(&train.rows)).collect(),
        eval_sensitive: data.sensitive.iter().map(|s| s.select_rows(&eval.rows)).collect(),
        train: train.matrix,
        train_target: train.labels,
        eval: eval.matrix,
        eval_target: eval.labels,
    };

    let mut jobs: Vec<(&Vec<String>, Option<f64>)> = Vec::new();
    for set in &cfg.sensitive_sets {
        jobs.push((set, None));
        jobs.extend(cfg.tau_grid.iter().map(|&t| (set, Some(t))));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PfrError::config("workers", e.to_string()))?;
    let points: Vec<PointResult> = pool.install(|| {
        jobs.par_iter()
            .map(|(set, tau)| run_point(&split, set, *tau, &cfg.pfr))
            .collect()
    });

    write_outputs(&cfg.output_dir, &points)?;
    Ok(ExperimentOutcome {
        points,
        rows_used: data.matrix.n_rows(),
        output_dir: cfg.output_dir.clone(),
    })
}

fn run_point(split: &Split, set: &[String], tau: Option<f64>, base: &PfrConfig) -> PointResult {
    let start = Instant::now();
    let label = set_label(set);
    let mut cfg = base.clone();
    cfg.sensitive_order = set.to_vec();
    if let Some(t) = tau {
        for name in set {
            cfg.tau_overrides.insert(name.clone(), t);
        }
    }
    let pick = |all: &[SensitiveLabels]| -> Vec<SensitiveLabels> {
        set.iter()
            .filter_map(|n| all.iter().find(|s| &s.name == n).cloned())
            .collect()
    };
    let train_s = pick(&split.train_sensitive);
    let eval_s = pick(&split.eval_sensitive);

    let mut traces = Vec::new();
    let outcome = evaluate_point(split, &train_s, &eval_s, tau, &cfg, &mut traces);
    let n_removed = traces.iter().map(|t| t.steps.len()).sum();
    let final_auc_max = traces
        .iter()
        .map(|t| t.final_auc)
        .reduce(f64::max);
    let kind = if tau.is_some() { RowKind::Pfr } else { RowKind::Baseline };
    let mut row = SweepRow {
        kind,
        sensitive_set: label.clone(),
        tau,
        accuracy: None,
        di_binary: None,
        di_average: None,
        n_removed,
        final_auc_max,
        runtime_ms: 0,
        error: None,
    };
    let (report, rates) = match outcome {
        Ok((reports, acc, rates, baseline_auc)) => {
            let worst = reports
                .iter()
                .max_by(|a, b| {
                    (a.disparate_impact_binary - 1.0)
                        .abs()
                        .total_cmp(&(b.disparate_impact_binary - 1.0).abs())
                })
                .expect("sets are nonempty");
            row.accuracy = Some(acc);
            row.di_binary = Some(worst.disparate_impact_binary);
            row.di_average = Some(worst.disparate_impact_average);
            if kind == RowKind::Baseline {
                row.final_auc_max = baseline_auc;
            }
            let report = PointReport {
                sensitive_set: label,
                kind,
                tau,
                accuracy: acc,
                n_removed,
                detected_features: emit_table_report(&traces),
                reports,
            };
            (Some(report), rates)
        }
        Err(e) => {
            row.error = Some(e.to_string());
            (None, Vec::new())
        }
    };
    row.runtime_ms = start.elapsed().as_millis() as u64;
    PointResult {
        row,
        traces,
        report,
        rates,
    }
}

type PointMetrics = (Vec<FairnessReport>, f64, Vec<(String, Vec<RatePoint>)>, Option<f64>);

fn evaluate_point(
    split: &Split,
    train_s: &[SensitiveLabels],
    eval_s: &[SensitiveLabels],
    tau: Option<f64>,
    cfg: &PfrConfig,
    traces: &mut Vec<RemovalTrace>,
) -> Result<PointMetrics> {
    let (residual, audit) = match tau {
        Some(_) => {
            let (residual, done) = pfr_multi(&split.train, train_s, cfg).inspect_err(|e| {
                if let PfrError::ExhaustedFeatures {
                    trace: Some(partial),
                    ..
                } = e
                {
                    traces.push((**partial).clone());
                }
            })?;
            *traces = done;
            let audit = recheck(&residual, train_s, cfg)?;
            (residual, audit)
        }
        None => {
            let audit = recheck(&split.train, train_s, cfg)?;
            (split.train.clone(), audit)
        }
    };

    let model = train_fair_model(&residual, &split.train_target, traces, cfg)?;
    let predicted = predict_label(&model, &split.eval, 0.5)?;
    let acc = accuracy(&predicted, &split.eval_target)?;

    let mut reports = Vec::with_capacity(eval_s.len());
    let mut rates = Vec::with_capacity(eval_s.len());
    for s in eval_s {
        let di_binary = disparate_impact_binary(&predicted, &s.classes, s.privileged)?;
        let present: Vec<u32> = (0..s.n_classes as u32)
            .filter(|c| s.classes.contains(c))
            .collect();
        let unprivileged: Vec<u32> = present.iter().copied().filter(|&c| c != s.privileged).collect();
        let di_average =
            disparate_impact_average(&predicted, &s.classes, &[s.privileged], &unprivileged)?;
        let trace = traces.iter().find(|t| t.sensitive_column == s.name);
        reports.push(FairnessReport {
            sensitive_column: s.name.clone(),
            tau: tau.unwrap_or(f64::NAN),
            accuracy: acc,
            disparate_impact_binary: di_binary,
            disparate_impact_average: di_average,
            removed_columns: trace
                .map(|t| t.removed_columns().cloned().collect())
                .unwrap_or_default(),
            final_sensitive_auc: trace.map_or(audit[&s.name], |t| t.final_auc),
            recheck_auc: audit.get(&s.name).copied(),
        });
        rates.push((s.name.clone(), positive_rate_curve(&model, &split.eval, s)?));
    }
    let baseline_auc = audit.values().copied().reduce(f64::max);
    Ok((reports, acc, rates, baseline_auc))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| PfrError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_outputs(dir: &Path, points: &[PointResult]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| PfrError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut sweep = String::from(SWEEP_HEADER);
    sweep.push('\n');
    let mut timings = String::from("kind,sensitive_set,tau,runtime_ms\n");
    for p in points {
        let row = &p.row;
        sweep.push_str(&row.to_csv());
        sweep.push('\n');
        let tau = tau_label(row.tau);
        timings.push_str(&format!(
            "{},{},{},{}\n",
            row.kind,
            row.sensitive_set,
            row.tau.map(|t| t.to_string()).unwrap_or_default(),
            row.runtime_ms
        ));
        let stem = format!("{}_{}", row.sensitive_set, tau);
        if row.kind == RowKind::Pfr {
            let jsonl: String = p.traces.iter().map(RemovalTrace::to_jsonl).collect();
            write_file(&dir.join(format!("trace_{stem}.jsonl")), &jsonl)?;
        }
        if let Some(report) = &p.report {
            let json = serde_json::to_string_pretty(&ReportFile::from(report))
                .expect("report serializes");
            write_file(&dir.join(format!("report_{stem}.json")), &(json + "\n"))?;
        }
        if !p.rates.is_empty() {
            let mut csv = String::from("sensitive,threshold,rate_privileged,rate_unprivileged\n");
            for (name, curve) in &p.rates {
                for r in curve {
                    csv.push_str(&format!(
                        "{name},{},{},{}\n",
                        r.threshold, r.rate_privileged, r.rate_unprivileged
                    ));
                }
            }
            write_file(&dir.join(format!("rates_{stem}.csv")), &csv)?;
        }
    }
    write_file(&dir.join("sweep.csv"), &sweep)?;
    write_file(&dir.join("timings.csv"), &timings)
}

/// Serialized form of [`PointReport`]; baseline reports carry no tau.
#[derive(Serialize)]
struct ReportFile<'a> {
    sensitive_set: &'a str,
    kind: RowKind,
    tau: Option<f64>,
    accuracy: f64,
    n_removed: usize,
    reports: Vec<ReportEntry<'a>>,
    detected_features: &'a FeatureTable,
}

#[derive(Serialize)]
struct ReportEntry<'a> {
    sensitive_column: &'a str,
    #[serde(with = "extended_f64")]
    disparate_impact_binary: f64,
    #[serde(with = "extended_f64")]
    disparate_impact_average: f64,
    removed_columns: &'a [crate::dataset::ColumnInfo],
    final_sensitive_auc: f64,
    recheck_auc: Option<f64>,
}

impl<'a> From<&'a PointReport> for ReportFile<'a> {
    fn from(p: &'a PointReport) -> Self {
        ReportFile {
            sensitive_set: &p.sensitive_set,
            kind: p.kind,
            tau: p.tau,
            accuracy: p.accuracy,
            n_removed: p.n_removed,
            reports: p
                .reports
                .iter()
                .map(|r| ReportEntry {
                    sensitive_column: &r.sensitive_column,
                    disparate_impact_binary: r.disparate_impact_binary,
                    disparate_impact_average: r.disparate_impact_average,
                    removed_columns: &r.removed_columns,
                    final_sensitive_auc: r.final_sensitive_auc,
                    recheck_auc: r.recheck_auc,
                })
                .collect(),
            detected_features: &p.detected_features,
        }
    }
}
