//! Tabular data: CSV loading, one-hot encoding, min-max scaling, stratified
//! splitting and minority oversampling.
//!
//! Every encoded column keeps its provenance ([`ColumnInfo`]) so that columns
//! removed later can be reported in terms of the original attribute and
//! category value.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PfrError, Result};

/// Cell values treated as missing. Rows containing one are dropped.
const MISSING_MARKERS: [&str; 2] = ["?", ""];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    /// Ordered category values; empty for numeric columns.
    pub categories: Vec<String>,
}

impl ColumnSchema {
    pub fn numeric(name: impl Into<String>) -> Self {
        ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Numeric,
            categories: Vec::new(),
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories: categories.into_iter().map(Into::into).collect(),
        }
    }
}

/// Column storage. Categorical cells are indices into the schema's categories.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical(Vec<u32>),
}

impl ColumnData {
    fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitiveSpec {
    pub column: String,
    pub privileged_value: String,
    pub classes: Vec<String>,
}

impl SensitiveSpec {
    pub fn privileged_index(&self) -> u32 {
        self.classes
            .iter()
            .position(|c| c == &self.privileged_value)
            .expect("privileged value validated at construction") as u32
    }
}

/// A sensitive attribute and its per-row class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitiveColumn {
    pub spec: SensitiveSpec,
    pub values: Vec<u32>,
}

impl SensitiveColumn {
    pub fn new(spec: SensitiveSpec, values: Vec<u32>) -> Result<Self> {
        if !spec.classes.contains(&spec.privileged_value) {
            return Err(PfrError::Validation(format!(
                "privileged value `{}` is not a class of sensitive column `{}`",
                spec.privileged_value, spec.column
            )));
        }
        let k = spec.classes.len() as u32;
        if let Some(bad) = values.iter().find(|&&v| v >= k) {
            return Err(PfrError::Validation(format!(
                "sensitive column `{}` holds class index {bad} but has only {k} classes",
                spec.column
            )));
        }
        Ok(SensitiveColumn { spec, values })
    }

    pub fn name(&self) -> &str {
        &self.spec.column
    }

    pub fn n_classes(&self) -> usize {
        self.spec.classes.len()
    }

    /// 1 for rows in the privileged class, 0 otherwise.
    pub fn privileged_indicator(&self) -> Vec<u8> {
        let p = self.spec.privileged_index();
        self.values.iter().map(|&v| u8::from(v == p)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> SensitiveColumn {
        SensitiveColumn {
            spec: self.spec.clone(),
            values: rows.iter().map(|&r| self.values[r]).collect(),
        }
    }
}

/// Features `X`, sensitive attributes `S` and binary target `Y`. Sensitive
/// columns never appear in the feature schema.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    schema: Vec<ColumnSchema>,
    columns: Vec<ColumnData>,
    target: Vec<u8>,
    sensitive: Vec<SensitiveColumn>,
    n_rows: usize,
}

impl TabularDataset {
    pub fn new(
        schema: Vec<ColumnSchema>,
        columns: Vec<ColumnData>,
        target: Vec<u8>,
        sensitive: Vec<SensitiveColumn>,
    ) -> Result<Self> {
        let n_rows = target.len();
        if schema.len() != columns.len() {
            return Err(PfrError::Schema(format!(
                "{} schema entries but {} columns",
                schema.len(),
                columns.len()
            )));
        }
        let mut names = BTreeSet::new();
        for (s, c) in schema.iter().zip(&columns) {
            if !names.insert(s.name.as_str()) {
                return Err(PfrError::Schema(format!("duplicate column `{}`", s.name)));
            }
            if c.len() != n_rows {
                return Err(PfrError::Schema(format!(
                    "column `{}` has {} rows, target has {n_rows}",
                    s.name,
                    c.len()
                )));
            }
            match (s.kind, c) {
                (ColumnKind::Numeric, ColumnData::Numeric(v)) => {
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(PfrError::NumericInput(format!(
                            "column `{}` has non-finite values",
                            s.name
                        )));
                    }
                }
                (ColumnKind::Categorical, ColumnData::Categorical(v)) => {
                    if s.categories.len() < 2 {
                        return Err(PfrError::Schema(format!(
                            "categorical column `{}` needs at least 2 categories, has {}",
                            s.name,
                            s.categories.len()
                        )));
                    }
                    let k = s.categories.len() as u32;
                    if v.iter().any(|&x| x >= k) {
                        return Err(PfrError::Schema(format!(
                            "column `{}` has a category index out of range",
                            s.name
                        )));
                    }
                }
                _ => {
                    return Err(PfrError::Schema(format!(
                        "column `{}` data does not match its declared kind",
                        s.name
                    )))
                }
            }
        }
        if let Some(bad) = target.iter().find(|&&y| y > 1) {
            return Err(PfrError::UnsupportedTarget(format!(
                "target value {bad} is not binary"
            )));
        }
        for s in &sensitive {
            if names.contains(s.name()) {
                return Err(PfrError::Schema(format!(
                    "sensitive column `{}` also appears among the features",
                    s.name()
                )));
            }
            if s.values.len() != n_rows {
                return Err(PfrError::Schema(format!(
                    "sensitive column `{}` has {} rows, target has {n_rows}",
                    s.name(),
                    s.values.len()
                )));
            }
        }
        Ok(TabularDataset {
            schema,
            columns,
            target,
            sensitive,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn columns(&self) -> &[ColumnData] {
        &self.columns
    }

    pub fn target(&self) -> &[u8] {
        &self.target
    }

    pub fn sensitive_columns(&self) -> &[SensitiveColumn] {
        &self.sensitive
    }

    pub fn sensitive(&self, name: &str) -> Option<&SensitiveColumn> {
        self.sensitive.iter().find(|s| s.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitiveConfig {
    pub column: String,
    pub privileged_value: String,
}

/// How a CSV file maps onto features, target and sensitive attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub target_column: String,
    /// Target value mapped to 1. When absent the target must already be 0/1.
    #[serde(default)]
    pub positive_label: Option<String>,
    #[serde(default)]
    pub sensitive: Vec<SensitiveConfig>,
    /// Column kind overrides; other columns are inferred.
    #[serde(default)]
    pub kinds: BTreeMap<String, ColumnKind>,
    /// Columns ignored entirely.
    #[serde(default)]
    pub exclude: Vec<String>,
    /// Reject categories unseen at fit time when transforming new rows.
    #[serde(default = "default_strict")]
    pub strict: bool,
}

fn default_strict() -> bool {
    true
}

impl DatasetConfig {
    pub fn new(path: impl Into<PathBuf>, target_column: impl Into<String>) -> Self {
        DatasetConfig {
            path: path.into(),
            target_column: target_column.into(),
            positive_label: None,
            sensitive: Vec::new(),
            kinds: BTreeMap::new(),
            exclude: Vec::new(),
            strict: true,
        }
    }

    pub fn with_sensitive(mut self, column: &str, privileged_value: &str) -> Self {
        self.sensitive.push(SensitiveConfig {
            column: column.to_string(),
            privileged_value: privileged_value.to_string(),
        });
        self
    }

    pub fn with_positive_label(mut self, label: &str) -> Self {
        self.positive_label = Some(label.to_string());
        self
    }

    /// Parse a TOML dataset config. A relative `path` is resolved against the
    /// directory holding the config file.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| PfrError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: DatasetConfig = toml::from_str(&text)
            .map_err(|e| PfrError::config(path.display().to_string(), e.to_string()))?;
        if cfg.path.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.path = dir.join(&cfg.path);
            }
        }
        Ok(cfg)
    }

    /// Load the CSV this config points at.
    pub fn load(&self) -> Result<LoadedDataset> {
        load_csv(&self.path, self)
    }

    pub fn encoding_mode(&self) -> EncodingMode {
        if self.strict {
            EncodingMode::Strict
        } else {
            EncodingMode::Permissive
        }
    }
}

/// A loaded dataset plus bookkeeping about the rows read from disk.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: TabularDataset,
    /// Data rows in the file, before dropping rows with missing values.
    pub rows_read: usize,
    pub rows_dropped: usize,
}

/// Read a comma-separated file with a header row. Cells are trimmed; `?` and
/// empty cells are missing and the whole row is dropped.
pub fn load_csv(path: impl AsRef<Path>, config: &DatasetConfig) -> Result<LoadedDataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| PfrError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let index_of = |name: &str| headers.iter().position(|h| h == name);

    let missing = |name: &str, what: &str| {
        PfrError::Schema(format!("{what} column `{name}` not found in {}", path.display()))
    };
    let target_idx = index_of(&config.target_column)
        .ok_or_else(|| missing(&config.target_column, "target"))?;
    let mut sensitive_idx = Vec::with_capacity(config.sensitive.len());
    for s in &config.sensitive {
        if s.column == config.target_column {
            return Err(PfrError::Schema(format!(
                "`{}` cannot be both target and sensitive",
                s.column
            )));
        }
        sensitive_idx.push(index_of(&s.column).ok_or_else(|| missing(&s.column, "sensitive"))?);
    }
    for name in config.kinds.keys() {
        index_of(name).ok_or_else(|| missing(name, "overridden"))?;
    }
    for name in &config.exclude {
        index_of(name).ok_or_else(|| missing(name, "excluded"))?;
    }
    let mut seen = BTreeSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(PfrError::Schema(format!("duplicate header `{h}`")));
        }
    }

    let feature_idx: Vec<usize> = (0..headers.len())
        .filter(|&i| {
            i != target_idx
                && !sensitive_idx.contains(&i)
                && !config.exclude.contains(&headers[i])
        })
        .collect();
    let used: Vec<usize> = feature_idx
        .iter()
        .copied()
        .chain(std::iter::once(target_idx))
        .chain(sensitive_idx.iter().copied())
        .collect();

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    let mut rows_read = 0;
    let mut rows_dropped = 0;
    for record in reader.records() {
        let record = record?;
        rows_read += 1;
        if used
            .iter()
            .any(|&i| MISSING_MARKERS.contains(&record.get(i).unwrap_or("")))
        {
            rows_dropped += 1;
            continue;
        }
        for &i in &used {
            raw[i].push(record[i].to_string());
        }
    }

    let target = encode_target(&raw[target_idx], config)?;

    let mut schema = Vec::with_capacity(feature_idx.len());
    let mut columns = Vec::with_capacity(feature_idx.len());
    for &i in &feature_idx {
        let name = &headers[i];
        let cells = &raw[i];
        let kind = match config.kinds.get(name) {
            Some(k) => *k,
            None if !cells.is_empty() && cells.iter().all(|c| parse_finite(c).is_some()) => {
                ColumnKind::Numeric
            }
            None => ColumnKind::Categorical,
        };
        match kind {
            ColumnKind::Numeric => {
                let values = cells
                    .iter()
                    .map(|c| {
                        parse_finite(c).ok_or_else(|| {
                            PfrError::Validation(format!(
                                "numeric column `{name}` holds non-numeric value `{c}`"
                            ))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                schema.push(ColumnSchema::numeric(name.clone()));
                columns.push(ColumnData::Numeric(values));
            }
            ColumnKind::Categorical => {
                let (categories, codes) = index_categories(cells);
                schema.push(ColumnSchema::categorical(name.clone(), categories));
                columns.push(ColumnData::Categorical(codes));
            }
        }
    }

    let mut sensitive = Vec::with_capacity(config.sensitive.len());
    for (s, &i) in config.sensitive.iter().zip(&sensitive_idx) {
        let (classes, codes) = index_categories(&raw[i]);
        let spec = SensitiveSpec {
            column: s.column.clone(),
            privileged_value: s.privileged_value.clone(),
            classes,
        };
        sensitive.push(SensitiveColumn::new(spec, codes)?);
    }

    let dataset = TabularDataset::new(schema, columns, target, sensitive)?;
    Ok(LoadedDataset {
        dataset,
        rows_read,
        rows_dropped,
    })
}

fn parse_finite(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Sorted distinct values and each cell's index among them.
fn index_categories(cells: &[String]) -> (Vec<String>, Vec<u32>) {
    let categories: Vec<String> = cells
        .iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .cloned()
        .collect();
    let lookup: HashMap<&str, u32> = categories
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i as u32))
        .collect();
    let codes = cells.iter().map(|c| lookup[c.as_str()]).collect();
    (categories, codes)
}

fn encode_target(cells: &[String], config: &DatasetConfig) -> Result<Vec<u8>> {
    let distinct: BTreeSet<&str> = cells.iter().map(String::as_str).collect();
    let name = &config.target_column;
    match &config.positive_label {
        Some(positive) => {
            if distinct.len() > 2 {
                return Err(PfrError::UnsupportedTarget(format!(
                    "target `{name}` has {} distinct values; only binary targets are supported",
                    distinct.len()
                )));
            }
            if !distinct.is_empty() && !distinct.contains(positive.as_str()) {
                return Err(PfrError::UnsupportedTarget(format!(
                    "positive label `{positive}` never occurs in target `{name}`"
                )));
            }
            Ok(cells.iter().map(|c| u8::from(c == positive)).collect())
        }
        None => cells
            .iter()
            .map(|c| match c.parse::<f64>() {
                Ok(0.0) => Ok(0),
                Ok(1.0) => Ok(1),
                _ => Err(PfrError::UnsupportedTarget(format!(
                    "target `{name}` holds `{c}`; expected 0/1 or a configured positive_label"
                ))),
            })
            .collect(),
    }
}

/// Provenance of one encoded column.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnInfo {
    /// `attr` for numeric columns, `attr=value` for indicators.
    pub id: String,
    pub source_attribute: String,
    pub source_category: Option<String>,
}

impl ColumnInfo {
    pub fn numeric(attribute: &str) -> Self {
        ColumnInfo {
            id: attribute.to_string(),
            source_attribute: attribute.to_string(),
            source_category: None,
        }
    }

    pub fn indicator(attribute: &str, category: &str) -> Self {
        ColumnInfo {
            id: format!("{attribute}={category}"),
            source_attribute: attribute.to_string(),
            source_category: Some(category.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub min: f64,
    pub max: f64,
}

impl ScalingParams {
    /// Maps `[min, max]` onto `[0, 1]`. A constant column maps to 0.
    pub fn apply(&self, x: f64) -> f64 {
        let range = self.max - self.min;
        if range > 0.0 {
            (x - self.min) / range
        } else {
            0.0
        }
    }
}

/// Dense row-major numeric design matrix with column provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    columns: Vec<ColumnInfo>,
    n_rows: usize,
    values: Vec<f64>,
    scaling: Option<Vec<ScalingParams>>,
}

impl EncodedMatrix {
    /// Build from row-major values. Column ids must be unique.
    pub fn new(columns: Vec<ColumnInfo>, n_rows: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * columns.len() {
            return Err(PfrError::Parameter(format!(
                "{} values do not fill a {n_rows} x {} matrix",
                values.len(),
                columns.len()
            )));
        }
        let mut ids = BTreeSet::new();
        for c in &columns {
            if !ids.insert(c.id.as_str()) {
                return Err(PfrError::Schema(format!("duplicate encoded column `{}`", c.id)));
            }
        }
        Ok(EncodedMatrix {
            columns,
            n_rows,
            values,
            scaling: None,
        })
    }

    /// Numeric columns named `names`, given as rows.
    pub fn from_rows(names: &[&str], rows: &[Vec<f64>]) -> Result<Self> {
        let columns = names.iter().map(|n| ColumnInfo::numeric(n)).collect();
        let mut values = Vec::with_capacity(rows.len() * names.len());
        for (i, r) in rows.iter().enumerate() {
            if r.len() != names.len() {
                return Err(PfrError::Parameter(format!(
                    "row {i} has {} values, expected {}",
                    r.len(),
                    names.len()
                )));
            }
            values.extend_from_slice(r);
        }
        EncodedMatrix::new(columns, rows.len(), values)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    /// True when every column has been removed.
    pub fn is_degenerate(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[ColumnInfo] {
        &self.columns
    }

    pub fn column_ids(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.id.as_str())
    }

    pub fn column_index(&self, id: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.id == id)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, col)).collect()
    }

    pub fn scaling(&self) -> Option<&[ScalingParams]> {
        self.scaling.as_deref()
    }

    /// Rows in the given order; indices may repeat.
    pub fn select_rows(&self, rows: &[usize]) -> EncodedMatrix {
        let d = self.n_cols();
        let mut values = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        EncodedMatrix {
            columns: self.columns.clone(),
            n_rows: rows.len(),
            values,
            scaling: self.scaling.clone(),
        }
    }

    /// Keep the columns at `keep` (ascending positions).
    fn select_columns(&self, keep: &[usize]) -> EncodedMatrix {
        let d = self.n_cols();
        let mut values = Vec::with_capacity(self.n_rows * keep.len());
        for r in 0..self.n_rows {
            let row = &self.values[r * d..(r + 1) * d];
            values.extend(keep.iter().map(|&j| row[j]));
        }
        EncodedMatrix {
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
            n_rows: self.n_rows,
            values,
            scaling: self
                .scaling
                .as_ref()
                .map(|s| keep.iter().map(|&j| s[j]).collect()),
        }
    }

    /// Project onto the columns of `ids`, in that order.
    pub fn project(&self, ids: &[&str]) -> Result<EncodedMatrix> {
        let keep = ids
            .iter()
            .map(|id| {
                self.column_index(id)
                    .ok_or_else(|| PfrError::ColumnMismatch(format!("column `{id}` not present")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&keep))
    }

    /// Apply previously fitted scaling parameters (one per column). Values
    /// outside the fit range map outside `[0, 1]`.
    pub fn scale_with(&self, params: &[ScalingParams]) -> Result<EncodedMatrix> {
        if params.len() != self.n_cols() {
            return Err(PfrError::Parameter(format!(
                "{} scaling parameters for {} columns",
                params.len(),
                self.n_cols()
            )));
        }
        let d = self.n_cols();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &x)| params[k % d].apply(x))
            .collect();
        Ok(EncodedMatrix {
            columns: self.columns.clone(),
            n_rows: self.n_rows,
            values,
            scaling: Some(params.to_vec()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EncodingMode {
    /// Unseen categories are an error.
    #[default]
    Strict,
    /// Unseen categories encode as all-zero indicators.
    Permissive,
}

#[derive(Debug, Clone, PartialEq)]
struct EncoderColumn {
    name: String,
    kind: ColumnKind,
    categories: Vec<String>,
}

/// One-hot encoder fitted on a dataset's schema; reusable on other datasets
/// with the same attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    columns: Vec<EncoderColumn>,
}

impl Encoder {
    pub fn fit(ds: &TabularDataset) -> Encoder {
        Encoder {
            columns: ds
                .schema()
                .iter()
                .map(|s| EncoderColumn {
                    name: s.name.clone(),
                    kind: s.kind,
                    categories: s.categories.clone(),
                })
                .collect(),
        }
    }

    pub fn output_columns(&self) -> Vec<ColumnInfo> {
        let mut out = Vec::new();
        for c in &self.columns {
            match c.kind {
                ColumnKind::Numeric => out.push(ColumnInfo::numeric(&c.name)),
                ColumnKind::Categorical => out.extend(
                    c.categories
                        .iter()
                        .map(|v| ColumnInfo::indicator(&c.name, v)),
                ),
            }
        }
        out
    }

    pub fn transform(&self, ds: &TabularDataset, mode: EncodingMode) -> Result<EncodedMatrix> {
        let columns = self.output_columns();
        let d = columns.len();
        let n = ds.n_rows();
        let mut values = vec![0.0; n * d];
        let mut offset = 0;
        for c in &self.columns {
            let pos = ds
                .schema()
                .iter()
                .position(|s| s.name == c.name)
                .ok_or_else(|| PfrError::Schema(format!("column `{}` missing", c.name)))?;
            let schema = &ds.schema()[pos];
            if schema.kind != c.kind {
                return Err(PfrError::Schema(format!(
                    "column `{}` changed kind since the encoder was fitted",
                    c.name
                )));
            }
            match &ds.columns()[pos] {
                ColumnData::Numeric(v) => {
                    for (r, &x) in v.iter().enumerate() {
                        values[r * d + offset] = x;
                    }
                    offset += 1;
                }
                ColumnData::Categorical(codes) => {
                    // Map the dataset's own category indices onto ours.
                    let remap: Vec<Option<usize>> = schema
                        .categories
                        .iter()
                        .map(|v| c.categories.iter().position(|w| w == v))
                        .collect();
                    for (r, &code) in codes.iter().enumerate() {
                        match remap[code as usize] {
                            Some(k) => values[r * d + offset + k] = 1.0,
                            None if mode == EncodingMode::Permissive => {}
                            None => {
                                return Err(PfrError::Validation(format!(
                                    "unseen category `{}` in column `{}`",
                                    schema.categories[code as usize], c.name
                                )))
                            }
                        }
                    }
                    offset += c.categories.len();
                }
            }
        }
        EncodedMatrix::new(columns, n, values)
    }
}

/// Categorical columns with k categories become k indicator columns
/// `attr=value`; numeric columns pass through unscaled.
pub fn one_hot_encode(ds: &TabularDataset) -> EncodedMatrix {
    Encoder::fit(ds)
        .transform(ds, EncodingMode::Strict)
        .expect("an encoder always accepts the dataset it was fitted on")
}

/// Min-max scale each column to `[0, 1]` and record the fit parameters.
pub fn min_max_scale(m: &EncodedMatrix) -> Result<EncodedMatrix> {
    if m.n_rows() == 0 {
        return Err(PfrError::Parameter("cannot scale a matrix with no rows".into()));
    }
    let d = m.n_cols();
    let mut params = vec![
        ScalingParams {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        };
        d
    ];
    for r in 0..m.n_rows() {
        for (p, &x) in params.iter_mut().zip(m.row(r)) {
            if !x.is_finite() {
                return Err(PfrError::NumericInput(format!("row {r} has a non-finite value")));
            }
            p.min = p.min.min(x);
            p.max = p.max.max(x);
        }
    }
    m.scale_with(&params)
}

/// Counts of 0 and 1 labels; errors on any other value.
pub(crate) fn class_counts(labels: &[u8]) -> Result<[usize; 2]> {
    let mut counts = [0usize; 2];
    for &y in labels {
        match y {
            0 | 1 => counts[y as usize] += 1,
            other => {
                return Err(PfrError::Parameter(format!("label {other} is not binary")))
            }
        }
    }
    Ok(counts)
}

/// Row indices after oversampling: every original row once plus minority rows
/// drawn with replacement until both classes have equal counts, shuffled.
pub fn oversample_indices(labels: &[u8], seed: u64) -> Result<Vec<usize>> {
    let counts = class_counts(labels)?;
    if counts[0] == 0 || counts[1] == 0 {
        return Err(PfrError::DegenerateLabels(format!(
            "oversampling needs both classes, got {} zeros and {} ones",
            counts[0], counts[1]
        )));
    }
    let minority = u8::from(counts[1] < counts[0]);
    let deficit = counts[0].abs_diff(counts[1]);
    let pool: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == minority).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..labels.len()).collect();
    idx.extend((0..deficit).map(|_| pool[rng.random_range(0..pool.len())]));
    idx.shuffle(&mut rng);
    Ok(idx)
}

/// Duplicate minority-class rows (sampled with replacement) until both classes
/// are equally frequent. Output row order is a seeded shuffle.
pub fn oversample_minority(
    m: &EncodedMatrix,
    labels: &[u8],
    seed: u64,
) -> Result<(EncodedMatrix, Vec<u8>)> {
    if labels.len() != m.n_rows() {
        return Err(PfrError::Parameter(format!(
            "{} labels for {} rows",
            labels.len(),
            m.n_rows()
        )));
    }
    let idx = oversample_indices(labels, seed)?;
    let y = idx.iter().map(|&i| labels[i]).collect();
    Ok((m.select_rows(&idx), y))
}

/// One side of a train/eval split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPart {
    pub matrix: EncodedMatrix,
    pub labels: Vec<u8>,
    /// Original row indices, ascending.
    pub rows: Vec<usize>,
}

/// Stratified split: within each label class, a seeded shuffle sends
/// `round(fraction * count)` rows to the training part.
pub fn split(
    m: &EncodedMatrix,
    labels: &[u8],
    fraction: f64,
    seed: u64,
) -> Result<(SplitPart, SplitPart)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(PfrError::Parameter(format!(
            "split fraction {fraction} is outside (0, 1)"
        )));
    }
    if m.n_rows() < 2 {
        return Err(PfrError::Parameter("split needs at least 2 rows".into()));
    }
    if labels.len() != m.n_rows() {
        return Err(PfrError::Parameter(format!(
            "{} labels for {} rows",
            labels.len(),
            m.n_rows()
        )));
    }
    class_counts(labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut eval = Vec::new();
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        let k = (fraction * members.len() as f64).round() as usize;
        train.extend_from_slice(&members[..k]);
        eval.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    eval.sort_unstable();
    let part = |rows: Vec<usize>| SplitPart {
        matrix: m.select_rows(&rows),
        labels: rows.iter().map(|&r| labels[r]).collect(),
        rows,
    };
    Ok((part(train), part(eval)))
}

/// Remove the named columns, keeping the order and provenance of the rest.
pub fn drop_columns<S: AsRef<str>>(m: &EncodedMatrix, ids: &[S]) -> Result<EncodedMatrix> {
    let mut drop = BTreeSet::new();
    for id in ids {
        let id = id.as_ref();
        let j = m
            .column_index(id)
            .ok_or_else(|| PfrError::Parameter(format!("unknown column `{id}`")))?;
        drop.insert(j);
    }
    let keep: Vec<usize> = (0..m.n_cols()).filter(|j| !drop.contains(j)).collect();
    Ok(m.select_columns(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    fn color_dataset() -> TabularDataset {
        TabularDataset::new(
            vec![
                ColumnSchema::categorical("color", ["red", "blue"]),
                ColumnSchema::numeric("size"),
            ],
            vec![
                ColumnData::Categorical(vec![0, 1, 0]),
                ColumnData::Numeric(vec![1.0, 2.0, 3.0]),
            ],
            vec![1, 0, 1],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn minimal_csv_loads() {
        let f = write_csv("a,s,y\n1.5,m,1\n2.5,f,0\n3.0,m,1\n");
        let cfg = DatasetConfig::new(f.path(), "y").with_sensitive("s", "m");
        let loaded = load_csv(f.path(), &cfg).unwrap();
        let ds = loaded.dataset;
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.schema(), &[ColumnSchema::numeric("a")]);
        assert_eq!(ds.target(), &[1, 0, 1]);
        let s = ds.sensitive("s").unwrap();
        assert_eq!(s.spec.classes, vec!["f", "m"]);
        assert_eq!(s.privileged_indicator(), vec![1, 0, 1]);
    }

    #[test]
    fn non_binary_target_is_rejected() {
        let f = write_csv("a,y\n1,0\n2,1\n3,2\n");
        let cfg = DatasetConfig::new(f.path(), "y");
        assert!(matches!(
            load_csv(f.path(), &cfg),
            Err(PfrError::UnsupportedTarget(_))
        ));
        let cfg = cfg.with_positive_label("1");
        assert!(matches!(
            load_csv(f.path(), &cfg),
            Err(PfrError::UnsupportedTarget(_))
        ));
    }

    #[test]
    fn missing_columns_are_schema_errors() {
        let f = write_csv("a,y\n1,0\n2,1\n");
        let cfg = DatasetConfig::new(f.path(), "income");
        assert!(matches!(load_csv(f.path(), &cfg), Err(PfrError::Schema(_))));
        let cfg = DatasetConfig::new(f.path(), "y").with_sensitive("race", "White");
        assert!(matches!(load_csv(f.path(), &cfg), Err(PfrError::Schema(_))));
    }

    #[test]
    fn unknown_privileged_value_is_rejected() {
        let f = write_csv("a,s,y\n1,m,0\n2,f,1\n");
        let cfg = DatasetConfig::new(f.path(), "y").with_sensitive("s", "x");
        assert!(matches!(load_csv(f.path(), &cfg), Err(PfrError::Validation(_))));
    }

    #[test]
    fn missing_rows_are_dropped_and_cells_trimmed() {
        let f = write_csv("a, c ,y\n1, x ,<=50K\n?,y,>50K\n3,y,>50K\n4,,<=50K\n");
        let cfg = DatasetConfig::new(f.path(), "y").with_positive_label(">50K");
        let loaded = load_csv(f.path(), &cfg).unwrap();
        assert_eq!(loaded.rows_read, 4);
        assert_eq!(loaded.rows_dropped, 2);
        assert_eq!(loaded.dataset.target(), &[0, 1]);
        assert_eq!(loaded.dataset.schema()[1].categories, vec!["x", "y"]);
    }

    #[test]
    fn kind_override_and_exclude() {
        let f = write_csv("zip,w,y\n10,5,0\n20,6,1\n10,7,1\n");
        let mut cfg = DatasetConfig::new(f.path(), "y");
        cfg.kinds.insert("zip".into(), ColumnKind::Categorical);
        cfg.exclude.push("w".into());
        let ds = load_csv(f.path(), &cfg).unwrap().dataset;
        assert_eq!(ds.schema(), &[ColumnSchema::categorical("zip", ["10", "20"])]);
    }

    #[test]
    fn single_category_column_is_a_schema_error() {
        let f = write_csv("c,y\nx,0\nx,1\n");
        let cfg = DatasetConfig::new(f.path(), "y");
        assert!(matches!(load_csv(f.path(), &cfg), Err(PfrError::Schema(_))));
    }

    #[test]
    fn one_hot_definition() {
        let m = one_hot_encode(&color_dataset());
        let ids: Vec<_> = m.column_ids().collect();
        assert_eq!(ids, ["color=red", "color=blue", "size"]);
        assert_eq!(m.row(0), &[1.0, 0.0, 1.0]);
        assert_eq!(m.row(1), &[0.0, 1.0, 2.0]);
        assert_eq!(m.columns()[0].source_attribute, "color");
        assert_eq!(m.columns()[0].source_category.as_deref(), Some("red"));
        assert_eq!(m.columns()[2].source_category, None);
    }

    #[test]
    fn numeric_only_encoding_is_identity() {
        let ds = TabularDataset::new(
            vec![ColumnSchema::numeric("a"), ColumnSchema::numeric("b")],
            vec![
                ColumnData::Numeric(vec![1.0, -2.0]),
                ColumnData::Numeric(vec![0.5, 7.0]),
            ],
            vec![0, 1],
            vec![],
        )
        .unwrap();
        let m = one_hot_encode(&ds);
        assert_eq!(m.values(), &[1.0, 0.5, -2.0, 7.0]);
        assert!(m.columns().iter().all(|c| c.source_category.is_none()));
    }

    #[test]
    fn strict_and_permissive_unseen_categories() {
        let train = color_dataset();
        let enc = Encoder::fit(&train);
        let other = TabularDataset::new(
            vec![
                ColumnSchema::categorical("color", ["blue", "green"]),
                ColumnSchema::numeric("size"),
            ],
            vec![
                ColumnData::Categorical(vec![0, 1]),
                ColumnData::Numeric(vec![4.0, 5.0]),
            ],
            vec![0, 1],
            vec![],
        )
        .unwrap();
        assert!(matches!(
            enc.transform(&other, EncodingMode::Strict),
            Err(PfrError::Validation(_))
        ));
        let m = enc.transform(&other, EncodingMode::Permissive).unwrap();
        assert_eq!(m.row(0), &[0.0, 1.0, 4.0]);
        assert_eq!(m.row(1), &[0.0, 0.0, 5.0]);
    }

    #[test]
    fn scaling_examples() {
        let m = EncodedMatrix::from_rows(
            &["a", "b", "c"],
            &[vec![2.0, 5.0, 0.0], vec![4.0, 5.0, 1.0], vec![6.0, 5.0, 0.0]],
        )
        .unwrap();
        let s = min_max_scale(&m).unwrap();
        assert_eq!(s.column(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(s.column(1), vec![0.0, 0.0, 0.0]);
        assert_eq!(s.column(2), vec![0.0, 1.0, 0.0]);

        // held-out rows may leave [0, 1] without error
        let new = EncodedMatrix::from_rows(&["a", "b", "c"], &[vec![8.0, 9.0, 1.0]]).unwrap();
        let t = new.scale_with(s.scaling().unwrap()).unwrap();
        assert_eq!(t.row(0), &[1.5, 0.0, 1.0]);
    }

    #[test]
    fn scaling_requires_rows() {
        let m = EncodedMatrix::from_rows(&["a"], &[]).unwrap();
        assert!(matches!(min_max_scale(&m), Err(PfrError::Parameter(_))));
    }

    fn labelled(n0: usize, n1: usize) -> (EncodedMatrix, Vec<u8>) {
        let rows: Vec<Vec<f64>> = (0..n0 + n1).map(|i| vec![i as f64]).collect();
        let labels = (0..n0 + n1).map(|i| u8::from(i >= n0)).collect();
        (EncodedMatrix::from_rows(&["i"], &rows).unwrap(), labels)
    }

    #[test]
    fn oversampling_equalizes_counts() {
        let (m, y) = labelled(100, 30);
        let (om, oy) = oversample_minority(&m, &y, 7).unwrap();
        assert_eq!(class_counts(&oy).unwrap(), [100, 100]);
        assert_eq!(om.n_rows(), 200);
        // duplicates only: each output row is an original minority/majority row
        for (r, &label) in oy.iter().enumerate() {
            assert_eq!(label, y[om.get(r, 0) as usize]);
        }
    }

    #[test]
    fn oversampling_balanced_keeps_counts() {
        let (m, y) = labelled(50, 50);
        let (om, oy) = oversample_minority(&m, &y, 1).unwrap();
        assert_eq!(om.n_rows(), 100);
        assert_eq!(class_counts(&oy).unwrap(), [50, 50]);
    }

    #[test]
    fn oversampling_is_seeded() {
        let (m, y) = labelled(40, 9);
        let a = oversample_minority(&m, &y, 3).unwrap();
        let b = oversample_minority(&m, &y, 3).unwrap();
        assert_eq!(a, b);
        let c = oversample_minority(&m, &y, 4).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn oversampling_single_class_errors() {
        let (m, y) = labelled(0, 5);
        assert!(matches!(
            oversample_minority(&m, &y, 0),
            Err(PfrError::DegenerateLabels(_))
        ));
    }

    #[test]
    fn split_sizes_and_stratification() {
        let (m, y) = labelled(5, 5);
        let (train, eval) = split(&m, &y, 0.8, 11).unwrap();
        assert_eq!(train.matrix.n_rows(), 8);
        assert_eq!(eval.matrix.n_rows(), 2);
        assert_eq!(class_counts(&train.labels).unwrap(), [4, 4]);
        assert_eq!(class_counts(&eval.labels).unwrap(), [1, 1]);
        let mut all: Vec<usize> = train.rows.iter().chain(&eval.rows).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(split(&m, &y, 0.8, 11).unwrap(), (train, eval));
    }

    #[test]
    fn split_rejects_bad_parameters() {
        let (m, y) = labelled(5, 5);
        for f in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(split(&m, &y, f, 0), Err(PfrError::Parameter(_))));
        }
        let (m1, y1) = labelled(1, 0);
        assert!(matches!(split(&m1, &y1, 0.5, 0), Err(PfrError::Parameter(_))));
    }

    #[test]
    fn drop_columns_cases() {
        let m = one_hot_encode(&color_dataset());
        let none: [&str; 0] = [];
        assert_eq!(drop_columns(&m, &none).unwrap(), m);
        let d = drop_columns(&m, &["color=red"]).unwrap();
        assert_eq!(d.column_ids().collect::<Vec<_>>(), ["color=blue", "size"]);
        assert_eq!(d.row(2), &[0.0, 3.0]);
        let all = drop_columns(&m, &["color=red", "color=blue", "size"]).unwrap();
        assert!(all.is_degenerate());
        assert!(matches!(
            drop_columns(&m, &["nope"]),
            Err(PfrError::Parameter(_))
        ));
    }

    #[test]
    fn config_paths_resolve_relative_to_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ds.toml");
        fs::write(
            &p,
            r#"
path = "data.csv"
target_column = "y"
positive_label = "yes"
exclude = ["id"]

[[sensitive]]
column = "sex"
privileged_value = "Male"

[kinds]
zip = "categorical"
"#,
        )
        .unwrap();
        let cfg = DatasetConfig::from_file(&p).unwrap();
        assert_eq!(cfg.path, dir.path().join("data.csv"));
        assert_eq!(cfg.kinds["zip"], ColumnKind::Categorical);
        assert!(cfg.strict);
        fs::write(&p, "path = 3\n").unwrap();
        assert!(matches!(
            DatasetConfig::from_file(&p),
            Err(PfrError::Config { .. })
        ));
    }
}
