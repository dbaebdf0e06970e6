//! Maximum-likelihood logistic regression with an L2 penalty on the weights.
//!
//! The objective maximized is the mean log-likelihood
//!
//! ```text
//! f(w, b) = (1/n) Σ [ y·z − ln(1 + e^z) ] − (λ/2)·‖w‖²,   z = xᵀw + b
//! ```
//!
//! The intercept `b` is never penalized. Two deterministic solvers are
//! available: damped Newton (default) and gradient ascent, both with a
//! backtracking line search, so the objective never decreases between
//! accepted iterates.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{class_counts, EncodedMatrix};
use crate::error::{PfrError, Result};

/// Armijo sufficient-increase constant.
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Newton,
    GradientAscent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_iterations: usize,
    /// Initial step for gradient ascent; Newton always tries the full step first.
    pub learning_rate: f64,
    /// Convergence threshold on the gradient infinity norm.
    pub tolerance: f64,
    pub l2_strength: f64,
    pub seed: u64,
    pub solver: Solver,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_iterations: 5000,
            learning_rate: 1.0,
            tolerance: 1e-6,
            l2_strength: 1e-4,
            seed: 0,
            solver: Solver::Newton,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(PfrError::config("max_iterations", "must be at least 1"));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(PfrError::config("tolerance", "must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(PfrError::config("learning_rate", "must be positive"));
        }
        if !(self.l2_strength >= 0.0 && self.l2_strength.is_finite()) {
            return Err(PfrError::config("l2_strength", "must be nonnegative"));
        }
        Ok(())
    }

    /// Short stable digest of every field, recorded alongside saved models.
    pub fn config_hash(&self) -> String {
        let canonical = format!(
            "max_iterations={};learning_rate={:?};tolerance={:?};l2_strength={:?};seed={};solver={:?}",
            self.max_iterations,
            self.learning_rate,
            self.tolerance,
            self.l2_strength,
            self.seed,
            self.solver
        );
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Weights over named columns plus an intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    column_ids: Vec<String>,
    weights: Vec<f64>,
    intercept: f64,
}

impl LogisticModel {
    pub fn new(column_ids: Vec<String>, weights: Vec<f64>, intercept: f64) -> Result<Self> {
        if column_ids.len() != weights.len() {
            return Err(PfrError::Parameter(format!(
                "{} column ids for {} weights",
                column_ids.len(),
                weights.len()
            )));
        }
        if !intercept.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(PfrError::NumericInput("model weights must be finite".into()));
        }
        Ok(LogisticModel {
            column_ids,
            weights,
            intercept,
        })
    }

    /// All-zero model over the columns of `m`.
    pub fn zeros(m: &EncodedMatrix) -> Self {
        LogisticModel {
            column_ids: m.column_ids().map(str::to_string).collect(),
            weights: vec![0.0; m.n_cols()],
            intercept: 0.0,
        }
    }

    pub fn column_ids(&self) -> &[String] {
        &self.column_ids
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn weight(&self, id: &str) -> Option<f64> {
        self.column_ids
            .iter()
            .position(|c| c == id)
            .map(|j| self.weights[j])
    }

    /// Flat text record: header, config hash, intercept, then one
    /// tab-separated `weight <id> <value>` line per column. Floats use the
    /// shortest representation that round-trips exactly.
    pub fn to_record(&self, cfg: &TrainConfig) -> String {
        let mut out = String::from("pfr-logistic-model v1\n");
        let _ = writeln!(out, "config_hash\t{}", cfg.config_hash());
        let _ = writeln!(out, "intercept\t{:?}", self.intercept);
        for (id, w) in self.column_ids.iter().zip(&self.weights) {
            let _ = writeln!(out, "weight\t{id}\t{w:?}");
        }
        out
    }

    /// Parse a record written by [`LogisticModel::to_record`]; returns the
    /// model and its config hash.
    pub fn from_record(text: &str) -> Result<(LogisticModel, String)> {
        let bad = |msg: &str| PfrError::Validation(format!("model record: {msg}"));
        let mut lines = text.lines();
        if lines.next() != Some("pfr-logistic-model v1") {
            return Err(bad("missing header"));
        }
        let mut hash = None;
        let mut intercept = None;
        let mut ids = Vec::new();
        let mut weights = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let fields: Vec<&str> = line.split('\t').collect();
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("unparseable number"));
            match fields.as_slice() {
                ["config_hash", h] => hash = Some(h.to_string()),
                ["intercept", v] => intercept = Some(num(v)?),
                ["weight", id, v] => {
                    ids.push(id.to_string());
                    weights.push(num(v)?);
                }
                _ => return Err(bad("unrecognised line")),
            }
        }
        let model = LogisticModel::new(
            ids,
            weights,
            intercept.ok_or_else(|| bad("missing intercept"))?,
        )?;
        Ok((model, hash.ok_or_else(|| bad("missing config hash"))?))
    }
}

/// Diagnostics from one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub iterations: usize,
    pub converged: bool,
    /// Gradient infinity norm at the returned iterate.
    pub gradient_norm: f64,
    /// Objective value at the start and after each accepted iteration.
    pub objective_trace: Vec<f64>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Row-compressed design with the intercept as a trailing unit column.
/// Exact zeros are skipped; one-hot data is mostly zeros.
struct Design {
    ptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
    /// Feature count, excluding the intercept.
    d: usize,
}

impl Design {
    fn new(m: &EncodedMatrix) -> Result<Design> {
        let d = m.n_cols();
        let mut ptr = Vec::with_capacity(m.n_rows() + 1);
        let mut idx = Vec::new();
        let mut val = Vec::new();
        ptr.push(0);
        for r in 0..m.n_rows() {
            for (j, &x) in m.row(r).iter().enumerate() {
                if !x.is_finite() {
                    return Err(PfrError::NumericInput(format!(
                        "row {r}, column `{}` is not finite",
                        m.columns()[j].id
                    )));
                }
                if x != 0.0 {
                    idx.push(j);
                    val.push(x);
                }
            }
            idx.push(d);
            val.push(1.0);
            ptr.push(idx.len());
        }
        Ok(Design { ptr, idx, val, d })
    }

    fn n(&self) -> usize {
        self.ptr.len() - 1
    }

    fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.ptr[r]..self.ptr[r + 1];
        (&self.idx[span.clone()], &self.val[span])
    }

    fn margins(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|r| {
                let (idx, val) = self.row(r);
                idx.iter().zip(val).map(|(&j, &x)| theta[j] * x).sum()
            })
            .collect()
    }

    /// Penalized mean log-likelihood; `theta` holds weights then intercept.
    fn objective(&self, theta: &[f64], y: &[u8], l2: f64) -> f64 {
        let z = self.margins(theta);
        let ll: f64 = z
            .iter()
            .zip(y)
            .map(|(&z, &y)| f64::from(y) * z - softplus(z))
            .sum();
        let penalty: f64 = theta[..self.d].iter().map(|w| w * w).sum();
        ll / self.n() as f64 - 0.5 * l2 * penalty
    }

    fn gradient_from_probs(&self, theta: &[f64], p: &[f64], y: &[u8], l2: f64) -> Vec<f64> {
        let mut g = vec![0.0; self.d + 1];
        for r in 0..self.n() {
            let resid = f64::from(y[r]) - p[r];
            let (idx, val) = self.row(r);
            for (&j, &x) in idx.iter().zip(val) {
                g[j] += resid * x;
            }
        }
        let n = self.n() as f64;
        for (j, gj) in g.iter_mut().enumerate() {
            *gj /= n;
            if j < self.d {
                *gj -= l2 * theta[j];
            }
        }
        g
    }

    fn gradient(&self, theta: &[f64], y: &[u8], l2: f64) -> Vec<f64> {
        let p: Vec<f64> = self.margins(theta).into_iter().map(sigmoid).collect();
        self.gradient_from_probs(theta, &p, y, l2)
    }

    /// Negative Hessian of the objective (positive semidefinite).
    fn neg_hessian(&self, p: &[f64], l2: f64) -> DMatrix<f64> {
        let dim = self.d + 1;
        let mut h = vec![0.0; dim * dim];
        for (r, &pr) in p.iter().enumerate() {
            let s = pr * (1.0 - pr);
            if s == 0.0 {
                continue;
            }
            let (idx, val) = self.row(r);
            for a in 0..idx.len() {
                let sa = s * val[a];
                let base = idx[a] * dim;
                for b in a..idx.len() {
                    h[base + idx[b]] += sa * val[b];
                }
            }
        }
        let n = self.n() as f64;
        // idx ascending within a row, so only the upper triangle was filled
        for a in 0..dim {
            for b in a..dim {
                let v = h[a * dim + b] / n;
                h[a * dim + b] = v;
                h[b * dim + a] = v;
            }
        }
        for j in 0..self.d {
            h[j * dim + j] += l2;
        }
        DMatrix::from_row_slice(dim, dim, &h)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `h · x = g`, adding diagonal jitter if `h` is not numerically
/// positive definite.
fn newton_direction(h: DMatrix<f64>, g: &[f64]) -> Option<Vec<f64>> {
    let rhs = DVector::from_column_slice(g);
    let scale = (0..h.nrows()).map(|i| h[(i, i)]).fold(0.0, f64::max).max(1e-12);
    let mut jitter = 0.0;
    for _ in 0..12 {
        let mut hj = h.clone();
        for i in 0..hj.nrows() {
            hj[(i, i)] += jitter;
        }
        if let Some(ch) = hj.cholesky() {
            let x = ch.solve(&rhs);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x.as_slice().to_vec());
            }
        }
        jitter = if jitter == 0.0 { scale * 1e-12 } else { jitter * 100.0 };
    }
    None
}

fn check_inputs(m: &EncodedMatrix, labels: &[u8]) -> Result<()> {
    if labels.len() != m.n_rows() {
        return Err(PfrError::Parameter(format!(
            "{} labels for {} rows",
            labels.len(),
            m.n_rows()
        )));
    }
    let counts = class_counts(labels)?;
    if counts[0] == 0 || counts[1] == 0 {
        return Err(PfrError::DegenerateLabels(format!(
            "training needs both classes, got {} zeros and {} ones",
            counts[0], counts[1]
        )));
    }
    Ok(())
}

/// Fit a logistic model on every column of `m`.
pub fn train_logistic(m: &EncodedMatrix, labels: &[u8], cfg: &TrainConfig) -> Result<LogisticModel> {
    train_logistic_with_summary(m, labels, cfg, None).map(|(model, _)| model)
}

/// Fit a logistic model, optionally starting from `init`. Weights of `init`
/// are matched to columns of `m` by id; unmatched columns start at zero.
pub fn train_logistic_with_summary(
    m: &EncodedMatrix,
    labels: &[u8],
    cfg: &TrainConfig,
    init: Option<&LogisticModel>,
) -> Result<(LogisticModel, TrainSummary)> {
    cfg.validate()?;
    check_inputs(m, labels)?;
    let design = Design::new(m)?;
    let d = m.n_cols();
    let l2 = cfg.l2_strength;

    let mut theta = vec![0.0; d + 1];
    if let Some(init) = init {
        for (j, id) in m.column_ids().enumerate() {
            theta[j] = init.weight(id).unwrap_or(0.0);
        }
        theta[d] = init.intercept;
    }

    let mut f = design.objective(&theta, labels, l2);
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut converged = false;
    let mut step = cfg.learning_rate;
    let mut grad;
    loop {
        let p: Vec<f64> = design.margins(&theta).into_iter().map(sigmoid).collect();
        grad = design.gradient_from_probs(&theta, &p, labels, l2);
        if inf_norm(&grad) <= cfg.tolerance {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iterations {
            break;
        }
        let (direction, mut t) = match cfg.solver {
            Solver::Newton => match newton_direction(design.neg_hessian(&p, l2), &grad) {
                Some(dir) => (dir, 1.0),
                None => (grad.clone(), step),
            },
            Solver::GradientAscent => (grad.clone(), step),
        };
        let slope = dot(&grad, &direction);
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate: Vec<f64> = theta
                .iter()
                .zip(&direction)
                .map(|(w, dw)| w + t * dw)
                .collect();
            let fc = design.objective(&candidate, labels, l2);
            if fc.is_finite() && fc >= f + ARMIJO * t * slope {
                accepted = Some((candidate, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((candidate, fc)) = accepted else {
            // No representable step improves the objective.
            break;
        };
        if cfg.solver == Solver::GradientAscent {
            step = t * 2.0;
        }
        theta = candidate;
        f = fc;
        trace.push(f);
        iterations += 1;
    }

    let intercept = theta[d];
    theta.truncate(d);
    let model = LogisticModel::new(m.column_ids().map(str::to_string).collect(), theta, intercept)?;
    Ok((
        model,
        TrainSummary {
            iterations,
            converged,
            gradient_norm: inf_norm(&grad),
            objective_trace: trace,
        },
    ))
}

/// Positions in `m` of the model's columns.
fn column_map(model: &LogisticModel, m: &EncodedMatrix) -> Result<Vec<usize>> {
    model
        .column_ids
        .iter()
        .map(|id| {
            m.column_index(id).ok_or_else(|| {
                PfrError::ColumnMismatch(format!("model column `{id}` is not in the matrix"))
            })
        })
        .collect()
}

/// Per-row linear score `xᵀw + b`.
pub fn decision_function(model: &LogisticModel, m: &EncodedMatrix) -> Result<Vec<f64>> {
    let map = column_map(model, m)?;
    Ok((0..m.n_rows())
        .map(|r| {
            let row = m.row(r);
            model.intercept
                + map
                    .iter()
                    .zip(&model.weights)
                    .map(|(&j, w)| w * row[j])
                    .sum::<f64>()
        })
        .collect())
}

/// `sigmoid(xᵀw + b)` for each row. `m` may carry extra columns; every model
/// column must be present.
pub fn predict_proba(model: &LogisticModel, m: &EncodedMatrix) -> Result<Vec<f64>> {
    Ok(decision_function(model, m)?.into_iter().map(sigmoid).collect())
}

/// 1 where the predicted probability is at least `threshold`.
pub fn predict_label(model: &LogisticModel, m: &EncodedMatrix, threshold: f64) -> Result<Vec<u8>> {
    Ok(predict_proba(model, m)?
        .into_iter()
        .map(|p| u8::from(p >= threshold))
        .collect())
}

/// Index of the weight with the largest magnitude; the intercept is not a
/// candidate and ties go to the lowest index.
pub fn most_important_feature(model: &LogisticModel) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, w) in model.weights.iter().enumerate() {
        if best.is_none_or(|(_, b)| w.abs() > b) {
            best = Some((j, w.abs()));
        }
    }
    best.map(|(j, _)| j).ok_or(PfrError::EmptyModel)
}

fn model_theta(model: &LogisticModel, m: &EncodedMatrix) -> Result<(EncodedMatrix, Vec<f64>)> {
    let ids: Vec<&str> = model.column_ids.iter().map(String::as_str).collect();
    let projected = m.project(&ids)?;
    let mut theta = model.weights.clone();
    theta.push(model.intercept);
    Ok((projected, theta))
}

/// Gradient of the penalized mean log-likelihood at the model's parameters:
/// one entry per weight, then the intercept entry last.
pub fn log_likelihood_gradient(
    model: &LogisticModel,
    m: &EncodedMatrix,
    labels: &[u8],
    l2: f64,
) -> Result<Vec<f64>> {
    let (projected, theta) = model_theta(model, m)?;
    check_inputs(&projected, labels)?;
    Ok(Design::new(&projected)?.gradient(&theta, labels, l2))
}

/// Penalized mean log-likelihood at the model's parameters.
pub fn penalized_log_likelihood(
    model: &LogisticModel,
    m: &EncodedMatrix,
    labels: &[u8],
    l2: f64,
) -> Result<f64> {
    let (projected, theta) = model_theta(model, m)?;
    check_inputs(&projected, labels)?;
    Ok(Design::new(&projected)?.objective(&theta, labels, l2))
}
