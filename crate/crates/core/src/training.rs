//! Attribute-weight learning from labeled pairs: threshold-style imputation
//! of missing similarities, least squares, and linear ε-SVR.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::SimilarityVector;

/// Candidate fill values `0.00, 0.01, ..., 1.00`.
pub fn imputation_grid() -> impl Iterator<Item = f64> {
    (0..=100).map(|i| i as f64 / 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationEntry {
    pub feature: String,
    pub value: f64,
    /// Set when one class never observed the feature and the global mean
    /// of observed values was used instead.
    #[serde(default)]
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImputationTable {
    pub entries: Vec<ImputationEntry>,
}

impl ImputationTable {
    pub fn value(&self, feature: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.feature == feature).map(|e| e.value)
    }

    pub fn fallbacks(&self) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(|e| e.fallback)
            .map(|e| e.feature.as_str())
    }
}

/// Fraction of coupled observations below `v` plus fraction of uncoupled
/// observations at or above `v`.
pub fn imputation_error(coupled: &[f64], uncoupled: &[f64], v: f64) -> f64 {
    let below = coupled.iter().filter(|x| **x < v).count() as f64 / coupled.len() as f64;
    let above = uncoupled.iter().filter(|x| **x >= v).count() as f64 / uncoupled.len() as f64;
    below + above
}

/// Grid point minimizing [`imputation_error`]; ties go to the smallest value.
pub fn best_fill_value(coupled: &[f64], uncoupled: &[f64]) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for v in imputation_grid() {
        let err = imputation_error(coupled, uncoupled, v);
        if err < best.0 {
            best = (err, v);
        }
    }
    best.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub feature_names: Vec<String>,
    pub rows: Vec<(Vec<f64>, f64)>,
}

impl TrainingSet {
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, features: &[String]) -> Result<TrainingSet> {
        let idx = features
            .iter()
            .map(|f| {
                self.feature_names
                    .iter()
                    .position(|n| n == f)
                    .ok_or_else(|| Error::Layout(format!("feature `{f}` not in training set")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainingSet {
            feature_names: features.to_vec(),
            rows: self
                .rows
                .iter()
                .map(|(x, y)| (idx.iter().map(|&i| x[i]).collect(), *y))
                .collect(),
        })
    }
}

fn raw_column(v: &SimilarityVector, feature: &str) -> Result<Option<f64>> {
    v.get(feature)
        .ok_or_else(|| Error::Layout(format!("feature `{feature}` missing from similarity vector")))
}

/// Builds the imputed design over `features` (all layout features of the
/// first pair when `None`).
pub fn build_training_set(
    pairs: &[(SimilarityVector, bool)],
    features: Option<&[String]>,
) -> Result<(TrainingSet, ImputationTable)> {
    let n_coupled = pairs.iter().filter(|(_, c)| *c).count();
    if n_coupled == 0 || n_coupled == pairs.len() {
        return Err(Error::Invalid(
            "training needs at least one coupled and one uncoupled pair".into(),
        ));
    }
    let feature_names: Vec<String> = match features {
        Some(f) => f.to_vec(),
        None => pairs[0].0.features().into_iter().map(|(n, _)| n).collect(),
    };

    let mut columns = Vec::with_capacity(feature_names.len());
    let mut table = ImputationTable::default();
    for f in &feature_names {
        let col = pairs
            .iter()
            .map(|(v, _)| raw_column(v, f))
            .collect::<Result<Vec<_>>>()?;
        let observed = |coupled: bool| -> Vec<f64> {
            col.iter()
                .zip(pairs)
                .filter(|(_, (_, c))| *c == coupled)
                .filter_map(|(x, _)| *x)
                .collect()
        };
        let (pos, neg) = (observed(true), observed(false));
        let (value, fallback) = if pos.is_empty() || neg.is_empty() {
            let all: Vec<f64> = col.iter().filter_map(|x| *x).collect();
            let mean = if all.is_empty() {
                0.0
            } else {
                all.iter().sum::<f64>() / all.len() as f64
            };
            (mean, true)
        } else {
            (best_fill_value(&pos, &neg), false)
        };
        table.entries.push(ImputationEntry {
            feature: f.clone(),
            value,
            fallback,
        });
        columns.push(col.into_iter().map(|x| x.unwrap_or(value)).collect::<Vec<_>>());
    }

    let rows = pairs
        .iter()
        .enumerate()
        .map(|(i, (_, coupled))| {
            (
                columns.iter().map(|c| c[i]).collect(),
                if *coupled { 1.0 } else { 0.0 },
            )
        })
        .collect();
    Ok((TrainingSet { feature_names, rows }, table))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainerKind {
    LinearRegression,
    SvmRegression,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub epsilon: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, epsilon: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingDiagnostics {
    #[serde(default)]
    pub rank_deficient: bool,
    #[serde(default)]
    pub converged: bool,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub final_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightModel {
    pub kind: TrainerKind,
    pub w0: f64,
    pub weights: Vec<f64>,
    pub feature_names: Vec<String>,
    pub imputation: ImputationTable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svm_params: Option<SvmParams>,
    #[serde(default)]
    pub diagnostics: TrainingDiagnostics,
}

impl WeightModel {
    pub fn weight(&self, feature: &str) -> Option<f64> {
        self.feature_names
            .iter()
            .position(|f| f == feature)
            .map(|i| self.weights[i])
    }

    /// `w0 + w·x` on an already-imputed feature row.
    pub fn score_row(&self, x: &[f64]) -> f64 {
        self.w0 + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    /// The model's feature row for `v`, missing entries imputed.
    pub fn feature_row(&self, v: &SimilarityVector) -> Result<Vec<f64>> {
        self.feature_names
            .iter()
            .map(|f| {
                let raw = raw_column(v, f)?;
                match raw {
                    Some(x) => Ok(x),
                    None => self
                        .imputation
                        .value(f)
                        .ok_or_else(|| Error::Layout(format!("no imputation value for `{f}`"))),
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: WeightModel = serde_json::from_str(text)?;
        if m.weights.len() != m.feature_names.len() {
            return Err(Error::Layout(format!(
                "{} weights for {} features",
                m.weights.len(),
                m.feature_names.len()
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// General similarity of a pair under `model`. Not clamped.
pub fn score_pair(model: &WeightModel, v: &SimilarityVector) -> Result<f64> {
    Ok(model.score_row(&model.feature_row(v)?))
}

/// Ordinary least squares of `y` on `(1, x)`. Rank-deficient designs get the
/// minimum-norm solution from the SVD pseudo-inverse.
pub fn train_linear(ts: &TrainingSet, imputation: ImputationTable) -> Result<WeightModel> {
    if ts.is_empty() {
        return Err(Error::Invalid("empty training set".into()));
    }
    let (n, m) = (ts.len(), ts.dim());
    let design = DMatrix::from_fn(n, m + 1, |i, j| if j == 0 { 1.0 } else { ts.rows[i].0[j - 1] });
    let y = DVector::from_iterator(n, ts.rows.iter().map(|(_, y)| *y));
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-10 * (n.max(m + 1) as f64);
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    let beta = svd
        .solve(&y, tol)
        .map_err(|e| Error::Invalid(format!("least squares failed: {e}")))?;
    Ok(WeightModel {
        kind: TrainerKind::LinearRegression,
        w0: beta[0],
        weights: beta.iter().skip(1).copied().collect(),
        feature_names: ts.feature_names.clone(),
        imputation,
        svm_params: None,
        diagnostics: TrainingDiagnostics {
            rank_deficient: rank < m + 1,
            converged: true,
            iterations: 0,
            final_violation: 0.0,
        },
    })
}

pub fn squared_error(model: &WeightModel, ts: &TrainingSet) -> f64 {
    ts.rows
        .iter()
        .map(|(x, y)| (model.score_row(x) - y).powi(2))
        .sum()
}

pub const SVR_TOLERANCE: f64 = 1e-6;
pub const SVR_MAX_ITERATIONS: usize = 100_000;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Linear ε-insensitive support vector regression solved by SMO on the dual
/// (maximal-gain second-order working-set selection).
///
/// The dual has `2n` box-constrained variables (`α` then `α*`) and one
/// equality constraint; `w = Σ (α_i − α*_i) x_i` is kept explicitly.
pub fn train_svr(ts: &TrainingSet, imputation: ImputationTable, params: SvmParams) -> Result<WeightModel> {
    if ts.len() < 2 {
        return Err(Error::Invalid("SVR needs at least two rows".into()));
    }
    if !(params.c > 0.0) || !(params.epsilon >= 0.0) {
        return Err(Error::Invalid("SVR needs C > 0 and epsilon >= 0".into()));
    }
    let fit = svr_dual(ts, params, SVR_TOLERANCE, SVR_MAX_ITERATIONS);
    Ok(WeightModel {
        kind: TrainerKind::SvmRegression,
        w0: fit.bias,
        weights: fit.w,
        feature_names: ts.feature_names.clone(),
        imputation,
        svm_params: Some(params),
        diagnostics: TrainingDiagnostics {
            rank_deficient: false,
            converged: fit.converged,
            iterations: fit.iterations,
            final_violation: fit.violation,
        },
    })
}

struct SvrFit {
    w: Vec<f64>,
    bias: f64,
    converged: bool,
    iterations: usize,
    violation: f64,
}

fn svr_dual(ts: &TrainingSet, params: SvmParams, tol: f64, max_iter: usize) -> SvrFit {
    const TAU: f64 = 1e-12;
    let n = ts.len();
    let m = ts.dim();
    let c = params.c;
    let xs: Vec<&[f64]> = ts.rows.iter().map(|(x, _)| x.as_slice()).collect();
    let labels: Vec<f64> = ts.rows.iter().map(|(_, y)| *y).collect();
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let sample = |t: usize| if t < n { t } else { t - n };
    let kdiag: Vec<f64> = xs.iter().map(|x| dot(x, x)).collect();
    let p: Vec<f64> = (0..2 * n)
        .map(|t| params.epsilon - sign(t) * labels[sample(t)])
        .collect();

    let mut a = vec![0.0; 2 * n];
    let mut w = vec![0.0; m];
    // f[i] = w·x_i
    let mut f = vec![0.0; n];
    let grad = |f: &[f64], t: usize| sign(t) * f[sample(t)] + p[t];
    let in_up = |a: &[f64], t: usize| if t < n { a[t] < c } else { a[t] > 0.0 };
    let in_low = |a: &[f64], t: usize| if t < n { a[t] > 0.0 } else { a[t] < c };

    let mut iterations = 0;
    let mut violation = f64::INFINITY;
    let mut converged = false;
    let mut krow = vec![0.0; n];
    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..2 * n {
            if in_up(&a, t) {
                let v = -sign(t) * grad(&f, t);
                if v > gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        let mut gmin = f64::INFINITY;
        for t in 0..2 * n {
            if in_low(&a, t) {
                gmin = gmin.min(-sign(t) * grad(&f, t));
            }
        }
        violation = gmax - gmin;
        if i == usize::MAX || violation <= tol {
            converged = true;
            violation = violation.max(0.0);
            break;
        }
        let xi = xs[sample(i)];
        for (k, x) in xs.iter().enumerate() {
            krow[k] = dot(xi, x);
        }
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..2 * n {
            if !in_low(&a, t) {
                continue;
            }
            let b = gmax + sign(t) * grad(&f, t);
            if b > 0.0 {
                let mut quad = kdiag[sample(i)] + kdiag[sample(t)] - 2.0 * krow[sample(t)];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let gain = -(b * b) / quad;
                if gain < best {
                    best = gain;
                    j = t;
                }
            }
        }
        if j == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;

        let (yi, yj) = (sign(i), sign(j));
        let (gi, gj) = (grad(&f, i), grad(&f, j));
        let kij = krow[sample(j)];
        let qij = yi * yj * kij;
        let (old_i, old_j) = (a[i], a[j]);
        let (qii, qjj) = (kdiag[sample(i)], kdiag[sample(j)]);
        if yi != yj {
            let mut quad = qii + qjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-gi - gj) / quad;
            let diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if diff > 0.0 {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = -diff;
            }
            if diff > 0.0 {
                if a[i] > c {
                    a[i] = c;
                    a[j] = c - diff;
                }
            } else if a[j] > c {
                a[j] = c;
                a[i] = c + diff;
            }
        } else {
            let mut quad = qii + qjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (gi - gj) / quad;
            let sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if sum > c {
                if a[i] > c {
                    a[i] = c;
                    a[j] = sum - c;
                }
            } else if a[j] < 0.0 {
                a[j] = 0.0;
                a[i] = sum;
            }
            if sum > c {
                if a[j] > c {
                    a[j] = c;
                    a[i] = sum - c;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = sum;
            }
        }
        let di = yi * (a[i] - old_i);
        let dj = yj * (a[j] - old_j);
        let xj = xs[sample(j)];
        for d in 0..m {
            w[d] += di * xi[d] + dj * xj[d];
        }
        for (k, x) in xs.iter().enumerate() {
            f[k] += di * krow[k] + dj * dot(xj, x);
        }
    }

    // bias from free variables, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..2 * n {
        let yg = sign(t) * grad(&f, t);
        let y = sign(t);
        if a[t] >= c {
            if y < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if a[t] <= 0.0 {
            if y > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    SvrFit {
        w,
        bias: -rho,
        converged,
        iterations,
        violation,
    }
}

/// Primal slacks `(ξ_i, ξ*_i)` for each training row: the smallest values
/// satisfying `f(x_i) − y_i ≤ ε + ξ_i` and `y_i − f(x_i) ≤ ε + ξ*_i`.
pub fn svr_slacks(model: &WeightModel, ts: &TrainingSet, epsilon: f64) -> Vec<(f64, f64)> {
    ts.rows
        .iter()
        .map(|(x, y)| {
            let f = model.score_row(x);
            ((f - y - epsilon).max(0.0), (y - f - epsilon).max(0.0))
        })
        .collect()
}

/// `½‖w‖² + C Σ (ξ_i + ξ*_i)`.
pub fn svr_primal_objective(model: &WeightModel, ts: &TrainingSet, params: SvmParams) -> f64 {
    let reg = 0.5 * model.weights.iter().map(|w| w * w).sum::<f64>();
    let slack: f64 = svr_slacks(model, ts, params.epsilon)
        .iter()
        .map(|(a, b)| a + b)
        .sum();
    reg + params.c * slack
}
