//! Confusion counts, precision/recall curves, and the KNN pair classifier.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::MatchResult;
use crate::profile::PairLabel;
use crate::training::TrainingSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Global,
    Targeted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub attack_kind: AttackKind,
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// `None` when nothing was accepted.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub success_rate: f64,
    pub coupled_pairs: usize,
    pub correctly_matched: usize,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

struct Scope<'a> {
    partner_of_aux: HashMap<&'a str, &'a str>,
    coupled_targets: HashSet<&'a str>,
    coupled_pairs: usize,
}

fn scope<'a>(result: &MatchResult, labels: &'a [PairLabel], kind: AttackKind) -> Result<Scope<'a>> {
    let aux: HashSet<&str> = result.aux_ids.iter().map(String::as_str).collect();
    let target: HashSet<&str> = result.target_ids.iter().map(String::as_str).collect();
    let mut s = Scope {
        partner_of_aux: HashMap::new(),
        coupled_targets: HashSet::new(),
        coupled_pairs: 0,
    };
    for l in labels {
        if !aux.contains(l.aux_id.as_str()) {
            return Err(Error::UnknownProfile(l.aux_id.clone()));
        }
        if !target.contains(l.target_id.as_str()) {
            // targeted attacks only see the victim columns
            if kind == AttackKind::Global {
                return Err(Error::UnknownProfile(l.target_id.clone()));
            }
            if l.coupled {
                s.partner_of_aux.insert(&l.aux_id, &l.target_id);
            }
            continue;
        }
        if l.coupled {
            s.partner_of_aux.insert(&l.aux_id, &l.target_id);
            s.coupled_targets.insert(&l.target_id);
            s.coupled_pairs += 1;
        }
    }
    Ok(s)
}

/// Applies the confusion rules to one assignment at its threshold.
pub fn evaluate(result: &MatchResult, labels: &[PairLabel], kind: AttackKind) -> Result<EvalReport> {
    let s = scope(result, labels, kind)?;
    let (mut tp, mut fp, mut tn, mut fn_, mut correct) = (0, 0, 0, 0, 0);
    for a in &result.assignments {
        let accepted = a.score >= result.threshold;
        let partner = s.partner_of_aux.get(a.aux_id.as_str()).copied();
        if partner == Some(a.target_id.as_str()) {
            correct += 1;
            if accepted {
                tp += 1;
            } else {
                fn_ += 1;
            }
        } else if partner.is_some() || s.coupled_targets.contains(a.target_id.as_str()) {
            if accepted {
                fp += 1;
            } else {
                tn += 1;
            }
        } else if kind == AttackKind::Global {
            if accepted {
                fp += 1;
            } else {
                tn += 1;
            }
        }
    }
    Ok(EvalReport {
        attack_kind: kind,
        threshold: result.threshold,
        tp,
        fp,
        tn,
        fn_,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        success_rate: ratio(correct, s.coupled_pairs).unwrap_or(0.0),
        coupled_pairs: s.coupled_pairs,
        correctly_matched: correct,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<CurvePoint>,
    /// Grid threshold where precision and recall are closest, if any point
    /// has both defined.
    pub operating_threshold: Option<f64>,
}

impl PrCurve {
    /// `threshold,precision,recall`; undefined values are left empty.
    pub fn to_csv(&self) -> String {
        let cell = |x: Option<f64>| x.map(|v| format!("{v:.12}")).unwrap_or_default();
        let mut out = String::from("threshold,precision,recall\n");
        for p in &self.points {
            out.push_str(&format!(
                "{:.12},{},{}\n",
                p.threshold,
                cell(p.precision),
                cell(p.recall)
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// `steps` evenly spaced thresholds spanning the assigned scores.
pub fn threshold_grid(result: &MatchResult, steps: usize) -> Vec<f64> {
    let scores = result.assignments.iter().map(|a| a.score);
    let lo = scores.clone().fold(f64::INFINITY, f64::min);
    let hi = scores.fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || steps < 2 || hi <= lo {
        return vec![if lo.is_finite() { lo } else { 0.0 }];
    }
    (0..steps)
        .map(|k| {
            if k + 1 == steps {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (steps - 1) as f64
            }
        })
        .collect()
}

pub fn precision_recall_curve(
    result: &MatchResult,
    labels: &[PairLabel],
    kind: AttackKind,
    grid: &[f64],
) -> Result<PrCurve> {
    if grid.is_empty() {
        return Err(Error::Invalid("threshold grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Invalid("threshold grid must be ascending".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &t in grid {
        let r = evaluate(&result.with_threshold(t), labels, kind)?;
        if let (Some(p), Some(rc)) = (r.precision, r.recall) {
            let gap = (p - rc).abs();
            if best.is_none_or(|(g, _)| gap < g) {
                best = Some((gap, t));
            }
        }
        points.push(CurvePoint {
            threshold: t,
            precision: r.precision,
            recall: r.recall,
        });
    }
    Ok(PrCurve {
        points,
        operating_threshold: best.map(|(_, t)| t),
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// k-nearest-neighbour vote over the training rows (Euclidean distance,
/// equal distances ordered by training index). A tied vote predicts
/// uncoupled.
pub fn knn_baseline(train: &TrainingSet, test: &[Vec<f64>], k: usize) -> Result<Vec<bool>> {
    if train.is_empty() {
        return Err(Error::Invalid("KNN needs a nonempty training set".into()));
    }
    if k == 0 || k > train.len() {
        return Err(Error::Invalid(format!(
            "k = {k} outside 1..={}",
            train.len()
        )));
    }
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(train.len());
    test.iter()
        .map(|x| {
            if x.len() != train.dim() {
                return Err(Error::LengthMismatch(x.len(), train.dim()));
            }
            order.clear();
            order.extend(train.rows.iter().enumerate().map(|(i, (r, _))| (sq_dist(x, r), i)));
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < order.len() {
                order.select_nth_unstable_by(k - 1, cmp);
            }
            let yes = order[..k].iter().filter(|(_, i)| train.rows[*i].1 > 0.5).count();
            Ok(2 * yes > k)
        })
        .collect()
}

/// Precision and recall of per-pair predictions against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

pub fn classifier_report(predicted: &[bool], truth: &[bool]) -> Result<ClassifierReport> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch(predicted.len(), truth.len()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (p, t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(ClassifierReport {
        tp,
        fp,
        tn,
        fn_,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
    })
}
