//! Pairwise score matrices and one-to-one assignment.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lda::LdaModel;
use crate::profile::Corpus;
use crate::reference::Providers;
use crate::similarity::{pair_similarity, Attribute, ProfileFeatures, SimilarityConfig, SimilarityVector};
use crate::training::WeightModel;

/// Score given to dummy rows or columns when a rectangular matrix is padded.
pub const DUMMY_SCORE: f64 = -1e9;

/// Raw similarity features for every aux × target pair, stored densely with
/// `NaN` marking a missing score.
#[derive(Debug, Clone)]
pub struct PairFeatureMatrix {
    pub aux_ids: Vec<String>,
    pub target_ids: Vec<String>,
    pub feature_names: Vec<String>,
    values: Vec<f64>,
}

impl PairFeatureMatrix {
    pub fn build(
        aux: &Corpus,
        target: &Corpus,
        providers: &Providers,
        topic_model: Option<&LdaModel>,
        config: &SimilarityConfig,
    ) -> Result<Self> {
        let fa: Vec<_> = aux
            .profiles
            .iter()
            .map(|p| ProfileFeatures::extract(p, providers, topic_model))
            .collect();
        let ft: Vec<_> = target
            .profiles
            .iter()
            .map(|p| ProfileFeatures::extract(p, providers, topic_model))
            .collect();
        Self::from_features(aux.ids(), &fa, target.ids(), &ft, config)
    }

    pub fn from_features(
        aux_ids: Vec<String>,
        aux: &[ProfileFeatures],
        target_ids: Vec<String>,
        target: &[ProfileFeatures],
        config: &SimilarityConfig,
    ) -> Result<Self> {
        let feature_names = config.feature_names();
        let mut values = Vec::with_capacity(aux.len() * target.len() * feature_names.len());
        for a in aux {
            for t in target {
                let v = pair_similarity(a, t, config)?;
                values.extend(
                    v.name_sims
                        .iter()
                        .map(|(_, x)| *x)
                        .chain(Attribute::ALL.iter().map(|a| v.attribute(*a)))
                        .map(|x| x.unwrap_or(f64::NAN)),
                );
            }
        }
        Ok(PairFeatureMatrix {
            aux_ids,
            target_ids,
            feature_names,
            values,
        })
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        (i * self.target_ids.len() + j) * self.feature_names.len()
    }

    pub fn vector(&self, i: usize, j: usize) -> SimilarityVector {
        let row = &self.values[self.offset(i, j)..self.offset(i, j) + self.feature_names.len()];
        let mut v = SimilarityVector::default();
        for (name, x) in self.feature_names.iter().zip(row) {
            let x = if x.is_nan() { None } else { Some(*x) };
            match Attribute::parse(name) {
                Some(a) => v.set_attribute(a, x),
                None => v.name_sims.push((name.clone(), x)),
            }
        }
        v
    }

    /// Applies `model` to every pair.
    pub fn score(&self, model: &WeightModel) -> Result<ScoreMatrix> {
        let mut cols = Vec::with_capacity(model.feature_names.len());
        for f in &model.feature_names {
            let c = self
                .feature_names
                .iter()
                .position(|n| n == f)
                .ok_or_else(|| Error::Layout(format!("model feature `{f}` not computed")))?;
            let fill = model
                .imputation
                .value(f)
                .ok_or_else(|| Error::Layout(format!("no imputation value for `{f}`")))?;
            cols.push((c, fill));
        }
        let (n, m) = (self.aux_ids.len(), self.target_ids.len());
        let mut scores = Vec::with_capacity(n);
        let mut x = vec![0.0; cols.len()];
        for i in 0..n {
            let mut row = Vec::with_capacity(m);
            for j in 0..m {
                let base = self.offset(i, j);
                for (k, (c, fill)) in cols.iter().enumerate() {
                    let v = self.values[base + c];
                    x[k] = if v.is_nan() { *fill } else { v };
                }
                row.push(model.score_row(&x));
            }
            scores.push(row);
        }
        Ok(ScoreMatrix {
            aux_ids: self.aux_ids.clone(),
            target_ids: self.target_ids.clone(),
            scores,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub aux_ids: Vec<String>,
    pub target_ids: Vec<String>,
    pub scores: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(aux_ids: Vec<String>, target_ids: Vec<String>, scores: Vec<Vec<f64>>) -> Result<Self> {
        if scores.len() != aux_ids.len() || scores.iter().any(|r| r.len() != target_ids.len()) {
            return Err(Error::Invalid(format!(
                "score matrix is not {} x {}",
                aux_ids.len(),
                target_ids.len()
            )));
        }
        Ok(ScoreMatrix {
            aux_ids,
            target_ids,
            scores,
        })
    }

    /// Keeps only the listed target columns, in the given order.
    pub fn restrict_targets(&self, victims: &[String]) -> Result<ScoreMatrix> {
        let index: HashMap<&str, usize> = self
            .target_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let cols = victims
            .iter()
            .map(|v| {
                index
                    .get(v.as_str())
                    .copied()
                    .ok_or_else(|| Error::UnknownProfile(v.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScoreMatrix {
            aux_ids: self.aux_ids.clone(),
            target_ids: victims.to_vec(),
            scores: self
                .scores
                .iter()
                .map(|r| cols.iter().map(|&c| r[c]).collect())
                .collect(),
        })
    }

    /// CSV with a header of target ids and one row per aux profile.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["aux_id".to_string()];
        header.extend(self.target_ids.iter().cloned());
        w.write_record(&header)?;
        for (id, row) in self.aux_ids.iter().zip(&self.scores) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|s| format_score(*s)));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn format_score(x: f64) -> String {
    format!("{x:.12}")
}

pub fn build_score_matrix(
    aux: &Corpus,
    target: &Corpus,
    model: &WeightModel,
    providers: &Providers,
    topic_model: Option<&LdaModel>,
    config: &SimilarityConfig,
) -> Result<ScoreMatrix> {
    if aux.is_empty() || target.is_empty() {
        return Err(Error::Invalid("cannot match an empty corpus".into()));
    }
    PairFeatureMatrix::build(aux, target, providers, topic_model, config)?.score(model)
}

/// Maximum-total assignment. Returns, for every row, the matched column or
/// `None` when the row is left over (the matrix is wider than tall or the
/// row went to a dummy column).
///
/// Works on rectangular input directly; the result is the same as padding
/// the short side with [`DUMMY_SCORE`] entries.
pub fn hungarian_assign(scores: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = scores.len();
    let cols = scores.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    if rows <= cols {
        solve_rows_le_cols(rows, cols, |i, j| scores[i][j])
    } else {
        let by_col = solve_rows_le_cols(cols, rows, |i, j| scores[j][i]);
        let mut out = vec![None; rows];
        for (c, r) in by_col.into_iter().enumerate() {
            if let Some(r) = r {
                out[r] = Some(c);
            }
        }
        out
    }
}

// Shortest augmenting paths with potentials, minimizing the negated score.
fn solve_rows_le_cols(n: usize, m: usize, score: impl Fn(usize, usize) -> f64) -> Vec<Option<usize>> {
    let cost = |i: usize, j: usize| -score(i - 1, j - 1);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    // p[j]: row matched to column j (1-based, 0 = free)
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = Some(j - 1);
        }
    }
    out
}

/// Sum of the assigned scores, in row order.
pub fn assignment_total(scores: &[Vec<f64>], assignment: &[Option<usize>]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|c| scores[i][c]))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub aux_id: String,
    pub target_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub assignments: Vec<MatchedPair>,
    pub threshold: f64,
    /// Profiles that took part in the assignment.
    pub aux_ids: Vec<String>,
    pub target_ids: Vec<String>,
}

impl MatchResult {
    pub fn accepted(&self) -> impl Iterator<Item = &MatchedPair> {
        self.assignments.iter().filter(|a| a.score >= self.threshold)
    }

    pub fn with_threshold(&self, threshold: f64) -> MatchResult {
        MatchResult {
            threshold,
            ..self.clone()
        }
    }

    /// `aux_id,target_id,score,accepted`, one row per assignment.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("aux_id,target_id,score,accepted\n");
        {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            for a in &self.assignments {
                w.write_record([
                    a.aux_id.as_str(),
                    a.target_id.as_str(),
                    &format_score(a.score),
                    if a.score >= self.threshold { "true" } else { "false" },
                ])?;
            }
            out.push_str(&String::from_utf8_lossy(
                &w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?,
            ));
        }
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Reads assignments back; the accepted column is recomputed from
    /// `threshold`.
    pub fn read_csv(
        path: impl AsRef<Path>,
        threshold: f64,
        aux_ids: Vec<String>,
        target_ids: Vec<String>,
    ) -> Result<MatchResult> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["aux_id", "target_id", "score", "accepted"] {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: "expected header aux_id,target_id,score,accepted".into(),
            });
        }
        let mut assignments = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            let score = rec[2].parse::<f64>().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: k + 2,
                message: format!("bad score `{}`: {e}", &rec[2]),
            })?;
            assignments.push(MatchedPair {
                aux_id: rec[0].to_string(),
                target_id: rec[1].to_string(),
                score,
            });
        }
        Ok(MatchResult {
            assignments,
            threshold,
            aux_ids,
            target_ids,
        })
    }
}

fn attack(m: &ScoreMatrix, threshold: f64) -> MatchResult {
    let assignment = hungarian_assign(&m.scores);
    let assignments = assignment
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            c.map(|c| MatchedPair {
                aux_id: m.aux_ids[i].clone(),
                target_id: m.target_ids[c].clone(),
                score: m.scores[i][c],
            })
        })
        .collect();
    MatchResult {
        assignments,
        threshold,
        aux_ids: m.aux_ids.clone(),
        target_ids: m.target_ids.clone(),
    }
}

/// Matches every aux profile against every target profile.
pub fn global_attack(m: &ScoreMatrix, threshold: f64) -> MatchResult {
    attack(m, threshold)
}

/// Matches all aux profiles against the victim columns only.
pub fn targeted_attack(m: &ScoreMatrix, victims: &[String], threshold: f64) -> Result<MatchResult> {
    Ok(attack(&m.restrict_targets(victims)?, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn identity_dominant() {
        let a = hungarian_assign(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(a, vec![Some(0), Some(1)]);
    }

    #[test]
    fn off_diagonal_wins() {
        let s = vec![vec![0.9, 0.8], vec![0.7, 0.1]];
        let a = hungarian_assign(&s);
        assert_eq!(a, vec![Some(1), Some(0)]);
        assert!((assignment_total(&s, &a) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn rectangular_leaves_extra_unassigned() {
        let s = vec![vec![0.2], vec![0.9], vec![0.5]];
        assert_eq!(hungarian_assign(&s), vec![None, Some(0), None]);
        let t = vec![vec![0.2, 0.9, 0.5]];
        assert_eq!(hungarian_assign(&t), vec![Some(1)]);
    }

    #[test]
    fn padding_with_dummies_is_neutral() {
        let s = vec![vec![0.3, 0.6, 0.1], vec![0.5, 0.2, 0.9]];
        let mut padded = s.clone();
        padded.push(vec![DUMMY_SCORE; 3]);
        let a = hungarian_assign(&s);
        let b = hungarian_assign(&padded);
        assert_eq!(&b[..2], &a[..]);
    }

    #[test]
    fn thresholds_and_targeting() {
        let m = ScoreMatrix::new(ids("a", 2), ids("t", 2), vec![vec![0.9, 0.1], vec![0.2, 0.4]]).unwrap();
        let r = global_attack(&m, 10.0);
        assert_eq!(r.accepted().count(), 0);
        let r = global_attack(&m, -1e18);
        assert_eq!(r.accepted().count(), 2);
        let one = targeted_attack(&m, &["t1".into()], 0.0).unwrap();
        assert_eq!(one.assignments.len(), 1);
        assert_eq!(one.assignments[0].aux_id, "a1");
        let all = targeted_attack(&m, &m.target_ids, 0.5).unwrap();
        assert_eq!(all, global_attack(&m, 0.5));
        assert!(matches!(
            targeted_attack(&m, &["zz".into()], 0.0),
            Err(Error::UnknownProfile(_))
        ));
    }

    #[test]
    fn match_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = ScoreMatrix::new(ids("a", 2), ids("t", 2), vec![vec![0.9, 0.1], vec![0.2, 0.4]]).unwrap();
        let r = global_attack(&m, 0.5);
        let path = dir.path().join("matches.csv");
        r.write_csv(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("aux_id,target_id,score,accepted\na0,t0,0.900000000000,true\n"));
        let back = MatchResult::read_csv(&path, 0.5, m.aux_ids.clone(), m.target_ids.clone()).unwrap();
        assert_eq!(back, r);
    }
}
