//! Per-attribute similarity metrics for a cross-network profile pair.
//!
//! Every metric returns a score in `[0, 1]`, or `None` when the attribute is
//! unavailable on either side.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lda::LdaModel;
use crate::profile::{Gender, NameFieldKind, Post, Profile};
use crate::reference::{self, Coordinate, NameGenderTable, Providers, SentimentLexicon};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub location_scale_km: f64,
    pub activity_horizon_s: i64,
}

impl Default for NormalizationSpec {
    fn default() -> Self {
        NormalizationSpec {
            location_scale_km: 20015.1,
            activity_horizon_s: 86_400,
        }
    }
}

impl NormalizationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.location_scale_km > 0.0) || self.activity_horizon_s <= 0 {
            return Err(Error::Invalid("normalization constants must be positive".into()));
        }
        Ok(())
    }
}

/// The non-name attributes, in feature-layout order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Location,
    Gender,
    Photo,
    Freetext,
    Activity,
    Interest,
    Sentiment,
}

impl Attribute {
    pub const ALL: [Attribute; 7] = [
        Attribute::Location,
        Attribute::Gender,
        Attribute::Photo,
        Attribute::Freetext,
        Attribute::Activity,
        Attribute::Interest,
        Attribute::Sentiment,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Location => "location",
            Attribute::Gender => "gender",
            Attribute::Photo => "photo",
            Attribute::Freetext => "freetext",
            Attribute::Activity => "activity",
            Attribute::Interest => "interest",
            Attribute::Sentiment => "sentiment",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A cross-network name comparison: aux field vs target field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NameCombination {
    pub aux: NameFieldKind,
    pub target: NameFieldKind,
}

impl NameCombination {
    pub fn new(aux: NameFieldKind, target: NameFieldKind) -> Self {
        NameCombination { aux, target }
    }

    pub fn feature_name(&self) -> String {
        format!("name:{}~{}", self.aux.as_str(), self.target.as_str())
    }

    pub fn parse(feature: &str) -> Option<Self> {
        let rest = feature.strip_prefix("name:")?;
        let (a, t) = rest.split_once('~')?;
        Some(NameCombination::new(NameFieldKind::parse(a)?, NameFieldKind::parse(t)?))
    }
}

pub fn is_name_feature(feature: &str) -> bool {
    feature.starts_with("name:")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    pub name_combinations: Vec<NameCombination>,
    pub norm: NormalizationSpec,
}

impl Default for SimilarityConfig {
    /// Same-kind comparisons for every name field kind.
    fn default() -> Self {
        SimilarityConfig {
            name_combinations: NameFieldKind::ALL
                .into_iter()
                .map(|k| NameCombination::new(k, k))
                .collect(),
            norm: NormalizationSpec::default(),
        }
    }
}

impl SimilarityConfig {
    /// Same-kind combinations for the field kinds present on both sides.
    pub fn for_profiles<'a>(
        aux: impl IntoIterator<Item = &'a Profile>,
        target: impl IntoIterator<Item = &'a Profile>,
    ) -> Self {
        let kinds = |ps: &mut dyn Iterator<Item = &'a Profile>| {
            let mut present = [false; 5];
            for p in ps {
                for f in &p.name_fields {
                    present[NameFieldKind::ALL.iter().position(|k| *k == f.kind).unwrap()] = true;
                }
            }
            present
        };
        let a = kinds(&mut aux.into_iter());
        let t = kinds(&mut target.into_iter());
        SimilarityConfig {
            name_combinations: NameFieldKind::ALL
                .into_iter()
                .enumerate()
                .filter(|(i, _)| a[*i] && t[*i])
                .map(|(_, k)| NameCombination::new(k, k))
                .collect(),
            norm: NormalizationSpec::default(),
        }
    }

    /// Name combinations taken from a trained model's feature list.
    pub fn from_features<S: AsRef<str>>(features: &[S]) -> Result<Self> {
        let mut name_combinations = Vec::new();
        for f in features.iter().map(AsRef::as_ref) {
            if is_name_feature(f) {
                let c = NameCombination::parse(f).ok_or_else(|| Error::Layout(format!("bad name feature `{f}`")))?;
                name_combinations.push(c);
            } else if Attribute::parse(f).is_none() {
                return Err(Error::Layout(format!("unknown feature `{f}`")));
            }
        }
        Ok(SimilarityConfig {
            name_combinations,
            norm: NormalizationSpec::default(),
        })
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.name_combinations
            .iter()
            .map(NameCombination::feature_name)
            .chain(Attribute::ALL.iter().map(|a| a.as_str().to_string()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimilarityVector {
    pub name_sims: Vec<(String, Option<f64>)>,
    pub location: Option<f64>,
    pub gender: Option<f64>,
    pub photo: Option<f64>,
    pub freetext: Option<f64>,
    pub activity: Option<f64>,
    pub interest: Option<f64>,
    pub sentiment: Option<f64>,
}

impl SimilarityVector {
    pub fn attribute(&self, a: Attribute) -> Option<f64> {
        match a {
            Attribute::Location => self.location,
            Attribute::Gender => self.gender,
            Attribute::Photo => self.photo,
            Attribute::Freetext => self.freetext,
            Attribute::Activity => self.activity,
            Attribute::Interest => self.interest,
            Attribute::Sentiment => self.sentiment,
        }
    }

    pub fn set_attribute(&mut self, a: Attribute, v: Option<f64>) {
        let slot = match a {
            Attribute::Location => &mut self.location,
            Attribute::Gender => &mut self.gender,
            Attribute::Photo => &mut self.photo,
            Attribute::Freetext => &mut self.freetext,
            Attribute::Activity => &mut self.activity,
            Attribute::Interest => &mut self.interest,
            Attribute::Sentiment => &mut self.sentiment,
        };
        *slot = v;
    }

    /// Looks up a feature by layout name (`name:...` or an attribute name).
    pub fn get(&self, feature: &str) -> Option<Option<f64>> {
        if is_name_feature(feature) {
            return self
                .name_sims
                .iter()
                .find(|(n, _)| n == feature)
                .map(|(_, v)| *v);
        }
        Attribute::parse(feature).map(|a| self.attribute(a))
    }

    /// All features in layout order.
    pub fn features(&self) -> Vec<(String, Option<f64>)> {
        let mut out = self.name_sims.clone();
        out.extend(
            Attribute::ALL
                .iter()
                .map(|a| (a.as_str().to_string(), self.attribute(*a))),
        );
        out
    }

    pub fn present_scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.name_sims
            .iter()
            .filter_map(|(_, v)| *v)
            .chain(Attribute::ALL.iter().filter_map(|a| self.attribute(*a)))
    }
}

/// Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() || b.is_empty() {
        return a.len().max(b.len());
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn username_similarity(a: &str, b: &str) -> f64 {
    name_similarity_folded(&a.to_lowercase(), &b.to_lowercase())
}

fn name_similarity_folded(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

pub fn haversine_km(a: Coordinate, b: Coordinate) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    let h = h.clamp(0.0, 1.0);
    EARTH_RADIUS_KM * 2.0 * h.sqrt().atan2((1.0 - h).sqrt())
}

fn location_score(
    a_key: &str,
    a: Coordinate,
    b_key: &str,
    b: Coordinate,
    norm: &NormalizationSpec,
) -> f64 {
    if a_key == b_key {
        return 1.0;
    }
    let gd = haversine_km(a, b);
    1.0 - (gd / norm.location_scale_km).min(1.0)
}

pub fn location_similarity(
    a: Option<&str>,
    b: Option<&str>,
    gaz: &reference::Gazetteer,
    norm: &NormalizationSpec,
) -> Option<f64> {
    let (a, b) = (a?, b?);
    let (ca, cb) = (gaz.geocode(a)?, gaz.geocode(b)?);
    Some(location_score(
        &reference::normalize_key(a),
        ca,
        &reference::normalize_key(b),
        cb,
        norm,
    ))
}

/// What is known about one side's gender.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GenderEvidence {
    Declared(Gender),
    /// Probability of male inferred from a first name.
    Inferred(f64),
}

/// Name fields consulted for gender inference, in priority order.
pub const GENDER_NAME_ORDER: [NameFieldKind; 4] = [
    NameFieldKind::GivenName,
    NameFieldKind::DisplayName,
    NameFieldKind::ScreenName,
    NameFieldKind::Username,
];

pub fn gender_evidence(p: &Profile, tbl: &NameGenderTable) -> Option<GenderEvidence> {
    if let Some(g) = p.declared_gender {
        return Some(GenderEvidence::Declared(g));
    }
    let name = GENDER_NAME_ORDER.iter().find_map(|k| p.name(*k))?;
    tbl.probability_male(name).map(GenderEvidence::Inferred)
}

fn gender_score(a: GenderEvidence, b: GenderEvidence) -> f64 {
    use GenderEvidence::*;
    let male_prob = |g: Gender| if g == Gender::Male { 1.0 } else { 0.0 };
    match (a, b) {
        (Declared(x), Declared(y)) => f64::from(u8::from(x == y)),
        (Declared(g), Inferred(q)) | (Inferred(q), Declared(g)) => {
            let p = male_prob(g);
            p * q + (1.0 - p) * (1.0 - q)
        }
        (Inferred(p), Inferred(q)) => p * q + (1.0 - p) * (1.0 - q),
    }
}

pub fn gender_similarity(a: &Profile, b: &Profile, tbl: &NameGenderTable) -> Option<f64> {
    Some(gender_score(gender_evidence(a, tbl)?, gender_evidence(b, tbl)?))
}

pub fn photo_similarity(a: Option<&[f64]>, b: Option<&[f64]>) -> Result<Option<f64>> {
    let (a, b) = match (a, b) {
        (Some(a), Some(b)) => (a, b),
        _ => return Ok(None),
    };
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(Some(1.0 - d.clamp(0.0, 4.0) / 4.0))
}

/// Cosine similarity of two sparse count vectors sorted by key.
fn sparse_cosine(a: &[(String, u32)], b: &[(String, u32)]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let norm = |v: &[(String, u32)]| v.iter().map(|(_, c)| (*c as f64).powi(2)).sum::<f64>().sqrt();
    let (mut i, mut j, mut dot) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += a[i].1 as f64 * b[j].1 as f64;
                i += 1;
                j += 1;
            }
        }
    }
    Some((dot / (norm(a) * norm(b))).clamp(0.0, 1.0))
}

fn entity_vector(text: &str) -> Vec<(String, u32)> {
    reference::entity_counts(text).into_iter().collect()
}

pub fn freetext_similarity(a: Option<&str>, b: Option<&str>) -> Option<f64> {
    sparse_cosine(&entity_vector(a?), &entity_vector(b?))
}

fn is_sorted(v: &[i64]) -> bool {
    v.windows(2).all(|w| w[0] <= w[1])
}

/// Greedy disjoint pairing by increasing absolute gap; ties broken by
/// `(i, j)`. Returns the mean gap over the `min(|a|, |b|)` selected pairs.
///
/// Both inputs must be sorted. Candidates are produced lazily: for each `i`
/// the `j`s are walked outward from `a[i]`'s insertion point in `b`, and a
/// heap merges those per-`i` streams into global `(gap, i, j)` order.
pub fn greedy_mean_gap(a: &[i64], b: &[i64]) -> Option<f64> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    if a.is_empty() || b.is_empty() {
        return None;
    }
    let k = a.len().min(b.len());
    // start of the run of values equal to b[j]
    let run_start = |j: usize| {
        let mut s = j;
        while s > 0 && b[s - 1] == b[j] {
            s -= 1;
        }
        s
    };
    // left stream walks runs of equal values downward, each run in
    // increasing j; `left_end[i]` is the last index of the current run
    let mut left_end = vec![0usize; a.len()];
    let mut heap = BinaryHeap::with_capacity(2 * a.len());
    for (i, x) in a.iter().enumerate() {
        let p = b.partition_point(|y| y < x);
        if p < b.len() {
            heap.push(Reverse((b[p].abs_diff(*x), i as u32, p as u32, false)));
        }
        if p > 0 {
            left_end[i] = p - 1;
            let s = run_start(p - 1);
            heap.push(Reverse((b[s].abs_diff(*x), i as u32, s as u32, true)));
        }
    }
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let (mut picked, mut total) = (0usize, 0u128);
    while let Some(Reverse((gap, i, j, left))) = heap.pop() {
        let (iu, ju) = (i as usize, j as usize);
        if used_a[iu] {
            continue;
        }
        if !used_b[ju] {
            used_a[iu] = true;
            used_b[ju] = true;
            total += gap as u128;
            picked += 1;
            if picked == k {
                break;
            }
            continue;
        }
        let next = if left {
            if ju < left_end[iu] {
                Some(ju + 1)
            } else {
                let s = run_start(ju);
                (s > 0).then(|| {
                    left_end[iu] = s - 1;
                    run_start(s - 1)
                })
            }
        } else {
            (ju + 1 < b.len()).then_some(ju + 1)
        };
        if let Some(n) = next {
            heap.push(Reverse((b[n].abs_diff(a[iu]), i, n as u32, left)));
        }
    }
    Some(total as f64 / k as f64)
}

pub fn activity_similarity(a: &[i64], b: &[i64], norm: &NormalizationSpec) -> Result<Option<f64>> {
    if !is_sorted(a) || !is_sorted(b) {
        return Err(Error::Unsorted);
    }
    Ok(greedy_mean_gap(a, b).map(|gap| 1.0 - (gap / norm.activity_horizon_s as f64).min(1.0)))
}

pub fn check_distribution(d: &[f64]) -> Result<()> {
    let sum: f64 = d.iter().sum();
    if d.iter().any(|x| !(*x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::NotADistribution(format!("sum {sum}")));
    }
    Ok(())
}

pub fn interest_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    check_distribution(a)?;
    check_distribution(b)?;
    Ok(interest_score(a, b))
}

fn interest_score(a: &[f64], b: &[f64]) -> f64 {
    let l1: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    1.0 - l1 / a.len() as f64
}

/// Day index → mean (p_pos, p_neg) over that day's posts.
pub fn daily_sentiment(posts: &[Post], lex: &SentimentLexicon) -> Vec<(i64, f64, f64)> {
    let mut days: BTreeMap<i64, (f64, f64, usize)> = BTreeMap::new();
    for p in posts {
        let (pos, neg) = lex.scores(&p.text);
        let e = days.entry(p.day()).or_insert((0.0, 0.0, 0));
        e.0 += pos;
        e.1 += neg;
        e.2 += 1;
    }
    days.into_iter()
        .map(|(d, (p, n, c))| (d, p / c as f64, n / c as f64))
        .collect()
}

fn daily_sentiment_score(a: &[(i64, f64, f64)], b: &[(i64, f64, f64)]) -> Option<f64> {
    let (mut i, mut j) = (0, 0);
    let (mut total, mut shared) = (0.0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                total += ((a[i].1 - b[j].1).abs() + (a[i].2 - b[j].2).abs()) / 2.0;
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    (shared > 0).then(|| 1.0 - total / shared as f64)
}

pub fn sentiment_similarity(a: &[Post], b: &[Post], lex: &SentimentLexicon) -> Option<f64> {
    daily_sentiment_score(&daily_sentiment(a, lex), &daily_sentiment(b, lex))
}

/// Everything about one profile that the pairwise metrics need, computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileFeatures {
    names: Vec<(NameFieldKind, String)>,
    location: Option<(String, Coordinate)>,
    gender: Option<GenderEvidence>,
    photo: Option<Vec<f64>>,
    entities: Option<Vec<(String, u32)>>,
    timestamps: Vec<i64>,
    topics: Option<Vec<f64>>,
    sentiment: Vec<(i64, f64, f64)>,
}

impl ProfileFeatures {
    pub fn extract(p: &Profile, providers: &Providers, topic_model: Option<&LdaModel>) -> Self {
        let location = p.location_text.as_deref().and_then(|t| {
            providers
                .gazetteer
                .geocode(t)
                .map(|c| (reference::normalize_key(t), c))
        });
        let topics = match topic_model {
            Some(m) if !p.posts.is_empty() => Some(m.profile_topic_distribution(&p.posts)),
            _ => None,
        };
        ProfileFeatures {
            names: p
                .name_fields
                .iter()
                .map(|f| (f.kind, f.text.to_lowercase()))
                .collect(),
            location,
            gender: gender_evidence(p, &providers.names),
            photo: p.photo_embedding.clone(),
            entities: p.freetext.as_deref().map(entity_vector),
            timestamps: p.timestamps(),
            topics,
            sentiment: daily_sentiment(&p.posts, &providers.lexicon),
        }
    }

    fn name(&self, kind: NameFieldKind) -> Option<&str> {
        self.names.iter().find(|(k, _)| *k == kind).map(|(_, t)| t.as_str())
    }

    pub fn topic_distribution(&self) -> Option<&[f64]> {
        self.topics.as_deref()
    }

    /// Swaps in a topic distribution computed elsewhere.
    pub fn set_topic_distribution(&mut self, topics: Option<Vec<f64>>) {
        self.topics = topics;
    }
}

/// Scores a pair of pre-extracted profiles.
pub fn pair_similarity(
    a: &ProfileFeatures,
    b: &ProfileFeatures,
    config: &SimilarityConfig,
) -> Result<SimilarityVector> {
    let name_sims = config
        .name_combinations
        .iter()
        .map(|c| {
            let s = match (a.name(c.aux), b.name(c.target)) {
                (Some(x), Some(y)) => Some(name_similarity_folded(x, y)),
                _ => None,
            };
            (c.feature_name(), s)
        })
        .collect();
    let location = match (&a.location, &b.location) {
        (Some((ka, ca)), Some((kb, cb))) => Some(location_score(ka, *ca, kb, *cb, &config.norm)),
        _ => None,
    };
    let gender = match (a.gender, b.gender) {
        (Some(x), Some(y)) => Some(gender_score(x, y)),
        _ => None,
    };
    let photo = photo_similarity(a.photo.as_deref(), b.photo.as_deref())?;
    let freetext = match (&a.entities, &b.entities) {
        (Some(x), Some(y)) => sparse_cosine(x, y),
        _ => None,
    };
    let activity = activity_similarity(&a.timestamps, &b.timestamps, &config.norm)?;
    let interest = match (&a.topics, &b.topics) {
        (Some(x), Some(y)) => {
            if x.len() != y.len() {
                return Err(Error::LengthMismatch(x.len(), y.len()));
            }
            Some(interest_score(x, y))
        }
        _ => None,
    };
    let sentiment = daily_sentiment_score(&a.sentiment, &b.sentiment);
    Ok(SimilarityVector {
        name_sims,
        location,
        gender,
        photo,
        freetext,
        activity,
        interest,
        sentiment,
    })
}

pub fn compute_similarity_vector(
    a: &Profile,
    b: &Profile,
    providers: &Providers,
    topic_model: Option<&LdaModel>,
    config: &SimilarityConfig,
) -> Result<SimilarityVector> {
    if !a.network_id.is_empty() && a.network_id == b.network_id {
        return Err(Error::Invalid(format!(
            "profiles `{}` and `{}` are on the same network",
            a.profile_id, b.profile_id
        )));
    }
    let fa = ProfileFeatures::extract(a, providers, topic_model);
    let fb = ProfileFeatures::extract(b, providers, topic_model);
    pair_similarity(&fa, &fb, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_pairs_mean_gap(a: &[i64], b: &[i64]) -> Option<f64> {
        if a.is_empty() || b.is_empty() {
            return None;
        }
        let k = a.len().min(b.len());
        let mut cand = Vec::new();
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                cand.push((x.abs_diff(*y), i, j));
            }
        }
        cand.sort_unstable();
        let (mut ua, mut ub) = (vec![false; a.len()], vec![false; b.len()]);
        let (mut n, mut total) = (0, 0u128);
        for (g, i, j) in cand {
            if !ua[i] && !ub[j] && n < k {
                ua[i] = true;
                ub[j] = true;
                total += g as u128;
                n += 1;
            }
        }
        Some(total as f64 / k as f64)
    }

    #[test]
    fn lazy_pairing_matches_full_sort() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..3000 {
            let (na, nb) = (rng.random_range(0..8), rng.random_range(0..8));
            let mut gen = |n: usize| {
                let mut v: Vec<i64> = (0..n).map(|_| rng.random_range(0..12)).collect();
                v.sort_unstable();
                v
            };
            let (a, b) = (gen(na), gen(nb));
            assert_eq!(greedy_mean_gap(&a, &b), sorted_pairs_mean_gap(&a, &b), "{a:?} {b:?}");
        }
    }
    use crate::profile::NameField;
    use crate::reference::Gazetteer;

    #[test]
    fn username_examples() {
        assert_eq!(username_similarity("alice", "alice"), 1.0);
        assert_eq!(username_similarity("abc", ""), 0.0);
        assert_eq!(username_similarity("", ""), 1.0);
        assert!((username_similarity("kitten", "sitting") - (1.0 - 3.0 / 7.0)).abs() < 1e-12);
        assert_eq!(username_similarity("Alice", "aLICE"), 1.0);
    }

    fn gaz() -> Gazetteer {
        Gazetteer::from_csv_str(
            "place,lat,lon\n\"Hamburg, Germany\",53.5511,9.9937\nHH,53.5511,9.9937\n\"Berlin, Germany\",52.5200,13.4050\n\"Paris, France\",48.8566,2.3522\n",
        )
        .unwrap()
    }

    #[test]
    fn location_examples() {
        let g = gaz();
        let n = NormalizationSpec::default();
        assert_eq!(location_similarity(Some("Hamburg, Germany"), Some("Hamburg, Germany"), &g, &n), Some(1.0));
        assert_eq!(location_similarity(Some("HH"), Some("hamburg, germany"), &g, &n), Some(1.0));
        assert_eq!(location_similarity(None, Some("HH"), &g, &n), None);
        assert_eq!(location_similarity(Some("Atlantis"), Some("HH"), &g, &n), None);
        // 877.46 km from an independent haversine evaluation
        let s = location_similarity(Some("Berlin, Germany"), Some("Paris, France"), &g, &n).unwrap();
        assert!((s - (1.0 - 877.46 / 20015.1)).abs() < 1e-4, "{s}");
    }

    fn with_gender(id: &str, net: &str, g: Option<Gender>, given: Option<&str>) -> Profile {
        let mut p = Profile::new(id, net);
        p.declared_gender = g;
        if let Some(n) = given {
            p.name_fields.push(NameField {
                kind: NameFieldKind::GivenName,
                text: n.into(),
            });
        }
        p
    }

    #[test]
    fn gender_examples() {
        let tbl = NameGenderTable::from_csv_str("name,male_count,female_count\nalex,900,100\n").unwrap();
        let m = with_gender("a", "x", Some(Gender::Male), None);
        let f = with_gender("b", "y", Some(Gender::Female), None);
        let alex = with_gender("c", "y", None, Some("Alex"));
        let anon = with_gender("d", "y", None, Some("Zzyzx"));
        assert_eq!(gender_similarity(&m, &m, &tbl), Some(1.0));
        assert_eq!(gender_similarity(&m, &f, &tbl), Some(0.0));
        assert!((gender_similarity(&m, &alex, &tbl).unwrap() - 0.9).abs() < 1e-12);
        assert!((gender_similarity(&f, &alex, &tbl).unwrap() - 0.1).abs() < 1e-12);
        assert!((gender_similarity(&alex, &alex, &tbl).unwrap() - (0.81 + 0.01)).abs() < 1e-12);
        assert_eq!(gender_similarity(&m, &anon, &tbl), None);
    }

    #[test]
    fn photo_examples() {
        let e1 = [1.0, 0.0];
        let e2 = [0.0, 1.0];
        assert_eq!(photo_similarity(Some(&e1), Some(&e1)).unwrap(), Some(1.0));
        assert_eq!(photo_similarity(Some(&e1), Some(&e2)).unwrap(), Some(0.5));
        assert_eq!(photo_similarity(Some(&[3.0, 0.0]), Some(&[0.0, 0.0])).unwrap(), Some(0.0));
        assert_eq!(photo_similarity(None, Some(&e2)).unwrap(), None);
        assert!(photo_similarity(Some(&e1), Some(&[1.0])).is_err());
    }

    #[test]
    fn freetext_examples() {
        let t = "Working at Acme Labs in Hamburg since 2019-01-01";
        assert!((freetext_similarity(Some(t), Some(t)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(freetext_similarity(Some("I like Paris"), Some("I like Berlin")), Some(0.0));
        assert_eq!(freetext_similarity(None, Some(t)), None);
        assert_eq!(freetext_similarity(Some("nothing here"), Some(t)), None);
        // counts (2,1,0) vs (1,1,1)
        let a = vec![("x".to_string(), 2), ("y".to_string(), 1)];
        let b = vec![("x".to_string(), 1), ("y".to_string(), 1), ("z".to_string(), 1)];
        let expected = 3.0 / (5f64.sqrt() * 3f64.sqrt());
        assert!((sparse_cosine(&a, &b).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.7746).abs() < 1e-4);
    }

    #[test]
    fn activity_examples() {
        let n = NormalizationSpec::default();
        assert_eq!(activity_similarity(&[5, 10], &[5, 10], &n).unwrap(), Some(1.0));
        assert_eq!(activity_similarity(&[0], &[200_000], &n).unwrap(), Some(0.0));
        assert_eq!(activity_similarity(&[], &[1], &n).unwrap(), None);
        let s = activity_similarity(&[0, 1000], &[10, 5000, 100_000], &n).unwrap().unwrap();
        assert!((s - (1.0 - 2005.0 / 86_400.0)).abs() < 1e-12);
        assert!(matches!(activity_similarity(&[2, 1], &[1], &n), Err(Error::Unsorted)));
    }

    #[test]
    fn interest_examples() {
        assert_eq!(interest_similarity(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 1.0);
        assert_eq!(interest_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let s = interest_similarity(&[0.5, 0.5, 0.0, 0.0], &[0.25; 4]).unwrap();
        assert!((s - 0.75).abs() < 1e-12);
        assert!(interest_similarity(&[1.0], &[0.5, 0.5]).is_err());
        assert!(interest_similarity(&[0.6, 0.6], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn sentiment_examples() {
        let lex = SentimentLexicon::new(["good", "great", "fun"], ["bad"]).unwrap();
        let day = 86_400 * 100;
        let p = |t: i64, s: &str| Post::new(t, s);
        let a = vec![p(day, "good"), p(day + 60, "great fun")];
        assert_eq!(sentiment_similarity(&a, &a, &lex), Some(1.0));
        assert_eq!(sentiment_similarity(&[p(day, "good")], &[p(day + 5, "bad")], &lex), Some(0.0));
        let s = sentiment_similarity(&[p(day, "good good great bad")], &[p(day, "nothing")], &lex);
        assert_eq!(s, Some(0.75));
        assert_eq!(sentiment_similarity(&[p(day, "good")], &[p(2 * day, "good")], &lex), None);
    }

    #[test]
    fn all_absent_is_all_missing() {
        let providers = Providers::builtin();
        let a = Profile::new("a", "aux");
        let b = Profile::new("b", "target");
        let v = compute_similarity_vector(&a, &b, &providers, None, &SimilarityConfig::default()).unwrap();
        assert_eq!(v.present_scores().count(), 0);
        assert_eq!(v.features().len(), 5 + 7);
    }

    #[test]
    fn same_network_rejected() {
        let providers = Providers::builtin();
        let a = Profile::new("a", "aux");
        assert!(compute_similarity_vector(&a, &a, &providers, None, &SimilarityConfig::default()).is_err());
    }

    #[test]
    fn feature_name_roundtrip() {
        let c = NameCombination::new(NameFieldKind::ScreenName, NameFieldKind::GivenName);
        assert_eq!(c.feature_name(), "name:screen_name~given_name");
        assert_eq!(NameCombination::parse(&c.feature_name()), Some(c));
    }
}
