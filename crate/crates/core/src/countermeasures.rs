//! Attribute distortion plans that push a coupled pair's score under a
//! threshold while keeping as much profile utility as possible.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lda::LdaModel;
use crate::profile::{Corpus, PairLabel, Profile};
use crate::reference::{entity_counts, remove_entities, Gazetteer, Providers};
use crate::similarity::{
    activity_similarity, interest_similarity, pair_similarity, sentiment_similarity, Attribute,
    ProfileFeatures, SimilarityConfig, SimilarityVector,
};
use crate::training::{TrainerKind, WeightModel};

pub const DEFAULT_GRID_SIZE: usize = 5;

/// Per-attribute importance `c_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceProfile {
    pub c: [f64; 7],
}

impl Default for ImportanceProfile {
    /// Equal importance, summing to one.
    fn default() -> Self {
        ImportanceProfile { c: [1.0 / 7.0; 7] }
    }
}

impl ImportanceProfile {
    pub fn new(c: [f64; 7]) -> Result<Self> {
        if c.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::Invalid("importance weights must be finite and >= 0".into()));
        }
        if !c.iter().any(|x| *x > 0.0) {
            return Err(Error::Invalid("at least one importance weight must be positive".into()));
        }
        Ok(ImportanceProfile { c })
    }

    pub fn get(&self, a: Attribute) -> f64 {
        self.c[a.index()]
    }

    pub fn total(&self) -> f64 {
        self.c.iter().sum()
    }
}

/// A concrete modification of the target profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Edit {
    Keep,
    GeneralizeLocation { place: String },
    RemoveLocation,
    RemoveGender,
    SwapPhoto { alternate: usize },
    RemovePhoto,
    RemoveEntities { entities: Vec<String> },
    /// Indices into the target's time-sorted posts.
    RemovePosts { posts: Vec<usize> },
}

impl Edit {
    pub fn apply(&self, p: &mut Profile) {
        match self {
            Edit::Keep => {}
            Edit::GeneralizeLocation { place } => p.location_text = Some(place.clone()),
            Edit::RemoveLocation => p.location_text = None,
            Edit::RemoveGender => p.declared_gender = None,
            Edit::SwapPhoto { alternate } => {
                if let Some(e) = p.alternate_photo_embeddings.get(*alternate) {
                    p.photo_embedding = Some(e.clone());
                }
            }
            Edit::RemovePhoto => p.photo_embedding = None,
            Edit::RemoveEntities { entities } => {
                let drop: HashSet<String> = entities.iter().cloned().collect();
                if let Some(t) = &p.freetext {
                    p.freetext = Some(remove_entities(t, &drop));
                }
            }
            Edit::RemovePosts { posts } => {
                let drop: HashSet<usize> = posts.iter().copied().collect();
                p.posts = p
                    .posts
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !drop.contains(i))
                    .map(|(_, x)| x.clone())
                    .collect();
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Edit::Keep => "keep".into(),
            Edit::GeneralizeLocation { place } => format!("generalize location to {place}"),
            Edit::RemoveLocation => "remove location".into(),
            Edit::RemoveGender => "remove gender".into(),
            Edit::SwapPhoto { alternate } => format!("use alternate photo {alternate}"),
            Edit::RemovePhoto => "remove photo".into(),
            Edit::RemoveEntities { entities } => format!("remove {} freetext entities", entities.len()),
            Edit::RemovePosts { posts } => format!("remove {} posts", posts.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionLevel {
    pub level_id: usize,
    pub edit: Edit,
    /// New similarity per attribute of the variable; `None` is missing and
    /// scored with the model's imputation value.
    pub similarities: Vec<(Attribute, Option<f64>)>,
    /// `ψ = S / Ŝ` per attribute.
    pub utilities: Vec<(Attribute, f64)>,
}

/// Attributes that are distorted together. Activity, interest and sentiment
/// share one variable because they all derive from the same posts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub attributes: Vec<Attribute>,
    pub levels: Vec<DistortionLevel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairLevels {
    pub aux_id: String,
    pub target_id: String,
    pub baseline: SimilarityVector,
    pub variables: Vec<Variable>,
}

/// Model value of one feature, imputing when missing. Features the model
/// does not use contribute nothing.
fn weighted(model: &WeightModel, feature: &str, x: Option<f64>) -> f64 {
    match model.weight(feature) {
        Some(w) => w * x.or_else(|| model.imputation.value(feature)).unwrap_or(0.0),
        None => 0.0,
    }
}

fn contribution(model: &WeightModel, sims: &[(Attribute, Option<f64>)]) -> f64 {
    sims.iter().map(|(a, x)| weighted(model, a.as_str(), *x)).sum()
}

/// Score terms that no distortion touches: the bias and the name features.
fn fixed_part(model: &WeightModel, baseline: &SimilarityVector) -> f64 {
    let names: f64 = baseline
        .name_sims
        .iter()
        .map(|(f, x)| weighted(model, f, *x))
        .sum();
    model.w0 + names
}

fn ratio_utility(base: Option<f64>, new: Option<f64>, model: &WeightModel, a: Attribute) -> f64 {
    let Some(b) = base else { return 1.0 };
    if b <= 0.0 {
        return 1.0;
    }
    let s = new.or_else(|| model.imputation.value(a.as_str())).unwrap_or(0.0);
    (s / b).clamp(0.0, 1.0)
}

struct LevelBuilder<'a> {
    model: &'a WeightModel,
    baseline: &'a SimilarityVector,
    attributes: Vec<Attribute>,
    levels: Vec<(Edit, Vec<(Attribute, Option<f64>)>)>,
}

impl<'a> LevelBuilder<'a> {
    fn new(model: &'a WeightModel, baseline: &'a SimilarityVector, attributes: &[Attribute]) -> Self {
        let identity = attributes.iter().map(|a| (*a, baseline.attribute(*a))).collect();
        LevelBuilder {
            model,
            baseline,
            attributes: attributes.to_vec(),
            levels: vec![(Edit::Keep, identity)],
        }
    }

    fn push(&mut self, edit: Edit, v: &SimilarityVector) {
        let sims = self.attributes.iter().map(|a| (*a, v.attribute(*a))).collect();
        self.levels.push((edit, sims));
    }

    /// Keeps the identity plus every level that lowers the score below all
    /// previously kept levels, so kept levels have strictly decreasing
    /// contribution and non-increasing utility.
    fn finish(self, name: &str) -> Variable {
        let hideable = self.attributes.iter().any(|a| {
            matches!(self.baseline.attribute(*a), Some(b) if b > 0.0)
        });
        let scored: Vec<(f64, f64, Edit, Vec<(Attribute, Option<f64>)>)> = self
            .levels
            .into_iter()
            .enumerate()
            .filter(|(i, _)| *i == 0 || hideable)
            .map(|(_, (edit, sims))| {
                let u: f64 = sims
                    .iter()
                    .map(|(a, x)| ratio_utility(self.baseline.attribute(*a), *x, self.model, *a))
                    .sum();
                (contribution(self.model, &sims), u, edit, sims)
            })
            .collect();
        let mut order: Vec<usize> = (1..scored.len()).collect();
        // most utility first, then lowest score
        order.sort_by(|&i, &j| {
            scored[j].1
                .total_cmp(&scored[i].1)
                .then(scored[i].0.total_cmp(&scored[j].0))
                .then(i.cmp(&j))
        });
        let mut kept = vec![0];
        let mut floor = scored[0].0;
        for i in order {
            if scored[i].0 < floor {
                floor = scored[i].0;
                kept.push(i);
            }
        }
        let levels = kept
            .into_iter()
            .enumerate()
            .map(|(level_id, i)| {
                let (_, _, edit, sims) = &scored[i];
                DistortionLevel {
                    level_id,
                    edit: edit.clone(),
                    utilities: sims
                        .iter()
                        .map(|(a, x)| (*a, ratio_utility(self.baseline.attribute(*a), *x, self.model, *a)))
                        .collect(),
                    similarities: sims.clone(),
                }
            })
            .collect();
        Variable {
            name: name.to_string(),
            attributes: self.attributes,
            levels,
        }
    }
}

/// Entities shared by both bios, largest count product first.
fn shared_entities(aux: &Profile, target: &Profile) -> Vec<String> {
    let (Some(a), Some(t)) = (&aux.freetext, &target.freetext) else {
        return Vec::new();
    };
    let (ca, ct) = (entity_counts(a), entity_counts(t));
    let mut shared: Vec<(u32, String)> = ca
        .iter()
        .filter_map(|(e, n)| ct.get(e).map(|m| (n * m, e.clone())))
        .collect();
    shared.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
    shared.into_iter().map(|(_, e)| e).collect()
}

fn checkpoints(n: usize, grid: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..=grid).map(|i| (i * n).div_ceil(grid)).filter(|k| *k > 0).collect();
    out.dedup();
    out
}

const POST_ATTRIBUTES: [Attribute; 3] = [Attribute::Activity, Attribute::Interest, Attribute::Sentiment];

/// Greedy removal order over the target's posts: each step drops the post
/// whose removal gives the lowest weighted activity + interest + sentiment
/// score.
fn post_removal_order(
    aux: &Profile,
    aux_features: &ProfileFeatures,
    target: &Profile,
    model: &WeightModel,
    providers: &Providers,
    topic_model: Option<&LdaModel>,
    config: &SimilarityConfig,
) -> Result<Vec<usize>> {
    let post_dists: Option<Vec<Vec<f64>>> =
        topic_model.map(|m| target.posts.iter().map(|p| m.infer_topics(&p.text)).collect());
    let aux_ts = aux.timestamps();
    let any_weight = POST_ATTRIBUTES
        .iter()
        .any(|a| model.weight(a.as_str()).is_some_and(|w| w != 0.0));
    let mut remaining: Vec<usize> = (0..target.posts.len()).collect();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let mut best: Option<(f64, usize)> = None;
        for (slot, _) in remaining.iter().enumerate() {
            let keep: Vec<usize> = remaining
                .iter()
                .enumerate()
                .filter(|(s, _)| *s != slot)
                .map(|(_, i)| *i)
                .collect();
            let ts: Vec<i64> = keep.iter().map(|&i| target.posts[i].timestamp).collect();
            let act = activity_similarity(&aux_ts, &ts, &config.norm)?;
            let posts: Vec<_> = keep.iter().map(|&i| target.posts[i].clone()).collect();
            let sent = sentiment_similarity(&aux.posts, &posts, &providers.lexicon);
            let interest = match (aux_features.topic_distribution(), &post_dists, topic_model) {
                (Some(a), Some(d), Some(m)) if !keep.is_empty() => {
                    let t = m.mean_distribution(keep.iter().map(|&i| d[i].as_slice()));
                    Some(interest_similarity(a, &t)?)
                }
                _ => None,
            };
            let sims = [act, interest, sent];
            let value: f64 = if any_weight {
                POST_ATTRIBUTES
                    .iter()
                    .zip(sims)
                    .map(|(a, x)| weighted(model, a.as_str(), x))
                    .sum()
            } else {
                sims.iter().map(|x| x.unwrap_or(0.0)).sum()
            };
            if best.is_none_or(|(b, _)| value < b) {
                best = Some((value, slot));
            }
        }
        let (_, slot) = best.expect("nonempty");
        order.push(remaining.remove(slot));
    }
    Ok(order)
}

/// Candidate distortion levels for each variable of a coupled pair.
pub fn enumerate_levels(
    aux: &Profile,
    target: &Profile,
    model: &WeightModel,
    providers: &Providers,
    topic_model: Option<&LdaModel>,
    config: &SimilarityConfig,
    grid_size: usize,
) -> Result<PairLevels> {
    if grid_size == 0 {
        return Err(Error::Invalid("grid size must be positive".into()));
    }
    let fa = ProfileFeatures::extract(aux, providers, topic_model);
    let ft = ProfileFeatures::extract(target, providers, topic_model);
    let baseline = pair_similarity(&fa, &ft, config)?;
    let topics = ft.topic_distribution().map(<[f64]>::to_vec);

    // rescores the pair after an edit that leaves the posts alone
    let rescore = |edit: &Edit| -> Result<SimilarityVector> {
        let mut p = target.clone();
        edit.apply(&mut p);
        let mut f = ProfileFeatures::extract(&p, providers, None);
        f.set_topic_distribution(topics.clone());
        pair_similarity(&fa, &f, config)
    };

    let mut variables = Vec::with_capacity(5);

    let mut b = LevelBuilder::new(model, &baseline, &[Attribute::Location]);
    if target.location_text.is_some() {
        if let Some(country) = target.location_text.as_deref().and_then(Gazetteer::country_of) {
            if providers.gazetteer.geocode(&country).is_some() {
                let e = Edit::GeneralizeLocation { place: country };
                b.push(e.clone(), &rescore(&e)?);
            }
        }
        b.push(Edit::RemoveLocation, &rescore(&Edit::RemoveLocation)?);
    }
    variables.push(b.finish("location"));

    let mut b = LevelBuilder::new(model, &baseline, &[Attribute::Gender]);
    if target.declared_gender.is_some() {
        b.push(Edit::RemoveGender, &rescore(&Edit::RemoveGender)?);
    }
    variables.push(b.finish("gender"));

    let mut b = LevelBuilder::new(model, &baseline, &[Attribute::Photo]);
    if target.photo_embedding.is_some() {
        for k in 0..target.alternate_photo_embeddings.len() {
            let e = Edit::SwapPhoto { alternate: k };
            b.push(e.clone(), &rescore(&e)?);
        }
        b.push(Edit::RemovePhoto, &rescore(&Edit::RemovePhoto)?);
    }
    variables.push(b.finish("photo"));

    let mut b = LevelBuilder::new(model, &baseline, &[Attribute::Freetext]);
    let shared = shared_entities(aux, target);
    for k in checkpoints(shared.len(), grid_size) {
        let e = Edit::RemoveEntities {
            entities: shared[..k].to_vec(),
        };
        b.push(e.clone(), &rescore(&e)?);
    }
    variables.push(b.finish("freetext"));

    let mut b = LevelBuilder::new(model, &baseline, &POST_ATTRIBUTES);
    if !target.posts.is_empty() {
        let order = post_removal_order(aux, &fa, target, model, providers, topic_model, config)?;
        for k in checkpoints(order.len(), grid_size) {
            let mut removed = order[..k].to_vec();
            removed.sort_unstable();
            let e = Edit::RemovePosts { posts: removed };
            let mut p = target.clone();
            e.apply(&mut p);
            let f = ProfileFeatures::extract(&p, providers, topic_model);
            b.push(e, &pair_similarity(&fa, &f, config)?);
        }
    }
    variables.push(b.finish("posts"));

    Ok(PairLevels {
        aux_id: aux.profile_id.clone(),
        target_id: target.profile_id.clone(),
        baseline,
        variables,
    })
}

/// One selectable option of a multiple-choice knapsack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    /// Score added when chosen.
    pub cost: f64,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub picks: Vec<usize>,
    pub utility: f64,
    pub score: f64,
}

fn evaluate_picks(base: f64, vars: &[Vec<Choice>], picks: &[usize]) -> (f64, f64) {
    let mut score = base;
    let mut utility = 0.0;
    for (v, &k) in vars.iter().zip(picks) {
        score += v[k].cost;
        utility += v[k].utility;
    }
    (score, utility)
}

/// Lowest reachable score and the picks that reach it.
pub fn minimum_score(base: f64, vars: &[Vec<Choice>]) -> (Vec<usize>, f64) {
    let picks: Vec<usize> = vars
        .iter()
        .map(|v| {
            (0..v.len())
                .min_by(|&a, &b| v[a].cost.total_cmp(&v[b].cost).then(v[b].utility.total_cmp(&v[a].utility)))
                .unwrap_or(0)
        })
        .collect();
    let (score, _) = evaluate_picks(base, vars, &picks);
    (picks, score)
}

/// Exact maximum-utility selection (one choice per variable) with
/// `base + Σ cost ≤ tau`, by depth-first branch and bound. Returns `None`
/// when no selection is feasible.
pub fn branch_and_bound(base: f64, vars: &[Vec<Choice>], tau: f64) -> Option<Selection> {
    const SLACK: f64 = 1e-9;
    if vars.iter().any(Vec::is_empty) {
        return None;
    }
    let span = |v: &Vec<Choice>| {
        let hi = v.iter().map(|c| c.cost).fold(f64::NEG_INFINITY, f64::max);
        let lo = v.iter().map(|c| c.cost).fold(f64::INFINITY, f64::min);
        hi - lo
    };
    let mut order: Vec<usize> = (0..vars.len()).collect();
    order.sort_by(|&a, &b| span(&vars[b]).total_cmp(&span(&vars[a])).then(a.cmp(&b)));
    // suffix sums over the branch order
    let n = order.len();
    let mut best_u = vec![0.0; n + 1];
    let mut min_c = vec![0.0; n + 1];
    for d in (0..n).rev() {
        let v = &vars[order[d]];
        best_u[d] = best_u[d + 1] + v.iter().map(|c| c.utility).fold(f64::NEG_INFINITY, f64::max);
        min_c[d] = min_c[d + 1] + v.iter().map(|c| c.cost).fold(f64::INFINITY, f64::min);
    }
    // within a variable try high utility first
    let choice_order: Vec<Vec<usize>> = order
        .iter()
        .map(|&i| {
            let v = &vars[i];
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[b].utility.total_cmp(&v[a].utility).then(v[a].cost.total_cmp(&v[b].cost)).then(a.cmp(&b)));
            idx
        })
        .collect();

    struct Search<'a> {
        base: f64,
        vars: &'a [Vec<Choice>],
        tau: f64,
        order: Vec<usize>,
        choice_order: Vec<Vec<usize>>,
        best_u: Vec<f64>,
        min_c: Vec<f64>,
        picks: Vec<usize>,
        best: Option<Selection>,
    }

    impl Search<'_> {
        fn incumbent(&self) -> f64 {
            self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.utility)
        }

        fn go(&mut self, depth: usize, cost: f64, utility: f64) {
            if depth == self.order.len() {
                let (score, u) = evaluate_picks(self.base, self.vars, &self.picks);
                if score <= self.tau && u > self.incumbent() {
                    self.best = Some(Selection {
                        picks: self.picks.clone(),
                        utility: u,
                        score,
                    });
                }
                return;
            }
            let var = self.order[depth];
            for k in 0..self.choice_order[depth].len() {
                let c = self.vars[var][self.choice_order[depth][k]];
                let cost2 = cost + c.cost;
                let u2 = utility + c.utility;
                if self.base + cost2 + self.min_c[depth + 1] > self.tau + SLACK {
                    continue;
                }
                if u2 + self.best_u[depth + 1] < self.incumbent() - SLACK {
                    continue;
                }
                self.picks[var] = self.choice_order[depth][k];
                self.go(depth + 1, cost2, u2);
            }
        }
    }

    let mut s = Search {
        base,
        vars,
        tau,
        order,
        choice_order,
        best_u,
        min_c,
        picks: vec![0; vars.len()],
        best: None,
    };
    s.go(0, 0.0, 0.0);
    s.best
}

/// Reference solver that tries every combination.
pub fn exhaustive_search(base: f64, vars: &[Vec<Choice>], tau: f64) -> Option<Selection> {
    if vars.iter().any(Vec::is_empty) {
        return None;
    }
    let mut picks = vec![0; vars.len()];
    let mut best: Option<Selection> = None;
    loop {
        let (score, utility) = evaluate_picks(base, vars, &picks);
        if score <= tau && best.as_ref().is_none_or(|b| utility > b.utility) {
            best = Some(Selection {
                picks: picks.clone(),
                utility,
                score,
            });
        }
        let mut d = 0;
        loop {
            if d == vars.len() {
                return best;
            }
            picks[d] += 1;
            if picks[d] < vars[d].len() {
                break;
            }
            picks[d] = 0;
            d += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChosenLevel {
    pub variable: String,
    pub level_id: usize,
    pub description: String,
    pub edit: Edit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionPlan {
    pub aux_id: String,
    pub target_id: String,
    pub chosen: Vec<ChosenLevel>,
    pub achieved_similarity: f64,
    pub total_utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PlanOutcome {
    Feasible { plan: DistortionPlan },
    /// Even the strongest distortion stays above `tau`; `plan` is that
    /// strongest distortion.
    Infeasible { min_similarity: f64, plan: DistortionPlan },
}

impl PlanOutcome {
    pub fn plan(&self) -> &DistortionPlan {
        match self {
            PlanOutcome::Feasible { plan } | PlanOutcome::Infeasible { plan, .. } => plan,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, PlanOutcome::Feasible { .. })
    }
}

fn knapsack(levels: &PairLevels, importance: &ImportanceProfile, model: &WeightModel) -> (f64, Vec<Vec<Choice>>) {
    let vars = levels
        .variables
        .iter()
        .map(|v| {
            v.levels
                .iter()
                .map(|l| Choice {
                    cost: contribution(model, &l.similarities),
                    utility: l.utilities.iter().map(|(a, u)| importance.get(*a) * u).sum(),
                })
                .collect()
        })
        .collect();
    (fixed_part(model, &levels.baseline), vars)
}

fn plan_from(levels: &PairLevels, vars: &[Vec<Choice>], base: f64, picks: &[usize]) -> DistortionPlan {
    let (score, utility) = evaluate_picks(base, vars, picks);
    DistortionPlan {
        aux_id: levels.aux_id.clone(),
        target_id: levels.target_id.clone(),
        chosen: levels
            .variables
            .iter()
            .zip(picks)
            .map(|(v, &k)| ChosenLevel {
                variable: v.name.clone(),
                level_id: v.levels[k].level_id,
                description: v.levels[k].edit.describe(),
                edit: v.levels[k].edit.clone(),
            })
            .collect(),
        achieved_similarity: score,
        total_utility: utility,
    }
}

/// Maximum-utility plan with `w0 + Σ w·S ≤ tau`.
pub fn optimize_plan(
    levels: &PairLevels,
    importance: &ImportanceProfile,
    model: &WeightModel,
    tau: f64,
) -> Result<PlanOutcome> {
    if model.kind != TrainerKind::LinearRegression {
        return Err(Error::Invalid("countermeasures need a linear-regression model".into()));
    }
    if levels.variables.iter().any(|v| v.levels.is_empty()) {
        return Err(Error::Invalid("every variable needs at least one level".into()));
    }
    let (base, vars) = knapsack(levels, importance, model);
    match branch_and_bound(base, &vars, tau) {
        Some(sel) => Ok(PlanOutcome::Feasible {
            plan: plan_from(levels, &vars, base, &sel.picks),
        }),
        None => {
            let (picks, min_similarity) = minimum_score(base, &vars);
            Ok(PlanOutcome::Infeasible {
                min_similarity,
                plan: plan_from(levels, &vars, base, &picks),
            })
        }
    }
}

/// A modified copy of `target` with every chosen edit applied.
pub fn apply_plan(plan: &DistortionPlan, target: &Profile) -> Profile {
    let mut p = target.clone();
    for c in &plan.chosen {
        c.edit.apply(&mut p);
    }
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauRow {
    pub tau: f64,
    pub mean_utility: Option<f64>,
    pub success_rate: f64,
    pub infeasible_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRun {
    pub baseline_success_rate: f64,
    pub rows: Vec<TauRow>,
    /// Outcomes for the last τ of the grid.
    pub plans: Vec<PlanOutcome>,
}

pub fn write_tau_csv(rows: &[TauRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("tau,mean_utility,success_rate,infeasible_count\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.12},{}\n",
            r.tau,
            r.mean_utility.map(|u| format!("{u:.12}")).unwrap_or_default(),
            r.success_rate,
            r.infeasible_count
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_plans_json(plans: &[PlanOutcome], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, serde_json::to_string_pretty(plans)? + "\n").map_err(|e| Error::io(path, e))
}

/// Plans every coupled pair at each τ, applies the plans to the target
/// corpus, and reruns the global attack.
#[allow(clippy::too_many_arguments)]
pub fn countermeasure_experiment(
    aux: &Corpus,
    target: &Corpus,
    labels: &[PairLabel],
    model: &WeightModel,
    providers: &Providers,
    topic_model: Option<&LdaModel>,
    config: &SimilarityConfig,
    importance: &ImportanceProfile,
    tau_grid: &[f64],
    grid_size: usize,
) -> Result<ExperimentRun> {
    use crate::evaluation::{evaluate, AttackKind};
    use crate::matching::{global_attack, PairFeatureMatrix};

    let aux_features: Vec<ProfileFeatures> = aux
        .profiles
        .iter()
        .map(|p| ProfileFeatures::extract(p, providers, topic_model))
        .collect();
    let mut target_features: Vec<ProfileFeatures> = target
        .profiles
        .iter()
        .map(|p| ProfileFeatures::extract(p, providers, topic_model))
        .collect();
    let tindex = target.index();
    let coupled: Vec<&PairLabel> = labels.iter().filter(|l| l.coupled).collect();
    let mut pair_levels = Vec::with_capacity(coupled.len());
    for l in &coupled {
        let a = aux.get(&l.aux_id).ok_or_else(|| Error::UnknownProfile(l.aux_id.clone()))?;
        let t = target
            .get(&l.target_id)
            .ok_or_else(|| Error::UnknownProfile(l.target_id.clone()))?;
        pair_levels.push(enumerate_levels(a, t, model, providers, topic_model, config, grid_size)?);
    }

    let success = |tf: &[ProfileFeatures]| -> Result<f64> {
        let m = PairFeatureMatrix::from_features(aux.ids(), &aux_features, target.ids(), tf, config)?
            .score(model)?;
        Ok(evaluate(&global_attack(&m, f64::NEG_INFINITY), labels, AttackKind::Global)?.success_rate)
    };
    let baseline_success_rate = success(&target_features)?;

    let mut rows = Vec::with_capacity(tau_grid.len());
    let mut plans = Vec::new();
    for &tau in tau_grid {
        plans.clear();
        let mut utility_sum = 0.0;
        let mut feasible = 0usize;
        for levels in &pair_levels {
            let outcome = optimize_plan(levels, importance, model, tau)?;
            let j = tindex[levels.target_id.as_str()];
            let distorted = apply_plan(outcome.plan(), &target.profiles[j]);
            target_features[j] = ProfileFeatures::extract(&distorted, providers, topic_model);
            if outcome.is_feasible() {
                utility_sum += outcome.plan().total_utility;
                feasible += 1;
            }
            plans.push(outcome);
        }
        rows.push(TauRow {
            tau,
            mean_utility: (feasible > 0).then(|| utility_sum / feasible as f64),
            success_rate: success(&target_features)?,
            infeasible_count: pair_levels.len() - feasible,
        });
    }
    Ok(ExperimentRun {
        baseline_success_rate,
        rows,
        plans,
    })
}
