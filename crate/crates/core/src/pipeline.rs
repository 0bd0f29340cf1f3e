//! End-to-end runs: topic model, training pairs, feature subsets, attack and
//! evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{evaluate, precision_recall_curve, threshold_grid, AttackKind, EvalReport, PrCurve};
use crate::lda::{fit_lda, LdaConfig, LdaModel};
use crate::matching::{global_attack, MatchResult, PairFeatureMatrix, ScoreMatrix};
use crate::profile::{Corpus, PairLabel};
use crate::reference::Providers;
use crate::similarity::{is_name_feature, pair_similarity, Attribute, ProfileFeatures, SimilarityConfig, SimilarityVector};
use crate::synth::{generate, GeneratedData, GeneratorConfig, GeneratorInputs, VocabSpec};
use crate::training::{build_training_set, train_linear, train_svr, SvmParams, TrainerKind, WeightModel};

/// Upper bound on posts used to fit the topic model.
pub const LDA_MAX_POSTS: usize = 15_000;
pub const CURVE_STEPS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Exp1,
    Exp2,
    Exp3,
    Exp4,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [Experiment::Exp1, Experiment::Exp2, Experiment::Exp3, Experiment::Exp4];

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.as_str() == s)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Exp1 => "exp1",
            Experiment::Exp2 => "exp2",
            Experiment::Exp3 => "exp3",
            Experiment::Exp4 => "exp4",
        }
    }
}

/// Ranking weight of each attribute in an all-feature model. The user name
/// counts once, with its best name-combination weight.
pub fn attribute_weights(model: &WeightModel) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let name = model
        .feature_names
        .iter()
        .zip(&model.weights)
        .filter(|(f, _)| is_name_feature(f))
        .map(|(_, w)| *w)
        .fold(None, |m: Option<f64>, w| Some(m.map_or(w, |m| m.max(w))));
    if let Some(w) = name {
        out.push(("username".to_string(), w));
    }
    for a in Attribute::ALL {
        if let Some(w) = model.weight(a.as_str()) {
            out.push((a.as_str().to_string(), w));
        }
    }
    out
}

/// Features used by an experiment. `exp1_model` is required for exp2, whose
/// four attributes are the highest-weighted ones of exp1.
pub fn experiment_features(
    exp: Experiment,
    all_features: &[String],
    exp1_model: Option<&WeightModel>,
) -> Result<Vec<String>> {
    let names = || all_features.iter().filter(|f| is_name_feature(f)).cloned();
    let attrs = |list: &[Attribute]| {
        list.iter()
            .map(|a| a.as_str().to_string())
            .filter(|a| all_features.contains(a))
            .collect::<Vec<_>>()
    };
    Ok(match exp {
        Experiment::Exp1 => all_features.to_vec(),
        Experiment::Exp3 => attrs(&Attribute::ALL),
        Experiment::Exp4 => attrs(&[
            Attribute::Freetext,
            Attribute::Activity,
            Attribute::Interest,
            Attribute::Sentiment,
        ]),
        Experiment::Exp2 => {
            let model = exp1_model.ok_or_else(|| Error::Invalid("exp2 needs the exp1 model".into()))?;
            let mut ranked = attribute_weights(model);
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
            ranked.truncate(4);
            let mut out: Vec<String> = Vec::new();
            if ranked.iter().any(|(n, _)| n == "username") {
                out.extend(names());
            }
            let keep: Vec<Attribute> = Attribute::ALL
                .into_iter()
                .filter(|a| ranked.iter().any(|(n, _)| n == a.as_str()))
                .collect();
            out.extend(attrs(&keep));
            out
        }
    })
}

/// Post texts for topic-model fitting: all posts of the given corpora, or a
/// seeded sample of `max_posts` when there are more.
pub fn lda_documents(corpora: &[&Corpus], max_posts: usize, seed: u64) -> Vec<String> {
    let mut docs: Vec<String> = corpora
        .iter()
        .flat_map(|c| c.profiles.iter().flat_map(|p| p.posts.iter().map(|x| x.text.clone())))
        .collect();
    if docs.len() > max_posts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        docs.shuffle(&mut rng);
        docs.truncate(max_posts);
    }
    docs
}

pub fn fit_topic_model(corpora: &[&Corpus], config: &LdaConfig) -> Result<LdaModel> {
    fit_lda(&lda_documents(corpora, LDA_MAX_POSTS, config.seed), config)
}

/// Similarity vectors for labeled pairs.
pub fn labeled_vectors(
    aux: &Corpus,
    target: &Corpus,
    labels: &[PairLabel],
    providers: &Providers,
    topic_model: Option<&LdaModel>,
    config: &SimilarityConfig,
) -> Result<Vec<(SimilarityVector, bool)>> {
    crate::profile::validate_labels(labels, aux, target)?;
    let ai = aux.index();
    let ti = target.index();
    let fa: Vec<_> = aux.profiles.iter().map(|p| ProfileFeatures::extract(p, providers, topic_model)).collect();
    let ft: Vec<_> = target.profiles.iter().map(|p| ProfileFeatures::extract(p, providers, topic_model)).collect();
    labels
        .iter()
        .map(|l| {
            let v = pair_similarity(&fa[ai[l.aux_id.as_str()]], &ft[ti[l.target_id.as_str()]], config)?;
            Ok((v, l.coupled))
        })
        .collect()
}

pub fn train(
    pairs: &[(SimilarityVector, bool)],
    features: &[String],
    trainer: TrainerKind,
    svm: SvmParams,
) -> Result<WeightModel> {
    let (ts, table) = build_training_set(pairs, Some(features))?;
    match trainer {
        TrainerKind::LinearRegression => train_linear(&ts, table),
        TrainerKind::SvmRegression => train_svr(&ts, table, svm),
    }
}

/// Trained models for exp1 plus the requested experiment.
pub fn train_experiment(
    pairs: &[(SimilarityVector, bool)],
    all_features: &[String],
    exp: Experiment,
    trainer: TrainerKind,
    svm: SvmParams,
) -> Result<WeightModel> {
    let exp1 = train(pairs, all_features, trainer, svm)?;
    if exp == Experiment::Exp1 {
        return Ok(exp1);
    }
    let features = experiment_features(exp, all_features, Some(&exp1))?;
    if features.is_empty() {
        return Err(Error::Invalid(format!("{} selects no features", exp.as_str())));
    }
    train(pairs, &features, trainer, svm)
}

#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub matrix: ScoreMatrix,
    pub result: MatchResult,
    pub curve: PrCurve,
    pub report: EvalReport,
}

/// Global attack with a threshold-free assignment, evaluated at `threshold`
/// or, when `None`, at the curve's operating point.
pub fn attack_and_evaluate(
    features: &PairFeatureMatrix,
    model: &WeightModel,
    labels: &[PairLabel],
    threshold: Option<f64>,
) -> Result<AttackOutcome> {
    let matrix = features.score(model)?;
    let result = global_attack(&matrix, f64::NEG_INFINITY);
    let grid = threshold_grid(&result, CURVE_STEPS);
    let curve = precision_recall_curve(&result, labels, AttackKind::Global, &grid)?;
    let t = threshold.or(curve.operating_threshold).unwrap_or(grid[0]);
    let result = result.with_threshold(t);
    let report = evaluate(&result, labels, AttackKind::Global)?;
    Ok(AttackOutcome {
        matrix,
        result,
        curve,
        report,
    })
}

/// Only the profiles that appear in a coupled label, with those labels.
pub fn coupled_subset(aux: &Corpus, target: &Corpus, labels: &[PairLabel]) -> Result<(Corpus, Corpus, Vec<PairLabel>)> {
    let coupled: Vec<PairLabel> = labels.iter().filter(|l| l.coupled).cloned().collect();
    let keep_a: std::collections::HashSet<&str> = coupled.iter().map(|l| l.aux_id.as_str()).collect();
    let keep_t: std::collections::HashSet<&str> = coupled.iter().map(|l| l.target_id.as_str()).collect();
    let pick = |c: &Corpus, keep: &std::collections::HashSet<&str>| {
        Corpus::new(
            c.network_id.clone(),
            c.profiles
                .iter()
                .filter(|p| keep.contains(p.profile_id.as_str()))
                .cloned()
                .collect(),
        )
    };
    let a = pick(aux, &keep_a)?;
    let t = pick(target, &keep_t)?;
    crate::profile::validate_labels(&coupled, &a, &t)?;
    Ok((a, t, coupled))
}

/// Seed of the evaluation corpora drawn alongside a training run.
pub fn eval_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// A synthetic train/evaluation setup: the training corpora use `generator`
/// as given, the evaluation corpora reuse its noise settings with their own
/// sizes and [`eval_seed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSetup {
    pub generator: GeneratorConfig,
    pub eval_coupled: usize,
    pub eval_uncoupled: usize,
    pub lda: LdaConfig,
}

impl SyntheticSetup {
    pub fn new(generator: GeneratorConfig) -> Self {
        let lda = LdaConfig {
            seed: generator.seed,
            ..LdaConfig::default()
        };
        SyntheticSetup {
            generator,
            eval_coupled: 500,
            eval_uncoupled: 100,
            lda,
        }
    }

    pub fn eval_generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            n_coupled: self.eval_coupled,
            n_uncoupled_per_side: self.eval_uncoupled,
            seed: eval_seed(self.generator.seed),
            ..self.generator.clone()
        }
    }
}

/// Corpora, topic model and labeled training vectors of a synthetic run.
#[derive(Debug, Clone)]
pub struct SyntheticRun {
    pub train: GeneratedData,
    pub eval: GeneratedData,
    pub topic_model: LdaModel,
    pub config: SimilarityConfig,
    pub pairs: Vec<(SimilarityVector, bool)>,
}

impl SyntheticRun {
    pub fn prepare(setup: &SyntheticSetup, providers: &Providers, vocab: &VocabSpec) -> Result<Self> {
        let inputs = GeneratorInputs {
            gazetteer: &providers.gazetteer,
            names: &providers.names,
            lexicon: &providers.lexicon,
            vocab,
        };
        let train = generate(&setup.generator, &inputs)?;
        let eval = generate(&setup.eval_generator(), &inputs)?;
        let topic_model = fit_topic_model(&[&train.aux, &train.target], &setup.lda)?;
        let config = SimilarityConfig::for_profiles(&train.aux.profiles, &train.target.profiles);
        let pairs = labeled_vectors(
            &train.aux,
            &train.target,
            &train.labels,
            providers,
            Some(&topic_model),
            &config,
        )?;
        Ok(SyntheticRun {
            train,
            eval,
            topic_model,
            config,
            pairs,
        })
    }

    pub fn all_features(&self) -> Vec<String> {
        self.config.feature_names()
    }

    pub fn eval_features(&self, providers: &Providers) -> Result<PairFeatureMatrix> {
        PairFeatureMatrix::build(
            &self.eval.aux,
            &self.eval.target,
            providers,
            Some(&self.topic_model),
            &self.config,
        )
    }
}
