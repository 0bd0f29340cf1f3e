use std::fs;
use std::path::Path;

use osnlink::countermeasures::{
    apply_plan, countermeasure_experiment, enumerate_levels, optimize_plan, write_plans_json, write_tau_csv,
    ImportanceProfile,
};
use osnlink::evaluation::{evaluate as evaluate_result, precision_recall_curve, threshold_grid, AttackKind};
use osnlink::lda::LdaConfig;
use osnlink::matching::{build_score_matrix, global_attack, targeted_attack, MatchResult};
use osnlink::pipeline::{
    attack_and_evaluate, coupled_subset, fit_topic_model, labeled_vectors, train as train_model,
    train_experiment, Experiment, SyntheticRun, SyntheticSetup, CURVE_STEPS,
};
use osnlink::profile::{load_corpus, load_labels, write_corpus, write_labels};
use osnlink::synth::{generate as generate_data, GeneratorConfig, GeneratorInputs, VocabSpec, AUX_NETWORK, TARGET_NETWORK};
use osnlink::training::SvmParams;
use osnlink::{Corpus, Gazetteer, LdaModel, NameGenderTable, Providers, SentimentLexicon, SimilarityConfig, TrainerKind, WeightModel};

use crate::manifest::{file_sha256, RunManifest};
use crate::{
    CliError, EvaluateArgs, ExperimentArgs, ExperimentName, FitLdaArgs, GenerateArgs, GeneratorArgs, MatchArgs,
    MitigateArgs, Preset, RefArgs, TrainArgs, Trainer,
};

const AUX_FILE: &str = "aux.jsonl";
const TARGET_FILE: &str = "target.jsonl";
const LABELS_FILE: &str = "labels.csv";
const GENERATOR_FILE: &str = "generator.conf";
const LDA_FILE: &str = "lda.json";
const MODEL_FILE: &str = "model.json";
const MATRIX_FILE: &str = "matrix.csv";
const MATCHES_FILE: &str = "matches.csv";
const EVAL_FILE: &str = "eval.json";
const CURVE_FILE: &str = "curve.csv";
const PLANS_FILE: &str = "plans.json";
const MITIGATED_FILE: &str = "target_mitigated.jsonl";
const TAU_FILE: &str = "tau.csv";

fn out_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn providers(refs: &RefArgs) -> Result<Providers, CliError> {
    let mut p = Providers::builtin();
    if let Some(path) = &refs.gazetteer {
        p.gazetteer = Gazetteer::load(path)?;
    }
    if let Some(path) = &refs.names {
        p.names = NameGenderTable::load(path)?;
    }
    if let Some(dir) = &refs.lexicon {
        p.lexicon = SentimentLexicon::load(dir.join("positive.txt"), dir.join("negative.txt"))?;
    }
    Ok(p)
}

fn record_refs(m: &mut RunManifest, refs: &RefArgs) -> Result<(), CliError> {
    m.input("gazetteer", refs.gazetteer.as_deref())?;
    m.input("names", refs.names.as_deref())?;
    if let Some(dir) = &refs.lexicon {
        m.input("lexicon_positive", Some(&dir.join("positive.txt")))?;
        m.input("lexicon_negative", Some(&dir.join("negative.txt")))?;
    }
    Ok(())
}

fn vocab(path: Option<&Path>) -> Result<VocabSpec, CliError> {
    Ok(match path {
        Some(p) => VocabSpec::load(p)?,
        None => VocabSpec::builtin(),
    })
}

fn generator_config(args: &GeneratorArgs) -> Result<GeneratorConfig, CliError> {
    let mut cfg = match args.preset {
        Preset::Zero => GeneratorConfig::zero_noise(),
        Preset::Moderate => GeneratorConfig::moderate(),
    };
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        cfg.apply_key_values(&text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    for kv in &args.overrides {
        if !kv.contains('=') {
            return Err(CliError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")));
        }
        cfg.apply_key_values(kv).map_err(|e| CliError::Usage(format!("--set {kv}: {e}")))?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn trainer_kind(t: Trainer) -> TrainerKind {
    match t {
        Trainer::Linreg => TrainerKind::LinearRegression,
        Trainer::Svr => TrainerKind::SvmRegression,
    }
}

fn experiment_preset(e: ExperimentName) -> Experiment {
    match e {
        ExperimentName::Exp1 => Experiment::Exp1,
        ExperimentName::Exp2 => Experiment::Exp2,
        ExperimentName::Exp3 => Experiment::Exp3,
        ExperimentName::Exp4 => Experiment::Exp4,
    }
}

fn svm_params(c: f64, epsilon: f64) -> Result<SvmParams, CliError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(CliError::Usage(format!("--c must be positive, got {c}")));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(CliError::Usage(format!("--epsilon must be non-negative, got {epsilon}")));
    }
    Ok(SvmParams { c, epsilon })
}

fn load_lda(path: Option<&Path>) -> Result<Option<LdaModel>, CliError> {
    path.map(LdaModel::load).transpose().map_err(CliError::from)
}

fn read_ids(path: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let ids: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    if ids.is_empty() {
        return Err(CliError::Data(format!("{}: no ids", path.display())));
    }
    Ok(ids)
}

fn load_pair(aux: &Path, target: &Path) -> Result<(Corpus, Corpus), CliError> {
    Ok((load_corpus(aux, AUX_NETWORK)?, load_corpus(target, TARGET_NETWORK)?))
}

/// Similarity layout a stored model was trained with.
fn model_config(model: &WeightModel, lda: Option<&LdaModel>) -> Result<SimilarityConfig, CliError> {
    if lda.is_none() && model.weight("interest").is_some() {
        return Err(CliError::Usage("the model uses interest similarity; pass --lda-model".into()));
    }
    Ok(SimilarityConfig::from_features(&model.feature_names)?)
}

pub fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    let cfg = generator_config(&args.generator)?;
    let p = providers(&args.refs)?;
    let vocab = vocab(args.vocab.as_deref())?;
    let data = generate_data(
        &cfg,
        &GeneratorInputs {
            gazetteer: &p.gazetteer,
            names: &p.names,
            lexicon: &p.lexicon,
            vocab: &vocab,
        },
    )?;
    out_dir(&args.out)?;
    let mut m = RunManifest::start("generate", args);
    m.seeds.push(cfg.seed);
    m.input("config", args.generator.config.as_deref())?;
    m.input("vocab", args.vocab.as_deref())?;
    record_refs(&mut m, &args.refs)?;
    write_corpus(&data.aux, args.out.join(AUX_FILE))?;
    write_corpus(&data.target, args.out.join(TARGET_FILE))?;
    write_labels(&data.labels, args.out.join(LABELS_FILE))?;
    let conf = args.out.join(GENERATOR_FILE);
    fs::write(&conf, cfg.to_key_values()).map_err(|e| CliError::Data(format!("{}: {e}", conf.display())))?;
    for f in [AUX_FILE, TARGET_FILE, LABELS_FILE, GENERATOR_FILE] {
        m.output(&args.out, f)?;
    }
    m.finish(&args.out)
}

pub fn fit_lda(args: &FitLdaArgs) -> Result<(), CliError> {
    if args.topics < 2 {
        return Err(CliError::Usage("--topics must be at least 2".into()));
    }
    let (aux, target) = load_pair(&args.aux, &args.target)?;
    let cfg = LdaConfig {
        iterations: args.iterations,
        seed: args.seed,
        ..LdaConfig::with_topics(args.topics)
    };
    let model = fit_topic_model(&[&aux, &target], &cfg)?;
    out_dir(&args.out)?;
    let mut m = RunManifest::start("fit-lda", args);
    m.seeds.push(args.seed);
    m.input("aux", Some(&args.aux))?;
    m.input("target", Some(&args.target))?;
    model.save(args.out.join(LDA_FILE))?;
    m.output(&args.out, LDA_FILE)?;
    m.model_sha256 = Some(file_sha256(&args.out.join(LDA_FILE))?);
    m.finish(&args.out)
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let svm = svm_params(args.c, args.epsilon)?;
    let (aux, target) = load_pair(&args.aux, &args.target)?;
    let labels = load_labels(&args.labels, &aux, &target)?;
    let lda = load_lda(args.lda_model.as_deref())?;
    let p = providers(&args.refs)?;
    let config = SimilarityConfig::for_profiles(&aux.profiles, &target.profiles);
    let mut features = config.feature_names();
    if lda.is_none() {
        features.retain(|f| f != "interest");
    }
    let pairs = labeled_vectors(&aux, &target, &labels, &p, lda.as_ref(), &config)?;
    let exp = experiment_preset(args.experiment);
    let kind = trainer_kind(args.trainer);
    let model = if exp == Experiment::Exp1 {
        train_model(&pairs, &features, kind, svm)?
    } else {
        train_experiment(&pairs, &features, exp, kind, svm)?
    };
    out_dir(&args.out)?;
    let mut m = RunManifest::start("train", args);
    m.input("aux", Some(&args.aux))?;
    m.input("target", Some(&args.target))?;
    m.input("labels", Some(&args.labels))?;
    m.input("lda_model", args.lda_model.as_deref())?;
    record_refs(&mut m, &args.refs)?;
    model.save(args.out.join(MODEL_FILE))?;
    m.output(&args.out, MODEL_FILE)?;
    m.model_sha256 = Some(file_sha256(&args.out.join(MODEL_FILE))?);
    m.finish(&args.out)
}

pub fn run_match(args: &MatchArgs) -> Result<(), CliError> {
    let (aux, target) = load_pair(&args.aux, &args.target)?;
    let model = WeightModel::load(&args.model)?;
    let lda = load_lda(args.lda_model.as_deref())?;
    let config = model_config(&model, lda.as_ref())?;
    let p = providers(&args.refs)?;
    let matrix = build_score_matrix(&aux, &target, &model, &p, lda.as_ref(), &config)?;
    let threshold = args.threshold.unwrap_or(f64::NEG_INFINITY);
    let result = match &args.victims {
        Some(path) => targeted_attack(&matrix, &read_ids(path)?, threshold)?,
        None => global_attack(&matrix, threshold),
    };
    out_dir(&args.out)?;
    let mut m = RunManifest::start("match", args);
    m.input("aux", Some(&args.aux))?;
    m.input("target", Some(&args.target))?;
    m.input("model", Some(&args.model))?;
    m.input("lda_model", args.lda_model.as_deref())?;
    m.input("victims", args.victims.as_deref())?;
    record_refs(&mut m, &args.refs)?;
    m.model_sha256 = Some(file_sha256(&args.model)?);
    matrix.write_csv(args.out.join(MATRIX_FILE))?;
    result.write_csv(args.out.join(MATCHES_FILE))?;
    m.output(&args.out, MATRIX_FILE)?;
    m.output(&args.out, MATCHES_FILE)?;
    m.finish(&args.out)
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let (aux, target) = load_pair(&args.aux, &args.target)?;
    let labels = load_labels(&args.labels, &aux, &target)?;
    let (kind, target_ids) = match &args.victims {
        Some(path) => (AttackKind::Targeted, read_ids(path)?),
        None => (AttackKind::Global, target.ids()),
    };
    let result = MatchResult::read_csv(&args.matches, f64::NEG_INFINITY, aux.ids(), target_ids)?;
    let grid = threshold_grid(&result, CURVE_STEPS);
    let curve = precision_recall_curve(&result, &labels, kind, &grid)?;
    let threshold = args
        .threshold
        .or(curve.operating_threshold)
        .or(grid.first().copied())
        .unwrap_or(f64::NEG_INFINITY);
    let report = evaluate_result(&result.with_threshold(threshold), &labels, kind)?;
    out_dir(&args.out)?;
    let mut m = RunManifest::start("evaluate", args);
    m.input("aux", Some(&args.aux))?;
    m.input("target", Some(&args.target))?;
    m.input("labels", Some(&args.labels))?;
    m.input("matches", Some(&args.matches))?;
    m.input("victims", args.victims.as_deref())?;
    report.write_json(args.out.join(EVAL_FILE))?;
    curve.write_csv(args.out.join(CURVE_FILE))?;
    m.output(&args.out, EVAL_FILE)?;
    m.output(&args.out, CURVE_FILE)?;
    m.finish(&args.out)
}

pub fn mitigate(args: &MitigateArgs) -> Result<(), CliError> {
    if args.tau.is_nan() {
        return Err(CliError::Usage("--tau must be a number".into()));
    }
    if args.grid_size == 0 {
        return Err(CliError::Usage("--grid-size must be positive".into()));
    }
    let (aux, mut target) = load_pair(&args.aux, &args.target)?;
    let labels = load_labels(&args.labels, &aux, &target)?;
    let model = WeightModel::load(&args.model)?;
    if model.kind != TrainerKind::LinearRegression {
        return Err(CliError::Data(format!(
            "{}: countermeasures need a linear-regression model",
            args.model.display()
        )));
    }
    let lda = load_lda(args.lda_model.as_deref())?;
    let config = model_config(&model, lda.as_ref())?;
    let p = providers(&args.refs)?;
    let importance = ImportanceProfile::default();
    let tindex: std::collections::HashMap<String, usize> = target
        .profiles
        .iter()
        .enumerate()
        .map(|(i, p)| (p.profile_id.clone(), i))
        .collect();
    let mut outcomes = Vec::new();
    let mut distorted = Vec::new();
    for l in labels.iter().filter(|l| l.coupled) {
        let a = aux.get(&l.aux_id).expect("validated label");
        let j = tindex[&l.target_id];
        let levels = enumerate_levels(a, &target.profiles[j], &model, &p, lda.as_ref(), &config, args.grid_size)?;
        let outcome = optimize_plan(&levels, &importance, &model, args.tau)?;
        distorted.push((j, apply_plan(outcome.plan(), &target.profiles[j])));
        outcomes.push(outcome);
    }
    for (j, profile) in distorted {
        target.profiles[j] = profile;
    }
    out_dir(&args.out)?;
    let mut m = RunManifest::start("mitigate", args);
    m.input("aux", Some(&args.aux))?;
    m.input("target", Some(&args.target))?;
    m.input("labels", Some(&args.labels))?;
    m.input("model", Some(&args.model))?;
    m.input("lda_model", args.lda_model.as_deref())?;
    record_refs(&mut m, &args.refs)?;
    m.model_sha256 = Some(file_sha256(&args.model)?);
    write_plans_json(&outcomes, args.out.join(PLANS_FILE))?;
    write_corpus(&target, args.out.join(MITIGATED_FILE))?;
    m.output(&args.out, PLANS_FILE)?;
    m.output(&args.out, MITIGATED_FILE)?;
    m.finish(&args.out)?;
    let infeasible = outcomes.iter().filter(|o| !o.is_feasible()).count();
    if infeasible > 0 {
        return Err(CliError::Infeasible(format!(
            "{infeasible} of {} pairs cannot reach tau = {}",
            outcomes.len(),
            args.tau
        )));
    }
    Ok(())
}

pub fn experiment(args: &ExperimentArgs) -> Result<(), CliError> {
    let svm = svm_params(args.c, args.epsilon)?;
    if args.lda_topics < 2 {
        return Err(CliError::Usage("--lda-topics must be at least 2".into()));
    }
    if !args.tau.is_empty() && args.trainer != Trainer::Linreg {
        return Err(CliError::Usage("--tau needs --trainer linreg".into()));
    }
    if args.grid_size == 0 {
        return Err(CliError::Usage("--grid-size must be positive".into()));
    }
    let cfg = generator_config(&args.generator)?;
    let p = providers(&args.refs)?;
    let vocab = vocab(args.vocab.as_deref())?;
    let mut setup = SyntheticSetup::new(cfg);
    setup.eval_coupled = args.eval_coupled;
    setup.eval_uncoupled = args.eval_uncoupled;
    setup.lda = LdaConfig {
        iterations: args.lda_iterations,
        seed: setup.generator.seed,
        ..LdaConfig::with_topics(args.lda_topics)
    };
    let run = SyntheticRun::prepare(&setup, &p, &vocab)?;
    let all = run.all_features();
    let exp = experiment_preset(args.experiment);
    let kind = trainer_kind(args.trainer);
    let model = train_experiment(&run.pairs, &all, exp, kind, svm)?;
    let features = run.eval_features(&p)?;
    let outcome = attack_and_evaluate(&features, &model, &run.eval.labels, args.threshold)?;

    out_dir(&args.out)?;
    let mut m = RunManifest::start("experiment", serde_json::json!({ "args": args, "setup": setup }));
    m.seeds = vec![setup.generator.seed, setup.eval_generator().seed];
    m.input("config", args.generator.config.as_deref())?;
    m.input("vocab", args.vocab.as_deref())?;
    record_refs(&mut m, &args.refs)?;
    model.save(args.out.join(MODEL_FILE))?;
    m.model_sha256 = Some(file_sha256(&args.out.join(MODEL_FILE))?);
    outcome.matrix.write_csv(args.out.join(MATRIX_FILE))?;
    outcome.result.write_csv(args.out.join(MATCHES_FILE))?;
    outcome.report.write_json(args.out.join(EVAL_FILE))?;
    outcome.curve.write_csv(args.out.join(CURVE_FILE))?;
    for f in [MODEL_FILE, MATRIX_FILE, MATCHES_FILE, EVAL_FILE, CURVE_FILE] {
        m.output(&args.out, f)?;
    }

    if !args.tau.is_empty() {
        let (aux, target, labels) = coupled_subset(&run.eval.aux, &run.eval.target, &run.eval.labels)?;
        let sweep = countermeasure_experiment(
            &aux,
            &target,
            &labels,
            &model,
            &p,
            Some(&run.topic_model),
            &run.config,
            &ImportanceProfile::default(),
            &args.tau,
            args.grid_size,
        )?;
        write_tau_csv(&sweep.rows, args.out.join(TAU_FILE))?;
        write_plans_json(&sweep.plans, args.out.join(PLANS_FILE))?;
        m.output(&args.out, TAU_FILE)?;
        m.output(&args.out, PLANS_FILE)?;
    }
    m.finish(&args.out)
}
