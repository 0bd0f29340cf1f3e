//! Python bindings: similarity primitives, the assignment solver, trained
//! models and synthetic experiments.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use osnlink::lda::LdaModel;
use osnlink::matching::{build_score_matrix, global_attack, hungarian_assign};
use osnlink::pipeline::{attack_and_evaluate, train_experiment, Experiment, SyntheticRun, SyntheticSetup};
use osnlink::profile::{load_corpus, write_corpus, write_labels};
use osnlink::reference::Coordinate;
use osnlink::similarity::{haversine_km, username_similarity};
use osnlink::synth::{generate, GeneratorConfig, GeneratorInputs, VocabSpec, AUX_NETWORK, TARGET_NETWORK};
use osnlink::training::SvmParams;
use osnlink::{Providers, SimilarityConfig, SimilarityVector, TrainerKind, WeightModel};

fn err(e: osnlink::Error) -> PyErr {
    match e {
        osnlink::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn generator_config(preset: &str, seed: Option<u64>, settings: Option<HashMap<String, f64>>) -> PyResult<GeneratorConfig> {
    let mut cfg = match preset {
        "zero" => GeneratorConfig::zero_noise(),
        "moderate" => GeneratorConfig::moderate(),
        other => return Err(PyValueError::new_err(format!("unknown preset `{other}`"))),
    };
    if let Some(settings) = settings {
        let mut keys: Vec<_> = settings.into_iter().collect();
        keys.sort_by(|a, b| a.0.cmp(&b.0));
        let text: String = keys.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        cfg.apply_key_values(&text).map_err(err)?;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// `1 - lev(a, b) / max(|a|, |b|)`.
#[pyfunction]
fn name_similarity(a: &str, b: &str) -> f64 {
    username_similarity(a, b)
}

/// Great-circle distance in kilometres.
#[pyfunction]
#[pyo3(name = "haversine_km")]
fn py_haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    haversine_km(Coordinate { lat: lat1, lon: lon1 }, Coordinate { lat: lat2, lon: lon2 })
}

/// Maximum-total one-to-one assignment; `None` for unmatched rows.
#[pyfunction]
fn hungarian(scores: Vec<Vec<f64>>) -> PyResult<Vec<Option<usize>>> {
    if let Some(first) = scores.first() {
        if scores.iter().any(|r| r.len() != first.len()) {
            return Err(PyValueError::new_err("rows have different lengths"));
        }
    }
    if scores.iter().flatten().any(|x| x.is_nan()) {
        return Err(PyValueError::new_err("scores contain NaN"));
    }
    Ok(hungarian_assign(&scores))
}

/// Writes `aux.jsonl`, `target.jsonl` and `labels.csv` into `out_dir`.
/// Returns the number of profiles on each side and of labels.
#[pyfunction]
#[pyo3(signature = (out_dir, preset = "moderate", seed = None, settings = None))]
fn generate_corpora(
    out_dir: PathBuf,
    preset: &str,
    seed: Option<u64>,
    settings: Option<HashMap<String, f64>>,
) -> PyResult<(usize, usize, usize)> {
    let cfg = generator_config(preset, seed, settings)?;
    let p = Providers::builtin();
    let vocab = VocabSpec::builtin();
    let data = generate(
        &cfg,
        &GeneratorInputs {
            gazetteer: &p.gazetteer,
            names: &p.names,
            lexicon: &p.lexicon,
            vocab: &vocab,
        },
    )
    .map_err(err)?;
    std::fs::create_dir_all(&out_dir).map_err(|e| PyIOError::new_err(format!("{}: {e}", out_dir.display())))?;
    write_corpus(&data.aux, out_dir.join("aux.jsonl")).map_err(err)?;
    write_corpus(&data.target, out_dir.join("target.jsonl")).map_err(err)?;
    write_labels(&data.labels, out_dir.join("labels.csv")).map_err(err)?;
    Ok((data.aux.len(), data.target.len(), data.labels.len()))
}

/// Trained similarity model loaded from `model.json`.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: WeightModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: WeightModel::load(&path).map_err(err)?,
        })
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names.clone()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.clone()
    }

    #[getter]
    fn w0(&self) -> f64 {
        self.inner.w0
    }

    /// Score of one pair given its per-feature similarities; missing or
    /// `None` entries take the model's imputed value.
    fn score(&self, similarities: HashMap<String, Option<f64>>) -> PyResult<f64> {
        for k in similarities.keys() {
            if self.inner.weight(k).is_none() {
                return Err(PyValueError::new_err(format!("model has no feature `{k}`")));
            }
        }
        let mut v = SimilarityVector::default();
        for f in &self.inner.feature_names {
            let x = similarities.get(f).copied().flatten();
            match osnlink::similarity::Attribute::parse(f) {
                Some(a) => v.set_attribute(a, x),
                None => v.name_sims.push((f.clone(), x)),
            }
        }
        osnlink::score_pair(&self.inner, &v).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Model(kind={:?}, features={})", self.inner.kind, self.inner.feature_names.len())
    }
}

/// Global attack between two corpus files. Returns
/// `(aux_id, target_id, score, accepted)` tuples.
#[pyfunction]
#[pyo3(signature = (aux_path, target_path, model_path, lda_path = None, threshold = None))]
fn match_corpora(
    aux_path: PathBuf,
    target_path: PathBuf,
    model_path: PathBuf,
    lda_path: Option<PathBuf>,
    threshold: Option<f64>,
) -> PyResult<Vec<(String, String, f64, bool)>> {
    let aux = load_corpus(&aux_path, AUX_NETWORK).map_err(err)?;
    let target = load_corpus(&target_path, TARGET_NETWORK).map_err(err)?;
    let model = WeightModel::load(&model_path).map_err(err)?;
    let lda = lda_path.map(LdaModel::load).transpose().map_err(err)?;
    if lda.is_none() && model.weight("interest").is_some() {
        return Err(PyValueError::new_err("the model uses interest similarity; pass lda_path"));
    }
    let config = SimilarityConfig::from_features(&model.feature_names).map_err(err)?;
    let matrix = build_score_matrix(&aux, &target, &model, &Providers::builtin(), lda.as_ref(), &config).map_err(err)?;
    let result = global_attack(&matrix, threshold.unwrap_or(f64::NEG_INFINITY));
    Ok(result
        .assignments
        .iter()
        .map(|a| (a.aux_id.clone(), a.target_id.clone(), a.score, a.score >= result.threshold))
        .collect())
}

/// Synthetic end-to-end run; returns the evaluation report as a dict.
#[pyfunction]
#[pyo3(signature = (
    preset = "moderate",
    seed = None,
    experiment = "exp1",
    trainer = "linreg",
    eval_coupled = 500,
    eval_uncoupled = 100,
    lda_iterations = 500,
    settings = None,
))]
#[allow(clippy::too_many_arguments)]
fn run_experiment<'py>(
    py: Python<'py>,
    preset: &str,
    seed: Option<u64>,
    experiment: &str,
    trainer: &str,
    eval_coupled: usize,
    eval_uncoupled: usize,
    lda_iterations: usize,
    settings: Option<HashMap<String, f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let exp = Experiment::parse(experiment)
        .ok_or_else(|| PyValueError::new_err(format!("unknown experiment `{experiment}`")))?;
    let kind = match trainer {
        "linreg" => TrainerKind::LinearRegression,
        "svr" => TrainerKind::SvmRegression,
        other => return Err(PyValueError::new_err(format!("unknown trainer `{other}`"))),
    };
    let mut setup = SyntheticSetup::new(generator_config(preset, seed, settings)?);
    setup.eval_coupled = eval_coupled;
    setup.eval_uncoupled = eval_uncoupled;
    setup.lda.iterations = lda_iterations;
    let p = Providers::builtin();
    let run = SyntheticRun::prepare(&setup, &p, &VocabSpec::builtin()).map_err(err)?;
    let model = train_experiment(&run.pairs, &run.all_features(), exp, kind, SvmParams::default()).map_err(err)?;
    let features = run.eval_features(&p).map_err(err)?;
    let out = attack_and_evaluate(&features, &model, &run.eval.labels, None).map_err(err)?;
    let r = &out.report;
    let d = PyDict::new(py);
    d.set_item("experiment", exp.as_str())?;
    d.set_item("threshold", r.threshold)?;
    d.set_item("tp", r.tp)?;
    d.set_item("fp", r.fp)?;
    d.set_item("tn", r.tn)?;
    d.set_item("fn", r.fn_)?;
    d.set_item("precision", r.precision)?;
    d.set_item("recall", r.recall)?;
    d.set_item("success_rate", r.success_rate)?;
    d.set_item("coupled_pairs", r.coupled_pairs)?;
    d.set_item("feature_names", model.feature_names.clone())?;
    d.set_item("weights", model.weights.clone())?;
    Ok(d)
}

#[pymodule(name = "osnlink")]
fn osnlink_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(name_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(py_haversine_km, m)?)?;
    m.add_function(wrap_pyfunction!(hungarian, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpora, m)?)?;
    m.add_function(wrap_pyfunction!(match_corpora, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_class::<PyModel>()?;
    Ok(())
}
