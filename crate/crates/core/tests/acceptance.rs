//! Acceptance suite. Each criterion is checked against an independent oracle
//! and reported on its own line:
//!
//! * assignment: brute force over all permutations of 6×6 instances
//! * name similarity: full-table edit distance DP
//! * haversine: published Berlin–Paris distance
//! * least squares: planted coefficients, standard errors from `(XᵀX)⁻¹σ²`
//! * SVR: primal constraints and a nested ternary-search QP on a tiny instance
//! * synthetic pipelines: zero-noise recovery, moderate-noise ordering
//! * topic model: planted disjoint topics
//! * countermeasures: exhaustive search, τ sweep, KNN baseline
//! * determinism: byte comparison of two full runs
//!
//! Run with `cargo test -p osnlink --test acceptance`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use osnlink::countermeasures::{
    branch_and_bound, countermeasure_experiment, exhaustive_search, write_plans_json, write_tau_csv, Choice,
    ExperimentRun, ImportanceProfile, DEFAULT_GRID_SIZE,
};
use osnlink::evaluation::{classifier_report, knn_baseline};
use osnlink::lda::{fit_lda, LdaConfig};
use osnlink::matching::{assignment_total, hungarian_assign, PairFeatureMatrix};
use osnlink::pipeline::{
    attack_and_evaluate, coupled_subset, train, train_experiment, Experiment, SyntheticRun, SyntheticSetup,
};
use osnlink::profile::{write_corpus, write_labels};
use osnlink::reference::Coordinate;
use osnlink::similarity::{haversine_km, username_similarity};
use osnlink::synth::{topic_corpus, GeneratorConfig, VocabSpec};
use osnlink::training::{
    build_training_set, svr_primal_objective, svr_slacks, train_linear, train_svr, ImputationTable, SvmParams,
};
use osnlink::{Providers, TrainerKind, TrainingSet, WeightModel};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn linreg() -> (TrainerKind, SvmParams) {
    (TrainerKind::LinearRegression, SvmParams::default())
}

// ---------------------------------------------------------------------------
// shared moderate-noise fixture

struct SeedRun {
    run: SyntheticRun,
    features: PairFeatureMatrix,
    success: BTreeMap<&'static str, f64>,
    exp1_precision: Option<f64>,
}

fn moderate_run(seed: u64) -> Result<SeedRun, String> {
    let mut g = GeneratorConfig::moderate();
    g.seed = seed;
    let setup = SyntheticSetup::new(g);
    let p = Providers::builtin();
    let run = SyntheticRun::prepare(&setup, &p, &VocabSpec::builtin()).map_err(|e| e.to_string())?;
    let features = run.eval_features(&p).map_err(|e| e.to_string())?;
    let mut success = BTreeMap::new();
    let mut exp1_precision = None;
    let (kind, params) = linreg();
    for e in Experiment::ALL {
        let model = train_experiment(&run.pairs, &run.all_features(), e, kind, params).map_err(|e| e.to_string())?;
        let out = attack_and_evaluate(&features, &model, &run.eval.labels, None).map_err(|e| e.to_string())?;
        if e == Experiment::Exp1 {
            exp1_precision = out.report.precision;
        }
        success.insert(e.as_str(), out.report.success_rate);
    }
    Ok(SeedRun {
        run,
        features,
        success,
        exp1_precision,
    })
}

#[derive(Default)]
struct Shared {
    seed_one: Option<SeedRun>,
}

impl Shared {
    fn seed_one(&mut self) -> Result<&SeedRun, String> {
        if self.seed_one.is_none() {
            self.seed_one = Some(moderate_run(1)?);
        }
        Ok(self.seed_one.as_ref().unwrap())
    }
}

// ---------------------------------------------------------------------------
// oracles

fn brute_force_best(scores: &[Vec<f64>]) -> f64 {
    fn go(scores: &[Vec<f64>], row: usize, used: &mut [bool], picks: &mut Vec<usize>, best: &mut f64) {
        if row == scores.len() {
            let total: f64 = picks.iter().enumerate().map(|(r, &c)| scores[r][c]).sum();
            *best = best.max(total);
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                picks.push(c);
                go(scores, row + 1, used, picks, best);
                picks.pop();
                used[c] = false;
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    go(scores, 0, &mut vec![false; scores[0].len()], &mut Vec::new(), &mut best);
    best
}

fn edit_distance_table(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn ternary_min(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    f(0.5 * (lo + hi))
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0] + 1e-12)
}

// ---------------------------------------------------------------------------
// criteria

fn hungarian_vs_brute_force(_: &mut Shared) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    for k in 0..1000 {
        let m: Vec<Vec<f64>> = (0..6).map(|_| (0..6).map(|_| rng.random_range(-10.0..10.0)).collect()).collect();
        let a = hungarian_assign(&m);
        let cols: HashSet<usize> = a.iter().map(|c| c.expect("square input assigns every row")).collect();
        ensure!(cols.len() == 6, "instance {k}: assignment is not a permutation");
        let got = assignment_total(&m, &a);
        let best = brute_force_best(&m);
        ensure!(got == best, "instance {k}: total {got} vs optimum {best}");
    }
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(5), "took {t:?}");
    Ok(format!("1000 instances optimal in {t:.2?}"))
}

fn levenshtein_vs_table(_: &mut Shared) -> Outcome {
    let alphabet: Vec<char> = "abcdeé_1".chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let word = |rng: &mut ChaCha8Rng| -> String {
        let n = rng.random_range(0..=12);
        (0..n).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
    };
    for k in 0..10_000 {
        let a = word(&mut rng);
        let b = word(&mut rng);
        let n = a.chars().count().max(b.chars().count());
        let expected = if n == 0 { 1.0 } else { 1.0 - edit_distance_table(&a, &b) as f64 / n as f64 };
        let got = username_similarity(&a, &b);
        ensure!(got == expected, "pair {k} ({a:?}, {b:?}): {got} vs {expected}");
    }
    Ok("10000 pairs agree".into())
}

fn berlin_paris(_: &mut Shared) -> Outcome {
    let d = haversine_km(
        Coordinate { lat: 52.5200, lon: 13.4050 },
        Coordinate { lat: 48.8566, lon: 2.3522 },
    );
    let rel = (d - 877.5).abs() / 877.5;
    ensure!(rel <= 0.005, "{d:.1} km, off by {:.2}%", rel * 100.0);
    Ok(format!("{d:.1} km"))
}

fn ols_recovery(_: &mut Shared) -> Outcome {
    let truth = [0.8, -0.3, 0.5, 0.1, 1.2];
    let w0 = -0.4;
    let n = 3000;
    let sigma = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..truth.len()).map(|_| rng.random::<f64>()).collect()).collect();
    let clean: Vec<f64> = xs.iter().map(|x| w0 + x.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>()).collect();
    let names: Vec<String> = (0..truth.len()).map(|i| format!("x{i}")).collect();
    let set = |ys: &[f64]| TrainingSet {
        feature_names: names.clone(),
        rows: xs.iter().cloned().zip(ys.iter().copied()).collect(),
    };

    let exact = train_linear(&set(&clean), ImputationTable::default()).map_err(|e| e.to_string())?;
    let mut worst = (exact.w0 - w0).abs();
    for (w, t) in exact.weights.iter().zip(&truth) {
        worst = worst.max((w - t).abs());
    }
    ensure!(worst <= 1e-6, "noise-free error {worst:e}");

    let noise = Normal::new(0.0, sigma).unwrap();
    let noisy: Vec<f64> = clean.iter().map(|y| y + noise.sample(&mut rng)).collect();
    let fit = train_linear(&set(&noisy), ImputationTable::default()).map_err(|e| e.to_string())?;
    let design = DMatrix::from_fn(n, truth.len() + 1, |i, j| if j == 0 { 1.0 } else { xs[i][j - 1] });
    let cov = (design.transpose() * &design)
        .try_inverse()
        .ok_or("singular design")?
        * (sigma * sigma);
    let est = DVector::from_iterator(truth.len() + 1, std::iter::once(fit.w0).chain(fit.weights.iter().copied()));
    let want = DVector::from_iterator(truth.len() + 1, std::iter::once(w0).chain(truth.iter().copied()));
    let mut max_z: f64 = 0.0;
    for j in 0..=truth.len() {
        let z = (est[j] - want[j]).abs() / cov[(j, j)].sqrt();
        ensure!(z <= 3.0, "coefficient {j}: {:.4} vs {:.4} ({z:.2} SE)", est[j], want[j]);
        max_z = max_z.max(z);
    }
    Ok(format!("noise-free error {worst:.1e}, noisy max {max_z:.2} SE"))
}

fn svr_constraints_and_qp(_: &mut Shared) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = SvmParams { c: 1.0, epsilon: 0.1 };
    let names: Vec<String> = (0..4).map(|i| format!("x{i}")).collect();
    let rows: Vec<(Vec<f64>, f64)> = (0..300)
        .map(|_| {
            let x: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            let y = if x[0] + 0.5 * x[1] - 0.3 * x[2] + rng.random_range(-0.3..0.3) > 0.6 { 1.0 } else { 0.0 };
            (x, y)
        })
        .collect();
    let ts = TrainingSet { feature_names: names, rows };
    let model = train_svr(&ts, ImputationTable::default(), params).map_err(|e| e.to_string())?;
    for ((x, y), (xi, xi_star)) in ts.rows.iter().zip(svr_slacks(&model, &ts, params.epsilon)) {
        let f = model.score_row(x);
        ensure!(xi >= 0.0 && xi_star >= 0.0, "negative slack");
        ensure!(f - y <= params.epsilon + xi + 1e-6, "upper constraint violated");
        ensure!(y - f <= params.epsilon + xi_star + 1e-6, "lower constraint violated");
    }

    let tiny = TrainingSet {
        feature_names: vec!["x".into()],
        rows: vec![(vec![0.0], 0.1), (vec![0.5], 0.9), (vec![1.0], 0.7)],
    };
    let params = SvmParams { c: 2.0, epsilon: 0.05 };
    let fitted = train_svr(&tiny, ImputationTable::default(), params).map_err(|e| e.to_string())?;
    let got = svr_primal_objective(&fitted, &tiny, params);
    let primal = |w: f64, b: f64| {
        0.5 * w * w
            + params.c
                * tiny
                    .rows
                    .iter()
                    .map(|(x, y)| ((w * x[0] + b - y).abs() - params.epsilon).max(0.0))
                    .sum::<f64>()
    };
    let oracle = ternary_min(-10.0, 10.0, |w| ternary_min(-10.0, 10.0, |b| primal(w, b)));
    ensure!((got - oracle).abs() <= 1e-3, "objective {got:.6} vs oracle {oracle:.6}");
    Ok(format!("300 rows feasible, objective {got:.6} vs oracle {oracle:.6}"))
}

fn zero_noise_recovery(_: &mut Shared) -> Outcome {
    let start = Instant::now();
    let p = Providers::builtin();
    let setup = SyntheticSetup::new(GeneratorConfig::zero_noise());
    let run = SyntheticRun::prepare(&setup, &p, &VocabSpec::builtin()).map_err(|e| e.to_string())?;
    let (kind, params) = linreg();
    let model = train(&run.pairs, &run.all_features(), kind, params).map_err(|e| e.to_string())?;
    let features = run.eval_features(&p).map_err(|e| e.to_string())?;
    let r = attack_and_evaluate(&features, &model, &run.eval.labels, None)
        .map_err(|e| e.to_string())?
        .report;
    let t = start.elapsed();
    ensure!(r.coupled_pairs == 500, "{} coupled pairs", r.coupled_pairs);
    ensure!(r.success_rate == 1.0, "success {}", r.success_rate);
    ensure!(r.precision == Some(1.0) && r.recall == Some(1.0), "P {:?} R {:?}", r.precision, r.recall);
    ensure!(t < Duration::from_secs(120), "took {t:?}");
    Ok(format!("success 1, P = R = 1 in {t:.1?}"))
}

fn moderate_ordering(shared: &mut Shared) -> Outcome {
    let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.as_str()).collect();
    let mut table = Vec::new();
    for seed in 1..=5u64 {
        let success = if seed == 1 {
            shared.seed_one()?.success.clone()
        } else {
            moderate_run(seed)?.success
        };
        table.push(names.iter().map(|n| success[n]).collect::<Vec<f64>>());
    }
    let mut lines = Vec::new();
    for (k, row) in table.iter().enumerate() {
        let violations = row.windows(2).filter(|w| w[1] > w[0]).count();
        lines.push(format!("seed {}: {:?}", k + 1, row));
        ensure!(violations <= 1, "seed {}: {violations} ordering violations in {row:?}", k + 1);
    }
    let mean: Vec<f64> = (0..names.len()).map(|j| table.iter().map(|r| r[j]).sum::<f64>() / 5.0).collect();
    ensure!(non_increasing(&mean), "mean success not ordered: {mean:?}");
    Ok(format!(
        "mean {}",
        names.iter().zip(&mean).map(|(n, m)| format!("{n}={m:.3}")).collect::<Vec<_>>().join(" ")
    ))
}

fn topic_recovery(_: &mut Shared) -> Outcome {
    let vocab = VocabSpec::parse(
        "rivers: canoe paddle rapids kayak current bank delta estuary ferry fishing\n\
         engines: piston crankshaft gearbox turbine exhaust throttle valve camshaft clutch radiator\n",
    )
    .map_err(|e| e.to_string())?;
    let (docs, words, truth) = topic_corpus(&vocab, 200, 40, 8);
    let cfg = LdaConfig {
        seed: 8,
        ..LdaConfig::with_topics(2)
    };
    let model = fit_lda(&docs, &cfg).map_err(|e| e.to_string())?;

    let sums_to_one = |d: &[f64]| (d.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
    for (k, row) in model.topic_word.iter().enumerate() {
        ensure!(sums_to_one(row), "topic {k} word distribution sums to {}", row.iter().sum::<f64>());
    }
    for (k, doc) in docs.iter().enumerate() {
        let d = model.infer_topics(doc);
        ensure!(sums_to_one(&d), "document {k} topic distribution sums to {}", d.iter().sum::<f64>());
    }
    ensure!(sums_to_one(&model.infer_topics("")), "empty document distribution");

    let learned: Vec<Vec<f64>> = model
        .topic_word
        .iter()
        .map(|row| words.iter().map(|w| model.word_id(w).map_or(0.0, |i| row[i])).collect())
        .collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, l) in learned.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            pairs.push((cosine(l, t), i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut used_l, mut used_t) = (HashSet::new(), HashSet::new());
    let mut aligned = Vec::new();
    for (c, i, j) in pairs {
        if !used_l.contains(&i) && !used_t.contains(&j) {
            used_l.insert(i);
            used_t.insert(j);
            aligned.push(c);
        }
    }
    let min = aligned.iter().copied().fold(f64::INFINITY, f64::min);
    ensure!(aligned.len() == 2 && min >= 0.9, "aligned cosines {aligned:?}");
    Ok(format!("aligned cosines {aligned:.3?}"))
}

fn branch_and_bound_optimal(_: &mut Shared) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut slowest = Duration::ZERO;
    let mut feasible = 0;
    for k in 0..100 {
        let vars: Vec<Vec<Choice>> = (0..7)
            .map(|_| {
                let mut costs: Vec<f64> = (0..5).map(|_| -rng.random::<f64>() * 0.3).collect();
                let mut utils: Vec<f64> = (0..5).map(|_| rng.random::<f64>() / 7.0).collect();
                costs[0] = 0.0;
                utils[0] = 1.0 / 7.0;
                costs[1..].sort_by(|a, b| b.total_cmp(a));
                utils[1..].sort_by(|a, b| b.total_cmp(a));
                costs.into_iter().zip(utils).map(|(cost, utility)| Choice { cost, utility }).collect()
            })
            .collect();
        let base = rng.random_range(0.5..1.5);
        let tau = rng.random_range(-1.0..1.5);
        let start = Instant::now();
        let bb = branch_and_bound(base, &vars, tau);
        let t = start.elapsed();
        slowest = slowest.max(t);
        ensure!(t < Duration::from_secs(1), "instance {k} took {t:?}");
        let ex = exhaustive_search(base, &vars, tau);
        match (bb, ex) {
            (None, None) => {}
            (Some(b), Some(e)) => {
                ensure!(b.utility == e.utility, "instance {k}: utility {} vs {}", b.utility, e.utility);
                ensure!(b.score <= tau, "instance {k}: score above tau");
                feasible += 1;
            }
            (b, e) => return Err(format!("instance {k}: feasibility differs ({} vs {})", b.is_some(), e.is_some())),
        }
    }
    Ok(format!("100 instances ({feasible} feasible), slowest {slowest:.2?}"))
}

fn countermeasure_sweep(run: &SyntheticRun, taus: &[f64]) -> Result<ExperimentRun, String> {
    let p = Providers::builtin();
    let (kind, params) = linreg();
    let model = train_experiment(&run.pairs, &run.all_features(), Experiment::Exp3, kind, params)
        .map_err(|e| e.to_string())?;
    let (aux, target, labels) =
        coupled_subset(&run.eval.aux, &run.eval.target, &run.eval.labels).map_err(|e| e.to_string())?;
    countermeasure_experiment(
        &aux,
        &target,
        &labels,
        &model,
        &p,
        Some(&run.topic_model),
        &run.config,
        &ImportanceProfile::default(),
        taus,
        DEFAULT_GRID_SIZE,
    )
    .map_err(|e| e.to_string())
}

fn countermeasure_efficacy(shared: &mut Shared) -> Outcome {
    let taus = [f64::INFINITY, 0.9, 0.8, 0.7, 0.6, 0.5, 0.45, 0.4, 0.35, 0.3];
    let sweep = countermeasure_sweep(&shared.seed_one()?.run, &taus)?;
    let base = sweep.baseline_success_rate;
    let success: Vec<f64> = sweep.rows.iter().map(|r| r.success_rate).collect();
    let utility: Vec<f64> = sweep.rows.iter().map(|r| r.mean_utility.unwrap_or(0.0)).collect();
    ensure!(base > 0.0, "baseline success is zero");
    ensure!(non_increasing(&success), "success not non-increasing in tau: {success:?}");
    ensure!(non_increasing(&utility), "utility not non-increasing in tau: {utility:?}");
    let hit = sweep
        .rows
        .iter()
        .find(|r| r.success_rate < 0.5 * base && r.mean_utility.is_some_and(|u| u >= 0.7));
    let hit = hit.ok_or_else(|| format!("no tau halves success {base:.3} at utility >= 0.7: {:?}", sweep.rows))?;
    Ok(format!(
        "baseline {base:.3}, tau {} gives success {:.3} at utility {:.3}",
        hit.tau,
        hit.success_rate,
        hit.mean_utility.unwrap()
    ))
}

fn knn_below_hungarian(shared: &mut Shared) -> Outcome {
    let s = shared.seed_one()?;
    let hungarian = s.exp1_precision.ok_or("global attack accepted nothing at the operating point")?;
    let features = s.run.all_features();
    let (ts, table) = build_training_set(&s.run.pairs, Some(&features)).map_err(|e| e.to_string())?;
    let coupled: HashSet<(&str, &str)> = s
        .run
        .eval
        .labels
        .iter()
        .filter(|l| l.coupled)
        .map(|l| (l.aux_id.as_str(), l.target_id.as_str()))
        .collect();
    let fm = &s.features;
    let mut rows = Vec::with_capacity(fm.aux_ids.len() * fm.target_ids.len());
    let mut truth = Vec::with_capacity(rows.capacity());
    for (i, a) in fm.aux_ids.iter().enumerate() {
        for (j, t) in fm.target_ids.iter().enumerate() {
            let v = fm.vector(i, j);
            let row: Option<Vec<f64>> = features
                .iter()
                .map(|f| v.get(f).flatten().or_else(|| table.value(f)))
                .collect();
            rows.push(row.ok_or("feature without an imputed value")?);
            truth.push(coupled.contains(&(a.as_str(), t.as_str())));
        }
    }
    let predicted = knn_baseline(&ts, &rows, 5).map_err(|e| e.to_string())?;
    let knn = classifier_report(&predicted, &truth).map_err(|e| e.to_string())?;
    let knn_p = knn.precision.unwrap_or(0.0);
    ensure!(hungarian > knn_p, "Hungarian precision {hungarian:.3} vs KNN {knn_p:.3}");
    Ok(format!("Hungarian precision {hungarian:.3} vs KNN {knn_p:.3}"))
}

fn full_run(dir: &Path) -> Result<(), String> {
    let e = |e: osnlink::Error| e.to_string();
    let mut g = GeneratorConfig::moderate();
    g.seed = 12;
    g.n_coupled = 80;
    g.n_uncoupled_per_side = 20;
    let mut setup = SyntheticSetup::new(g);
    setup.eval_coupled = 40;
    setup.eval_uncoupled = 8;
    setup.lda.iterations = 40;
    let p = Providers::builtin();
    let run = SyntheticRun::prepare(&setup, &p, &VocabSpec::builtin()).map_err(e)?;
    write_corpus(&run.train.aux, dir.join("train_aux.jsonl")).map_err(e)?;
    write_corpus(&run.train.target, dir.join("train_target.jsonl")).map_err(e)?;
    write_labels(&run.train.labels, dir.join("train_labels.csv")).map_err(e)?;
    write_corpus(&run.eval.aux, dir.join("eval_aux.jsonl")).map_err(e)?;
    write_corpus(&run.eval.target, dir.join("eval_target.jsonl")).map_err(e)?;
    write_labels(&run.eval.labels, dir.join("eval_labels.csv")).map_err(e)?;
    run.topic_model.save(dir.join("lda.json")).map_err(e)?;

    let all = run.all_features();
    let linear: WeightModel = train(&run.pairs, &all, TrainerKind::LinearRegression, SvmParams::default()).map_err(e)?;
    let svr = train(&run.pairs, &all, TrainerKind::SvmRegression, SvmParams::default()).map_err(e)?;
    linear.save(dir.join("model.json")).map_err(e)?;
    svr.save(dir.join("svr.json")).map_err(e)?;

    let features = run.eval_features(&p).map_err(e)?;
    let out = attack_and_evaluate(&features, &linear, &run.eval.labels, None).map_err(e)?;
    out.matrix.write_csv(dir.join("matrix.csv")).map_err(e)?;
    out.result.write_csv(dir.join("matches.csv")).map_err(e)?;
    out.report.write_json(dir.join("eval.json")).map_err(e)?;
    out.curve.write_csv(dir.join("curve.csv")).map_err(e)?;

    let sweep = countermeasure_sweep(&run, &[f64::INFINITY, 0.6, 0.3])?;
    write_tau_csv(&sweep.rows, dir.join("tau.csv")).map_err(e)?;
    write_plans_json(&sweep.plans, dir.join("plans.json")).map_err(e)?;
    Ok(())
}

fn reproducible_outputs(_: &mut Shared) -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        fs::create_dir_all(d).map_err(|e| e.to_string())?;
        full_run(d)?;
    }
    let mut files: Vec<String> = fs::read_dir(&a)
        .map_err(|e| e.to_string())?
        .map(|f| f.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    ensure!(files.len() == 15, "expected 15 outputs, found {files:?}");
    for f in &files {
        let x = fs::read(a.join(f)).map_err(|e| e.to_string())?;
        let y = fs::read(b.join(f)).map_err(|e| e.to_string())?;
        ensure!(!x.is_empty(), "{f} is empty");
        ensure!(x == y, "{f} differs between runs");
    }
    Ok(format!("{} files identical", files.len()))
}

// ---------------------------------------------------------------------------

type Criterion = (u32, &'static str, fn(&mut Shared) -> Outcome);

const CRITERIA: [Criterion; 12] = [
    (1, "assignment matches brute force", hungarian_vs_brute_force),
    (2, "name similarity matches edit-distance DP", levenshtein_vs_table),
    (3, "haversine Berlin to Paris", berlin_paris),
    (4, "least squares recovers planted weights", ols_recovery),
    (5, "SVR feasibility and optimality", svr_constraints_and_qp),
    (6, "zero-noise pipeline recovers every pair", zero_noise_recovery),
    (7, "feature subsets ordered by success", moderate_ordering),
    (8, "topic model recovers planted topics", topic_recovery),
    (9, "branch and bound matches exhaustive search", branch_and_bound_optimal),
    (10, "countermeasures cut success at high utility", countermeasure_efficacy),
    (11, "global attack beats KNN precision", knn_below_hungarian),
    (12, "identical seeds give identical outputs", reproducible_outputs),
];

fn main() -> ExitCode {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut shared = Shared::default();
    let mut failed = 0;
    panic::set_hook(Box::new(|_| {}));
    for (n, name, check) in CRITERIA {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(|| check(&mut shared))).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail} ({secs:.1}s)"),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {why} ({secs:.1}s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
