//! Latent Dirichlet allocation fitted by collapsed Gibbs sampling, with
//! fold-in inference for unseen documents.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::Post;
use crate::reference::is_stopword;

pub const INFERENCE_SWEEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub theta: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig::with_topics(20)
    }
}

impl LdaConfig {
    /// `alpha = 50 / theta`, `beta = 0.01`, 500 sweeps.
    pub fn with_topics(theta: usize) -> Self {
        LdaConfig {
            theta,
            alpha: 50.0 / theta.max(1) as f64,
            beta: 0.01,
            iterations: 500,
            seed: 0,
        }
    }
}

/// Lowercase alphanumeric tokens of length ≥ 2, stopwords removed.
pub fn tokenize(text: &str) -> Vec<String> {
    crate::reference::alnum_tokens(text)
        .filter(|t| t.chars().count() >= 2 && !is_stopword(t))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub theta: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub iterations: usize,
    /// Index → word; the inverse map is rebuilt on load.
    pub vocabulary: Vec<String>,
    /// `theta × V` smoothed topic-word probabilities.
    pub topic_word: Vec<Vec<f64>>,
    #[serde(skip)]
    word_index: HashMap<String, usize>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn sample(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut r = rng.random::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        r -= w;
        if r < 0.0 {
            return k;
        }
    }
    weights.len() - 1
}

pub fn fit_lda<S: AsRef<str>>(documents: &[S], config: &LdaConfig) -> Result<LdaModel> {
    if config.theta < 2 {
        return Err(Error::Invalid(format!("theta must be at least 2, got {}", config.theta)));
    }
    if !(config.alpha > 0.0 && config.beta > 0.0) {
        return Err(Error::Invalid("alpha and beta must be positive".into()));
    }
    let mut vocabulary = Vec::new();
    let mut word_index = HashMap::new();
    let docs: Vec<Vec<usize>> = documents
        .iter()
        .map(|d| {
            tokenize(d.as_ref())
                .into_iter()
                .map(|w| {
                    let next = vocabulary.len();
                    *word_index.entry(w.clone()).or_insert_with(|| {
                        vocabulary.push(w);
                        next
                    })
                })
                .collect::<Vec<usize>>()
        })
        .filter(|d: &Vec<usize>| !d.is_empty())
        .collect();
    if docs.is_empty() {
        return Err(Error::Invalid("no tokens left in the LDA corpus".into()));
    }

    let k = config.theta;
    let v = vocabulary.len();
    let vbeta = v as f64 * config.beta;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut doc_topic = vec![vec![0u32; k]; docs.len()];
    let mut topic_word = vec![vec![0u32; v]; k];
    let mut topic_total = vec![0u32; k];
    let mut z: Vec<Vec<usize>> = docs
        .iter()
        .enumerate()
        .map(|(d, words)| {
            words
                .iter()
                .map(|&w| {
                    let t = rng.random_range(0..k);
                    doc_topic[d][t] += 1;
                    topic_word[t][w] += 1;
                    topic_total[t] += 1;
                    t
                })
                .collect()
        })
        .collect();

    let mut weights = vec![0.0; k];
    for _ in 0..config.iterations {
        for (d, words) in docs.iter().enumerate() {
            for (i, &w) in words.iter().enumerate() {
                let old = z[d][i];
                doc_topic[d][old] -= 1;
                topic_word[old][w] -= 1;
                topic_total[old] -= 1;
                for t in 0..k {
                    weights[t] = (doc_topic[d][t] as f64 + config.alpha)
                        * (topic_word[t][w] as f64 + config.beta)
                        / (topic_total[t] as f64 + vbeta);
                }
                let new = sample(&mut rng, &weights);
                z[d][i] = new;
                doc_topic[d][new] += 1;
                topic_word[new][w] += 1;
                topic_total[new] += 1;
            }
        }
    }

    let topic_word = topic_word
        .iter()
        .zip(&topic_total)
        .map(|(row, &total)| {
            let denom = total as f64 + vbeta;
            let mut probs: Vec<f64> = row.iter().map(|&c| (c as f64 + config.beta) / denom).collect();
            let s: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= s);
            probs
        })
        .collect();

    Ok(LdaModel {
        theta: k,
        alpha: config.alpha,
        beta: config.beta,
        seed: config.seed,
        iterations: config.iterations,
        vocabulary,
        topic_word,
        word_index,
    })
}

impl LdaModel {
    fn rebuild_index(&mut self) {
        self.word_index = self
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
    }

    pub fn word_id(&self, word: &str) -> Option<usize> {
        self.word_index.get(word).copied()
    }

    pub fn uniform(&self) -> Vec<f64> {
        vec![1.0 / self.theta as f64; self.theta]
    }

    /// Fold-in Gibbs sampling with the topic-word matrix frozen. The RNG is
    /// seeded from the model seed and a hash of the document, so the same text
    /// always gets the same distribution. Proportions are averaged over the
    /// second half of the sweeps.
    pub fn infer_topics(&self, document: &str) -> Vec<f64> {
        let words: Vec<usize> = tokenize(document)
            .iter()
            .filter_map(|w| self.word_id(w))
            .collect();
        if words.is_empty() {
            return self.uniform();
        }
        let k = self.theta;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(document.as_bytes()));
        let mut counts = vec![0u32; k];
        let mut z: Vec<usize> = words
            .iter()
            .map(|_| {
                let t = rng.random_range(0..k);
                counts[t] += 1;
                t
            })
            .collect();
        let mut acc = vec![0.0; k];
        let mut weights = vec![0.0; k];
        let burn_in = INFERENCE_SWEEPS / 2;
        for sweep in 0..INFERENCE_SWEEPS {
            for (i, &w) in words.iter().enumerate() {
                counts[z[i]] -= 1;
                for t in 0..k {
                    weights[t] = (counts[t] as f64 + self.alpha) * self.topic_word[t][w];
                }
                z[i] = sample(&mut rng, &weights);
                counts[z[i]] += 1;
            }
            if sweep >= burn_in {
                for t in 0..k {
                    acc[t] += counts[t] as f64 + self.alpha;
                }
            }
        }
        let total: f64 = acc.iter().sum();
        acc.iter_mut().for_each(|x| *x /= total);
        acc
    }

    /// Mean of the per-post distributions; uniform when there are no posts.
    pub fn profile_topic_distribution(&self, posts: &[Post]) -> Vec<f64> {
        let per_post: Vec<Vec<f64>> = posts.iter().map(|p| self.infer_topics(&p.text)).collect();
        self.mean_distribution(per_post.iter().map(Vec::as_slice))
    }

    /// Renormalized mean of already-inferred post distributions.
    pub fn mean_distribution<'a>(&self, dists: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
        let mut mean = vec![0.0; self.theta];
        let mut n = 0usize;
        for d in dists {
            for (m, x) in mean.iter_mut().zip(d) {
                *m += x;
            }
            n += 1;
        }
        if n == 0 {
            return self.uniform();
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let s: f64 = mean.iter().sum();
        mean.iter_mut().for_each(|m| *m /= s);
        mean
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut m: LdaModel = serde_json::from_str(text)?;
        if m.theta < 2 || m.topic_word.len() != m.theta {
            return Err(Error::Invalid("malformed LDA model".into()));
        }
        if m.topic_word.iter().any(|r| r.len() != m.vocabulary.len()) {
            return Err(Error::Invalid("topic-word rows do not match vocabulary".into()));
        }
        m.rebuild_index();
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

pub fn infer_topics(model: &LdaModel, document: &str) -> Vec<f64> {
    model.infer_topics(document)
}

pub fn profile_topic_distribution(model: &LdaModel, posts: &[Post]) -> Vec<f64> {
    model.profile_topic_distribution(posts)
}
