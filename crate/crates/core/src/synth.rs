//! Synthetic paired corpora with known couplings and tunable per-attribute
//! noise.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{Corpus, Gender, NameField, NameFieldKind, PairLabel, Post, Profile};
use crate::reference::{Coordinate, Gazetteer, NameGenderTable, SentimentLexicon};
use crate::similarity::EARTH_RADIUS_KM;

/// Topic names with disjoint word lists.
#[derive(Debug, Clone, PartialEq)]
pub struct VocabSpec {
    pub topics: Vec<(String, Vec<String>)>,
}

impl VocabSpec {
    /// Lines of `name: word word ...`; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut topics: Vec<(String, Vec<String>)> = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, words) = line
                .split_once(':')
                .ok_or_else(|| Error::Invalid(format!("vocab line {}: expected `name: words`", k + 1)))?;
            let words: Vec<String> = words.split_whitespace().map(str::to_lowercase).collect();
            if words.is_empty() {
                return Err(Error::Invalid(format!("vocab line {}: topic has no words", k + 1)));
            }
            topics.push((name.trim().to_string(), words));
        }
        if topics.is_empty() {
            return Err(Error::Invalid("vocab spec has no topics".into()));
        }
        let mut seen = BTreeMap::new();
        for (t, words) in &topics {
            for w in words {
                if let Some(other) = seen.insert(w.clone(), t.clone()) {
                    if &other != t {
                        return Err(Error::Invalid(format!(
                            "word `{w}` appears in topics `{other}` and `{t}`"
                        )));
                    }
                }
            }
        }
        Ok(VocabSpec { topics })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn builtin() -> Self {
        Self::parse(include_str!("../data/topics.txt")).expect("bundled vocab spec")
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    fn words(&self, topic: usize) -> &[String] {
        &self.topics[topic].1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_coupled: usize,
    pub n_uncoupled_per_side: usize,
    pub seed: u64,
    /// Per-character probability of an edit in each name field.
    pub name_edit_rate: f64,
    pub location_jitter_km: f64,
    pub gender_flip_rate: f64,
    pub photo_noise_sigma: f64,
    /// Probability that each bio entity is swapped for a random one.
    pub freetext_replace_rate: f64,
    pub activity_jitter_s: f64,
    /// Probability that a post is replaced by one the other side never sees.
    pub unshared_post_rate: f64,
    /// Probability that a post's words are redrawn from a random topic.
    pub topic_drift: f64,
    /// Probability that a post's sentiment word flips polarity.
    pub sentiment_drift: f64,
    pub missing_location: f64,
    pub missing_gender: f64,
    pub missing_photo: f64,
    pub missing_freetext: f64,
    pub missing_posts: f64,
    pub posts_per_profile: usize,
    pub embedding_dim: usize,
    pub alternate_photos: usize,
    pub window_days: u32,
    pub start_timestamp: i64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self::moderate()
    }
}

impl GeneratorConfig {
    /// Every coupled pair observes identical attributes on both sides.
    pub fn zero_noise() -> Self {
        GeneratorConfig {
            n_coupled: 1500,
            n_uncoupled_per_side: 1500,
            seed: 0,
            name_edit_rate: 0.0,
            location_jitter_km: 0.0,
            gender_flip_rate: 0.0,
            photo_noise_sigma: 0.0,
            freetext_replace_rate: 0.0,
            activity_jitter_s: 0.0,
            unshared_post_rate: 0.0,
            topic_drift: 0.0,
            sentiment_drift: 0.0,
            missing_location: 0.0,
            missing_gender: 0.0,
            missing_photo: 0.0,
            missing_freetext: 0.0,
            missing_posts: 0.0,
            posts_per_profile: 20,
            embedding_dim: 16,
            alternate_photos: 2,
            window_days: 14,
            start_timestamp: 1_577_836_800,
        }
    }

    pub fn moderate() -> Self {
        GeneratorConfig {
            name_edit_rate: 0.25,
            location_jitter_km: 400.0,
            gender_flip_rate: 0.05,
            photo_noise_sigma: 0.35,
            freetext_replace_rate: 0.5,
            activity_jitter_s: 7200.0,
            unshared_post_rate: 0.25,
            topic_drift: 0.4,
            sentiment_drift: 0.3,
            missing_location: 0.3,
            missing_gender: 0.4,
            missing_photo: 0.3,
            missing_freetext: 0.4,
            missing_posts: 0.05,
            ..Self::zero_noise()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("name_edit_rate", self.name_edit_rate),
            ("gender_flip_rate", self.gender_flip_rate),
            ("freetext_replace_rate", self.freetext_replace_rate),
            ("unshared_post_rate", self.unshared_post_rate),
            ("topic_drift", self.topic_drift),
            ("sentiment_drift", self.sentiment_drift),
            ("missing_location", self.missing_location),
            ("missing_gender", self.missing_gender),
            ("missing_photo", self.missing_photo),
            ("missing_freetext", self.missing_freetext),
            ("missing_posts", self.missing_posts),
        ];
        for (k, v) in rates {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Invalid(format!("{k} = {v} is outside [0, 1]")));
            }
        }
        for (k, v) in [
            ("location_jitter_km", self.location_jitter_km),
            ("photo_noise_sigma", self.photo_noise_sigma),
            ("activity_jitter_s", self.activity_jitter_s),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Invalid(format!("{k} = {v} must be finite and >= 0")));
            }
        }
        if self.embedding_dim == 0 {
            return Err(Error::Invalid("embedding_dim must be positive".into()));
        }
        if self.window_days == 0 {
            return Err(Error::Invalid("window_days must be positive".into()));
        }
        if self.start_timestamp < 0 {
            return Err(Error::Invalid("start_timestamp must be >= 0".into()));
        }
        Ok(())
    }

    /// Overrides fields from `key = value` lines (`#` comments allowed).
    pub fn apply_key_values(&mut self, text: &str) -> Result<()> {
        let mut map = match serde_json::to_value(&*self)? {
            serde_json::Value::Object(m) => m,
            _ => unreachable!("config serializes to an object"),
        };
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("config line {}: expected key = value", k + 1)))?;
            let key = key.trim();
            if !map.contains_key(key) {
                return Err(Error::Invalid(format!("config line {}: unknown key `{key}`", k + 1)));
            }
            let value: serde_json::Value = serde_json::from_str(value.trim()).map_err(|_| {
                Error::Invalid(format!("config line {}: `{}` is not a number", k + 1, value.trim()))
            })?;
            map.insert(key.to_string(), value);
        }
        *self = serde_json::from_value(serde_json::Value::Object(map))
            .map_err(|e| Error::Invalid(format!("config: {e}")))?;
        self.validate()
    }

    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_key_values(text)?;
        Ok(c)
    }

    pub fn to_key_values(&self) -> String {
        let map = match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(m)) => m,
            _ => unreachable!("config serializes to an object"),
        };
        map.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Everything a generator run needs besides its config.
pub struct GeneratorInputs<'a> {
    pub gazetteer: &'a Gazetteer,
    pub names: &'a NameGenderTable,
    pub lexicon: &'a SentimentLexicon,
    pub vocab: &'a VocabSpec,
}

#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub aux: Corpus,
    pub target: Corpus,
    pub labels: Vec<PairLabel>,
}

fn mix(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Independent stream per (seed, persona, side, purpose) so changing one
/// noise setting leaves every other draw untouched.
fn sub_rng(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    let mut h = mix(seed ^ 0x6a09_e667_f3bc_c908);
    for p in parts {
        h = mix(h ^ p.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    }
    ChaCha8Rng::seed_from_u64(h)
}

mod purpose {
    pub const PERSONA: u64 = 1;
    pub const NAME: u64 = 2;
    pub const LOCATION: u64 = 3;
    pub const GENDER: u64 = 4;
    pub const PHOTO: u64 = 5;
    pub const FREETEXT: u64 = 6;
    pub const POSTS: u64 = 7;
    pub const MISSING: u64 = 8;
    pub const ORDER: u64 = 9;
    pub const ENTITIES: u64 = 10;
}

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mir", "ven", "tor", "za", "ri", "bel", "dan", "so", "quin", "rax", "mo", "li",
    "ster", "vo", "nel", "tak", "ru", "fen", "gal", "pra", "dor", "vis",
];
const ENTITY_SUFFIXES: [&str; 6] = ["Labs", "Group", "Works", "Studio", "Records", "Club"];
const BIO_LINKS: [&str; 5] = ["working at", "fan of", "member of", "proud of", "part of"];

fn syllable_word(rng: &mut impl Rng, min: usize, max: usize) -> String {
    let n = rng.random_range(min..=max);
    (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect()
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn entity_pool(seed: u64) -> Vec<String> {
    let mut rng = sub_rng(seed, &[purpose::ENTITIES]);
    let mut pool = std::collections::BTreeSet::new();
    while pool.len() < 400 {
        let head = capitalize(&syllable_word(&mut rng, 2, 3));
        let e = if rng.random_bool(0.5) {
            format!("{head} {}", ENTITY_SUFFIXES.choose(&mut rng).unwrap())
        } else {
            head
        };
        pool.insert(e);
    }
    let mut pool: Vec<String> = pool.into_iter().collect();
    pool.shuffle(&mut rng);
    pool
}

struct PersonaPost {
    timestamp: i64,
    topic: usize,
    words: Vec<usize>,
    positive: bool,
    sentiment_word: usize,
}

struct Habits {
    favourite: Vec<usize>,
    positivity: f64,
    hour_center: f64,
}

struct Persona {
    gender: Gender,
    first: String,
    last: String,
    screen: String,
    home: usize,
    photo: Vec<f64>,
    entities: Vec<usize>,
    habits: Habits,
    posts: Vec<PersonaPost>,
}

struct Pools<'a> {
    cities: Vec<(&'a str, Coordinate)>,
    male: Vec<(String, u64)>,
    female: Vec<(String, u64)>,
    entities: Vec<String>,
    positive: Vec<&'a str>,
    negative: Vec<&'a str>,
    vocab: &'a VocabSpec,
    gazetteer: &'a Gazetteer,
}

fn weighted<'a>(rng: &mut impl Rng, items: &'a [(String, u64)]) -> &'a str {
    let total: u64 = items.iter().map(|(_, w)| w).sum();
    let mut x = rng.random_range(0..total);
    for (s, w) in items {
        if x < *w {
            return s;
        }
        x -= w;
    }
    &items.last().unwrap().0
}

fn unit_gaussian(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    normalize(&mut v);
    v
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

const WORDS_PER_POST: usize = 14;

fn topic_words(rng: &mut impl Rng, vocab: &VocabSpec, topic: usize) -> Vec<usize> {
    let n = vocab.words(topic).len();
    (0..WORDS_PER_POST).map(|_| rng.random_range(0..n)).collect()
}

fn make_persona(cfg: &GeneratorConfig, pools: &Pools, id: u64) -> Persona {
    let mut rng = sub_rng(cfg.seed, &[id, purpose::PERSONA]);
    let gender = if rng.random_bool(0.5) { Gender::Male } else { Gender::Female };
    let first = capitalize(weighted(
        &mut rng,
        if gender == Gender::Male { &pools.male } else { &pools.female },
    ));
    let last = capitalize(&syllable_word(&mut rng, 2, 3));
    let screen = format!(
        "{}{}{}",
        first.to_lowercase(),
        last.to_lowercase(),
        rng.random_range(1..100)
    );
    let home = rng.random_range(0..pools.cities.len());
    let photo = unit_gaussian(&mut rng, cfg.embedding_dim);
    let entities = (0..3).map(|_| rng.random_range(0..pools.entities.len())).collect();

    let n_topics = pools.vocab.len();
    let mut favourite: Vec<usize> = (0..n_topics).collect();
    favourite.shuffle(&mut rng);
    favourite.truncate(2.min(n_topics));
    let habits = Habits {
        favourite,
        positivity: rng.random(),
        hour_center: rng.random_range(0.0..24.0),
    };
    let mut posts: Vec<_> = (0..cfg.posts_per_profile)
        .map(|_| draw_post(&mut rng, cfg, pools, &habits))
        .collect();
    posts.sort_by_key(|p| p.timestamp);
    Persona {
        gender,
        first,
        last,
        screen,
        home,
        photo,
        entities,
        habits,
        posts,
    }
}

fn draw_post(rng: &mut impl Rng, cfg: &GeneratorConfig, pools: &Pools, habits: &Habits) -> PersonaPost {
    let n_topics = pools.vocab.len();
    let day = rng.random_range(0..cfg.window_days as i64);
    let z: f64 = StandardNormal.sample(rng);
    let hour = habits.hour_center + 2.5 * z;
    let secs = (hour.rem_euclid(24.0) * 3600.0) as i64;
    let topic = if rng.random_bool(0.8) {
        *habits.favourite.choose(rng).unwrap()
    } else {
        rng.random_range(0..n_topics)
    };
    let words = topic_words(rng, pools.vocab, topic);
    PersonaPost {
        timestamp: cfg.start_timestamp + day * 86_400 + secs,
        topic,
        words,
        positive: rng.random_bool(habits.positivity),
        sentiment_word: rng.random_range(0..1 << 16),
    }
}

fn edit_name(rng: &mut impl Rng, name: &str, rate: f64) -> String {
    const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    let mut out = String::with_capacity(name.len() + 4);
    for ch in name.chars() {
        let u: f64 = rng.random();
        let op = rng.random_range(0..3);
        let repl = ALPHABET[rng.random_range(0..ALPHABET.len())] as char;
        if u < rate {
            match op {
                0 => out.push(repl),
                1 => {}
                _ => {
                    out.push(ch);
                    out.push(repl);
                }
            }
        } else {
            out.push(ch);
        }
    }
    out
}

/// Point `dist_km` from `c` along initial bearing `bearing` (radians).
fn displace(c: Coordinate, dist_km: f64, bearing: f64) -> (f64, f64) {
    let d = dist_km / EARTH_RADIUS_KM;
    let (lat1, lon1) = (c.lat.to_radians(), c.lon.to_radians());
    let lat2 = (lat1.sin() * d.cos() + lat1.cos() * d.sin() * bearing.cos()).asin();
    let lon2 = lon1
        + (bearing.sin() * d.sin() * lat1.cos()).atan2(d.cos() - lat1.sin() * lat2.sin());
    let lon2 = (lon2.to_degrees() + 540.0).rem_euclid(360.0) - 180.0;
    (lat2.to_degrees(), lon2)
}

fn observe(cfg: &GeneratorConfig, pools: &Pools, p: &Persona, pid: u64, side: u64, profile_id: String, network: &str) -> Profile {
    let mut out = Profile::new(profile_id, network);

    let mut rng = sub_rng(cfg.seed, &[pid, side, purpose::NAME]);
    let display = format!("{} {}", p.first, p.last);
    out.name_fields = vec![
        NameField {
            kind: NameFieldKind::ScreenName,
            text: edit_name(&mut rng, &p.screen, cfg.name_edit_rate),
        },
        NameField {
            kind: NameFieldKind::DisplayName,
            text: edit_name(&mut rng, &display, cfg.name_edit_rate),
        },
    ];

    let mut miss = sub_rng(cfg.seed, &[pid, side, purpose::MISSING]);
    let drop: [bool; 5] = [
        miss.random_bool(cfg.missing_location),
        miss.random_bool(cfg.missing_gender),
        miss.random_bool(cfg.missing_photo),
        miss.random_bool(cfg.missing_freetext),
        miss.random_bool(cfg.missing_posts),
    ];

    let mut rng = sub_rng(cfg.seed, &[pid, side, purpose::LOCATION]);
    let dist = cfg.location_jitter_km * rng.random::<f64>();
    let bearing = rng.random_range(0.0..std::f64::consts::TAU);
    if !drop[0] {
        let (name, home) = pools.cities[p.home];
        let place = if dist > 0.0 {
            let (lat, lon) = displace(home, dist, bearing);
            pools.gazetteer.nearest_city(lat, lon).unwrap_or(name)
        } else {
            name
        };
        out.location_text = Some(place.to_string());
    }

    let mut rng = sub_rng(cfg.seed, &[pid, side, purpose::GENDER]);
    let flip = rng.random_bool(cfg.gender_flip_rate);
    if !drop[1] {
        out.declared_gender = Some(match (p.gender, flip) {
            (g, false) => g,
            (Gender::Male, true) => Gender::Female,
            (Gender::Female, true) => Gender::Male,
        });
    }

    let mut rng = sub_rng(cfg.seed, &[pid, side, purpose::PHOTO]);
    let noise: Vec<f64> = (0..cfg.embedding_dim)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let alternates: Vec<Vec<f64>> = (0..cfg.alternate_photos)
        .map(|_| unit_gaussian(&mut rng, cfg.embedding_dim))
        .collect();
    if !drop[2] {
        let mut v: Vec<f64> = p
            .photo
            .iter()
            .zip(&noise)
            .map(|(x, n)| x + cfg.photo_noise_sigma * n)
            .collect();
        if cfg.photo_noise_sigma > 0.0 {
            normalize(&mut v);
        }
        out.photo_embedding = Some(v);
        out.alternate_photo_embeddings = alternates;
    }

    let mut rng = sub_rng(cfg.seed, &[pid, side, purpose::FREETEXT]);
    let entities: Vec<&str> = p
        .entities
        .iter()
        .map(|&e| {
            let swap = rng.random_bool(cfg.freetext_replace_rate);
            let other = rng.random_range(0..pools.entities.len());
            pools.entities[if swap { other } else { e }].as_str()
        })
        .collect();
    if !drop[3] {
        let bio: Vec<String> = entities
            .iter()
            .zip(BIO_LINKS.iter().cycle().skip((pid % 5) as usize))
            .map(|(e, link)| format!("{link} {e}"))
            .collect();
        out.freetext = Some(bio.join(", ") + ".");
    }

    let mut rng = sub_rng(cfg.seed, &[pid, side, purpose::POSTS]);
    let n_topics = pools.vocab.len();
    let posts: Vec<Post> = p
        .posts
        .iter()
        .map(|shared| {
            let own = draw_post(&mut rng, cfg, pools, &p.habits);
            let post = if rng.random_bool(cfg.unshared_post_rate) { &own } else { shared };
            let jitter = cfg.activity_jitter_s * (2.0 * rng.random::<f64>() - 1.0);
            let drift = rng.random_bool(cfg.topic_drift);
            let drift_topic = rng.random_range(0..n_topics);
            let drift_words = topic_words(&mut rng, pools.vocab, drift_topic);
            let flip = rng.random_bool(cfg.sentiment_drift);
            let (topic, words) = if drift {
                (drift_topic, &drift_words)
            } else {
                (post.topic, &post.words)
            };
            let vocab = pools.vocab.words(topic);
            let mut text: Vec<&str> = words.iter().map(|&w| vocab[w].as_str()).collect();
            let pool = if post.positive != flip { &pools.positive } else { &pools.negative };
            text.push(pool[post.sentiment_word % pool.len()]);
            let ts = (post.timestamp + jitter.round() as i64).max(0);
            Post::new(ts, text.join(" "))
        })
        .collect();
    if !drop[4] {
        out.posts = posts;
        out.sort_posts();
    }
    out
}

pub const AUX_NETWORK: &str = "aux";
pub const TARGET_NETWORK: &str = "target";

/// Coupled personas first (`pid < n_coupled`), then uncoupled ones for each
/// side. Profile order within each corpus is shuffled.
pub fn generate(cfg: &GeneratorConfig, inputs: &GeneratorInputs) -> Result<GeneratedData> {
    cfg.validate()?;
    let cities = inputs.gazetteer.cities();
    if cities.is_empty() {
        return Err(Error::Invalid("gazetteer has no cities".into()));
    }
    let mut male = Vec::new();
    let mut female = Vec::new();
    for (n, m, f) in inputs.names.names() {
        if m > 0 {
            male.push((n.to_string(), m));
        }
        if f > 0 {
            female.push((n.to_string(), f));
        }
    }
    if male.is_empty() || female.is_empty() {
        return Err(Error::Invalid("name table needs both male and female names".into()));
    }
    let positive = inputs.lexicon.positive_terms();
    let negative = inputs.lexicon.negative_terms();
    if positive.is_empty() || negative.is_empty() {
        return Err(Error::Invalid("lexicon needs positive and negative terms".into()));
    }
    let pools = Pools {
        cities,
        male,
        female,
        entities: entity_pool(cfg.seed),
        positive,
        negative,
        vocab: inputs.vocab,
        gazetteer: inputs.gazetteer,
    };

    let n_c = cfg.n_coupled as u64;
    let n_u = cfg.n_uncoupled_per_side as u64;
    let mut aux = Vec::new();
    let mut target = Vec::new();
    let mut labels = Vec::new();
    for pid in 0..n_c {
        let persona = make_persona(cfg, &pools, pid);
        let (a, t) = (format!("a{pid:06}"), format!("t{pid:06}"));
        aux.push(observe(cfg, &pools, &persona, pid, 0, a.clone(), AUX_NETWORK));
        target.push(observe(cfg, &pools, &persona, pid, 1, t.clone(), TARGET_NETWORK));
        labels.push(PairLabel::new(a, t, true));
    }
    for k in 0..n_u {
        let pa = n_c + 2 * k;
        let pt = pa + 1;
        let (a, t) = (format!("a{pa:06}"), format!("t{pt:06}"));
        let persona = make_persona(cfg, &pools, pa);
        aux.push(observe(cfg, &pools, &persona, pa, 0, a.clone(), AUX_NETWORK));
        let persona = make_persona(cfg, &pools, pt);
        target.push(observe(cfg, &pools, &persona, pt, 1, t.clone(), TARGET_NETWORK));
        labels.push(PairLabel::new(a, t, false));
    }
    let mut rng = sub_rng(cfg.seed, &[purpose::ORDER]);
    aux.shuffle(&mut rng);
    target.shuffle(&mut rng);
    Ok(GeneratedData {
        aux: Corpus::new(AUX_NETWORK, aux)?,
        target: Corpus::new(TARGET_NETWORK, target)?,
        labels,
    })
}

/// Documents drawn from a mixture of the vocab topics, each topic a uniform
/// distribution over its words. Returns the documents and, per topic, the
/// generating word distribution over the sorted union vocabulary.
pub fn topic_corpus(
    vocab: &VocabSpec,
    n_docs: usize,
    words_per_doc: usize,
    seed: u64,
) -> (Vec<String>, Vec<String>, Vec<Vec<f64>>) {
    let mut all: Vec<String> = vocab.topics.iter().flat_map(|(_, w)| w.iter().cloned()).collect();
    all.sort();
    all.dedup();
    let truth = vocab
        .topics
        .iter()
        .map(|(_, words)| {
            let p = 1.0 / words.len() as f64;
            all.iter()
                .map(|w| if words.contains(w) { p } else { 0.0 })
                .collect()
        })
        .collect();
    let mut rng = sub_rng(seed, &[purpose::POSTS]);
    let docs = (0..n_docs)
        .map(|_| {
            let a = rng.random_range(0..vocab.len());
            let b = rng.random_range(0..vocab.len());
            (0..words_per_doc)
                .map(|_| {
                    let t = if rng.random_bool(0.7) { a } else { b };
                    vocab.words(t).choose(&mut rng).unwrap().clone()
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    (docs, all, truth)
}
