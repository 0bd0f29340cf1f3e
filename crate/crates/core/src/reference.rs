//! File-backed lookup providers: gazetteer, first-name gender table,
//! sentiment lexicon, and a rule-based entity extractor.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};

/// Lowercase, trim, and collapse internal whitespace.
pub fn normalize_key(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coordinate {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: BTreeMap<String, Coordinate>,
    /// Display form of each key, as first seen in the source file.
    display: BTreeMap<String, String>,
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, place: &str, lat: f64, lon: f64) -> Result<()> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::Invalid(format!(
                "coordinate ({lat}, {lon}) for `{place}` out of range"
            )));
        }
        let key = normalize_key(place);
        if key.is_empty() {
            return Err(Error::Invalid("empty gazetteer place".into()));
        }
        self.display.entry(key.clone()).or_insert_with(|| place.trim().to_string());
        self.entries.insert(key, Coordinate { lat, lon });
        Ok(())
    }

    pub fn geocode(&self, place: &str) -> Option<Coordinate> {
        self.entries.get(&normalize_key(place)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Display names of all entries, in key order.
    pub fn places(&self) -> impl Iterator<Item = (&str, Coordinate)> {
        self.entries
            .iter()
            .map(move |(k, c)| (self.display[k].as_str(), *c))
    }

    /// Entries whose place string has a comma, i.e. "city, country" rows.
    pub fn cities(&self) -> Vec<(&str, Coordinate)> {
        self.places().filter(|(p, _)| p.contains(',')).collect()
    }

    /// The country component of a "city, country" place string.
    pub fn country_of(place: &str) -> Option<String> {
        let (_, country) = place.rsplit_once(',')?;
        let country = country.trim();
        (!country.is_empty()).then(|| country.to_string())
    }

    /// Adds a centroid entry for every country that appears as the last
    /// component of some place but has no entry of its own.
    pub fn add_country_centroids(&mut self) {
        let mut sums: BTreeMap<String, (String, f64, f64, usize)> = BTreeMap::new();
        for (place, c) in self.places() {
            if let Some(country) = Self::country_of(place) {
                let e = sums
                    .entry(normalize_key(&country))
                    .or_insert((country, 0.0, 0.0, 0));
                e.1 += c.lat;
                e.2 += c.lon;
                e.3 += 1;
            }
        }
        for (key, (display, lat, lon, n)) in sums {
            if !self.entries.contains_key(&key) {
                let n = n as f64;
                self.display.insert(key.clone(), display);
                self.entries.insert(key, Coordinate { lat: lat / n, lon: lon / n });
            }
        }
    }

    pub fn nearest_city(&self, lat: f64, lon: f64) -> Option<&str> {
        let target = Coordinate { lat, lon };
        self.cities()
            .into_iter()
            .map(|(p, c)| (p, crate::similarity::haversine_km(target, c)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(p, _)| p)
    }

    /// Parses `place,lat,lon` CSV text; country centroids are added for
    /// countries without an explicit row.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut gaz = Gazetteer::new();
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        for record in reader.records() {
            let record = record?;
            if record.len() != 3 {
                return Err(Error::Invalid(format!("gazetteer row has {} columns", record.len())));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Invalid(format!("bad coordinate `{s}`")))
            };
            gaz.insert(&record[0], parse(&record[1])?, parse(&record[2])?)?;
        }
        gaz.add_country_centroids();
        Ok(gaz)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn builtin() -> Self {
        Self::from_csv_str(include_str!("../data/gazetteer.csv")).expect("bundled gazetteer")
    }
}

#[derive(Debug, Clone, Default)]
pub struct NameGenderTable {
    rows: BTreeMap<String, (u64, u64)>,
}

impl NameGenderTable {
    pub fn insert(&mut self, name: &str, male: u64, female: u64) -> Result<()> {
        if male + female == 0 {
            return Err(Error::Invalid(format!("name `{name}` has zero counts")));
        }
        self.rows.insert(normalize_key(name), (male, female));
        Ok(())
    }

    /// Probability that a person with this first name is male.
    pub fn probability_male(&self, name: &str) -> Option<f64> {
        let first = normalize_key(name);
        let first = first.split(' ').next()?;
        let &(m, f) = self.rows.get(first)?;
        Some(m as f64 / (m + f) as f64)
    }

    pub fn names(&self) -> impl Iterator<Item = (&str, u64, u64)> {
        self.rows.iter().map(|(k, &(m, f))| (k.as_str(), m, f))
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut tbl = NameGenderTable::default();
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        for record in reader.records() {
            let record = record?;
            if record.len() != 3 {
                return Err(Error::Invalid(format!("name row has {} columns", record.len())));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::Invalid(format!("bad count `{s}`")))
            };
            tbl.insert(&record[0], parse(&record[1])?, parse(&record[2])?)?;
        }
        Ok(tbl)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn builtin() -> Self {
        Self::from_csv_str(include_str!("../data/names.csv")).expect("bundled name table")
    }
}

pub fn gender_distribution(tbl: &NameGenderTable, name: &str) -> Option<f64> {
    tbl.probability_male(name)
}

#[derive(Debug, Clone, Default)]
pub struct SentimentLexicon {
    positive: HashSet<String>,
    negative: HashSet<String>,
}

/// Lowercased alphanumeric tokens.
pub fn alnum_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

impl SentimentLexicon {
    pub fn new<P, N>(positive: P, negative: N) -> Result<Self>
    where
        P: IntoIterator,
        P::Item: AsRef<str>,
        N: IntoIterator,
        N::Item: AsRef<str>,
    {
        let positive: HashSet<String> = positive
            .into_iter()
            .map(|t| t.as_ref().trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        let negative: HashSet<String> = negative
            .into_iter()
            .map(|t| t.as_ref().trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        if let Some(t) = positive.intersection(&negative).next() {
            return Err(Error::Invalid(format!("token `{t}` is both positive and negative")));
        }
        Ok(SentimentLexicon { positive, negative })
    }

    pub fn load(positive: impl AsRef<Path>, negative: impl AsRef<Path>) -> Result<Self> {
        let read = |p: &Path| fs::read_to_string(p).map_err(|e| Error::io(p, e));
        let pos = read(positive.as_ref())?;
        let neg = read(negative.as_ref())?;
        Self::new(pos.lines(), neg.lines())
    }

    pub fn builtin() -> Self {
        Self::new(
            include_str!("../data/positive.txt").lines(),
            include_str!("../data/negative.txt").lines(),
        )
        .expect("bundled lexicon")
    }

    pub fn positive_terms(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.positive.iter().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    pub fn negative_terms(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.negative.iter().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    /// `(p_pos, p_neg)`; texts with no lexicon hits score `(0.5, 0.5)`.
    pub fn scores(&self, text: &str) -> (f64, f64) {
        let (mut p, mut n) = (0usize, 0usize);
        for tok in alnum_tokens(text) {
            if self.positive.contains(&tok) {
                p += 1;
            } else if self.negative.contains(&tok) {
                n += 1;
            }
        }
        if p + n == 0 {
            return (0.5, 0.5);
        }
        let total = (p + n) as f64;
        (p as f64 / total, n as f64 / total)
    }
}

pub fn sentiment_scores(lex: &SentimentLexicon, text: &str) -> (f64, f64) {
    lex.scores(text)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub token: String,
}

const MONTHS: &str = "january|february|march|april|may|june|july|august|september|october|november|december|jan|feb|mar|apr|jun|jul|aug|sep|sept|oct|nov|dec";

// Never part of a capitalized run.
const STOPWORDS: &[&str] = &[
    "a", "about", "after", "again", "all", "also", "am", "an", "and", "any", "are", "as", "at",
    "be", "been", "before", "but", "by", "can", "did", "do", "does", "for", "from", "had", "has",
    "have", "he", "her", "here", "him", "his", "how", "i", "if", "in", "into", "is", "it", "its",
    "just", "me", "my", "no", "not", "now", "of", "off", "on", "once", "or", "our", "out", "over",
    "she", "so", "some", "than", "that", "the", "their", "them", "then", "there", "these", "they",
    "this", "those", "to", "too", "under", "until", "up", "very", "was", "we", "were", "what",
    "when", "where", "which", "while", "who", "why", "will", "with", "you", "your",
];

fn special_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(&format!(
            r"(?ix)
            (?P<iso>\b\d{{4}}-\d{{2}}-\d{{2}}\b)
            | (?P<md>\b(?:{MONTHS})\.?\s+\d{{1,2}}(?:st|nd|rd|th)?\b)
            | (?P<dm>\b\d{{1,2}}(?:st|nd|rd|th)?\s+(?:{MONTHS})\b)
            | (?P<time>\b\d{{1,2}}:\d{{2}}\b)
            | (?P<money>[$€£¥]\s?\d+(?:[.,]\d+)*)
            | (?P<pct>\b\d+(?:\.\d+)?%)"
        ))
        .expect("entity regex")
    })
}

fn token_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?P<word>\p{L}[\p{L}\p{N}'&\-]*)|(?P<end>[.!?]+)|(?P<other>\S)").unwrap())
}

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS.iter().copied().collect())
}

pub fn is_stopword(word: &str) -> bool {
    stopwords().contains(word)
}

enum Tok<'a> {
    Word { start: usize, end: usize, text: &'a str, initial: bool },
    Break,
}

/// Rule-based entity spans, ordered by position.
///
/// Emits dates, times, money and percent tokens, plus maximal runs of
/// capitalized non-stopword words. A sentence-initial capitalized word only
/// counts when the same word also appears capitalized mid-sentence.
pub fn extract_entity_spans(text: &str) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut masked = String::with_capacity(text.len());
    let mut last = 0;
    for m in special_regex().find_iter(text) {
        masked.push_str(&text[last..m.start()]);
        // '|' breaks capitalized runs; padding keeps byte offsets aligned.
        masked.push('|');
        masked.extend(std::iter::repeat_n(' ', m.end() - m.start() - 1));
        last = m.end();
        spans.push(EntitySpan {
            start: m.start(),
            end: m.end(),
            token: normalize_key(m.as_str()),
        });
    }
    masked.push_str(&text[last..]);

    let mut toks = Vec::new();
    let mut sentence_start = true;
    for c in token_regex().captures_iter(&masked) {
        if let Some(w) = c.name("word") {
            toks.push(Tok::Word {
                start: w.start(),
                end: w.end(),
                text: w.as_str(),
                initial: sentence_start,
            });
            sentence_start = false;
        } else if c.name("end").is_some() {
            toks.push(Tok::Break);
            sentence_start = true;
        } else {
            toks.push(Tok::Break);
            sentence_start = false;
        }
    }

    let is_cap = |w: &str| w.chars().next().is_some_and(char::is_uppercase);
    let mid_caps: HashSet<String> = toks
        .iter()
        .filter_map(|t| match t {
            Tok::Word { text, initial: false, .. } if is_cap(text) => Some(text.to_lowercase()),
            _ => None,
        })
        .collect();

    let mut run: Vec<(usize, usize, String)> = Vec::new();
    let flush = |run: &mut Vec<(usize, usize, String)>, spans: &mut Vec<EntitySpan>| {
        if let (Some(first), Some(last)) = (run.first(), run.last()) {
            spans.push(EntitySpan {
                start: first.0,
                end: last.1,
                token: run.iter().map(|r| r.2.as_str()).collect::<Vec<_>>().join(" "),
            });
        }
        run.clear();
    };
    for t in &toks {
        match t {
            Tok::Word { start, end, text, initial } => {
                let lower = text.to_lowercase();
                let eligible = is_cap(text)
                    && !stopwords().contains(lower.as_str())
                    && (!initial || mid_caps.contains(&lower));
                if eligible {
                    run.push((*start, *end, lower));
                } else {
                    flush(&mut run, &mut spans);
                }
            }
            Tok::Break => flush(&mut run, &mut spans),
        }
    }
    flush(&mut run, &mut spans);
    spans.sort_by_key(|s| (s.start, s.end));
    spans
}

/// Lowercased entity tokens with multiplicity, in text order.
pub fn extract_entities(text: &str) -> Vec<String> {
    extract_entity_spans(text).into_iter().map(|s| s.token).collect()
}

pub fn entity_counts(text: &str) -> BTreeMap<String, u32> {
    let mut counts = BTreeMap::new();
    for t in extract_entities(text) {
        *counts.entry(t).or_insert(0) += 1;
    }
    counts
}

/// Removes every span whose token is in `drop`, returning the edited text.
pub fn remove_entities(text: &str, drop: &HashSet<String>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for s in extract_entity_spans(text) {
        if drop.contains(&s.token) && s.start >= last {
            out.push_str(&text[last..s.start]);
            last = s.end;
        }
    }
    out.push_str(&text[last..]);
    normalize_spaces(&out)
}

fn normalize_spaces(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// All three providers bundled for the similarity layer.
#[derive(Debug, Clone)]
pub struct Providers {
    pub gazetteer: Gazetteer,
    pub names: NameGenderTable,
    pub lexicon: SentimentLexicon,
}

impl Providers {
    pub fn builtin() -> Self {
        Providers {
            gazetteer: Gazetteer::builtin(),
            names: NameGenderTable::builtin(),
            lexicon: SentimentLexicon::builtin(),
        }
    }
}
