//! Profiles, corpora and labeled pairs, plus JSON-lines / CSV ingestion.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NameFieldKind {
    ScreenName,
    DisplayName,
    GivenName,
    LastName,
    Username,
}

impl NameFieldKind {
    pub const ALL: [NameFieldKind; 5] = [
        NameFieldKind::ScreenName,
        NameFieldKind::DisplayName,
        NameFieldKind::GivenName,
        NameFieldKind::LastName,
        NameFieldKind::Username,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NameFieldKind::ScreenName => "screen_name",
            NameFieldKind::DisplayName => "display_name",
            NameFieldKind::GivenName => "given_name",
            NameFieldKind::LastName => "last_name",
            NameFieldKind::Username => "username",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameField {
    pub kind: NameFieldKind,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    pub text: String,
}

impl Post {
    pub fn new(timestamp: i64, text: impl Into<String>) -> Self {
        Post {
            timestamp,
            text: text.into(),
        }
    }

    /// UTC calendar day index.
    pub fn day(&self) -> i64 {
        self.timestamp.div_euclid(86_400)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Profile {
    pub profile_id: String,
    #[serde(default)]
    pub network_id: String,
    #[serde(default)]
    pub name_fields: Vec<NameField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_gender: Option<Gender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photo_embedding: Option<Vec<f64>>,
    /// Other photos the owner could swap in as a profile picture.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alternate_photo_embeddings: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freetext: Option<String>,
    #[serde(default)]
    pub posts: Vec<Post>,
}

impl Profile {
    pub fn new(profile_id: impl Into<String>, network_id: impl Into<String>) -> Self {
        Profile {
            profile_id: profile_id.into(),
            network_id: network_id.into(),
            ..Default::default()
        }
    }

    pub fn name(&self, kind: NameFieldKind) -> Option<&str> {
        self.name_fields
            .iter()
            .find(|f| f.kind == kind)
            .map(|f| f.text.as_str())
    }

    pub fn timestamps(&self) -> Vec<i64> {
        self.posts.iter().map(|p| p.timestamp).collect()
    }

    pub fn sort_posts(&mut self) {
        self.posts.sort_by_key(|p| p.timestamp);
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub network_id: String,
    pub profiles: Vec<Profile>,
    pub embedding_dim: usize,
}

impl Corpus {
    /// Builds a corpus, validating ids and embedding lengths. Posts are sorted
    /// and every profile is stamped with `network_id`.
    pub fn new(network_id: impl Into<String>, mut profiles: Vec<Profile>) -> Result<Self> {
        let network_id = network_id.into();
        let mut seen = HashSet::new();
        let mut embedding_dim = None;
        for p in &mut profiles {
            if p.profile_id.is_empty() {
                return Err(Error::Invalid("empty profile_id".into()));
            }
            if !seen.insert(p.profile_id.clone()) {
                return Err(Error::DuplicateProfile(p.profile_id.clone()));
            }
            p.network_id = network_id.clone();
            p.sort_posts();
            if p.posts.iter().any(|post| post.timestamp < 0) {
                return Err(Error::Invalid(format!(
                    "profile `{}` has a negative timestamp",
                    p.profile_id
                )));
            }
            let embeddings = p
                .photo_embedding
                .iter()
                .chain(p.alternate_photo_embeddings.iter());
            for e in embeddings {
                let expected = *embedding_dim.get_or_insert(e.len());
                if e.len() != expected {
                    return Err(Error::EmbeddingLength {
                        id: p.profile_id.clone(),
                        expected,
                        found: e.len(),
                    });
                }
            }
        }
        Ok(Corpus {
            network_id,
            profiles,
            embedding_dim: embedding_dim.unwrap_or(0),
        })
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.profiles.iter().map(|p| p.profile_id.clone()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&Profile> {
        self.profiles.iter().find(|p| p.profile_id == id)
    }

    pub fn index(&self) -> HashMap<&str, usize> {
        self.profiles
            .iter()
            .enumerate()
            .map(|(i, p)| (p.profile_id.as_str(), i))
            .collect()
    }
}

/// Reads a JSON-lines profile file. Unknown fields are ignored.
pub fn load_corpus(path: impl AsRef<Path>, network_id: &str) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut profiles = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let profile: Profile = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        profiles.push(profile);
    }
    Corpus::new(network_id, profiles)
}

pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for p in &corpus.profiles {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairLabel {
    pub aux_id: String,
    pub target_id: String,
    pub coupled: bool,
}

impl PairLabel {
    pub fn new(aux_id: impl Into<String>, target_id: impl Into<String>, coupled: bool) -> Self {
        PairLabel {
            aux_id: aux_id.into(),
            target_id: target_id.into(),
            coupled,
        }
    }
}

/// Checks label ids against both corpora and that no profile has two coupled
/// partners.
pub fn validate_labels(labels: &[PairLabel], aux: &Corpus, target: &Corpus) -> Result<()> {
    let aux_ids: HashSet<&str> = aux.profiles.iter().map(|p| p.profile_id.as_str()).collect();
    let target_ids: HashSet<&str> = target
        .profiles
        .iter()
        .map(|p| p.profile_id.as_str())
        .collect();
    let mut coupled_aux = HashSet::new();
    let mut coupled_target = HashSet::new();
    for l in labels {
        if !aux_ids.contains(l.aux_id.as_str()) {
            return Err(Error::UnknownProfile(l.aux_id.clone()));
        }
        if !target_ids.contains(l.target_id.as_str()) {
            return Err(Error::UnknownProfile(l.target_id.clone()));
        }
        if l.coupled {
            if !coupled_aux.insert(l.aux_id.as_str()) {
                return Err(Error::MultipleCouplings(l.aux_id.clone()));
            }
            if !coupled_target.insert(l.target_id.as_str()) {
                return Err(Error::MultipleCouplings(l.target_id.clone()));
            }
        }
    }
    Ok(())
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim() {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

pub fn load_labels(path: impl AsRef<Path>, aux: &Corpus, target: &Corpus) -> Result<Vec<PairLabel>> {
    let labels = read_labels(path)?;
    validate_labels(&labels, aux, target)?;
    Ok(labels)
}

/// Parses a label CSV without checking ids against any corpus.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<PairLabel>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["aux_id", "target_id", "coupled"] {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "expected header aux_id,target_id,coupled".into(),
        });
    }
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if record.len() != 3 {
            return Err(parse_err(format!("expected 3 columns, found {}", record.len())));
        }
        let coupled = parse_bool(&record[2])
            .ok_or_else(|| parse_err(format!("malformed boolean `{}`", &record[2])))?;
        labels.push(PairLabel::new(record[0].trim(), record[1].trim(), coupled));
    }
    Ok(labels)
}

pub fn write_labels(labels: &[PairLabel], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["aux_id", "target_id", "coupled"])?;
    for l in labels {
        w.write_record([l.aux_id.as_str(), l.target_id.as_str(), if l.coupled { "true" } else { "false" }])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn empty_file_gives_empty_corpus() {
        let f = write_tmp("");
        let c = load_corpus(f.path(), "aux").unwrap();
        assert!(c.is_empty());
        assert_eq!(c.embedding_dim, 0);
    }

    #[test]
    fn minimal_record() {
        let f = write_tmp("{\"profile_id\":\"a1\"}\n");
        let c = load_corpus(f.path(), "aux").unwrap();
        assert_eq!(c.len(), 1);
        let p = &c.profiles[0];
        assert_eq!(p.profile_id, "a1");
        assert_eq!(p.network_id, "aux");
        assert!(p.name_fields.is_empty());
        assert!(p.location_text.is_none());
        assert!(p.declared_gender.is_none());
        assert!(p.photo_embedding.is_none());
        assert!(p.freetext.is_none());
        assert!(p.posts.is_empty());
    }

    #[test]
    fn unknown_fields_are_ignored() {
        let f = write_tmp("{\"profile_id\":\"a1\",\"timezone\":\"UTC\",\"declared_gender\":\"female\"}\n");
        let c = load_corpus(f.path(), "aux").unwrap();
        assert_eq!(c.profiles[0].declared_gender, Some(Gender::Female));
    }

    #[test]
    fn posts_are_sorted_on_load() {
        let f = write_tmp(
            r#"{"profile_id":"a1","posts":[{"timestamp":30,"text":"c"},{"timestamp":10,"text":"a"},{"timestamp":20,"text":"b"}]}"#,
        );
        let c = load_corpus(f.path(), "aux").unwrap();
        let mut expected = vec![30, 10, 20];
        expected.sort();
        assert_eq!(c.profiles[0].timestamps(), expected);
    }

    #[test]
    fn parse_error_names_line() {
        let f = write_tmp("{\"profile_id\":\"a1\"}\n{not json\n");
        match load_corpus(f.path(), "aux") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_embedding_errors() {
        let f = write_tmp("{\"profile_id\":\"a1\"}\n{\"profile_id\":\"a1\"}\n");
        assert!(matches!(load_corpus(f.path(), "aux"), Err(Error::DuplicateProfile(id)) if id == "a1"));
        let f = write_tmp(
            "{\"profile_id\":\"a1\",\"photo_embedding\":[0.0,1.0]}\n{\"profile_id\":\"a2\",\"photo_embedding\":[1.0]}\n",
        );
        assert!(matches!(
            load_corpus(f.path(), "aux"),
            Err(Error::EmbeddingLength { expected: 2, found: 1, .. })
        ));
    }

    fn corpora() -> (Corpus, Corpus) {
        let aux = Corpus::new("aux", vec![Profile::new("a1", ""), Profile::new("a2", "")]).unwrap();
        let target = Corpus::new("target", vec![Profile::new("t1", ""), Profile::new("t2", "")]).unwrap();
        (aux, target)
    }

    #[test]
    fn labels_header_only() {
        let (aux, target) = corpora();
        let f = write_tmp("aux_id,target_id,coupled\n");
        assert!(load_labels(f.path(), &aux, &target).unwrap().is_empty());
    }

    #[test]
    fn labels_single_row() {
        let (aux, target) = corpora();
        let f = write_tmp("aux_id,target_id,coupled\na1,t1,true\n");
        let labels = load_labels(f.path(), &aux, &target).unwrap();
        assert_eq!(labels, vec![PairLabel::new("a1", "t1", true)]);
    }

    #[test]
    fn labels_unknown_id_and_bad_bool() {
        let (aux, target) = corpora();
        let f = write_tmp("aux_id,target_id,coupled\na1,t9,true\n");
        let err = load_labels(f.path(), &aux, &target).unwrap_err();
        assert!(err.to_string().contains("t9"));
        let f = write_tmp("aux_id,target_id,coupled\na1,t1,yes\n");
        assert!(matches!(load_labels(f.path(), &aux, &target), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn labels_flag_double_coupling() {
        let (aux, target) = corpora();
        let f = write_tmp("aux_id,target_id,coupled\na1,t1,true\na1,t2,true\n");
        assert!(matches!(
            load_labels(f.path(), &aux, &target),
            Err(Error::MultipleCouplings(id)) if id == "a1"
        ));
        let f = write_tmp("aux_id,target_id,coupled\na1,t1,true\na1,t2,false\n");
        assert_eq!(load_labels(f.path(), &aux, &target).unwrap().len(), 2);
    }
}
