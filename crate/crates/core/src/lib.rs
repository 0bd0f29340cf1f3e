//! Cross-network profile matching on unstructured public attributes, and
//! countermeasures that limit it.

pub mod countermeasures;
pub mod error;
pub mod evaluation;
pub mod lda;
pub mod matching;
pub mod pipeline;
pub mod profile;
pub mod reference;
pub mod similarity;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use lda::{fit_lda, LdaConfig, LdaModel};
pub use profile::{Corpus, Gender, NameField, NameFieldKind, PairLabel, Post, Profile};
pub use reference::{Gazetteer, NameGenderTable, Providers, SentimentLexicon};
pub use similarity::{
    compute_similarity_vector, Attribute, NormalizationSpec, ProfileFeatures, SimilarityConfig,
    SimilarityVector,
};
pub use training::{score_pair, TrainerKind, TrainingSet, WeightModel};
