//! Behavior coding: utterance-level classification of therapist utterances
//! and session-level regression of the global codes.

mod coder;
mod globals;
mod svr;
mod tfidf;

pub use coder::{
    class_weights, predict_codes, BaselineCoder, CoderConfig, FeatureHasher, LinearClassifier, SparseVec, UtteranceCoder,
};
pub use globals::{
    collapse_low, crossvalidate_globals, fold_assignment, round_score, CodeCvMetrics, CvReport, GlobalExample,
    GlobalRegressor, GlobalsConfig, MIN_TRAIN_SESSIONS,
};
pub use svr::{Kernel, Svr, SvrConfig};
pub use tfidf::{stopwords, TfidfConfig, TfidfVectorizer};

use thiserror::Error;

/// Format tag written at the top of every model file.
pub const MODEL_FORMAT: &str = "mifi-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CodeError {
    #[error("no training example for class {0}")]
    MissingClass(String),
    #[error("session has no tokens")]
    EmptySession,
    #[error("need at least {needed} sessions, got {got}")]
    TooFewSessions { needed: usize, got: usize },
    #[error("score {0} outside [1, 5]")]
    ScoreOutOfRange(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model file: {0}")]
    ModelFile(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_header(format: &str, version: u32, kind: &str, expected_kind: &str) -> Result<(), CodeError> {
    if format != MODEL_FORMAT {
        return Err(CodeError::ModelFile(format!("unknown format `{format}`")));
    }
    if version != MODEL_VERSION {
        return Err(CodeError::ModelFile(format!("unsupported version {version}")));
    }
    if kind != expected_kind {
        return Err(CodeError::ModelFile(format!("expected a {expected_kind} model, found {kind}")));
    }
    Ok(())
}
