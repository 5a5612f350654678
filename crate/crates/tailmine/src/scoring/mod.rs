//! Per-example novelty scores.
//!
//! Two families of signal share the convention that higher means more novel:
//!
//! - **Keyword frequency** ([`vlmine_score`]): pool an example's per-keyword
//!   corpus frequencies (min or avg) and apply a reverse monotonic transform.
//!   Keywords that recur across the corpus — including recurrent model
//!   hallucinations — acquire high frequency and therefore contribute low
//!   novelty, which is what suppresses them.
//! - **Model uncertainty** ([`predictive_entropy`], [`variation_ratio`],
//!   [`ensemble_variance`]): computed from user-supplied prediction files.
//!
//! [`assemble_signals`] joins score columns into a [`SignalMatrix`] for
//! selection, excluding (and reporting) examples that lack any column.

mod frequency;
mod signals;
mod uncertainty;

pub use frequency::{
    build_frequency_table, build_frequency_table_with_mode, vlmine_score, FrequencyMode,
    FrequencyTable, Phi, Pooling,
};
pub use signals::{
    assemble_signals, format_score, read_score_csv, write_score_csv, Assembled, Exclusion,
    ScoreColumn, SignalMatrix,
};
pub use uncertainty::{
    ensemble_variance, group_by_example, load_predictions, predictive_entropy, validate_probs,
    variation_ratio, BoxRecord, Prediction, SIMPLEX_TOLERANCE,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("prediction for example {id:?}: {message}")]
    InvalidProbs { id: String, message: String },
    #[error("example {id:?}: ensemble variance needs at least 2 members, got {members}")]
    TooFewMembers { id: String, members: usize },
    #[error("example {id:?}: members mix probability and box records")]
    MixedPredictionShapes { id: String },
    #[error("prediction file {path}: line {line}: {message}")]
    PredictionFile {
        path: String,
        line: usize,
        message: String,
    },
    #[error("signal matrix needs at least one column")]
    NoColumns,
    #[error("duplicate signal column {0:?}")]
    DuplicateColumn(String),
    #[error("unknown signal column {0:?}")]
    UnknownColumn(String),
    #[error("score column {column:?} references unknown example {id:?}")]
    UnknownExample { id: String, column: String },
    #[error("score for example {id:?} in column {column:?} is not finite ({value})")]
    NonFiniteScore {
        id: String,
        column: String,
        value: f64,
    },
    #[error("signal matrix shape: {0}")]
    Shape(String),
    #[error("csv: {0}")]
    Csv(String),
}
