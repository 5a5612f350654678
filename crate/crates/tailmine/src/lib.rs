//! Long-tail data mining over unlabeled example pools.
//!
//! The pipeline runs in five stages, each usable on its own:
//!
//! 1. [`corpus`] — load a JSONL manifest of examples and persist per-example
//!    stage outputs in a sidecar attachment store.
//! 2. [`describer`] — obtain natural-language descriptions and keyword
//!    summaries from a vision-language / language model service (live HTTP,
//!    read-through cache, or deterministic fixture).
//! 3. [`keywords`] — turn descriptions into normalized keyword sets
//!    (rule-based heuristic, two-step LLM summarization, or one-step
//!    keyword-only prompting), optionally filtered by category.
//! 4. [`scoring`] — compute per-example novelty signals: keyword-frequency
//!    rarity (VLMine), predictive entropy, variation ratio, and ensemble
//!    variance over user-supplied prediction files.
//! 5. [`selection`] — pick a labeling budget from the signal matrix by
//!    top-k, Pareto mining (layer peeling over the dominance frontier), or
//!    a z-normalized linear combination.
//!
//! [`evalbench`] generates synthetic long-tail corpora and reports
//! tail-recall and signal-correlation metrics for comparing mining methods.

pub mod corpus;
pub mod describer;
pub mod evalbench;
pub mod keywords;
pub mod scoring;
pub mod selection;

pub use corpus::{Corpus, Example, MiningExample, Split};
pub use describer::{Backend, BackendKind, Category, Description, PromptTemplate, Stage};
pub use keywords::{ExtractionMode, KeywordSet};
pub use scoring::{FrequencyTable, Phi, Pooling, Prediction, SignalMatrix};
pub use selection::{MinedItem, MinedSet, SelectionMethod};

/// Lowercase hex of a byte string; used for cache keys and file stems.
pub(crate) fn hex_string(bytes: &[u8]) -> String {
    use std::fmt::Write;
    let mut out = String::with_capacity(bytes.len() * 2);
    for byte in bytes {
        write!(out, "{byte:02x}").expect("writing to a String cannot fail");
    }
    out
}
