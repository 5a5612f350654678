//! Keyword extraction: descriptions in, normalized keyword sets out.
//!
//! Three paths produce a [`KeywordSet`]:
//! - `extract_heuristic` treats every description word as a keyword
//!   (classification-style corpora);
//! - `extract_two_step` has the LLM summarize each description so multi-word
//!   keywords like "construction truck" stay single units (detection-style);
//! - `extract_one_step` asks the model for keywords directly, with a
//!   repetition collapse for its documented failure mode.
//!
//! Keywords compare by exact string equality after normalization; a keyword
//! counts once per example (set semantics) while pre-dedupe occurrence
//! counts are retained for the optional multiset frequency mode.

pub mod normalize;
mod stopwords;

pub use normalize::{lemmatize, normalize_keyword, tokenize};
pub use stopwords::is_stop_word;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::MiningExample;
use crate::describer::{
    self, Backend, Category, Description, DescriberError, ModelRequest, PromptTemplate, Stage,
};

/// How a keyword set was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMode {
    Heuristic,
    LlmTwoStep,
    LlmOneStep,
}

/// Normalized keywords attached to one example. No stop words, no empty
/// strings, no duplicates; every keyword is lowercase and lemmatized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "KeywordSetFile", into = "KeywordSetFile")]
pub struct KeywordSet {
    pub example_id: String,
    keywords: BTreeMap<String, u32>,
    pub mode: ExtractionMode,
    pub filtered: bool,
}

impl KeywordSet {
    pub fn new(example_id: impl Into<String>, mode: ExtractionMode) -> Self {
        Self {
            example_id: example_id.into(),
            keywords: BTreeMap::new(),
            mode,
            filtered: false,
        }
    }

    /// Insert an already-normalized keyword; repeats bump its occurrence
    /// count but the set still contains it once.
    fn insert(&mut self, keyword: String) {
        if keyword.is_empty() || is_stop_word(&keyword) {
            return;
        }
        *self.keywords.entry(keyword).or_insert(0) += 1;
    }

    /// Keywords in sorted order.
    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.keywords.keys().map(|k| k.as_str())
    }

    /// Pre-dedupe occurrence counts (all 1 unless the source repeated itself).
    pub fn occurrences(&self) -> &BTreeMap<String, u32> {
        &self.keywords
    }

    pub fn contains(&self, keyword: &str) -> bool {
        self.keywords.contains_key(keyword)
    }

    pub fn len(&self) -> usize {
        self.keywords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty()
    }

    pub fn as_set(&self) -> BTreeSet<String> {
        self.keywords.keys().cloned().collect()
    }

    /// Test helper: build a set from raw strings via the normal insert path.
    pub fn from_raw<I, S>(example_id: &str, mode: ExtractionMode, raw: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = Self::new(example_id, mode);
        for kw in raw {
            set.insert(normalize_keyword(kw.as_ref()));
        }
        set
    }
}

/// On-disk schema: sorted keyword array plus occurrence counts.
#[derive(Serialize, Deserialize)]
struct KeywordSetFile {
    example_id: String,
    keywords: Vec<String>,
    #[serde(default)]
    occurrences: BTreeMap<String, u32>,
    mode: ExtractionMode,
    filtered: bool,
}

impl From<KeywordSet> for KeywordSetFile {
    fn from(set: KeywordSet) -> Self {
        Self {
            example_id: set.example_id,
            keywords: set.keywords.keys().cloned().collect(),
            occurrences: set.keywords,
            mode: set.mode,
            filtered: set.filtered,
        }
    }
}

impl From<KeywordSetFile> for KeywordSet {
    fn from(file: KeywordSetFile) -> Self {
        let mut keywords = file.occurrences;
        for kw in file.keywords {
            keywords.entry(kw).or_insert(1);
        }
        Self {
            example_id: file.example_id,
            keywords,
            mode: file.mode,
            filtered: file.filtered,
        }
    }
}

/// Per-media failures from the LLM-backed extraction paths. Partial results
/// are allowed: surviving media still contribute keywords.
#[derive(Debug)]
pub struct ExtractOutcome {
    pub set: KeywordSet,
    pub failures: Vec<(usize, String)>,
}

/// Treat each description word as a keyword: tokenize on non-alphanumeric
/// boundaries, lowercase, drop stop words, lemmatize, dedupe.
pub fn extract_heuristic(description: &Description) -> KeywordSet {
    let mut set = KeywordSet::new(&description.example_id, ExtractionMode::Heuristic);
    for text in &description.per_media_text {
        for token in tokenize(text) {
            if is_stop_word(&token) {
                continue;
            }
            set.insert(lemmatize(&token));
        }
    }
    set
}

/// Summarize each media description into keywords via the service, then
/// normalize and union across media items.
pub fn extract_two_step(
    description: &Description,
    summarize_tpl: &PromptTemplate,
    backend: &dyn Backend,
) -> ExtractOutcome {
    let mut outcome = ExtractOutcome {
        set: KeywordSet::new(&description.example_id, ExtractionMode::LlmTwoStep),
        failures: Vec::new(),
    };
    for (media_index, text) in description.per_media_text.iter().enumerate() {
        match describer::summarize_keywords(text, summarize_tpl, backend) {
            Ok(raw) => {
                for kw in raw {
                    outcome.set.insert(normalize_keyword(&kw));
                }
            }
            Err(e) => outcome.failures.push((media_index, e.to_string())),
        }
    }
    outcome
}

/// Ask the model for keywords directly (no intermediate description). The
/// response gets a repetition collapse before normalization to tame the
/// repetitive-output failure mode of keyword-only prompting.
pub fn extract_one_step(
    example: &MiningExample<'_>,
    onestep_tpl: &PromptTemplate,
    backend: &dyn Backend,
) -> Result<ExtractOutcome, DescriberError> {
    if onestep_tpl.stage != Stage::Describe {
        return Err(DescriberError::StageMismatch {
            template: onestep_tpl.name.clone(),
            expected: Stage::Describe,
            actual: onestep_tpl.stage,
        });
    }
    let prompt = onestep_tpl.render(&[])?;
    let mut outcome = ExtractOutcome {
        set: KeywordSet::new(example.id, ExtractionMode::LlmOneStep),
        failures: Vec::new(),
    };
    for (media_index, media) in example.media.iter().enumerate() {
        let request =
            ModelRequest::for_media(Stage::Describe, prompt.clone(), example.id, media_index, media);
        match backend.complete(&request) {
            Ok(completion) => {
                let raw = describer::parse_keyword_list(&completion.text);
                for kw in collapse_repeats(raw) {
                    outcome.set.insert(normalize_keyword(&kw));
                }
            }
            Err(e) => outcome.failures.push((media_index, e.to_string())),
        }
    }
    Ok(outcome)
}

/// Remove consecutive duplicate items (case- and whitespace-insensitive).
fn collapse_repeats(items: Vec<String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(items.len());
    let mut previous = String::new();
    for item in items {
        let folded = item.trim().to_lowercase();
        if folded != previous {
            out.push(item);
        }
        previous = folded;
    }
    out
}

/// Keep only keywords whose category is in `keep`; keywords missing from the
/// map default to `not_related`. Never adds keywords.
pub fn filter_by_category(
    kws: &KeywordSet,
    categories: &BTreeMap<String, Category>,
    keep: &BTreeSet<Category>,
) -> KeywordSet {
    let mut filtered = KeywordSet::new(&kws.example_id, kws.mode);
    filtered.filtered = true;
    for (kw, &count) in &kws.keywords {
        let category = categories.get(kw).copied().unwrap_or(Category::NotRelated);
        if keep.contains(&category) {
            filtered.keywords.insert(kw.clone(), count);
        }
    }
    filtered
}
