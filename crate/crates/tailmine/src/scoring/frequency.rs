//! Corpus-wide keyword frequencies and the frequency-based novelty score.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::keywords::KeywordSet;

/// Whether a keyword counts once per example (set) or once per occurrence
/// (multiset) when building the table and pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyMode {
    #[default]
    Set,
    Multiset,
}

/// Keyword -> number of examples mentioning it (or total occurrences in
/// multiset mode), over exactly the scoring population.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrequencyTable {
    counts: BTreeMap<String, u64>,
    total_examples: u64,
    #[serde(default)]
    mode: FrequencyMode,
}

impl FrequencyTable {
    pub fn count(&self, keyword: &str) -> Option<u64> {
        self.counts.get(keyword).copied()
    }

    /// Count for scoring: keywords outside the table population are at least
    /// as rare as a singleton, so unseen keywords count as 1.
    pub fn count_or_unseen(&self, keyword: &str) -> u64 {
        self.count(keyword).unwrap_or(1)
    }

    pub fn total_examples(&self) -> u64 {
        self.total_examples
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn mode(&self) -> FrequencyMode {
        self.mode
    }
}

/// Count keyword frequencies over a population of keyword sets. The result
/// is independent of input order.
pub fn build_frequency_table(keyword_sets: &[KeywordSet]) -> FrequencyTable {
    build_frequency_table_with_mode(keyword_sets, FrequencyMode::Set)
}

pub fn build_frequency_table_with_mode(
    keyword_sets: &[KeywordSet],
    mode: FrequencyMode,
) -> FrequencyTable {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for set in keyword_sets {
        for (keyword, &occurrences) in set.occurrences() {
            let increment = match mode {
                FrequencyMode::Set => 1,
                FrequencyMode::Multiset => u64::from(occurrences),
            };
            *counts.entry(keyword.clone()).or_insert(0) += increment;
        }
    }
    FrequencyTable {
        counts,
        total_examples: keyword_sets.len() as u64,
        mode,
    }
}

/// How per-keyword frequencies pool into one statistic: the rarest keyword
/// (min) or the mean over all keywords (avg).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Min,
    Avg,
}

/// Reverse monotonic transform applied to the pooled frequency. Negate keeps
/// integer counts readable; neg-log turns the pooled frequency fraction into
/// a surprisal-like quantity. Both make rarer strictly higher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phi {
    Negate,
    NegLog,
}

impl Phi {
    /// Default pairing: negate for min pooling, neg-log for avg pooling.
    pub fn default_for(pooling: Pooling) -> Phi {
        match pooling {
            Pooling::Min => Phi::Negate,
            Pooling::Avg => Phi::NegLog,
        }
    }

    pub fn apply(self, pooled: f64, total_examples: u64) -> f64 {
        match self {
            Phi::Negate => -pooled,
            Phi::NegLog => -(pooled / total_examples.max(1) as f64).ln(),
        }
    }
}

/// Novelty of one example from its keyword frequencies: pool the per-keyword
/// counts, then apply the reverse monotonic transform. An empty keyword set
/// has no frequency evidence and yields an explicit missing score.
pub fn vlmine_score(
    kws: &KeywordSet,
    table: &FrequencyTable,
    pooling: Pooling,
    phi: Phi,
) -> Option<f64> {
    if kws.is_empty() {
        return None;
    }
    let pooled = match (pooling, table.mode()) {
        (Pooling::Min, _) => kws
            .keywords()
            .map(|k| table.count_or_unseen(k) as f64)
            .fold(f64::INFINITY, f64::min),
        (Pooling::Avg, FrequencyMode::Set) => {
            let sum: f64 = kws.keywords().map(|k| table.count_or_unseen(k) as f64).sum();
            sum / kws.len() as f64
        }
        (Pooling::Avg, FrequencyMode::Multiset) => {
            // Keywords enter the mean once per occurrence.
            let mut sum = 0.0;
            let mut n = 0u64;
            for (keyword, &occurrences) in kws.occurrences() {
                sum += table.count_or_unseen(keyword) as f64 * f64::from(occurrences);
                n += u64::from(occurrences);
            }
            sum / n as f64
        }
    };
    Some(phi.apply(pooled, table.total_examples()))
}
