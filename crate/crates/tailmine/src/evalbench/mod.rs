//! Desk-scale evaluation: synthetic long-tail corpora, rareness-distribution
//! reports for mined sets, and pairwise signal-correlation exports.
//!
//! The synthetic family gives every class a power-law cardinality profile
//! and a class-unique keyword, plus a shared common-keyword pool, so
//! frequency-based novelty has real tail structure to find. Prediction
//! uncertainty is driven by a per-example hardness scalar drawn
//! independently of class rarity: a temperature on an otherwise-correct
//! class posterior. That separation is what the benchmark measures — rarity
//! signals should find rare examples, uncertainty signals find hard ones,
//! and combinations should find both.

mod synthetic;

pub use synthetic::{generate_synthetic, RareHardInjection, SyntheticData, SyntheticSpec};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, Split};
use crate::scoring::{ScoringError, SignalMatrix};
use crate::selection::MinedSet;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),
    #[error("correlation export needs at least 2 signal columns")]
    NeedsTwoColumns,
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("csv: {0}")]
    Csv(String),
}

/// Per-class slice of a rareness report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassBucket {
    pub class: String,
    pub labeled_cardinality: u32,
    pub mined_count: u64,
    pub unlabeled_pool: u64,
}

/// Distribution of a mined set over class rareness, where rareness is the
/// class's labeled-pool cardinality. Exposes both groupings: cardinality
/// bins (`buckets`) and per-class rows (`class_buckets`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RarenessReport {
    /// labeled-pool cardinality -> number of mined examples.
    pub buckets: BTreeMap<u32, u64>,
    pub class_buckets: Vec<ClassBucket>,
    pub tail_threshold: u32,
    /// Mined fraction of the unlabeled examples whose class has
    /// labeled-pool cardinality <= `tail_threshold`.
    pub tail_recall: f64,
    /// Mined examples that had a usable label.
    pub evaluable: u64,
    /// Mined ids excluded for having no label (or not being in the corpus).
    pub skipped: Vec<String>,
    pub warnings: Vec<String>,
}

/// Bucket a mined set by class rareness and compute tail recall.
///
/// Mined ids without a label are excluded and listed rather than aborting.
/// An empty tail denominator (threshold below every cardinality, or no
/// labeled classes at all) yields recall 0 with a warning.
pub fn rareness_report(
    mined: &MinedSet,
    corpus: &Corpus,
    tail_threshold: u32,
) -> Result<RarenessReport, EvalError> {
    let mut labeled_cardinality: BTreeMap<String, u32> = BTreeMap::new();
    let mut unlabeled_pool: BTreeMap<String, u64> = BTreeMap::new();
    let mut classes: BTreeSet<String> = BTreeSet::new();
    for example in corpus.examples() {
        if let Some(label) = example.eval_label() {
            classes.insert(label.to_string());
            match example.split {
                Split::LabeledPool => {
                    *labeled_cardinality.entry(label.to_string()).or_insert(0) += 1
                }
                Split::UnlabeledPool => {
                    *unlabeled_pool.entry(label.to_string()).or_insert(0) += 1
                }
            }
        }
    }

    let mut report = RarenessReport {
        buckets: BTreeMap::new(),
        class_buckets: Vec::new(),
        tail_threshold,
        tail_recall: 0.0,
        evaluable: 0,
        skipped: Vec::new(),
        warnings: Vec::new(),
    };

    let mut mined_per_class: BTreeMap<String, u64> = BTreeMap::new();
    let mut tail_mined = 0u64;
    for item in &mined.items {
        let label = corpus
            .get(&item.example_id)
            .and_then(|ex| ex.eval_label().map(|l| l.to_string()));
        let Some(label) = label else {
            report.skipped.push(item.example_id.clone());
            continue;
        };
        let cardinality = labeled_cardinality.get(&label).copied().unwrap_or(0);
        *report.buckets.entry(cardinality).or_insert(0) += 1;
        *mined_per_class.entry(label.clone()).or_insert(0) += 1;
        report.evaluable += 1;
        if cardinality <= tail_threshold {
            tail_mined += 1;
        }
    }
    if !report.skipped.is_empty() {
        report.warnings.push(format!(
            "{} mined example(s) had no label and were excluded",
            report.skipped.len()
        ));
    }

    let tail_pool: u64 = classes
        .iter()
        .filter(|class| labeled_cardinality.get(*class).copied().unwrap_or(0) <= tail_threshold)
        .map(|class| unlabeled_pool.get(class).copied().unwrap_or(0))
        .sum();
    if tail_pool == 0 {
        report
            .warnings
            .push("no unlabeled examples fall under the tail threshold; recall reported as 0".into());
    } else {
        report.tail_recall = tail_mined as f64 / tail_pool as f64;
    }

    for class in &classes {
        report.class_buckets.push(ClassBucket {
            class: class.clone(),
            labeled_cardinality: labeled_cardinality.get(class).copied().unwrap_or(0),
            mined_count: mined_per_class.get(class).copied().unwrap_or(0),
            unlabeled_pool: unlabeled_pool.get(class).copied().unwrap_or(0),
        });
    }
    report
        .class_buckets
        .sort_by(|a, b| (a.labeled_cardinality, &a.class).cmp(&(b.labeled_cardinality, &b.class)));

    Ok(report)
}

/// Pearson correlation with population moments; `None` when either side is
/// constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.is_empty() {
        return None;
    }
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        cov += (x - mean_x) * (y - mean_y);
        var_x += (x - mean_x).powi(2);
        var_y += (y - mean_y).powi(2);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return None;
    }
    Some(cov / (var_x.sqrt() * var_y.sqrt()))
}

/// Average ranks (1-based), sharing the mean rank across ties.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let shared = (i + 1..=j).map(|r| r as f64).sum::<f64>() / (j - i) as f64;
        for &idx in &order[i..j] {
            ranks[idx] = shared;
        }
        i = j;
    }
    ranks
}

/// Spearman rank correlation (Pearson over average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPair {
    pub column_a: String,
    pub column_b: String,
    /// `None` marks an undefined coefficient (a constant column).
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub pairs: Vec<CorrelationPair>,
}

/// Pearson and Spearman for every column pair (including the diagonal).
/// The full per-example score pairs for plotting come from
/// [`write_pairs_csv`].
pub fn correlation_export(matrix: &SignalMatrix) -> Result<CorrelationReport, EvalError> {
    if matrix.columns().len() < 2 {
        return Err(EvalError::NeedsTwoColumns);
    }
    let mut pairs = Vec::new();
    for (i, a) in matrix.columns().iter().enumerate() {
        for b in &matrix.columns()[i..] {
            let xs = matrix.column_values(a)?;
            let ys = matrix.column_values(b)?;
            pairs.push(CorrelationPair {
                column_a: a.clone(),
                column_b: b.clone(),
                pearson: pearson(&xs, &ys),
                spearman: spearman(&xs, &ys),
            });
        }
    }
    Ok(CorrelationReport { pairs })
}

fn csv_err(e: impl std::fmt::Display) -> EvalError {
    EvalError::Csv(e.to_string())
}

/// `buckets.csv`: cardinality bins.
pub fn write_buckets_csv(report: &RarenessReport, path: impl AsRef<Path>) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(csv_err)?;
    w.write_record(["labeled_cardinality", "mined_count"]).map_err(csv_err)?;
    for (cardinality, count) in &report.buckets {
        w.write_record([cardinality.to_string(), count.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)?;
    Ok(())
}

/// `class_buckets.csv`: the per-class grouping of the same data.
pub fn write_class_buckets_csv(
    report: &RarenessReport,
    path: impl AsRef<Path>,
) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(csv_err)?;
    w.write_record(["class", "labeled_cardinality", "mined_count", "unlabeled_pool"])
        .map_err(csv_err)?;
    for bucket in &report.class_buckets {
        w.write_record([
            bucket.class.clone(),
            bucket.labeled_cardinality.to_string(),
            bucket.mined_count.to_string(),
            bucket.unlabeled_pool.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)?;
    Ok(())
}

/// `correlations.csv`: one row per column pair; `NA` marks undefined
/// coefficients.
pub fn write_correlations_csv(
    report: &CorrelationReport,
    path: impl AsRef<Path>,
) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(csv_err)?;
    w.write_record(["column_a", "column_b", "pearson", "spearman"]).map_err(csv_err)?;
    let cell = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| format!("{v}"));
    for pair in &report.pairs {
        w.write_record([
            pair.column_a.clone(),
            pair.column_b.clone(),
            cell(pair.pearson),
            cell(pair.spearman),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)?;
    Ok(())
}

/// `pairs.csv`: the full per-example score pairs for external plotting, one
/// row per example per unordered column pair.
pub fn write_pairs_csv(matrix: &SignalMatrix, path: impl AsRef<Path>) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(csv_err)?;
    w.write_record(["id", "column_a", "column_b", "score_a", "score_b"]).map_err(csv_err)?;
    for (i, a) in matrix.columns().iter().enumerate() {
        for b in &matrix.columns()[i + 1..] {
            let xs = matrix.column_values(a)?;
            let ys = matrix.column_values(b)?;
            for ((id, &x), &y) in matrix.example_ids().iter().zip(&xs).zip(&ys) {
                w.write_record([
                    id.clone(),
                    a.clone(),
                    b.clone(),
                    format!("{x}"),
                    format!("{y}"),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(csv_err)?;
    Ok(())
}
