//! `tailmine score`: one CSV per novelty signal plus an exclusion report
//! for examples that could not be scored.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};

use super::common;
use crate::config::{EmptyKeywordPolicy, RunConfig};
use crate::lock::OutDirLock;
use crate::Outcome;
use tailmine::corpus::Corpus;
use tailmine::keywords::KeywordSet;
use tailmine::scoring::{
    build_frequency_table_with_mode, ensemble_variance, group_by_example, load_predictions,
    predictive_entropy, variation_ratio, vlmine_score, write_score_csv, Prediction,
};

struct ScoreOutput {
    /// (id, score) in corpus order.
    rows: Vec<(String, f64)>,
    exclusions: Vec<(String, String)>,
}

fn order_rows(corpus: &Corpus, scores: BTreeMap<String, f64>) -> Vec<(String, f64)> {
    let mut rows: Vec<(String, f64)> = scores.into_iter().collect();
    rows.sort_by_key(|(id, _)| corpus.position(id).unwrap_or(usize::MAX));
    rows
}

fn vlmine_signal(
    config: &RunConfig,
    corpus: &Corpus,
    population: &[String],
    sets: &BTreeMap<String, KeywordSet>,
) -> ScoreOutput {
    let score_cfg = &config.score;
    let population_sets: Vec<KeywordSet> = population
        .iter()
        .filter_map(|id| sets.get(id).cloned())
        .collect();
    let table = build_frequency_table_with_mode(&population_sets, score_cfg.frequency);

    let mut scores: BTreeMap<String, f64> = BTreeMap::new();
    let mut empty_ids = Vec::new();
    let mut exclusions = Vec::new();
    for id in population {
        match sets.get(id) {
            None => exclusions.push((id.clone(), "missing keyword set".to_string())),
            Some(set) => {
                match vlmine_score(set, &table, score_cfg.pooling, score_cfg.effective_phi()) {
                    Some(score) => {
                        scores.insert(id.clone(), score);
                    }
                    None => empty_ids.push(id.clone()),
                }
            }
        }
    }

    match score_cfg.empty_keywords {
        EmptyKeywordPolicy::Exclude => {
            for id in empty_ids {
                exclusions.push((id, "empty keyword set".to_string()));
            }
        }
        EmptyKeywordPolicy::Last => {
            let floor = scores.values().copied().fold(f64::INFINITY, f64::min);
            let sentinel = if floor.is_finite() { floor - 1.0 } else { 0.0 };
            for id in empty_ids {
                scores.insert(id, sentinel);
            }
        }
        EmptyKeywordPolicy::First => {
            let ceiling = scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
            let sentinel = if ceiling.is_finite() { ceiling + 1.0 } else { 0.0 };
            for id in empty_ids {
                scores.insert(id, sentinel);
            }
        }
    }

    ScoreOutput {
        rows: order_rows(corpus, scores),
        exclusions,
    }
}

fn single_member_predictions<'a>(
    predictions: &'a [Prediction],
    population: &[String],
    corpus: &Corpus,
    signal: &str,
) -> Result<Vec<&'a Prediction>> {
    if predictions.iter().any(|p| p.member.is_some()) {
        bail!("{signal} expects one prediction per example; found ensemble member records (use the ensemble_variance signal)");
    }
    let mut seen = BTreeMap::new();
    for pred in predictions {
        if !corpus.contains(&pred.example_id) {
            bail!("prediction references unknown example {:?}", pred.example_id);
        }
        if seen.insert(pred.example_id.clone(), pred).is_some() {
            bail!("duplicate prediction for example {:?}", pred.example_id);
        }
    }
    Ok(population.iter().filter_map(|id| seen.get(id).copied()).collect())
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    let corpus = common::load_corpus(config)?;
    if config.score.signals.is_empty() {
        bail!("score.signals is empty");
    }

    let _lock = OutDirLock::acquire(&config.out_dir)?;
    let store = common::store(config);
    let population = common::population_ids(&corpus, config.score.population);

    // Keyword attachments, where present.
    let mut sets: BTreeMap<String, KeywordSet> = BTreeMap::new();
    for id in &population {
        if let Ok(bytes) = store.read("keywords", id, "json") {
            let set: KeywordSet = serde_json::from_slice(&bytes)
                .with_context(|| format!("parsing keyword set for {id}"))?;
            sets.insert(id.clone(), set);
        }
    }

    // Prediction records, if any uncertainty signal is requested.
    let needs_predictions = config
        .score
        .signals
        .iter()
        .any(|s| matches!(s.as_str(), "entropy" | "variation_ratio" | "ensemble_variance"));
    let predictions = if needs_predictions {
        let path = config
            .score
            .predictions
            .as_ref()
            .context("uncertainty signals need `score.predictions`")?;
        load_predictions(path)?
    } else {
        Vec::new()
    };

    let scores_dir = store.root().join("scores");
    std::fs::create_dir_all(&scores_dir)?;

    let mut all_exclusions: Vec<(String, String, String)> = Vec::new();
    for signal in &config.score.signals {
        let output = match signal.as_str() {
            "vlmine" => vlmine_signal(config, &corpus, &population, &sets),
            "entropy" | "variation_ratio" => {
                let per_id =
                    single_member_predictions(&predictions, &population, &corpus, signal)?;
                let mut scores = BTreeMap::new();
                for pred in per_id {
                    let value = if signal == "entropy" {
                        predictive_entropy(pred)?
                    } else {
                        variation_ratio(pred)?
                    };
                    scores.insert(pred.example_id.clone(), value);
                }
                let missing: Vec<_> = population
                    .iter()
                    .filter(|id| !scores.contains_key(*id))
                    .map(|id| (id.clone(), "no prediction record".to_string()))
                    .collect();
                ScoreOutput {
                    rows: order_rows(&corpus, scores),
                    exclusions: missing,
                }
            }
            "ensemble_variance" => {
                let mut scores = BTreeMap::new();
                for (id, members) in group_by_example(predictions.clone()) {
                    if !corpus.contains(&id) {
                        bail!("prediction references unknown example {id:?}");
                    }
                    scores.insert(id.clone(), ensemble_variance(&members)?);
                }
                scores.retain(|id, _| population.contains(id));
                let missing: Vec<_> = population
                    .iter()
                    .filter(|id| !scores.contains_key(*id))
                    .map(|id| (id.clone(), "no prediction record".to_string()))
                    .collect();
                ScoreOutput {
                    rows: order_rows(&corpus, scores),
                    exclusions: missing,
                }
            }
            other => bail!("unknown signal {other:?} (expected vlmine, entropy, variation_ratio, or ensemble_variance)"),
        };

        write_score_csv(scores_dir.join(format!("{signal}.csv")), signal, &output.rows)?;
        println!(
            "signal {signal}: scored {} example(s), {} excluded",
            output.rows.len(),
            output.exclusions.len()
        );
        for (id, reason) in output.exclusions {
            all_exclusions.push((id, signal.clone(), reason));
        }
    }

    let mut writer = csv::Writer::from_path(scores_dir.join("exclusions.csv"))
        .map_err(|e| anyhow::anyhow!("exclusions.csv: {e}"))?;
    writer
        .write_record(["id", "signal", "reason"])
        .map_err(|e| anyhow::anyhow!("exclusions.csv: {e}"))?;
    for (id, signal, reason) in &all_exclusions {
        writer
            .write_record([id, signal, reason])
            .map_err(|e| anyhow::anyhow!("exclusions.csv: {e}"))?;
    }
    writer.flush()?;

    config.write_snapshot("score")?;
    Ok(Outcome::Success)
}
