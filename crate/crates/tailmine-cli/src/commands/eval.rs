//! `tailmine eval`: rareness-distribution and correlation reports, over a
//! labeled corpus or the self-contained synthetic benchmark.

use anyhow::{bail, Context, Result};
use serde::Serialize;

use super::common;
use crate::config::RunConfig;
use crate::lock::OutDirLock;
use crate::Outcome;
use tailmine::corpus::Split;
use tailmine::evalbench::{
    correlation_export, generate_synthetic, rareness_report, write_buckets_csv,
    write_class_buckets_csv, write_correlations_csv, write_pairs_csv, RarenessReport,
};
use tailmine::scoring::{
    assemble_signals, build_frequency_table_with_mode, predictive_entropy, read_score_csv,
    vlmine_score, Assembled, ScoreColumn,
};
use tailmine::selection::read_mined_csv;

#[derive(Serialize)]
struct RareHardSummary {
    injected: usize,
    recovered: usize,
    fraction: f64,
}

#[derive(Serialize)]
struct EvalSummary {
    seed: u64,
    tail_threshold: u32,
    tail_recall: f64,
    mined_evaluable: u64,
    skipped: Vec<String>,
    warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rare_hard: Option<RareHardSummary>,
}

fn write_reports(
    config: &RunConfig,
    report: &RarenessReport,
    rare_hard: Option<RareHardSummary>,
) -> Result<()> {
    write_buckets_csv(report, config.out_dir.join("buckets.csv"))?;
    write_class_buckets_csv(report, config.out_dir.join("class_buckets.csv"))?;
    let summary = EvalSummary {
        seed: config.seed,
        tail_threshold: report.tail_threshold,
        tail_recall: report.tail_recall,
        mined_evaluable: report.evaluable,
        skipped: report.skipped.clone(),
        warnings: report.warnings.clone(),
        rare_hard,
    };
    common::write_json(&config.out_dir.join("summary.json"), &summary)?;
    Ok(())
}

fn eval_corpus(config: &RunConfig) -> Result<Outcome> {
    let corpus = common::load_corpus(config)?;
    let has_labels = corpus.examples().iter().any(|ex| ex.eval_label().is_some());
    anyhow::ensure!(
        has_labels,
        "corpus has no labels; rareness evaluation needs ground-truth classes"
    );

    let mined_path = config
        .eval
        .mined
        .clone()
        .unwrap_or_else(|| config.out_dir.join("mined.csv"));
    anyhow::ensure!(
        mined_path.exists(),
        "mined set {} not found (run `tailmine mine` first)",
        mined_path.display()
    );
    let mined = read_mined_csv(&mined_path)?;

    let _lock = OutDirLock::acquire(&config.out_dir)?;
    let report = rareness_report(&mined, &corpus, config.eval.tail_threshold)?;
    write_reports(config, &report, None)?;

    if config.eval.correlations {
        let scores_dir = config.out_dir.join("attachments").join("scores");
        let mut columns = Vec::new();
        for signal in &config.score.signals {
            let path = scores_dir.join(format!("{signal}.csv"));
            if path.exists() {
                columns.push(read_score_csv(&path)?);
            }
        }
        if columns.len() < 2 {
            bail!(
                "correlation export needs at least 2 signal columns, found {} \
                 (set eval.correlations = false to skip)",
                columns.len()
            );
        }
        let assembled = assemble_signals(&corpus, &columns)?;
        let correlations = correlation_export(&assembled.matrix)?;
        write_correlations_csv(&correlations, config.out_dir.join("correlations.csv"))?;
        write_pairs_csv(&assembled.matrix, config.out_dir.join("pairs.csv"))?;
    }

    println!(
        "tail_recall {:.4} over threshold {} ({} mined evaluable)",
        report.tail_recall, report.tail_threshold, report.evaluable
    );
    Ok(Outcome::Success)
}

/// Signal matrix for a synthetic run: frequency novelty over the unlabeled
/// pool plus predictive entropy from the synthetic predictions.
fn synthetic_signals(
    config: &RunConfig,
    data: &tailmine::evalbench::SyntheticData,
) -> Result<Assembled> {
    let unlabeled_sets: Vec<_> = data
        .corpus
        .examples()
        .iter()
        .zip(&data.keyword_sets)
        .filter(|(ex, _)| ex.split == Split::UnlabeledPool)
        .map(|(_, set)| set.clone())
        .collect();
    let table = build_frequency_table_with_mode(&unlabeled_sets, config.score.frequency);

    let mut vlmine = ScoreColumn::new("vlmine");
    let mut entropy = ScoreColumn::new("entropy");
    for ((ex, set), pred) in data
        .corpus
        .examples()
        .iter()
        .zip(&data.keyword_sets)
        .zip(&data.predictions)
    {
        if ex.split != Split::UnlabeledPool {
            continue;
        }
        if let Some(score) =
            vlmine_score(set, &table, config.score.pooling, config.score.effective_phi())
        {
            vlmine.scores.insert(ex.id.clone(), score);
        }
        entropy
            .scores
            .insert(ex.id.clone(), predictive_entropy(pred)?);
    }
    Ok(assemble_signals(&data.corpus, &[vlmine, entropy])?)
}

fn eval_synthetic(config: &RunConfig) -> Result<Outcome> {
    let mut spec = config.eval.synthetic.clone().expect("caller checked");
    spec.seed = config.seed;

    let _lock = OutDirLock::acquire(&config.out_dir)?;
    let data = generate_synthetic(&spec).context("generating synthetic corpus")?;
    let assembled = synthetic_signals(config, &data)?;

    let mined = {
        let mut mine_config = config.clone();
        // The synthetic matrix always carries these two columns.
        if mine_config.mine.column.is_none() {
            mine_config.mine.column = Some("vlmine".to_string());
        }
        super::mine::select_for_eval(&mine_config, &assembled.matrix)?
    };

    let report = rareness_report(&mined, &data.corpus, config.eval.tail_threshold)?;
    let rare_hard = if data.rare_hard_ids.is_empty() {
        None
    } else {
        let recovered = mined
            .ids()
            .filter(|id| data.rare_hard_ids.contains(*id))
            .count();
        Some(RareHardSummary {
            injected: data.rare_hard_ids.len(),
            recovered,
            fraction: recovered as f64 / data.rare_hard_ids.len() as f64,
        })
    };
    write_reports(config, &report, rare_hard)?;

    let correlations = correlation_export(&assembled.matrix)?;
    write_correlations_csv(&correlations, config.out_dir.join("correlations.csv"))?;
    write_pairs_csv(&assembled.matrix, config.out_dir.join("pairs.csv"))?;

    tailmine::selection::write_mined_csv(&mined, &config.out_dir.join("mined.csv"))?;
    println!(
        "synthetic benchmark (seed {}): tail_recall {:.4} with {} over budget {}",
        config.seed, report.tail_recall, mined.method, config.mine.budget
    );
    Ok(Outcome::Success)
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    let outcome = if config.eval.synthetic.is_some() {
        eval_synthetic(config)?
    } else {
        eval_corpus(config)?
    };
    config.write_snapshot("eval")?;
    Ok(outcome)
}
