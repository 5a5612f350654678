//! `tailmine mine`: select a labeling budget from the score CSVs and write
//! the mined set plus run metadata.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use super::common;
use crate::config::RunConfig;
use crate::lock::OutDirLock;
use crate::Outcome;
use tailmine::corpus::Corpus;
use tailmine::scoring::{assemble_signals, read_score_csv, Exclusion, ScoreColumn, SignalMatrix};
use tailmine::selection::{
    collapse_by_group, expand_groups, layer_summary, linear_mine, pareto_mine, top_k,
    write_mined_csv, MinedSet, SelectionMethod,
};

#[derive(Serialize)]
struct MineMetadata {
    method: SelectionMethod,
    budget: usize,
    seed: u64,
    columns: Vec<String>,
    pooling: tailmine::scoring::Pooling,
    phi: tailmine::scoring::Phi,
    population: usize,
    selected: usize,
    layers: String,
    group_by: bool,
    excluded: Vec<Exclusion>,
}

fn read_columns(config: &RunConfig) -> Result<Vec<ScoreColumn>> {
    let scores_dir = config.out_dir.join("attachments").join("scores");
    let mut columns = Vec::new();
    for signal in &config.score.signals {
        let path = scores_dir.join(format!("{signal}.csv"));
        anyhow::ensure!(
            path.exists(),
            "score CSV {} not found (run `tailmine score` first)",
            path.display()
        );
        columns.push(read_score_csv(&path)?);
    }
    Ok(columns)
}

/// Dispatch on the configured selection method; also used by the synthetic
/// benchmark in `eval`.
pub(crate) fn select_for_eval(config: &RunConfig, matrix: &SignalMatrix) -> Result<MinedSet> {
    select(config, matrix, config.mine.budget)
}

fn select(
    config: &RunConfig,
    matrix: &SignalMatrix,
    budget: usize,
) -> Result<MinedSet> {
    let seed = config.seed;
    Ok(match config.mine.method {
        SelectionMethod::Pareto => pareto_mine(matrix, budget, seed)?,
        SelectionMethod::Linear => linear_mine(matrix, budget, seed)?,
        SelectionMethod::TopK => {
            let column = match &config.mine.column {
                Some(column) => column.clone(),
                None if matrix.columns().len() == 1 => matrix.columns()[0].clone(),
                None => bail!(
                    "mine.method = topk over {} columns needs mine.column",
                    matrix.columns().len()
                ),
            };
            top_k(matrix, &column, budget, seed)?
        }
    })
}

fn manifest_groups(corpus: &Corpus) -> BTreeMap<String, String> {
    corpus
        .examples()
        .iter()
        .filter_map(|ex| ex.group.clone().map(|g| (ex.id.clone(), g)))
        .collect()
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    let corpus = common::load_corpus(config)?;
    anyhow::ensure!(config.mine.budget >= 1, "mine.budget must be at least 1");

    let _lock = OutDirLock::acquire(&config.out_dir)?;
    let columns = read_columns(config)?;
    let assembled = assemble_signals(&corpus, &columns).context("assembling signal matrix")?;
    if !assembled.excluded.is_empty() {
        println!(
            "{} example(s) excluded from selection for missing scores",
            assembled.excluded.len()
        );
    }
    anyhow::ensure!(
        !assembled.matrix.is_empty(),
        "no example has a complete score vector; nothing to mine"
    );

    let mined = if config.mine.group_by {
        let groups = manifest_groups(&corpus);
        let (units, members) = collapse_by_group(&assembled.matrix, &groups)?;
        let unit_budget = config.mine.budget.min(units.len());
        let unit_mined = select(config, &units, unit_budget)?;
        expand_groups(&unit_mined, &members)
    } else {
        select(config, &assembled.matrix, config.mine.budget)?
    };

    let mined_path = config.out_dir.join("mined.csv");
    write_mined_csv(&mined, &mined_path)?;
    let metadata = MineMetadata {
        method: mined.method,
        budget: config.mine.budget,
        seed: mined.seed,
        columns: assembled.matrix.columns().to_vec(),
        pooling: config.score.pooling,
        phi: config.score.effective_phi(),
        population: assembled.matrix.len(),
        selected: mined.items.len(),
        layers: layer_summary(&mined),
        group_by: config.mine.group_by,
        excluded: assembled.excluded,
    };
    common::write_json(&config.out_dir.join("mined_meta.json"), &metadata)?;

    config.write_snapshot("mine")?;
    println!(
        "mined {} item(s) with {} (seed {}) -> {}",
        mined.items.len(),
        mined.method,
        mined.seed,
        mined_path.display()
    );
    Ok(Outcome::Success)
}
