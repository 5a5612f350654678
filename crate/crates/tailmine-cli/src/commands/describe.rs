//! `tailmine describe`: one description per example, cached and attached.

use anyhow::{Context, Result};
use serde::Serialize;

use super::common;
use crate::config::RunConfig;
use crate::lock::OutDirLock;
use crate::Outcome;
use tailmine::describer::{describe_batch, Stage};

#[derive(Serialize)]
struct MissingReport<'a> {
    description_missing: &'a [(String, String)],
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    let corpus = common::load_corpus(config)?;
    let template = config.template(&config.describe.template)?;
    anyhow::ensure!(
        template.stage == Stage::Describe,
        "template {:?} is not a describe-stage template",
        template.name
    );

    let _lock = OutDirLock::acquire(&config.out_dir)?;
    let backend = common::build_backend(config)?;
    let store = common::store(config);

    let examples: Vec<_> = corpus.mining_examples().collect();
    let batch = describe_batch(
        &examples,
        &template,
        backend.as_ref(),
        config.backend.concurrency,
    );

    for description in &batch.described {
        let bytes = serde_json::to_vec_pretty(description).context("serializing description")?;
        store.write("descriptions", &description.example_id, "json", &bytes)?;
    }
    if !batch.missing.is_empty() {
        let dir = store.stage_dir("descriptions");
        std::fs::create_dir_all(&dir)?;
        common::write_json(
            &dir.join("missing.json"),
            &MissingReport {
                description_missing: &batch.missing,
            },
        )?;
    }

    config.write_snapshot("describe")?;
    println!(
        "described {} example(s); {} missing",
        batch.described.len(),
        batch.missing.len()
    );
    for (id, error) in &batch.missing {
        println!("  description_missing {id}: {error}");
    }
    Ok(if batch.missing.is_empty() {
        Outcome::Success
    } else {
        Outcome::Partial
    })
}
