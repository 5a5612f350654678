//! `tailmine keywords`: descriptions (or the model directly) to normalized
//! keyword sets, optionally category-filtered.

use std::collections::BTreeSet;

use anyhow::{bail, Context, Result};

use super::common;
use crate::config::{KeywordModeChoice, RunConfig};
use crate::lock::OutDirLock;
use crate::Outcome;
use tailmine::describer::{categorize_keywords, Category, Description};
use tailmine::keywords::{
    extract_heuristic, extract_one_step, extract_two_step, filter_by_category, KeywordSet,
};

fn parse_keep(names: &[String]) -> Result<BTreeSet<Category>> {
    let mut keep = BTreeSet::new();
    for name in names {
        let category = match name.as_str() {
            "vehicle" => Category::Vehicle,
            "pedestrian" => Category::Pedestrian,
            "cyclist" => Category::Cyclist,
            "not_related" => Category::NotRelated,
            other => bail!("unknown category {other:?} in keywords.keep"),
        };
        keep.insert(category);
    }
    Ok(keep)
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    let corpus = common::load_corpus(config)?;
    let mode = config.keywords.mode;

    // Resolve everything configuration-dependent before touching outputs.
    let needs_backend = matches!(mode, KeywordModeChoice::TwoStep | KeywordModeChoice::OneStep)
        || config.keywords.filter;
    let summarize_tpl = match mode {
        KeywordModeChoice::TwoStep => Some(config.template(&config.keywords.summarize_template)?),
        _ => None,
    };
    let onestep_tpl = match mode {
        KeywordModeChoice::OneStep => Some(config.template(&config.keywords.onestep_template)?),
        _ => None,
    };
    let filter = if config.keywords.filter {
        let template = config
            .template(&config.keywords.categorize_template)
            .context("keyword filtering is enabled but the categorize template is unusable")?;
        Some((template, parse_keep(&config.keywords.keep)?))
    } else {
        None
    };

    let _lock = OutDirLock::acquire(&config.out_dir)?;
    let backend = if needs_backend {
        Some(common::build_backend(config)?)
    } else {
        None
    };
    let store = common::store(config);

    let mut missing_descriptions = Vec::new();
    let mut media_failures = 0usize;
    let mut written = 0usize;
    for example in corpus.mining_examples() {
        let mut set: KeywordSet = match mode {
            KeywordModeChoice::Heuristic | KeywordModeChoice::TwoStep => {
                let description = match store.read("descriptions", example.id, "json") {
                    Ok(bytes) => serde_json::from_slice::<Description>(&bytes)
                        .with_context(|| format!("parsing description for {}", example.id))?,
                    Err(_) => {
                        missing_descriptions.push(example.id.to_string());
                        continue;
                    }
                };
                match mode {
                    KeywordModeChoice::Heuristic => extract_heuristic(&description),
                    KeywordModeChoice::TwoStep => {
                        let outcome = extract_two_step(
                            &description,
                            summarize_tpl.as_ref().expect("resolved"),
                            backend.as_deref().expect("resolved"),
                        );
                        media_failures += outcome.failures.len();
                        for (media, error) in &outcome.failures {
                            log::warn!("{} media {media}: {error}", example.id);
                        }
                        outcome.set
                    }
                    KeywordModeChoice::OneStep => unreachable!(),
                }
            }
            KeywordModeChoice::OneStep => {
                let outcome = extract_one_step(
                    &example,
                    onestep_tpl.as_ref().expect("resolved"),
                    backend.as_deref().expect("resolved"),
                )?;
                media_failures += outcome.failures.len();
                outcome.set
            }
        };

        if let Some((template, keep)) = &filter {
            let keywords: Vec<String> = set.keywords().map(|k| k.to_string()).collect();
            let categorized =
                categorize_keywords(&keywords, template, backend.as_deref().expect("resolved"))?;
            for warning in &categorized.warnings {
                log::warn!("{}: {warning}", example.id);
            }
            set = filter_by_category(&set, &categorized.categories, keep);
        }

        let bytes = serde_json::to_vec_pretty(&set).context("serializing keyword set")?;
        store.write("keywords", example.id, "json", &bytes)?;
        written += 1;
    }

    config.write_snapshot("keywords")?;
    println!(
        "keywords written for {written} example(s) (mode {:?}); {} missing descriptions, {} media failures",
        mode,
        missing_descriptions.len(),
        media_failures
    );
    for id in &missing_descriptions {
        println!("  missing description: {id}");
    }
    Ok(if missing_descriptions.is_empty() && media_failures == 0 {
        Outcome::Success
    } else {
        Outcome::Partial
    })
}
