//! Shared command plumbing: corpus loading, backend construction, and the
//! attachment store layout under the output directory.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};

use crate::config::{BackendChoice, PopulationChoice, RunConfig};
use tailmine::corpus::{load_manifest, AttachmentStore, Corpus, Split};
use tailmine::describer::{Backend, CacheBackend, FixtureBackend, LiveBackend, RetryPolicy};

pub fn load_corpus(config: &RunConfig) -> Result<Corpus> {
    let path = config.manifest()?;
    load_manifest(path).with_context(|| format!("loading manifest {}", path.display()))
}

pub fn store(config: &RunConfig) -> AttachmentStore {
    AttachmentStore::new(config.out_dir.join("attachments"))
}

pub fn describer_cache_dir(config: &RunConfig) -> PathBuf {
    config.out_dir.join("attachments").join("describer")
}

/// Build the configured backend. Every kind is wrapped in the read-through
/// cache so repeated calls are pure functions of their inputs.
pub fn build_backend(config: &RunConfig) -> Result<Box<dyn Backend>> {
    let cache_dir = describer_cache_dir(config);
    let backend = &config.backend;
    let inner: Box<dyn Backend> = match backend.kind {
        BackendChoice::Fixture => {
            let path = backend
                .fixture
                .as_ref()
                .context("fixture backend selected but `backend.fixture` is not set")?;
            Box::new(FixtureBackend::from_path(path)?)
        }
        BackendChoice::Live => {
            let endpoint = backend
                .endpoint
                .as_ref()
                .context("live backend selected but `backend.endpoint` is not set")?;
            let mut live = LiveBackend::new(endpoint, &backend.model)
                .with_decoding(backend.temperature, backend.max_tokens)
                .with_retry(RetryPolicy {
                    attempts: backend.retry_attempts,
                    initial_backoff: Duration::from_millis(backend.retry_backoff_ms),
                });
            if let Some(rps) = backend.requests_per_second {
                live = live.with_rate_limit(rps);
            }
            Box::new(live)
        }
        BackendChoice::Cache => {
            return Ok(Box::new(CacheBackend::cache_only(
                cache_dir,
                backend.model_tag(),
            )))
        }
    };
    Ok(Box::new(CacheBackend::over(inner, cache_dir)))
}

/// Ids in scope for frequency statistics and scoring, in corpus order.
pub fn population_ids(corpus: &Corpus, population: PopulationChoice) -> Vec<String> {
    corpus
        .examples()
        .iter()
        .filter(|ex| match population {
            PopulationChoice::Unlabeled => ex.split == Split::UnlabeledPool,
            PopulationChoice::All => true,
        })
        .map(|ex| ex.id.clone())
        .collect()
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).context("serializing json")?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
