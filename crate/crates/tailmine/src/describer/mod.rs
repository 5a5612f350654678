//! Descriptions and keyword summaries from an external vision-language /
//! language model service.
//!
//! Every operation goes through a [`Backend`]; wrapping any backend in a
//! [`CacheBackend`] makes repeated calls pure functions of their inputs. The
//! fixture backend lets the whole pipeline run hermetically with no network
//! access.

mod backend;
mod template;

pub use backend::{
    Backend, BackendKind, CacheBackend, Completion, FixtureBackend, LiveBackend, ModelRequest,
    RateLimiter, RetryPolicy,
};
pub use template::{builtin, builtin_templates, PromptTemplate, Stage};

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::MiningExample;

#[derive(Debug, Error)]
pub enum DescriberError {
    #[error("template {template:?}: unbound placeholder {placeholder:?}")]
    UnboundPlaceholder {
        template: String,
        placeholder: String,
    },
    #[error("template {template:?} is a {actual} template, expected {expected}")]
    StageMismatch {
        template: String,
        expected: Stage,
        actual: Stage,
    },
    #[error("transport failed after {attempts} attempt(s): {message}")]
    TransportFailed { attempts: u32, message: String },
    #[error("service returned an empty response")]
    EmptyResponse,
    #[error("media {path}: {message}")]
    MediaUnreadable { path: String, message: String },
    #[error("fixture {path}: {message}")]
    FixtureUnavailable { path: String, message: String },
    #[error("cache-only backend has no entry for key {key}")]
    CacheMiss { key: String },
    #[error("cache entry {path} is corrupt: {message}")]
    CacheCorrupt { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-media descriptions of one example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub example_id: String,
    /// One text per media item, in media order.
    pub per_media_text: Vec<String>,
    /// Slowest layer that had to answer: live > fixture > cache.
    pub backend: BackendKind,
    pub model_tag: String,
}

fn slower(a: BackendKind, b: BackendKind) -> BackendKind {
    let weight = |k: BackendKind| match k {
        BackendKind::Live => 2,
        BackendKind::Fixture => 1,
        BackendKind::Cache => 0,
    };
    if weight(a) >= weight(b) {
        a
    } else {
        b
    }
}

fn ensure_stage(template: &PromptTemplate, expected: Stage) -> Result<(), DescriberError> {
    if template.stage != expected {
        return Err(DescriberError::StageMismatch {
            template: template.name.clone(),
            expected,
            actual: template.stage,
        });
    }
    Ok(())
}

/// Describe one example: one completion per media item. Any media failure
/// fails the whole example (the caller records it as `description_missing`
/// and moves on).
pub fn describe(
    example: &MiningExample<'_>,
    template: &PromptTemplate,
    backend: &dyn Backend,
) -> Result<Description, DescriberError> {
    ensure_stage(template, Stage::Describe)?;
    let prompt = template.render(&[])?;
    let mut per_media_text = Vec::with_capacity(example.media.len());
    let mut served = BackendKind::Cache;
    for (media_index, media) in example.media.iter().enumerate() {
        let request =
            ModelRequest::for_media(Stage::Describe, prompt.clone(), example.id, media_index, media);
        let completion = backend.complete(&request)?;
        if completion.text.trim().is_empty() {
            return Err(DescriberError::EmptyResponse);
        }
        served = slower(served, completion.served_by);
        per_media_text.push(completion.text);
    }
    Ok(Description {
        example_id: example.id.to_string(),
        per_media_text,
        backend: served,
        model_tag: backend.model_tag().to_string(),
    })
}

/// Outcome of describing a batch: failures are recorded per example, never
/// abort the batch. Results are in input order regardless of scheduling.
#[derive(Debug, Default)]
pub struct DescribeBatch {
    pub described: Vec<Description>,
    pub missing: Vec<(String, String)>,
}

/// Describe many examples with up to `concurrency` worker threads.
pub fn describe_batch(
    examples: &[MiningExample<'_>],
    template: &PromptTemplate,
    backend: &dyn Backend,
    concurrency: usize,
) -> DescribeBatch {
    let workers = concurrency.max(1).min(examples.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<Description, String>>>> =
        Mutex::new(vec![None; examples.len()]);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= examples.len() {
                    break;
                }
                let outcome = describe(&examples[i], template, backend)
                    .map_err(|e| e.to_string());
                slots.lock().expect("batch slots lock")[i] = Some(outcome);
            });
        }
    });

    let mut batch = DescribeBatch::default();
    for (i, slot) in slots.into_inner().expect("batch slots").into_iter().enumerate() {
        match slot.expect("every slot filled") {
            Ok(description) => batch.described.push(description),
            Err(message) => batch.missing.push((examples[i].id.to_string(), message)),
        }
    }
    batch
}

/// Parse a comma-separated keyword response into the raw keyword strings,
/// order preserved, no normalization. Enumeration markers, a leading
/// `keywords:` label, a leading `and`, and trailing `etc` boilerplate are
/// stripped; a bare `None` response means no keywords.
pub fn parse_keyword_list(response: &str) -> Vec<String> {
    let trimmed = response.trim();
    if trimmed.is_empty() || trimmed.eq_ignore_ascii_case("none") {
        return Vec::new();
    }
    let mut out = Vec::new();
    for piece in trimmed.split(|c| c == ',' || c == '\n') {
        let mut item = piece.trim();
        if let Some(rest) = strip_prefix_ci(item, "keywords:") {
            item = rest.trim_start();
        }
        // "1. keyword" / "2) keyword" enumeration markers.
        let digits = item.chars().take_while(|c| c.is_ascii_digit()).count();
        if digits > 0 {
            let rest = &item[digits..];
            if let Some(rest) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
                item = rest.trim_start();
            }
        }
        if let Some(rest) = strip_prefix_ci(item, "and ") {
            item = rest.trim_start();
        }
        let bare = item.trim_end_matches('.').trim();
        if bare.is_empty() {
            continue;
        }
        if bare.eq_ignore_ascii_case("etc")
            || bare.eq_ignore_ascii_case("none")
            || bare.chars().all(|c| c == '…' || c == '.')
        {
            continue;
        }
        out.push(item.to_string());
    }
    out
}

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    if s.len() >= prefix.len() && s[..prefix.len()].eq_ignore_ascii_case(prefix) {
        Some(&s[prefix.len()..])
    } else {
        None
    }
}

/// Ask the service to summarize one description into keywords. Returns the
/// raw parsed list; an unparseable response yields an empty list with a
/// warning rather than an error.
pub fn summarize_keywords(
    description_text: &str,
    template: &PromptTemplate,
    backend: &dyn Backend,
) -> Result<Vec<String>, DescriberError> {
    ensure_stage(template, Stage::Summarize)?;
    let prompt = template.render(&[("description", description_text)])?;
    let request = ModelRequest::for_text(Stage::Summarize, prompt, description_text.to_string());
    let completion = backend.complete(&request)?;
    let keywords = parse_keyword_list(&completion.text);
    if keywords.is_empty() && !completion.text.trim().eq_ignore_ascii_case("none") {
        log::warn!(
            "summarize response yielded no keywords: {:?}",
            completion.text
        );
    }
    Ok(keywords)
}

/// Road-user category assigned to a keyword.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Vehicle,
    Pedestrian,
    Cyclist,
    NotRelated,
}

impl Category {
    pub fn all() -> [Category; 4] {
        [
            Category::Vehicle,
            Category::Pedestrian,
            Category::Cyclist,
            Category::NotRelated,
        ]
    }

    fn parse(text: &str) -> Option<Category> {
        match text.trim().to_lowercase().as_str() {
            "vehicle" => Some(Category::Vehicle),
            "pedestrian" => Some(Category::Pedestrian),
            "cyclist" => Some(Category::Cyclist),
            "not related" | "not_related" | "unrelated" => Some(Category::NotRelated),
            _ => None,
        }
    }
}

/// Result of categorizing a keyword batch. `degraded` marks a transport
/// failure where every keyword fell back to `not_related`.
#[derive(Debug, Clone, Default)]
pub struct CategorizeOutcome {
    pub categories: BTreeMap<String, Category>,
    pub warnings: Vec<String>,
    pub degraded: bool,
}

/// Categorize keywords as vehicle / pedestrian / cyclist / not related.
/// Every input keyword receives exactly one category; keywords the service
/// omits default to `not_related` with a warning.
pub fn categorize_keywords(
    keywords: &[String],
    template: &PromptTemplate,
    backend: &dyn Backend,
) -> Result<CategorizeOutcome, DescriberError> {
    ensure_stage(template, Stage::Categorize)?;
    let mut outcome = CategorizeOutcome::default();
    if keywords.is_empty() {
        return Ok(outcome);
    }

    let joined = keywords.join("; ");
    let prompt = template.render(&[("keywords", joined.as_str())])?;
    let request = ModelRequest::for_text(Stage::Categorize, prompt, joined);
    let response = match backend.complete(&request) {
        Ok(completion) => completion.text,
        Err(e) => {
            outcome.degraded = true;
            outcome
                .warnings
                .push(format!("categorization failed ({e}); defaulting batch to not_related"));
            for kw in keywords {
                outcome.categories.insert(kw.clone(), Category::NotRelated);
            }
            return Ok(outcome);
        }
    };

    // Expected shape: "child - pedestrian; bus - vehicle; dish - not related".
    let mut answered: BTreeMap<String, Category> = BTreeMap::new();
    for segment in response.split(';') {
        let segment = segment.trim();
        if segment.is_empty() {
            continue;
        }
        // Split on the last " - " so hyphenated keywords stay intact.
        let Some(pos) = segment.rfind(" - ") else {
            continue;
        };
        let keyword = segment[..pos].trim();
        let Some(category) = Category::parse(&segment[pos + 3..]) else {
            outcome
                .warnings
                .push(format!("unrecognized category in segment {segment:?}"));
            continue;
        };
        answered.insert(keyword.to_lowercase(), category);
    }

    for kw in keywords {
        let category = answered.get(&kw.trim().to_lowercase()).copied();
        if category.is_none() {
            outcome.warnings.push(format!(
                "keyword {kw:?} missing from categorization response; defaulting to not_related"
            ));
        }
        outcome
            .categories
            .insert(kw.clone(), category.unwrap_or(Category::NotRelated));
    }
    Ok(outcome)
}

#[cfg(test)]
mod test_http;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Example, Split};

    fn corpus_one(id: &str, media: usize) -> Corpus {
        let media = (0..media).map(|i| format!("{id}-{i}.jpg")).collect();
        Corpus::from_examples(vec![Example::new(id, media, None, Split::UnlabeledPool)]).unwrap()
    }

    fn describe_tpl() -> PromptTemplate {
        builtin("waymo_describe").unwrap()
    }

    #[test]
    fn fixture_passthrough() {
        let corpus = corpus_one("x1", 1);
        let example = corpus.mining_examples().next().unwrap();
        let backend = FixtureBackend::new().with_describe("x1", &["a lone cement mixer"]);
        let description = describe(&example, &describe_tpl(), &backend).unwrap();
        assert_eq!(description.per_media_text, vec!["a lone cement mixer"]);
        assert_eq!(description.backend, BackendKind::Fixture);
        assert_eq!(description.example_id, "x1");
    }

    #[test]
    fn second_call_hits_cache_with_identical_text() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = corpus_one("x1", 2);
        let example = corpus.mining_examples().next().unwrap();
        let fixture = FixtureBackend::new().with_describe("x1", &["front cam", "rear cam"]);
        let backend = CacheBackend::over(Box::new(fixture), dir.path().join("cache"));

        let first = describe(&example, &describe_tpl(), &backend).unwrap();
        assert_eq!(first.backend, BackendKind::Fixture);
        let second = describe(&example, &describe_tpl(), &backend).unwrap();
        assert_eq!(second.backend, BackendKind::Cache);
        assert_eq!(first.per_media_text, second.per_media_text);
    }

    #[test]
    fn stage_mismatch_is_rejected() {
        let corpus = corpus_one("x1", 1);
        let example = corpus.mining_examples().next().unwrap();
        let backend = FixtureBackend::new();
        let err = describe(&example, &builtin("waymo_summarize").unwrap(), &backend).unwrap_err();
        assert!(matches!(err, DescriberError::StageMismatch { .. }));
    }

    #[test]
    fn per_media_length_matches_media() {
        let corpus = corpus_one("x1", 3);
        let example = corpus.mining_examples().next().unwrap();
        let backend = FixtureBackend::new().with_describe("x1", &["a", "b", "c"]);
        let description = describe(&example, &describe_tpl(), &backend).unwrap();
        assert_eq!(description.per_media_text.len(), example.media.len());
    }

    #[test]
    fn http_500_marks_example_missing_and_batch_continues() {
        let server = test_http::TestServer::start(test_http::Mode::AlwaysStatus(500));
        let dir = tempfile::tempdir().unwrap();
        let media = dir.path().join("b.jpg");
        std::fs::write(&media, b"not really a jpg").unwrap();
        let corpus = Corpus::from_examples(vec![
            Example::new("ok", vec!["a.jpg".into()], None, Split::UnlabeledPool),
            Example::new(
                "bad",
                vec![media.display().to_string()],
                None,
                Split::UnlabeledPool,
            ),
        ])
        .unwrap();
        let examples: Vec<_> = corpus.mining_examples().collect();

        // "ok" is served by the fixture; "bad" goes to the failing live server.
        struct Router {
            fixture: FixtureBackend,
            live: LiveBackend,
        }
        impl Backend for Router {
            fn complete(&self, request: &ModelRequest) -> Result<Completion, DescriberError> {
                if request.example_id == "ok" {
                    self.fixture.complete(request)
                } else {
                    self.live.complete(request)
                }
            }
            fn kind(&self) -> BackendKind {
                BackendKind::Live
            }
            fn model_tag(&self) -> &str {
                "router"
            }
        }
        let router = Router {
            fixture: FixtureBackend::new().with_describe("ok", &["fine"]),
            live: LiveBackend::new(server.url(), "m").with_retry(RetryPolicy {
                attempts: 3,
                initial_backoff: std::time::Duration::from_millis(1),
            }),
        };

        let batch = describe_batch(&examples, &describe_tpl(), &router, 2);
        assert_eq!(batch.described.len(), 1);
        assert_eq!(batch.described[0].example_id, "ok");
        assert_eq!(batch.missing.len(), 1);
        assert_eq!(batch.missing[0].0, "bad");
        assert!(batch.missing[0].1.contains("3 attempt"));
        assert_eq!(server.hits(), 3); // retried exactly three times
    }

    #[test]
    fn parse_keyword_list_table() {
        let cases: &[(&str, &[&str])] = &[
            ("construction truck, open tailgate", &["construction truck", "open tailgate"]),
            ("None", &[]),
            ("none", &[]),
            ("", &[]),
            (
                "construction truck, open tailgate, and etc",
                &["construction truck", "open tailgate"],
            ),
            ("Keywords: dump truck, trailer, etc.", &["dump truck", "trailer"]),
            (
                "1. construction truck\n2. detached trailer",
                &["construction truck", "detached trailer"],
            ),
            ("bus, and tow truck", &["bus", "tow truck"]),
            ("truck, car\nbus, van", &["truck", "car", "bus", "van"]),
            ("Bus", &["Bus"]),
            ("car, car, car", &["car", "car", "car"]),
            ("truck, …", &["truck"]),
        ];
        for (input, want) in cases {
            assert_eq!(&parse_keyword_list(input), want, "input {input:?}");
        }
    }

    #[test]
    fn summarize_uses_payload_keyed_fixture() {
        let backend = FixtureBackend::new()
            .with_summarize("There is a construction truck on the street", "construction truck, open tailgate");
        let keywords = summarize_keywords(
            "There is a construction truck on the street",
            &builtin("waymo_summarize").unwrap(),
            &backend,
        )
        .unwrap();
        assert_eq!(keywords, vec!["construction truck", "open tailgate"]);
    }

    #[test]
    fn categorize_parses_the_expected_answer_shape() {
        let keywords: Vec<String> = ["child", "bus", "dish"].iter().map(|s| s.to_string()).collect();
        let backend = FixtureBackend::new().with_categorize(
            "child; bus; dish",
            "child - pedestrian; bus - vehicle; dish - not related",
        );
        let outcome =
            categorize_keywords(&keywords, &builtin("waymo_categorize").unwrap(), &backend)
                .unwrap();
        assert_eq!(outcome.categories["child"], Category::Pedestrian);
        assert_eq!(outcome.categories["bus"], Category::Vehicle);
        assert_eq!(outcome.categories["dish"], Category::NotRelated);
        assert!(outcome.warnings.is_empty());
        assert!(!outcome.degraded);
    }

    #[test]
    fn categorize_empty_input_makes_no_request() {
        let backend = FixtureBackend::new(); // would error on any request
        let outcome =
            categorize_keywords(&[], &builtin("waymo_categorize").unwrap(), &backend).unwrap();
        assert!(outcome.categories.is_empty());
    }

    #[test]
    fn omitted_keyword_defaults_to_not_related_with_warning() {
        let keywords: Vec<String> = ["bus", "trailer"].iter().map(|s| s.to_string()).collect();
        let backend = FixtureBackend::new().with_categorize("bus; trailer", "bus - vehicle");
        let outcome =
            categorize_keywords(&keywords, &builtin("waymo_categorize").unwrap(), &backend)
                .unwrap();
        assert_eq!(outcome.categories["bus"], Category::Vehicle);
        assert_eq!(outcome.categories["trailer"], Category::NotRelated);
        assert_eq!(outcome.warnings.len(), 1);
        assert!(outcome.warnings[0].contains("trailer"));
    }

    #[test]
    fn categorize_transport_failure_degrades_whole_batch() {
        let keywords: Vec<String> = ["bus"].iter().map(|s| s.to_string()).collect();
        let backend = FixtureBackend::new(); // no entry -> transport-style failure
        let outcome =
            categorize_keywords(&keywords, &builtin("waymo_categorize").unwrap(), &backend)
                .unwrap();
        assert!(outcome.degraded);
        assert_eq!(outcome.categories["bus"], Category::NotRelated);
    }

    #[test]
    fn hyphenated_keywords_survive_categorization() {
        let keywords: Vec<String> = ["open-top sightseeing bus"].iter().map(|s| s.to_string()).collect();
        let backend = FixtureBackend::new().with_categorize(
            "open-top sightseeing bus",
            "open-top sightseeing bus - vehicle",
        );
        let outcome =
            categorize_keywords(&keywords, &builtin("waymo_categorize").unwrap(), &backend)
                .unwrap();
        assert_eq!(
            outcome.categories["open-top sightseeing bus"],
            Category::Vehicle
        );
    }
}
