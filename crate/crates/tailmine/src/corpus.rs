//! Example pool ingestion and per-example attachment storage.
//!
//! A corpus is loaded from a line-delimited JSON manifest (one record per
//! example) and is immutable after load. Stage outputs (descriptions,
//! keyword sets, scores) attach to examples either in memory or through the
//! sidecar [`AttachmentStore`], which keeps one file per example under
//! `attachments/<stage>/` plus a stage-level index of ids and revisions.
//!
//! Ground-truth labels are carried for evaluation only: mining-facing code
//! consumes [`MiningExample`] views, which do not expose the label at all.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("manifest {path}: line {line}: {message}")]
    MalformedLine {
        path: String,
        line: usize,
        message: String,
    },
    #[error("manifest {path}: duplicate example id {id:?} on lines {first} and {second}")]
    DuplicateId {
        path: String,
        id: String,
        first: usize,
        second: usize,
    },
    #[error("manifest {path}: line {line}: example {id:?} has an empty media list")]
    EmptyMedia {
        path: String,
        line: usize,
        id: String,
    },
    #[error("unknown example id {0:?}")]
    UnknownExample(String),
    #[error("attachment stage {stage:?}: no attachment for example {id:?}")]
    MissingAttachment { stage: String, id: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("attachment index {path}: {source}")]
    BadIndex {
        path: String,
        source: serde_json::Error,
    },
}

/// Pool membership of an example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    LabeledPool,
    #[default]
    UnlabeledPool,
}

/// One unlabeled (or labeled) corpus item.
///
/// The label is private: mining code cannot read it. Evaluation code uses
/// [`Example::eval_label`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub media: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default)]
    pub split: Split,
    /// Optional selection-unit key: examples sharing a group are mined as one unit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

impl Example {
    pub fn new(
        id: impl Into<String>,
        media: Vec<String>,
        label: Option<String>,
        split: Split,
    ) -> Self {
        Self {
            id: id.into(),
            media,
            label,
            split,
            group: None,
        }
    }

    /// Ground-truth class name. Evaluation-only: mining operations must not
    /// call this (they receive [`MiningExample`] views without it).
    pub fn eval_label(&self) -> Option<&str> {
        self.label.as_deref()
    }
}

/// Label-free view of an example handed to mining stages.
#[derive(Debug, Clone, Copy)]
pub struct MiningExample<'a> {
    pub id: &'a str,
    pub media: &'a [String],
    pub split: Split,
    pub group: Option<&'a str>,
}

/// One stage output attached to an example. Re-attaching under the same
/// stage overwrites the value and bumps the revision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attachment {
    pub value: serde_json::Value,
    pub revision: u32,
}

/// An immutable example pool plus in-memory stage attachments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    examples: Vec<Example>,
    index: HashMap<String, usize>,
    attachments: BTreeMap<String, BTreeMap<String, Attachment>>,
}

impl Corpus {
    pub fn from_examples(examples: Vec<Example>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(examples.len());
        for (pos, ex) in examples.iter().enumerate() {
            if ex.media.is_empty() {
                return Err(CorpusError::EmptyMedia {
                    path: "<memory>".into(),
                    line: pos + 1,
                    id: ex.id.clone(),
                });
            }
            if let Some(first) = index.insert(ex.id.clone(), pos) {
                return Err(CorpusError::DuplicateId {
                    path: "<memory>".into(),
                    id: ex.id.clone(),
                    first: first + 1,
                    second: pos + 1,
                });
            }
        }
        Ok(Self {
            examples,
            index,
            attachments: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn get(&self, id: &str) -> Option<&Example> {
        self.index.get(id).map(|&i| &self.examples[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Manifest-order position of an example id.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Label-free views for mining stages, in manifest order.
    pub fn mining_examples(&self) -> impl Iterator<Item = MiningExample<'_>> {
        self.examples.iter().map(|ex| MiningExample {
            id: &ex.id,
            media: &ex.media,
            split: ex.split,
            group: ex.group.as_deref(),
        })
    }

    /// Store a stage output for an example. Returns the new revision count
    /// (1 on first attach, 2 after one overwrite, ...).
    pub fn attach(
        &mut self,
        example_id: &str,
        stage: &str,
        value: serde_json::Value,
    ) -> Result<u32, CorpusError> {
        if !self.contains(example_id) {
            return Err(CorpusError::UnknownExample(example_id.to_string()));
        }
        let per_stage = self.attachments.entry(stage.to_string()).or_default();
        let revision = per_stage.get(example_id).map_or(1, |a| a.revision + 1);
        per_stage.insert(example_id.to_string(), Attachment { value, revision });
        Ok(revision)
    }

    pub fn attachment(&self, stage: &str, example_id: &str) -> Option<&Attachment> {
        self.attachments.get(stage)?.get(example_id)
    }
}

fn parse_record(path: &str, line_no: usize, line: &str) -> Result<Example, CorpusError> {
    let ex: Example =
        serde_json::from_str(line).map_err(|e| CorpusError::MalformedLine {
            path: path.to_string(),
            line: line_no,
            message: e.to_string(),
        })?;
    if ex.id.is_empty() {
        return Err(CorpusError::MalformedLine {
            path: path.to_string(),
            line: line_no,
            message: "empty example id".into(),
        });
    }
    if ex.media.is_empty() {
        return Err(CorpusError::EmptyMedia {
            path: path.to_string(),
            line: line_no,
            id: ex.id,
        });
    }
    Ok(ex)
}

/// Load a corpus from a UTF-8, line-delimited JSON manifest. Record order is
/// preserved; blank lines are skipped. Malformed lines, duplicate ids, and
/// empty media lists abort with the offending line number(s).
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);

    let mut examples = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let ex = parse_record(&shown, line_no, &line)?;
        if let Some(&first) = seen.get(&ex.id) {
            return Err(CorpusError::DuplicateId {
                path: shown,
                id: ex.id,
                first,
                second: line_no,
            });
        }
        seen.insert(ex.id.clone(), line_no);
        examples.push(ex);
    }
    Corpus::from_examples(examples)
}

/// Write the corpus back out as a manifest. `load_manifest(save_manifest(c))`
/// reproduces the examples exactly, and saving the same corpus twice yields
/// byte-identical files.
pub fn save_manifest(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let mut out = Vec::new();
    for ex in corpus.examples() {
        serde_json::to_writer(&mut out, ex).expect("manifest record serializes");
        out.push(b'\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// File stem for an example id: opaque ids may contain characters that are
/// not filesystem-safe, so those are replaced and disambiguated by a hash.
pub fn safe_file_stem(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect();
    if safe == id {
        safe
    } else {
        let digest = Sha256::digest(id.as_bytes());
        format!("{safe}-{:08x}", u32::from_be_bytes(digest[..4].try_into().unwrap()))
    }
}

/// Sidecar store: `attachments/<stage>/<id>.<ext>` plus a per-stage
/// `index.json` mapping example id to revision count. One writer per stage;
/// concurrent readers need no coordination.
#[derive(Debug, Clone)]
pub struct AttachmentStore {
    root: PathBuf,
}

impl AttachmentStore {
    /// `root` is the directory that holds the per-stage subdirectories
    /// (conventionally named `attachments`).
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.root.join(stage)
    }

    fn index_path(&self, stage: &str) -> PathBuf {
        self.stage_dir(stage).join("index.json")
    }

    fn file_path(&self, stage: &str, id: &str, ext: &str) -> PathBuf {
        self.stage_dir(stage).join(format!("{}.{ext}", safe_file_stem(id)))
    }

    /// Ids and revisions recorded for a stage. Missing stage -> empty index.
    pub fn index(&self, stage: &str) -> Result<BTreeMap<String, u32>, CorpusError> {
        let path = self.index_path(stage);
        if !path.exists() {
            return Ok(BTreeMap::new());
        }
        let bytes = fs::read(&path)?;
        serde_json::from_slice(&bytes).map_err(|e| CorpusError::BadIndex {
            path: path.display().to_string(),
            source: e,
        })
    }

    fn write_index(&self, stage: &str, index: &BTreeMap<String, u32>) -> Result<(), CorpusError> {
        let mut bytes = serde_json::to_vec_pretty(index).expect("index serializes");
        bytes.push(b'\n');
        fs::write(self.index_path(stage), bytes)?;
        Ok(())
    }

    /// Write one attachment file and bump its revision in the stage index.
    pub fn write(
        &self,
        stage: &str,
        id: &str,
        ext: &str,
        bytes: &[u8],
    ) -> Result<u32, CorpusError> {
        fs::create_dir_all(self.stage_dir(stage))?;
        let mut index = self.index(stage)?;
        let revision = index.get(id).map_or(1, |r| r + 1);
        let mut file = fs::File::create(self.file_path(stage, id, ext))?;
        file.write_all(bytes)?;
        index.insert(id.to_string(), revision);
        self.write_index(stage, &index)?;
        Ok(revision)
    }

    pub fn read(&self, stage: &str, id: &str, ext: &str) -> Result<Vec<u8>, CorpusError> {
        let path = self.file_path(stage, id, ext);
        if !path.exists() {
            return Err(CorpusError::MissingAttachment {
                stage: stage.to_string(),
                id: id.to_string(),
            });
        }
        Ok(fs::read(path)?)
    }

    pub fn exists(&self, stage: &str, id: &str, ext: &str) -> bool {
        self.file_path(stage, id, ext).exists()
    }
}
