//! Prompt templates with `{placeholder}` slots and the built-in prompts for
//! the supported tasks.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::DescriberError;

/// Pipeline stage a template is valid for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Describe,
    Summarize,
    Categorize,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Describe => "describe",
            Stage::Summarize => "summarize",
            Stage::Categorize => "categorize",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: String,
    pub text: String,
    pub stage: Stage,
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, text: impl Into<String>, stage: Stage) -> Self {
        Self {
            name: name.into(),
            text: text.into(),
            stage,
        }
    }

    /// Substitute every `{key}` slot. Rendering is a pure function of the
    /// template text and bindings; unbound slots are an error.
    pub fn render(&self, bindings: &[(&str, &str)]) -> Result<String, DescriberError> {
        let mut out = self.text.clone();
        for (key, value) in bindings {
            out = out.replace(&format!("{{{key}}}"), value);
        }
        if let Some(start) = out.find('{') {
            if let Some(len) = out[start..].find('}') {
                return Err(DescriberError::UnboundPlaceholder {
                    template: self.name.clone(),
                    placeholder: out[start + 1..start + len].to_string(),
                });
            }
        }
        Ok(out)
    }

    /// Stable content hash used in cache keys.
    pub fn content_hash(&self) -> String {
        crate::hex_string(&Sha256::digest(self.text.as_bytes()))
    }
}

/// Built-in prompt templates. `{description}` and `{keywords}` slots carry
/// the stage payload for the text-only stages.
pub fn builtin_templates() -> Vec<PromptTemplate> {
    vec![
        PromptTemplate::new(
            "imagenet_classes",
            "What are the possible classes for this image? Give three possible answers.",
            Stage::Describe,
        ),
        PromptTemplate::new(
            "places_scenes",
            "What are the possible scene categories for this image? Give three possible answers.",
            Stage::Describe,
        ),
        PromptTemplate::new(
            "waymo_describe",
            "Describe the uncommon or abnormal vehicles, pedestrians, and cyclists related to \
             traffic in this image",
            Stage::Describe,
        ),
        PromptTemplate::new(
            "waymo_summarize",
            "Please return keywords for each image description in this format: keyword1, \
             keyword2, and etc\n\n{description}",
            Stage::Summarize,
        ),
        PromptTemplate::new(
            "waymo_categorize",
            "For each of the following words separated by ;, identify whether they are related \
             to a description of vehicle, pedestrian, or cyclist. Example answers are: child - \
             pedestrian; bus - vehicle; dish - not related\n\n{keywords}",
            Stage::Categorize,
        ),
        PromptTemplate::new(
            "waymo_onestep",
            "List the uncommon or abnormal vehicles, pedestrians and cyclists related to \
             traffic in this image. Return only the keywords in the following format: keyword1, \
             keyword2, etc.",
            Stage::Describe,
        ),
    ]
}

/// Look up a built-in template by name.
pub fn builtin(name: &str) -> Option<PromptTemplate> {
    builtin_templates().into_iter().find(|t| t.name == name)
}
