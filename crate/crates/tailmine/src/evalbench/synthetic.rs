//! Seeded synthetic long-tail corpus generation.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::{Corpus, Example, Split};
use crate::keywords::{ExtractionMode, KeywordSet};
use crate::scoring::Prediction;

/// Injection of a subpopulation that is simultaneously rare (tail class) and
/// hard (high uncertainty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RareHardInjection {
    /// Probability that an unlabeled tail example is injected.
    pub fraction: f64,
    /// Injected hardness band; kept inside the global hardness range so the
    /// subpopulation is hard but not trivially separable by uncertainty.
    pub hardness_min: f64,
    pub hardness_max: f64,
    /// A class is "tail" for injection when its labeled-pool cardinality is
    /// at most this.
    pub tail_labeled_cardinality_max: u32,
}

impl Default for RareHardInjection {
    fn default() -> Self {
        Self {
            fraction: 0.25,
            hardness_min: 0.7,
            hardness_max: 1.0,
            tail_labeled_cardinality_max: 20,
        }
    }
}

/// Parameters of the synthetic family. Class cardinalities follow a
/// power-law profile between the bounds, sorted descending; every class
/// carries class-unique keywords and examples mix in shared common keywords
/// plus, with probability `noise`, a shared hallucination keyword.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub pareto_shape: f64,
    pub examples_min: usize,
    pub examples_max: usize,
    /// Fraction of each class held in the labeled pool (class proportions
    /// preserved across pools).
    pub labeled_fraction: f64,
    /// Class-specific vocabulary size; every example carries exactly one
    /// keyword drawn from its class vocabulary.
    pub class_keywords_per_class: usize,
    /// Shared common-keyword pool and how many each example draws.
    pub common_keywords: usize,
    pub common_per_example: usize,
    /// Probability of injecting a shared hallucination keyword.
    pub noise: f64,
    pub hallucination_keywords: usize,
    /// Hardness-to-temperature mapping for synthetic predictions.
    pub temp_min: f64,
    pub temp_max: f64,
    pub rare_hard: Option<RareHardInjection>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_classes: 100,
            pareto_shape: 1.0,
            examples_min: 5,
            examples_max: 500,
            labeled_fraction: 0.2,
            class_keywords_per_class: 1,
            common_keywords: 20,
            common_per_example: 3,
            noise: 0.0,
            hallucination_keywords: 2,
            temp_min: 0.05,
            temp_max: 5.0,
            rare_hard: None,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<(), EvalError> {
        let fail = |msg: String| Err(EvalError::InfeasibleSpec(msg));
        if self.num_classes == 0 {
            return fail("num_classes must be positive".into());
        }
        if self.examples_min > self.examples_max {
            return fail(format!(
                "examples_min {} exceeds examples_max {}",
                self.examples_min, self.examples_max
            ));
        }
        if self.examples_min < 2 {
            return fail("examples_min must be at least 2 to split into two pools".into());
        }
        if !(self.pareto_shape > 0.0) {
            return fail("pareto_shape must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return fail("noise must be in [0, 1]".into());
        }
        if !(self.labeled_fraction > 0.0 && self.labeled_fraction < 1.0) {
            return fail("labeled_fraction must be in (0, 1)".into());
        }
        if self.class_keywords_per_class == 0 {
            return fail("class_keywords_per_class must be positive".into());
        }
        if self.common_per_example > self.common_keywords {
            return fail(format!(
                "common_per_example {} exceeds the common pool {}",
                self.common_per_example, self.common_keywords
            ));
        }
        if self.noise > 0.0 && self.hallucination_keywords == 0 {
            return fail("noise requires a non-empty hallucination pool".into());
        }
        if !(self.temp_min > 0.0 && self.temp_min < self.temp_max) {
            return fail("need 0 < temp_min < temp_max".into());
        }
        if let Some(inj) = &self.rare_hard {
            if !(0.0..=1.0).contains(&inj.fraction) {
                return fail("rare_hard.fraction must be in [0, 1]".into());
            }
            if !(0.0 <= inj.hardness_min && inj.hardness_min <= inj.hardness_max && inj.hardness_max <= 1.0)
            {
                return fail("rare_hard hardness band must satisfy 0 <= min <= max <= 1".into());
            }
        }
        Ok(())
    }

    /// Power-law cardinality profile, clamped to the bounds and descending.
    pub fn cardinalities(&self) -> Vec<usize> {
        (0..self.num_classes)
            .map(|c| {
                let raw = self.examples_max as f64 * ((c + 1) as f64).powf(-self.pareto_shape);
                (raw.round() as usize).clamp(self.examples_min, self.examples_max)
            })
            .collect()
    }
}

/// Everything one synthetic run produces. Keyword sets and predictions are
/// in corpus order; evaluation-side metadata (hardness, the injected
/// rare-and-hard ids, per-class sizes) rides along for reporting.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub corpus: Corpus,
    pub keyword_sets: Vec<KeywordSet>,
    pub predictions: Vec<Prediction>,
    pub hardness: BTreeMap<String, f64>,
    pub rare_hard_ids: BTreeSet<String>,
    /// (class name, total cardinality, labeled-pool cardinality).
    pub classes: Vec<(String, usize, usize)>,
}

fn class_name(c: usize) -> String {
    format!("class{c:03}")
}

/// Distinct indices drawn uniformly without replacement, in draw order.
fn sample_indices(rng: &mut ChaCha8Rng, population: usize, take: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..population).collect();
    let take = take.min(population);
    for i in 0..take {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(take);
    pool
}

/// Correct-class posterior at a hardness-driven temperature: the true class
/// gets logit 1, the rest 0, softened by `T = temp_min + h (temp_max -
/// temp_min)`. Entropy rises strictly with hardness and is independent of
/// class rarity.
pub(crate) fn hardness_probs(
    true_class: usize,
    num_classes: usize,
    hardness: f64,
    spec: &SyntheticSpec,
) -> Vec<f64> {
    let temperature = spec.temp_min + hardness * (spec.temp_max - spec.temp_min);
    let hot = (1.0 / temperature).exp();
    let denom = hot + (num_classes - 1) as f64;
    let mut probs = vec![1.0 / denom; num_classes];
    probs[true_class] = hot / denom;
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    probs
}

/// Generate a corpus, keyword sets, and predictions, fully determined by
/// `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData, EvalError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cardinalities = spec.cardinalities();

    let mut examples = Vec::new();
    let mut keyword_sets = Vec::new();
    let mut predictions = Vec::new();
    let mut hardness_by_id = BTreeMap::new();
    let mut rare_hard_ids = BTreeSet::new();
    let mut classes = Vec::new();

    for (c, &cardinality) in cardinalities.iter().enumerate() {
        let labeled = ((spec.labeled_fraction * cardinality as f64).round() as usize)
            .clamp(1, cardinality - 1);
        classes.push((class_name(c), cardinality, labeled));
        let tail_for_injection = spec
            .rare_hard
            .as_ref()
            .is_some_and(|inj| labeled as u32 <= inj.tail_labeled_cardinality_max);

        for i in 0..cardinality {
            let id = format!("c{c:03}e{i:04}");
            let split = if i < labeled {
                Split::LabeledPool
            } else {
                Split::UnlabeledPool
            };

            // Keywords: one class keyword, a few commons, optional noise.
            let mut words: Vec<String> = Vec::new();
            let class_kw = rng.random_range(0..spec.class_keywords_per_class);
            words.push(format!("{} kw{class_kw}", class_name(c)));
            for common in sample_indices(&mut rng, spec.common_keywords, spec.common_per_example) {
                words.push(format!("common kw{common:03}"));
            }
            if spec.noise > 0.0 && rng.random::<f64>() < spec.noise {
                let h = rng.random_range(0..spec.hallucination_keywords);
                words.push(format!("hallucination kw{h}"));
            }

            let mut hardness: f64 = rng.random();
            if tail_for_injection && split == Split::UnlabeledPool {
                let inj = spec.rare_hard.as_ref().expect("checked");
                if rng.random::<f64>() < inj.fraction {
                    hardness =
                        inj.hardness_min + rng.random::<f64>() * (inj.hardness_max - inj.hardness_min);
                    rare_hard_ids.insert(id.clone());
                }
            }

            let media = vec![format!("synthetic://{}/{i:04}.jpg", class_name(c))];
            examples.push(Example::new(&id, media, Some(class_name(c)), split));
            keyword_sets.push(KeywordSet::from_raw(&id, ExtractionMode::Heuristic, &words));
            predictions.push(Prediction::from_probs(
                &id,
                hardness_probs(c, spec.num_classes, hardness, spec),
            ));
            hardness_by_id.insert(id, hardness);
        }
    }

    Ok(SyntheticData {
        corpus: Corpus::from_examples(examples)?,
        keyword_sets,
        predictions,
        hardness: hardness_by_id,
        rare_hard_ids,
        classes,
    })
}
