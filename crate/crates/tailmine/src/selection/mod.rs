//! Budget selection from a signal matrix.
//!
//! Dominance is coordinatewise: `a` dominates `b` when every score of `b` is
//! `<=` the matching score of `a` and at least one is strictly `<`. The
//! Pareto front is the non-dominated set; Pareto mining peels fronts (layer
//! by layer, removed layers no longer participate) until the budget fills,
//! sampling uniformly without replacement from a final oversized layer.
//!
//! The general front uses the naive all-pairs filter — at desk scale it is
//! fast enough and doubles as an easily-audited reference — with a
//! sort-and-sweep fast path for the two-signal case. All randomness flows
//! from the caller's seed; identical inputs give byte-identical output.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::{ScoringError, SignalMatrix};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("budget must be at least 1")]
    BudgetZero,
    #[error("selection needs a non-empty signal matrix")]
    EmptyMatrix,
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("mined set csv: {0}")]
    Csv(String),
}

/// `a` dominates `b`: weakly greater everywhere, strictly greater somewhere.
/// Irreflexive and asymmetric by construction.
///
/// Panics if the vectors differ in length; signal matrices guarantee equal
/// dimensionality for every row.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    assert_eq!(
        a.len(),
        b.len(),
        "dominance is undefined across dimensionalities"
    );
    let mut strict = false;
    for (&ai, &bi) in a.iter().zip(b) {
        if bi > ai {
            return false;
        }
        if bi < ai {
            strict = true;
        }
    }
    strict
}

/// Indices of the non-dominated rows, ascending. Duplicated score vectors
/// are mutually non-dominating, so they all make the front.
pub fn pareto_front_indices(points: &[Vec<f64>]) -> Vec<usize> {
    if points.is_empty() {
        return Vec::new();
    }
    if points[0].len() == 2 {
        return front_2d(points);
    }
    front_naive(points)
}

fn front_naive(points: &[Vec<f64>]) -> Vec<usize> {
    let mut front = Vec::new();
    'candidates: for (i, candidate) in points.iter().enumerate() {
        for (j, other) in points.iter().enumerate() {
            if i != j && dominates(other, candidate) {
                continue 'candidates;
            }
        }
        front.push(i);
    }
    front
}

/// Two-signal fast path: sweep in descending x, tracking the best y seen in
/// strictly-greater x groups. Within an equal-x group only the max-y points
/// survive, and only when they beat that running best.
fn front_2d(points: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[b][0]
            .total_cmp(&points[a][0])
            .then(points[b][1].total_cmp(&points[a][1]))
            .then(a.cmp(&b))
    });

    let mut front = Vec::new();
    let mut best_y = f64::NEG_INFINITY;
    let mut i = 0;
    while i < order.len() {
        let x = points[order[i]][0];
        let mut j = i;
        while j < order.len() && points[order[j]][0] == x {
            j += 1;
        }
        let group = &order[i..j];
        let group_max_y = group
            .iter()
            .map(|&idx| points[idx][1])
            .fold(f64::NEG_INFINITY, f64::max);
        if group_max_y > best_y {
            front.extend(group.iter().copied().filter(|&idx| points[idx][1] == group_max_y));
            best_y = group_max_y;
        }
        i = j;
    }
    front.sort_unstable();
    front
}

/// Peel the matrix into successive Pareto layers: layer 0 is the front,
/// each later layer is the front after removing all earlier ones.
pub fn pareto_layers(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut layers = Vec::new();
    while !remaining.is_empty() {
        let sub: Vec<Vec<f64>> = remaining.iter().map(|&i| points[i].clone()).collect();
        let local = pareto_front_indices(&sub);
        let layer: Vec<usize> = local.iter().map(|&i| remaining[i]).collect();
        let drop: BTreeSet<usize> = layer.iter().copied().collect();
        remaining.retain(|i| !drop.contains(i));
        layers.push(layer);
    }
    layers
}

/// Example ids on the Pareto front of the matrix.
pub fn pareto_front(matrix: &SignalMatrix) -> Result<BTreeSet<String>, SelectionError> {
    if matrix.is_empty() {
        return Err(SelectionError::EmptyMatrix);
    }
    Ok(pareto_front_indices(matrix.rows())
        .into_iter()
        .map(|i| matrix.example_ids()[i].clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    #[serde(rename = "topk")]
    TopK,
    Pareto,
    Linear,
}

impl std::fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SelectionMethod::TopK => "topk",
            SelectionMethod::Pareto => "pareto",
            SelectionMethod::Linear => "linear",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for SelectionMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "topk" => Ok(SelectionMethod::TopK),
            "pareto" => Ok(SelectionMethod::Pareto),
            "linear" => Ok(SelectionMethod::Linear),
            other => Err(format!("unknown selection method {other:?}")),
        }
    }
}

/// One selected example with its provenance: which Pareto layer produced it
/// and its rank within that layer (top-k selections are a single layer 0).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinedItem {
    pub example_id: String,
    pub layer: u32,
    pub rank: u32,
}

/// Ordered selection result. Layer indices are nondecreasing along `items`;
/// there are never duplicate ids; `items.len() == min(budget, population)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinedSet {
    pub items: Vec<MinedItem>,
    pub budget: usize,
    pub method: SelectionMethod,
    pub seed: u64,
}

impl MinedSet {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|item| item.example_id.as_str())
    }

    pub fn id_set(&self) -> BTreeSet<String> {
        self.ids().map(|s| s.to_string()).collect()
    }
}

/// Uniform sample without replacement via partial Fisher-Yates; returned in
/// draw order. Shared by every tie-breaking site so that identical seeds
/// make identical choices.
fn sample_without_replacement<T: Copy>(candidates: &[T], take: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let mut pool: Vec<T> = candidates.to_vec();
    let take = take.min(pool.len());
    for i in 0..take {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(take);
    pool
}

/// Mine a budget by consuming Pareto layers. Whole layers are taken in
/// matrix order until the next layer no longer fits, then the remainder is
/// sampled uniformly without replacement from it. With a budget beyond the
/// population, the whole (layered) population comes back with a warning.
pub fn pareto_mine(
    matrix: &SignalMatrix,
    budget: usize,
    seed: u64,
) -> Result<MinedSet, SelectionError> {
    if budget == 0 {
        return Err(SelectionError::BudgetZero);
    }
    if matrix.is_empty() {
        return Err(SelectionError::EmptyMatrix);
    }
    let population = matrix.len();
    if budget > population {
        log::warn!("budget {budget} exceeds population {population}; selecting everything");
    }
    let target = budget.min(population);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::with_capacity(target);
    let mut remaining: Vec<usize> = (0..population).collect();
    let mut layer = 0u32;
    while items.len() < target {
        let sub: Vec<Vec<f64>> = remaining.iter().map(|&i| matrix.rows()[i].clone()).collect();
        let front: Vec<usize> = pareto_front_indices(&sub)
            .into_iter()
            .map(|i| remaining[i])
            .collect();
        let need = target - items.len();
        let chosen: Vec<usize> = if front.len() <= need {
            front.clone()
        } else {
            sample_without_replacement(&front, need, &mut rng)
        };
        for (rank, &idx) in chosen.iter().enumerate() {
            items.push(MinedItem {
                example_id: matrix.example_ids()[idx].clone(),
                layer,
                rank: rank as u32,
            });
        }
        let drop: BTreeSet<usize> = front.into_iter().collect();
        remaining.retain(|i| !drop.contains(i));
        layer += 1;
    }

    Ok(MinedSet {
        items,
        budget,
        method: SelectionMethod::Pareto,
        seed,
    })
}

/// The `budget` highest scores in one column; ties at the cut are broken by
/// seeded uniform sampling among the tied ids (the same sampler and
/// candidate order Pareto mining uses for an oversized layer).
pub fn top_k(
    matrix: &SignalMatrix,
    column: &str,
    budget: usize,
    seed: u64,
) -> Result<MinedSet, SelectionError> {
    top_k_with_method(matrix, column, budget, seed, SelectionMethod::TopK)
}

fn top_k_with_method(
    matrix: &SignalMatrix,
    column: &str,
    budget: usize,
    seed: u64,
    method: SelectionMethod,
) -> Result<MinedSet, SelectionError> {
    if budget == 0 {
        return Err(SelectionError::BudgetZero);
    }
    if matrix.is_empty() {
        return Err(SelectionError::EmptyMatrix);
    }
    let scores = matrix.column_values(column)?;
    let population = matrix.len();
    let target = budget.min(population);
    if budget > population {
        log::warn!("budget {budget} exceeds population {population}; selecting everything");
    }

    let mut order: Vec<usize> = (0..population).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let cut = scores[order[target - 1]];

    let sure: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| scores[i] > cut)
        .collect();
    let tied: Vec<usize> = (0..population).filter(|&i| scores[i] == cut).collect();
    let from_tied = target - sure.len();
    let chosen_tied: Vec<usize> = if from_tied == tied.len() {
        tied
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_without_replacement(&tied, from_tied, &mut rng)
    };

    let mut items = Vec::with_capacity(target);
    for (rank, idx) in sure.into_iter().chain(chosen_tied).enumerate() {
        items.push(MinedItem {
            example_id: matrix.example_ids()[idx].clone(),
            layer: 0,
            rank: rank as u32,
        });
    }
    Ok(MinedSet {
        items,
        budget,
        method,
        seed,
    })
}

/// Result of the normalized linear-combination baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCombined {
    /// Single column named `combined`, same example order as the input.
    pub matrix: SignalMatrix,
    /// Columns whose standard deviation was zero; they were z-scored to
    /// all-zeros because a constant signal carries no ranking information.
    pub degenerate_columns: Vec<String>,
}

/// Z-normalize each column (population mean and standard deviation over the
/// matrix's examples), then average the normalized scores per example.
pub fn linear_combine(matrix: &SignalMatrix) -> Result<LinearCombined, SelectionError> {
    if matrix.is_empty() {
        return Err(SelectionError::EmptyMatrix);
    }
    let n = matrix.len() as f64;
    let num_columns = matrix.columns().len();
    let mut degenerate_columns = Vec::new();
    let mut z_columns: Vec<Vec<f64>> = Vec::with_capacity(num_columns);
    for name in matrix.columns() {
        let values = matrix.column_values(name)?;
        let mean = values.iter().sum::<f64>() / n;
        let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = variance.sqrt();
        if std == 0.0 {
            log::warn!("signal column {name:?} is constant; z-scoring to zeros");
            degenerate_columns.push(name.clone());
            z_columns.push(vec![0.0; values.len()]);
        } else {
            z_columns.push(values.iter().map(|v| (v - mean) / std).collect());
        }
    }
    let combined: Vec<Vec<f64>> = (0..matrix.len())
        .map(|i| {
            let sum: f64 = z_columns.iter().map(|column| column[i]).sum();
            vec![sum / num_columns as f64]
        })
        .collect();
    let matrix = SignalMatrix::new(
        matrix.example_ids().to_vec(),
        vec!["combined".to_string()],
        combined,
    )
    .map_err(SelectionError::Scoring)?;
    Ok(LinearCombined {
        matrix,
        degenerate_columns,
    })
}

/// Linear-combination baseline end to end: combine, then take the top of the
/// combined column.
pub fn linear_mine(
    matrix: &SignalMatrix,
    budget: usize,
    seed: u64,
) -> Result<MinedSet, SelectionError> {
    let combined = linear_combine(matrix)?;
    top_k_with_method(&combined.matrix, "combined", budget, seed, SelectionMethod::Linear)
}

// ---------------------------------------------------------------------------
// Selection-unit grouping
// ---------------------------------------------------------------------------

/// Collapse matrix rows into selection units: each unit's score per signal is
/// the max over its members (a unit is as novel as its most novel member).
/// Ungrouped examples form singleton units named by their id. Returns the
/// unit matrix and unit -> member ids in matrix order.
pub fn collapse_by_group(
    matrix: &SignalMatrix,
    groups: &BTreeMap<String, String>,
) -> Result<(SignalMatrix, BTreeMap<String, Vec<String>>), SelectionError> {
    let mut unit_order: Vec<String> = Vec::new();
    let mut members: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut unit_rows: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (i, id) in matrix.example_ids().iter().enumerate() {
        let unit = groups.get(id).cloned().unwrap_or_else(|| id.clone());
        if !members.contains_key(&unit) {
            unit_order.push(unit.clone());
        }
        members.entry(unit.clone()).or_default().push(id.clone());
        let row = unit_rows
            .entry(unit)
            .or_insert_with(|| vec![f64::NEG_INFINITY; matrix.columns().len()]);
        for (slot, &value) in row.iter_mut().zip(&matrix.rows()[i]) {
            *slot = slot.max(value);
        }
    }
    let rows: Vec<Vec<f64>> = unit_order.iter().map(|u| unit_rows[u].clone()).collect();
    let unit_matrix = SignalMatrix::new(unit_order, matrix.columns().to_vec(), rows)
        .map_err(SelectionError::Scoring)?;
    Ok((unit_matrix, members))
}

/// Expand a unit-level selection back to example ids, keeping each unit's
/// layer and rank on all of its members.
pub fn expand_groups(mined: &MinedSet, members: &BTreeMap<String, Vec<String>>) -> MinedSet {
    let mut items = Vec::new();
    for item in &mined.items {
        let ids = members
            .get(&item.example_id)
            .cloned()
            .unwrap_or_else(|| vec![item.example_id.clone()]);
        for id in ids {
            items.push(MinedItem {
                example_id: id,
                layer: item.layer,
                rank: item.rank,
            });
        }
    }
    MinedSet {
        items,
        budget: mined.budget,
        method: mined.method,
        seed: mined.seed,
    }
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

/// Write a mined set as `id,layer,rank,method,seed`.
pub fn write_mined_csv(set: &MinedSet, path: impl AsRef<Path>) -> Result<(), SelectionError> {
    let mut writer =
        csv::Writer::from_path(path.as_ref()).map_err(|e| SelectionError::Csv(e.to_string()))?;
    writer
        .write_record(["id", "layer", "rank", "method", "seed"])
        .map_err(|e| SelectionError::Csv(e.to_string()))?;
    let method = set.method.to_string();
    let seed = set.seed.to_string();
    for item in &set.items {
        writer
            .write_record([
                item.example_id.as_str(),
                &item.layer.to_string(),
                &item.rank.to_string(),
                &method,
                &seed,
            ])
            .map_err(|e| SelectionError::Csv(e.to_string()))?;
    }
    writer
        .flush()
        .map_err(|e| SelectionError::Csv(e.to_string()))?;
    Ok(())
}

/// Read a mined-set CSV back. The budget field is reconstructed as the item
/// count (the run metadata record carries the requested budget).
pub fn read_mined_csv(path: impl AsRef<Path>) -> Result<MinedSet, SelectionError> {
    let mut reader =
        csv::Reader::from_path(path.as_ref()).map_err(|e| SelectionError::Csv(e.to_string()))?;
    let mut items = Vec::new();
    let mut method = SelectionMethod::TopK;
    let mut seed = 0u64;
    for record in reader.records() {
        let record = record.map_err(|e| SelectionError::Csv(e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or_default().to_string();
        items.push(MinedItem {
            example_id: field(0),
            layer: field(1).parse().map_err(|e| SelectionError::Csv(format!("layer: {e}")))?,
            rank: field(2).parse().map_err(|e| SelectionError::Csv(format!("rank: {e}")))?,
        });
        method = field(3)
            .parse()
            .map_err(|e: String| SelectionError::Csv(e))?;
        seed = field(4).parse().map_err(|e| SelectionError::Csv(format!("seed: {e}")))?;
    }
    Ok(MinedSet {
        budget: items.len(),
        items,
        method,
        seed,
    })
}

/// CSV line describing the layer structure, used in run metadata.
pub fn layer_summary(set: &MinedSet) -> String {
    let mut sizes: BTreeMap<u32, usize> = BTreeMap::new();
    for item in &set.items {
        *sizes.entry(item.layer).or_insert(0) += 1;
    }
    sizes
        .iter()
        .map(|(layer, count)| format!("{layer}:{count}"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests;
