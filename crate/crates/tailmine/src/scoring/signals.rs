//! The per-example signal matrix fed into selection, plus CSV in/out for
//! score columns.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ScoringError;
use crate::corpus::Corpus;

/// Named novelty scores for an ordered set of examples. Every stored score
/// is finite and every column is fully populated; higher means more novel.
/// Examples with missing scores never enter a matrix — assembly excludes
/// them explicitly instead of faking zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalMatrix {
    example_ids: Vec<String>,
    columns: Vec<String>,
    /// Row-major: `rows[example][column]`.
    rows: Vec<Vec<f64>>,
}

impl SignalMatrix {
    pub fn new(
        example_ids: Vec<String>,
        columns: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, ScoringError> {
        if columns.is_empty() {
            return Err(ScoringError::NoColumns);
        }
        let mut seen = BTreeSet::new();
        for column in &columns {
            if !seen.insert(column.clone()) {
                return Err(ScoringError::DuplicateColumn(column.clone()));
            }
        }
        if rows.len() != example_ids.len() {
            return Err(ScoringError::Shape(format!(
                "{} rows for {} example ids",
                rows.len(),
                example_ids.len()
            )));
        }
        let mut ids = BTreeSet::new();
        for id in &example_ids {
            if !ids.insert(id.clone()) {
                return Err(ScoringError::Shape(format!("duplicate example id {id:?}")));
            }
        }
        for (id, row) in example_ids.iter().zip(&rows) {
            if row.len() != columns.len() {
                return Err(ScoringError::Shape(format!(
                    "example {id:?} has {} scores for {} columns",
                    row.len(),
                    columns.len()
                )));
            }
            for (&value, column) in row.iter().zip(&columns) {
                if !value.is_finite() {
                    return Err(ScoringError::NonFiniteScore {
                        id: id.clone(),
                        column: column.clone(),
                        value,
                    });
                }
            }
        }
        Ok(Self {
            example_ids,
            columns,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.example_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.example_ids.is_empty()
    }

    pub fn example_ids(&self) -> &[String] {
        &self.example_ids
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn column_index(&self, name: &str) -> Result<usize, ScoringError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| ScoringError::UnknownColumn(name.to_string()))
    }

    pub fn column_values(&self, name: &str) -> Result<Vec<f64>, ScoringError> {
        let idx = self.column_index(name)?;
        Ok(self.rows.iter().map(|row| row[idx]).collect())
    }

    /// Restrict to one column (same example order).
    pub fn select_column(&self, name: &str) -> Result<SignalMatrix, ScoringError> {
        let idx = self.column_index(name)?;
        SignalMatrix::new(
            self.example_ids.clone(),
            vec![self.columns[idx].clone()],
            self.rows.iter().map(|row| vec![row[idx]]).collect(),
        )
    }

    /// Apply a per-column transform; used for rank/affine invariance checks.
    pub fn map_column<F: Fn(f64) -> f64>(&self, name: &str, f: F) -> Result<SignalMatrix, ScoringError> {
        let idx = self.column_index(name)?;
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut row = row.clone();
                row[idx] = f(row[idx]);
                row
            })
            .collect();
        SignalMatrix::new(self.example_ids.clone(), self.columns.clone(), rows)
    }
}

/// One score source: a named column of per-example scores covering a subset
/// of the corpus. Absent ids are explicit missing scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreColumn {
    pub name: String,
    pub scores: BTreeMap<String, f64>,
}

impl ScoreColumn {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            scores: BTreeMap::new(),
        }
    }
}

/// An example shut out of combined selection and which columns it lacked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub example_id: String,
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assembled {
    pub matrix: SignalMatrix,
    pub excluded: Vec<Exclusion>,
}

/// Join score columns into a matrix over the union of their example ids, in
/// corpus order. Examples missing any column are excluded and reported.
pub fn assemble_signals(corpus: &Corpus, columns: &[ScoreColumn]) -> Result<Assembled, ScoringError> {
    if columns.is_empty() {
        return Err(ScoringError::NoColumns);
    }
    let mut names = BTreeSet::new();
    for column in columns {
        if !names.insert(column.name.clone()) {
            return Err(ScoringError::DuplicateColumn(column.name.clone()));
        }
        for id in column.scores.keys() {
            if !corpus.contains(id) {
                return Err(ScoringError::UnknownExample {
                    id: id.clone(),
                    column: column.name.clone(),
                });
            }
        }
    }

    // Union of scored ids, ordered by corpus position.
    let mut union: BTreeSet<&str> = BTreeSet::new();
    for column in columns {
        union.extend(column.scores.keys().map(|s| s.as_str()));
    }
    let mut ordered: Vec<&str> = union.into_iter().collect();
    ordered.sort_by_key(|id| corpus.position(id).expect("checked membership"));

    let mut ids = Vec::new();
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for id in ordered {
        let mut row = Vec::with_capacity(columns.len());
        let mut missing = Vec::new();
        for column in columns {
            match column.scores.get(id) {
                Some(&value) => row.push(value),
                None => missing.push(column.name.clone()),
            }
        }
        if missing.is_empty() {
            ids.push(id.to_string());
            rows.push(row);
        } else {
            excluded.push(Exclusion {
                example_id: id.to_string(),
                missing,
            });
        }
    }

    let matrix = SignalMatrix::new(ids, columns.iter().map(|c| c.name.clone()).collect(), rows)?;
    Ok(Assembled { matrix, excluded })
}

/// Write one score column as CSV with header `id,<name>`, rows in the given
/// order.
pub fn write_score_csv(
    path: impl AsRef<Path>,
    name: &str,
    rows: &[(String, f64)],
) -> Result<(), ScoringError> {
    let mut writer = csv::Writer::from_path(path.as_ref()).map_err(csv_err)?;
    writer.write_record(["id", name]).map_err(csv_err)?;
    for (id, score) in rows {
        writer
            .write_record([id.as_str(), &format_score(*score)])
            .map_err(csv_err)?;
    }
    writer.flush().map_err(|e| ScoringError::Csv(e.to_string()))?;
    Ok(())
}

/// Read a score CSV produced by [`write_score_csv`]. The column name comes
/// from the header.
pub fn read_score_csv(path: impl AsRef<Path>) -> Result<ScoreColumn, ScoringError> {
    let mut reader = csv::Reader::from_path(path.as_ref()).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.len() != 2 || headers.get(0) != Some("id") {
        return Err(ScoringError::Csv(format!(
            "{}: expected header id,<signal>",
            path.as_ref().display()
        )));
    }
    let mut column = ScoreColumn::new(headers.get(1).unwrap_or("score"));
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let id = record.get(0).unwrap_or_default().to_string();
        let value: f64 = record
            .get(1)
            .unwrap_or_default()
            .parse()
            .map_err(|e| ScoringError::Csv(format!("bad score for {id:?}: {e}")))?;
        column.scores.insert(id, value);
    }
    Ok(column)
}

fn csv_err(e: csv::Error) -> ScoringError {
    ScoringError::Csv(e.to_string())
}

/// Decimal form for CSV output; f64 Display is shortest round-trip.
pub fn format_score(value: f64) -> String {
    format!("{value}")
}
