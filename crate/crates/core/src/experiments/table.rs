use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    /// Probability per column label.
    pub values: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    /// Rollouts per regime.
    pub n: u64,
    pub seed: Seed,
    pub config_hash: String,
    /// Undefined feature counts, keyed by `column/regime`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub undefined: BTreeMap<String, BTreeMap<String, u64>>,
    /// Remarks on individual cells, keyed by `column: row`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
    /// Feature values of the synthesized observed episode, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<BTreeMap<String, String>>,
}

/// Named queries and their probabilities per column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryTable {
    pub experiment: String,
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
    pub metadata: TableMetadata,
}

impl QueryTable {
    pub fn value(&self, label: &str, column: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.label == label)?.values.get(column).copied()
    }
}

/// Expected values for one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTable {
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

impl From<&QueryTable> for ReferenceTable {
    fn from(t: &QueryTable) -> Self {
        ReferenceTable { columns: t.columns.clone(), rows: t.rows.clone() }
    }
}

/// Reference tables for several experiments, with free-form notes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub tables: BTreeMap<String, ReferenceTable>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
}

/// Tolerance for a row: one for every column, or per column. `null`
/// skips the comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RowTolerance {
    All(Option<f64>),
    PerColumn(BTreeMap<String, Option<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableTolerances {
    pub default: f64,
    #[serde(default)]
    pub rows: BTreeMap<String, RowTolerance>,
}

impl TableTolerances {
    pub fn uniform(tol: f64) -> Self {
        TableTolerances { default: tol, rows: BTreeMap::new() }
    }

    fn for_cell(&self, label: &str, column: &str) -> Option<f64> {
        match self.rows.get(label) {
            None => Some(self.default),
            Some(RowTolerance::All(t)) => *t,
            Some(RowTolerance::PerColumn(m)) => match m.get(column) {
                Some(t) => *t,
                None => Some(self.default),
            },
        }
    }
}

/// Tolerances for a whole reference set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSet {
    pub default: f64,
    #[serde(default)]
    pub experiments: BTreeMap<String, TableTolerances>,
}

impl ToleranceSet {
    pub fn for_experiment(&self, name: &str) -> TableTolerances {
        self.experiments.get(name).cloned().unwrap_or_else(|| TableTolerances::uniform(self.default))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiffStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellDiff {
    pub label: String,
    pub column: String,
    pub actual: f64,
    pub expected: f64,
    pub tolerance: Option<f64>,
    pub status: DiffStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    pub experiment: String,
    pub cells: Vec<CellDiff>,
}

impl DiffReport {
    pub fn passed(&self) -> bool {
        self.cells.iter().all(|c| c.status != DiffStatus::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellDiff> {
        self.cells.iter().filter(|c| c.status == DiffStatus::Fail)
    }
}

/// Compares every cell against the reference under absolute tolerances.
/// Row and column labels must match exactly.
pub fn diff_tables(actual: &QueryTable, reference: &ReferenceTable, tolerances: &TableTolerances) -> Result<DiffReport> {
    let mut a_cols = actual.columns.clone();
    let mut r_cols = reference.columns.clone();
    a_cols.sort();
    r_cols.sort();
    if a_cols != r_cols {
        return Err(Error::LabelMismatch(format!("columns {:?} vs {:?}", actual.columns, reference.columns)));
    }
    let mut a_rows: Vec<_> = actual.rows.iter().map(|r| &r.label).collect();
    let mut r_rows: Vec<_> = reference.rows.iter().map(|r| &r.label).collect();
    a_rows.sort();
    r_rows.sort();
    if a_rows != r_rows {
        return Err(Error::LabelMismatch(format!("rows {a_rows:?} vs {r_rows:?}")));
    }
    let mut cells = Vec::new();
    for row in &reference.rows {
        for column in &reference.columns {
            let expected = *row
                .values
                .get(column)
                .ok_or_else(|| Error::LabelMismatch(format!("reference row `{}` lacks column `{column}`", row.label)))?;
            let actual_value = actual
                .value(&row.label, column)
                .ok_or_else(|| Error::LabelMismatch(format!("row `{}` lacks column `{column}`", row.label)))?;
            let tolerance = tolerances.for_cell(&row.label, column);
            let status = match tolerance {
                None => DiffStatus::Skipped,
                Some(t) if (actual_value - expected).abs() <= t + 1e-12 => DiffStatus::Pass,
                Some(_) => DiffStatus::Fail,
            };
            cells.push(CellDiff { label: row.label.clone(), column: column.clone(), actual: actual_value, expected, tolerance, status });
        }
    }
    Ok(DiffReport { experiment: actual.experiment.clone(), cells })
}

/// Aligned plain-text rendering of a table.
pub fn render_text(table: &QueryTable) -> String {
    let width = table.rows.iter().map(|r| r.label.chars().count()).max().unwrap_or(0).max("query".len());
    let col_w: Vec<usize> = table.columns.iter().map(|c| c.chars().count().max(6)).collect();
    let mut out = String::new();
    let _ = write!(out, "{:<width$}", "query");
    for (c, w) in table.columns.iter().zip(&col_w) {
        let _ = write!(out, "  {c:>w$}");
    }
    out.push('\n');
    for row in &table.rows {
        let _ = write!(out, "{:<width$}", row.label);
        for (c, w) in table.columns.iter().zip(&col_w) {
            match row.values.get(c) {
                Some(v) => {
                    let _ = write!(out, "  {v:>w$.3}");
                }
                None => {
                    let _ = write!(out, "  {:>w$}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}
