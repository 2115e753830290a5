//! C-MAPSS turbofan data: column schema, typed tables, file parsing and RUL labels.

mod parse;
mod schema;
pub mod synthetic;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use thiserror::Error;

pub use parse::{
    label_test_rul, label_train_rul, parse_data_file, parse_rul_file, read_table_csv,
    write_table_csv, DataFormat,
};
pub use schema::{
    column_schema, sensor_index, signal_index, signal_labels, ColumnSchema, COLUMN_COUNT,
    SENSOR_COUNT, SETTING_COUNT, SIGNAL_COUNT,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("empty input")]
    Empty,
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: field {field} is not a valid {kind}: {token:?}")]
    BadToken {
        line: usize,
        field: usize,
        kind: &'static str,
        token: String,
    },
    #[error("line {line}: not valid UTF-8")]
    InvalidUtf8 { line: usize },
    #[error("line {line}: {reason}")]
    Sequence { line: usize, reason: String },
    #[error("line {line}: RUL must be a nonnegative integer, got {token:?}")]
    BadRul { line: usize, token: String },
    #[error("{units} units but {ruls} RUL values")]
    RulCountMismatch { units: usize, ruls: usize },
    #[error("line {line}: bad header: {reason}")]
    Header { line: usize, reason: String },
    #[error("unknown agent {0:?} (expected FD001..FD004)")]
    UnknownAgent(String),
}

/// One of the four C-MAPSS sub-datasets, each treated as a federation client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AgentId {
    Fd001,
    Fd002,
    Fd003,
    Fd004,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl AgentId {
    pub const ALL: [AgentId; 4] = [
        AgentId::Fd001,
        AgentId::Fd002,
        AgentId::Fd003,
        AgentId::Fd004,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentId::Fd001 => "FD001",
            AgentId::Fd002 => "FD002",
            AgentId::Fd003 => "FD003",
            AgentId::Fd004 => "FD004",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Published trajectory counts for the NASA release.
    pub fn expected_units(self, split: Split) -> usize {
        match (self, split) {
            (AgentId::Fd001, _) => 100,
            (AgentId::Fd002, Split::Train) => 260,
            (AgentId::Fd002, Split::Test) => 259,
            (AgentId::Fd003, _) => 100,
            (AgentId::Fd004, Split::Train) => 248,
            (AgentId::Fd004, Split::Test) => 249,
        }
    }

    /// Number of simulated operating conditions.
    pub fn operating_conditions(self) -> usize {
        match self {
            AgentId::Fd001 | AgentId::Fd003 => 1,
            AgentId::Fd002 | AgentId::Fd004 => 6,
        }
    }

    /// Number of fault modes (HPC only, or HPC and fan).
    pub fn fault_modes(self) -> usize {
        match self {
            AgentId::Fd001 | AgentId::Fd002 => 1,
            AgentId::Fd003 | AgentId::Fd004 => 2,
        }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentId {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentId::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| IngestError::UnknownAgent(s.to_string()))
    }
}

/// One cycle of one engine. `features` starts with the 24 raw signals
/// (OS1..OS3, SM1..SM21); engineered columns are appended after them.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub unit: u32,
    pub cycle: u32,
    pub features: Vec<f64>,
    pub rul: Option<u32>,
}

impl Record {
    pub fn settings(&self) -> &[f64] {
        &self.features[..SETTING_COUNT]
    }

    pub fn sensors(&self) -> &[f64] {
        &self.features[SETTING_COUNT..SIGNAL_COUNT]
    }
}

/// Contiguous rows of one engine unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitSpan {
    pub unit: u32,
    pub rows: Range<usize>,
}

impl UnitSpan {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Per-agent engine data. Rows of a unit are contiguous, its cycles start at 1
/// and strictly increase, and either every row carries a RUL or none does.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesTable {
    agent: AgentId,
    feature_names: Vec<String>,
    rows: Vec<Record>,
    spans: Vec<UnitSpan>,
}

impl TimeSeriesTable {
    pub fn new(
        agent: AgentId,
        feature_names: Vec<String>,
        rows: Vec<Record>,
    ) -> Result<Self, IngestError> {
        let spans = validate_rows(&feature_names, &rows)?;
        Ok(Self {
            agent,
            feature_names,
            rows,
            spans,
        })
    }

    pub fn agent(&self) -> AgentId {
        self.agent
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn rows(&self) -> &[Record] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn units(&self) -> &[UnitSpan] {
        &self.spans
    }

    pub fn unit_ids(&self) -> Vec<u32> {
        self.spans.iter().map(|s| s.unit).collect()
    }

    pub fn is_labeled(&self) -> bool {
        self.rows.first().is_some_and(|r| r.rul.is_some())
    }

    /// Values of feature `col` over all rows.
    pub fn column(&self, col: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.features[col]).collect()
    }

    /// Values of feature `col` within one unit.
    pub fn unit_column(&self, span: &UnitSpan, col: usize) -> Vec<f64> {
        self.rows[span.rows.clone()]
            .iter()
            .map(|r| r.features[col])
            .collect()
    }

    /// RUL labels of a unit as reals. Panics on an unlabeled table.
    pub fn unit_rul(&self, span: &UnitSpan) -> Vec<f64> {
        self.rows[span.rows.clone()]
            .iter()
            .map(|r| f64::from(r.rul.expect("table is labeled")))
            .collect()
    }

    /// Overwrites feature `col` of a unit. Features carry no structural invariants.
    pub(crate) fn set_unit_column(&mut self, span: &UnitSpan, col: usize, values: &[f64]) {
        assert_eq!(values.len(), span.len());
        for (row, &v) in self.rows[span.rows.clone()].iter_mut().zip(values) {
            row.features[col] = v;
        }
    }

    pub(crate) fn rows_mut(&mut self) -> impl Iterator<Item = &mut Record> {
        self.rows.iter_mut()
    }

    /// Appends a named feature column computed per unit.
    pub(crate) fn push_column(
        &mut self,
        name: String,
        mut per_unit: impl FnMut(&TimeSeriesTable, &UnitSpan) -> Vec<f64>,
    ) {
        let spans = self.spans.clone();
        let values: Vec<Vec<f64>> = spans.iter().map(|s| per_unit(self, s)).collect();
        for (span, vals) in spans.iter().zip(values) {
            for (row, v) in self.rows[span.rows.clone()].iter_mut().zip(vals) {
                row.features.push(v);
            }
        }
        self.feature_names.push(name);
    }

    /// A new table holding only the selected units (in the given order of `keep`).
    pub fn select_units(&self, keep: &[u32]) -> TimeSeriesTable {
        let mut rows = Vec::new();
        for id in keep {
            if let Some(span) = self.spans.iter().find(|s| s.unit == *id) {
                rows.extend_from_slice(&self.rows[span.rows.clone()]);
            }
        }
        TimeSeriesTable::new(self.agent, self.feature_names.clone(), rows)
            .expect("subset of a valid table is valid")
    }

    /// Keeps the first `keep[i]` rows of unit `i`; units left with zero rows are dropped.
    pub(crate) fn truncate_units(&self, keep: &[usize]) -> TimeSeriesTable {
        assert_eq!(keep.len(), self.spans.len());
        let mut rows = Vec::with_capacity(self.rows.len());
        for (span, &n) in self.spans.iter().zip(keep) {
            let end = span.rows.start + n.min(span.len());
            rows.extend_from_slice(&self.rows[span.rows.start..end]);
        }
        TimeSeriesTable::new(self.agent, self.feature_names.clone(), rows)
            .expect("prefix truncation keeps the table valid")
    }
}

fn validate_rows(names: &[String], rows: &[Record]) -> Result<Vec<UnitSpan>, IngestError> {
    let labeled = rows.first().is_some_and(|r| r.rul.is_some());
    let mut spans: Vec<UnitSpan> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let line = i + 1;
        let fail = |reason: String| Err(IngestError::Sequence { line, reason });
        if row.features.len() != names.len() {
            return fail(format!(
                "{} feature values for {} feature names",
                row.features.len(),
                names.len()
            ));
        }
        if row.rul.is_some() != labeled {
            return fail("mixed labeled and unlabeled rows".into());
        }
        match spans.last_mut() {
            Some(span) if span.unit == row.unit => {
                let prev = rows[i - 1].cycle;
                if row.cycle <= prev {
                    return fail(format!(
                        "unit {}: cycle {} does not follow cycle {prev}",
                        row.unit, row.cycle
                    ));
                }
                span.rows.end = i + 1;
            }
            _ => {
                if spans.iter().any(|s| s.unit == row.unit) {
                    return fail(format!("unit {} rows are not contiguous", row.unit));
                }
                if row.cycle != 1 {
                    return fail(format!(
                        "unit {} starts at cycle {} instead of 1",
                        row.unit, row.cycle
                    ));
                }
                spans.push(UnitSpan {
                    unit: row.unit,
                    rows: i..i + 1,
                });
            }
        }
    }
    Ok(spans)
}
