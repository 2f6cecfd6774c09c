//! Scenario reports and their JSON, CSV and text renderings.
//!
//! Field order is insertion order everywhere, and every float is rounded to
//! 12 significant digits when it enters a report, so a report serializes to
//! the same bytes on every run.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Significant digits kept for floats in reports.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds `x` to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let s = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let y: f64 = s.parse().expect("formatted float parses");
    // Normalize -0 so `-1e-30` style results do not print as "-0".
    if y == 0.0 {
        0.0
    } else {
        y
    }
}

/// A scalar report value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn num(x: f64) -> Self {
        if x.is_finite() {
            Cell::Num(round_sig(x))
        } else {
            Cell::Null
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Cell::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Null => f.write_str("null"),
            Cell::Bool(b) => write!(f, "{b}"),
            Cell::Int(i) => write!(f, "{i}"),
            // serde_json's shortest round-trip form, so text mirrors json.
            Cell::Num(x) => f.write_str(&serde_json::to_string(x).map_err(|_| fmt::Error)?),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::num(x)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<i64> for Cell {
    fn from(i: i64) -> Self {
        Cell::Int(i)
    }
}

impl From<u64> for Cell {
    fn from(i: u64) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Null, Into::into)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row. Panics if its width differs from the header; rows are
    /// built by code, never by user input.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match columns"
        );
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub values: IndexMap<String, Cell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Table>,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            values: IndexMap::new(),
            table: None,
        }
    }

    pub fn value(mut self, key: impl Into<String>, v: impl Into<Cell>) -> Self {
        self.values.insert(key.into(), v.into());
        self
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub description: String,
    pub toolkit_version: String,
    pub seed: u64,
    pub parameters: IndexMap<String, Cell>,
    pub sections: Vec<Section>,
    pub verdicts: IndexMap<String, bool>,
    pub notes: Vec<String>,
}

impl ScenarioReport {
    pub fn new(scenario: impl Into<String>, description: impl Into<String>, seed: u64) -> Self {
        Self {
            scenario: scenario.into(),
            description: description.into(),
            toolkit_version: crate::VERSION.to_string(),
            seed,
            parameters: IndexMap::new(),
            sections: Vec::new(),
            verdicts: IndexMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    /// Looks up `section.key`.
    pub fn value(&self, section: &str, key: &str) -> Option<&Cell> {
        self.section(section)?.values.get(key)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
    Text,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            _ => Err(Error::parse(s, "expected json, csv or text")),
        }
    }
}

/// Writes `report` to `out`.
///
/// CSV carries only the tabular sections: a lone table is written as plain
/// CSV, several are each preceded by a `# <section>` line and separated by a
/// blank line.
pub fn emit_report<W: Write>(report: &ScenarioReport, format: Format, mut out: W) -> Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, report)?;
            out.write_all(b"\n")?;
        }
        Format::Csv => emit_csv(report, &mut out)?,
        Format::Text => emit_text(report, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn emit_csv<W: Write>(report: &ScenarioReport, out: &mut W) -> Result<()> {
    let tables: Vec<(&str, &Table)> = report
        .sections
        .iter()
        .filter_map(|s| s.table.as_ref().map(|t| (s.name.as_str(), t)))
        .collect();
    if tables.is_empty() {
        return Err(Error::param("format", "report has no tabular sections"));
    }
    let several = tables.len() > 1;
    for (i, (name, table)) in tables.iter().enumerate() {
        if several {
            if i > 0 {
                out.write_all(b"\n")?;
            }
            writeln!(out, "# {name}")?;
        }
        let mut w = csv::Writer::from_writer(&mut *out);
        w.write_record(&table.columns)?;
        for row in &table.rows {
            w.write_record(row.iter().map(|c| match c {
                Cell::Null => String::new(),
                c => c.to_string(),
            }))?;
        }
        w.flush()?;
    }
    Ok(())
}

fn emit_text<W: Write>(report: &ScenarioReport, out: &mut W) -> Result<()> {
    writeln!(out, "scenario: {}", report.scenario)?;
    writeln!(out, "description: {}", report.description)?;
    writeln!(out, "toolkit_version: {}", report.toolkit_version)?;
    writeln!(out, "seed: {}", report.seed)?;
    if !report.parameters.is_empty() {
        writeln!(out, "\n[parameters]")?;
        write_pairs(
            out,
            report
                .parameters
                .iter()
                .map(|(k, v)| (k.as_str(), v.to_string())),
        )?;
    }
    for s in &report.sections {
        writeln!(out, "\n[{}]", s.name)?;
        write_pairs(
            out,
            s.values.iter().map(|(k, v)| (k.as_str(), v.to_string())),
        )?;
        if let Some(t) = &s.table {
            write_table(out, t)?;
        }
    }
    if !report.verdicts.is_empty() {
        writeln!(out, "\n[verdicts]")?;
        write_pairs(
            out,
            report
                .verdicts
                .iter()
                .map(|(k, v)| (k.as_str(), v.to_string())),
        )?;
    }
    if !report.notes.is_empty() {
        writeln!(out, "\n[notes]")?;
        for n in &report.notes {
            writeln!(out, "- {n}")?;
        }
    }
    Ok(())
}

fn write_pairs<'a, W: Write>(
    out: &mut W,
    pairs: impl Iterator<Item = (&'a str, String)>,
) -> Result<()> {
    let pairs: Vec<_> = pairs.collect();
    let width = pairs
        .iter()
        .map(|(k, _)| k.chars().count())
        .max()
        .unwrap_or(0);
    for (k, v) in pairs {
        writeln!(out, "  {k:<width$}  {v}")?;
    }
    Ok(())
}

fn write_table<W: Write>(out: &mut W, t: &Table) -> Result<()> {
    let cells: Vec<Vec<String>> = t
        .rows
        .iter()
        .map(|r| r.iter().map(Cell::to_string).collect())
        .collect();
    let widths: Vec<usize> = t
        .columns
        .iter()
        .enumerate()
        .map(|(i, c)| {
            cells
                .iter()
                .map(|r| r[i].chars().count())
                .chain(std::iter::once(c.chars().count()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |fields: &[String]| {
        let padded: Vec<String> = fields
            .iter()
            .zip(&widths)
            .map(|(f, &w)| format!("{f:>w$}"))
            .collect();
        format!("  {}", padded.join("  ").trim_end())
    };
    writeln!(out, "{}", line(&t.columns))?;
    for r in &cells {
        writeln!(out, "{}", line(r))?;
    }
    Ok(())
}
