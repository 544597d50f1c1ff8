//! Per-table attribute extraction from node predictions and integration of
//! many tables into one.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dom::OTHER;
use crate::error::{Error, Result};
use crate::model::NodePrediction;
use crate::train::TablePredictions;

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_DELIMITER: &str = "; ";

/// Extracted values of one attribute in one table, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub table_id: String,
    pub class: String,
    pub values: Vec<(String, f64)>,
}

fn check_class(class: &str, classes: &[String]) -> Result<()> {
    if class == OTHER || !classes.iter().any(|c| c == class) {
        return Err(Error::UnknownClass(class.to_string()));
    }
    Ok(())
}

/// Nodes predicted as `class` that carry text, by descending score and then
/// ascending node id.
fn candidates<'a>(preds: &'a [NodePrediction], class: &str) -> Vec<&'a NodePrediction> {
    let mut c: Vec<&NodePrediction> = preds
        .iter()
        .filter(|p| p.predicted == class && !p.text.is_empty())
        .collect();
    c.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.node_id.cmp(&b.node_id)));
    c
}

/// The highest-scoring node predicted as `class`.
pub fn extract_single(preds: &[NodePrediction], class: &str, classes: &[String]) -> Result<Option<(String, f64)>> {
    check_class(class, classes)?;
    Ok(candidates(preds, class).first().map(|p| (p.text.clone(), p.score)))
}

/// Every node predicted as `class` with score at least `threshold`.
pub fn extract_multi(
    preds: &[NodePrediction],
    class: &str,
    threshold: f64,
    classes: &[String],
) -> Result<Vec<(String, f64)>> {
    check_class(class, classes)?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Config(format!("threshold {threshold} not in [0, 1]")));
    }
    Ok(candidates(preds, class)
        .into_iter()
        .filter(|p| p.score >= threshold)
        .map(|p| (p.text.clone(), p.score))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Single,
    Multi,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Mode::Single),
            "multi" => Ok(Mode::Multi),
            _ => Err(Error::Config(format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrateConfig {
    pub mode: Mode,
    /// Per-attribute overrides of `mode`.
    pub modes: BTreeMap<String, Mode>,
    pub threshold: f64,
    pub delimiter: String,
}

impl Default for IntegrateConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Single,
            modes: BTreeMap::new(),
            threshold: DEFAULT_THRESHOLD,
            delimiter: DEFAULT_DELIMITER.into(),
        }
    }
}

impl IntegrateConfig {
    pub fn mode_for(&self, attribute: &str) -> Mode {
        self.modes.get(attribute).copied().unwrap_or(self.mode)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegratedRow {
    pub table_id: String,
    pub cells: Vec<String>,
}

/// One row per source table, one column per schema attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegratedTable {
    pub schema: Vec<String>,
    pub rows: Vec<IntegratedRow>,
}

/// Extractions of every schema attribute for one table.
pub fn extract_table(
    table: &TablePredictions,
    schema: &[String],
    classes: &[String],
    cfg: &IntegrateConfig,
) -> Result<Vec<Extraction>> {
    schema
        .iter()
        .map(|class| {
            let values = match cfg.mode_for(class) {
                Mode::Single => extract_single(&table.predictions, class, classes)?.into_iter().collect(),
                Mode::Multi => extract_multi(&table.predictions, class, cfg.threshold, classes)?,
            };
            Ok(Extraction {
                table_id: table.table_id.clone(),
                class: class.clone(),
                values,
            })
        })
        .collect()
}

/// Builds the unified table in input order.
pub fn integrate(
    tables: &[TablePredictions],
    schema: &[String],
    classes: &[String],
    cfg: &IntegrateConfig,
) -> Result<IntegratedTable> {
    if schema.is_empty() {
        return Err(Error::Config("integration schema is empty".into()));
    }
    let mut seen = HashSet::new();
    let mut rows = Vec::with_capacity(tables.len());
    for t in tables {
        if !seen.insert(t.table_id.as_str()) {
            return Err(Error::DuplicateTableId(t.table_id.clone()));
        }
        let cells = extract_table(t, schema, classes, cfg)?
            .into_iter()
            .map(|e| {
                e.values
                    .into_iter()
                    .map(|(text, _)| text)
                    .collect::<Vec<_>>()
                    .join(&cfg.delimiter)
            })
            .collect();
        rows.push(IntegratedRow {
            table_id: t.table_id.clone(),
            cells,
        });
    }
    Ok(IntegratedTable {
        schema: schema.to_vec(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Jsonl,
    Html,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "jsonl" => Ok(Self::Jsonl),
            "html" => Ok(Self::Html),
            _ => Err(Error::Config(format!("unknown table format `{s}`"))),
        }
    }
}

fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

impl IntegratedTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.schema)?;
        for r in &self.rows {
            w.write_record(&r.cells)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// One `{"table_id", "cells": {attribute: text}}` object per row.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let cells: serde_json::Map<String, serde_json::Value> = self
                .schema
                .iter()
                .cloned()
                .zip(r.cells.iter().map(|c| serde_json::Value::String(c.clone())))
                .collect();
            let obj = serde_json::json!({ "table_id": r.table_id, "cells": cells });
            out.push_str(&obj.to_string());
            out.push('\n');
        }
        out
    }

    /// Inverse of [`IntegratedTable::to_jsonl`]; the schema is read from the
    /// first row (an empty file gives an empty schema).
    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            table_id: String,
            cells: serde_json::Map<String, serde_json::Value>,
        }
        let mut schema: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Row = serde_json::from_str(&line)?;
            let keys: Vec<String> = row.cells.keys().cloned().collect();
            match &schema {
                None => schema = Some(keys),
                Some(s) if *s != keys => {
                    return Err(Error::Config(format!("row `{}` has a different schema", row.table_id)))
                }
                _ => {}
            }
            let cells = row
                .cells
                .into_iter()
                .map(|(_, v)| match v {
                    serde_json::Value::String(s) => Ok(s),
                    other => Err(Error::Config(format!("non-string cell {other}"))),
                })
                .collect::<Result<_>>()?;
            rows.push(IntegratedRow {
                table_id: row.table_id,
                cells,
            });
        }
        Ok(Self {
            schema: schema.unwrap_or_default(),
            rows,
        })
    }

    pub fn to_html(&self) -> String {
        let mut out = String::from("<table>\n<tr>");
        for s in &self.schema {
            let _ = write!(out, "<th>{}</th>", escape_html(s));
        }
        out.push_str("</tr>\n");
        for r in &self.rows {
            out.push_str("<tr>");
            for c in &r.cells {
                let _ = write!(out, "<td>{}</td>", escape_html(c));
            }
            out.push_str("</tr>\n");
        }
        out.push_str("</table>\n");
        out
    }
}

pub fn write_table(table: &IntegratedTable, format: TableFormat, path: &Path) -> Result<()> {
    let text = match format {
        TableFormat::Csv => table.to_csv()?,
        TableFormat::Jsonl => table.to_jsonl(),
        TableFormat::Html => table.to_html(),
    };
    let mut f = BufWriter::new(std::fs::File::create(path)?);
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

pub fn read_table_jsonl(path: &Path) -> Result<IntegratedTable> {
    IntegratedTable::from_jsonl(BufReader::new(std::fs::File::open(path)?))
}
