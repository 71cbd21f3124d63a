use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Role of a column in a raw table. `Group` and `Label` columns ride along
/// untouched by the cleaning steps; only `Numeric` and `Categorical` columns
/// are features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Id,
    Numeric,
    Categorical,
    Group,
    Label,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn present(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.iter().filter(|c| c.is_some()).count(),
            ColumnData::Categorical(v) => v.iter().filter(|c| c.is_some()).count(),
        }
    }

    pub(crate) fn select(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(rows.iter().map(|&r| v[r].clone()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub data: ColumnData,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Numeric,
            data: ColumnData::Numeric(values),
        }
    }

    pub fn categorical(name: impl Into<String>, values: Vec<Option<String>>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
            data: ColumnData::Categorical(values),
        }
    }

    pub fn group(name: impl Into<String>, values: Vec<Option<String>>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Group,
            data: ColumnData::Categorical(values),
        }
    }

    pub fn label(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Label,
            data: ColumnData::Numeric(values),
        }
    }

    pub fn is_feature(&self) -> bool {
        matches!(self.kind, ColumnKind::Numeric | ColumnKind::Categorical)
    }

    pub fn present_fraction(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.present() as f64 / self.data.len() as f64
    }
}

/// Encounter-level table: one row per encounter, possibly several per patient.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub id_column: String,
    pub ids: Vec<String>,
    pub columns: Vec<Column>,
}

impl RawTable {
    pub fn new(id_column: impl Into<String>, ids: Vec<String>, columns: Vec<Column>) -> Result<Self> {
        let n = ids.len();
        for c in &columns {
            if c.data.len() != n {
                return Err(Error::dims(
                    "RawTable::new",
                    format!("column `{}` has {} cells, table has {n} rows", c.name, c.data.len()),
                ));
            }
            if c.kind == ColumnKind::Id {
                return Err(Error::InvalidConfig(format!(
                    "column `{}`: the id column is carried separately",
                    c.name
                )));
            }
        }
        Ok(Self {
            id_column: id_column.into(),
            ids,
            columns,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn feature_columns(&self) -> impl Iterator<Item = &Column> {
        self.columns.iter().filter(|c| c.is_feature())
    }

    pub fn missing_cells(&self) -> usize {
        self.columns
            .iter()
            .map(|c| c.data.len() - c.data.present())
            .sum()
    }

    pub fn select_rows(&self, rows: &[usize]) -> RawTable {
        RawTable {
            id_column: self.id_column.clone(),
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    kind: c.kind,
                    data: c.data.select(rows),
                })
                .collect(),
        }
    }

    /// Reads a CSV with a header row. `schema` maps column name to kind and
    /// must name exactly one `id` column. Empty cells and `NA` are missing.
    /// Header columns absent from the schema are skipped.
    pub fn read_csv(path: &Path, schema: &Schema) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let headers = reader.headers()?.clone();
        let id_name = schema.id_column()?;
        for name in schema.columns.keys() {
            if !headers.iter().any(|h| h == name) {
                return Err(Error::MissingColumn(name.clone()));
            }
        }
        let mut ids = Vec::new();
        let mut layout: Vec<(usize, String, ColumnKind)> = Vec::new();
        let mut id_idx = 0;
        for (i, h) in headers.iter().enumerate() {
            match schema.columns.get(h) {
                Some(ColumnKind::Id) => id_idx = i,
                Some(kind) => layout.push((i, h.to_string(), *kind)),
                None => log::warn!("column `{h}` is not in the schema; skipped"),
            }
        }
        let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); layout.len()];
        for (row_no, rec) in reader.records().enumerate() {
            let rec = rec?;
            let id = rec.get(id_idx).unwrap_or("").trim();
            if is_missing(id) {
                return Err(Error::Parse {
                    what: format!("row {}", row_no + 2),
                    detail: format!("missing patient id in `{id_name}`"),
                });
            }
            ids.push(id.to_string());
            for (slot, (i, _, _)) in cells.iter_mut().zip(&layout) {
                let raw = rec.get(*i).unwrap_or("").trim();
                slot.push(if is_missing(raw) { None } else { Some(raw.to_string()) });
            }
        }
        let mut columns = Vec::with_capacity(layout.len());
        for ((_, name, kind), raw) in layout.into_iter().zip(cells) {
            let data = match kind {
                ColumnKind::Numeric | ColumnKind::Label => {
                    let mut vals = Vec::with_capacity(raw.len());
                    for (r, cell) in raw.into_iter().enumerate() {
                        vals.push(match cell {
                            None => None,
                            Some(s) => Some(s.parse::<f64>().map_err(|e| Error::Parse {
                                what: format!("`{name}` row {}", r + 2),
                                detail: format!("{s:?}: {e}"),
                            })?),
                        });
                    }
                    ColumnData::Numeric(vals)
                }
                _ => ColumnData::Categorical(raw),
            };
            columns.push(Column { name, kind, data });
        }
        RawTable::new(id_name, ids, columns)
    }
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "NA"
}

/// Sidecar schema: `{"column": "numeric" | "categorical" | "id" | "group" | "label"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema {
    pub columns: BTreeMap<String, ColumnKind>,
}

impl Schema {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let schema: Schema = serde_json::from_str(&text)?;
        schema.id_column()?;
        Ok(schema)
    }

    pub fn id_column(&self) -> Result<String> {
        let ids: Vec<&String> = self
            .columns
            .iter()
            .filter(|(_, k)| **k == ColumnKind::Id)
            .map(|(n, _)| n)
            .collect();
        match ids.as_slice() {
            [one] => Ok((*one).clone()),
            _ => Err(Error::InvalidConfig(format!(
                "schema must declare exactly one id column, found {}",
                ids.len()
            ))),
        }
    }
}
