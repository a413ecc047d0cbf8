//! Cohort ingestion, complete-case filtering, encoding and standardization.

mod clinical;
mod features;
mod synth;

pub use clinical::{Band, ClinicalBands};
pub use features::{to_feature_matrix, FeatureMatrix, FeatureOrigin, Scaler};
pub use synth::{generate_labeled, generate_synthetic_cohort, GeneratedColumn, GeneratorSpec, NumericParams, ProfileSpec, SyntheticCohort};

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clinical_scale: Option<String>,
}

impl ColumnSchema {
    pub fn numeric(name: &str) -> Self {
        ColumnSchema { name: name.into(), kind: ColumnKind::Numeric, categories: vec![], clinical_scale: None }
    }

    pub fn clinical(name: &str, scale: &str) -> Self {
        ColumnSchema { clinical_scale: Some(scale.into()), ..Self::numeric(name) }
    }

    pub fn categorical(name: &str, categories: &[&str]) -> Self {
        ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories: categories.iter().map(|c| c.to_string()).collect(),
            clinical_scale: None,
        }
    }
}

/// Schema file layout: `{"id_column": "id", "columns": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id_column: Option<String>,
    pub columns: Vec<ColumnSchema>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSchema>) -> Self {
        Schema { id_column: None, columns }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: Schema = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
            match c.kind {
                ColumnKind::Categorical => {
                    if c.categories.is_empty() {
                        return Err(Error::Schema(format!("categorical column `{}` declares no categories", c.name)));
                    }
                    if c.clinical_scale.is_some() {
                        return Err(Error::Schema(format!("clinical scale on categorical column `{}`", c.name)));
                    }
                    let distinct: HashSet<_> = c.categories.iter().collect();
                    if distinct.len() != c.categories.len() {
                        return Err(Error::Schema(format!("duplicate category in `{}`", c.name)));
                    }
                }
                ColumnKind::Numeric => {
                    if !c.categories.is_empty() {
                        return Err(Error::Schema(format!("numeric column `{}` declares categories", c.name)));
                    }
                }
            }
        }
        if let Some(id) = &self.id_column {
            if seen.contains(id.as_str()) {
                return Err(Error::Schema(format!("id column `{id}` is also a data column")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    Number(f64),
    /// Index into the column's declared categories.
    Category(u32),
}

impl Cell {
    pub fn as_number(self) -> Option<f64> {
        match self {
            Cell::Number(x) => Some(x),
            Cell::Category(_) => None,
        }
    }

    pub fn as_category(self) -> Option<usize> {
        match self {
            Cell::Category(c) => Some(c as usize),
            Cell::Number(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: Vec<ColumnSchema>,
    pub rows: Vec<Vec<Option<Cell>>>,
    pub row_ids: Vec<String>,
}

impl Dataset {
    pub fn new(schema: Vec<ColumnSchema>, rows: Vec<Vec<Option<Cell>>>, row_ids: Vec<String>) -> Result<Self> {
        let ds = Dataset { schema, rows, row_ids };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        Schema::new(self.schema.clone()).validate()?;
        if self.row_ids.len() != self.rows.len() {
            return Err(Error::Schema("row id count differs from row count".into()));
        }
        let distinct: HashSet<_> = self.row_ids.iter().collect();
        if distinct.len() != self.row_ids.len() {
            return Err(Error::Schema("row ids are not unique".into()));
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != self.schema.len() {
                return Err(Error::Schema(format!("row {r} has {} cells, schema has {}", row.len(), self.schema.len())));
            }
            for (cell, col) in row.iter().zip(&self.schema) {
                match (cell, col.kind) {
                    (None, _) => {}
                    (Some(Cell::Number(x)), ColumnKind::Numeric) if x.is_finite() => {}
                    (Some(Cell::Category(c)), ColumnKind::Categorical) if (*c as usize) < col.categories.len() => {}
                    _ => return Err(Error::Schema(format!("row {r}: cell does not conform to column `{}`", col.name))),
                }
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    /// Values of a numeric column, skipping missing cells.
    pub fn numeric_column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r[j].and_then(Cell::as_number)).collect()
    }

    pub fn missing_count(&self) -> usize {
        self.rows.iter().flatten().filter(|c| c.is_none()).count()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            row_ids: idx.iter().map(|&i| self.row_ids[i].clone()).collect(),
        }
    }

    /// Writes the dataset back out as CSV with an `id` column first.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["id".to_string()];
        header.extend(self.schema.iter().map(|c| c.name.clone()));
        out.write_record(&header)?;
        for (id, row) in self.row_ids.iter().zip(&self.rows) {
            let mut rec = vec![id.clone()];
            for (cell, col) in row.iter().zip(&self.schema) {
                rec.push(match cell {
                    None => String::new(),
                    Some(Cell::Number(x)) => format!("{x}"),
                    Some(Cell::Category(c)) => col.categories[*c as usize].clone(),
                });
            }
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Cells equal to this token (after trimming) are missing. Empty cells always are.
    pub na_token: String,
}

pub fn load_csv(path: &Path, schema: &Schema, opts: &CsvOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, opts)
}

/// Parses a headered CSV against the schema. Header order does not matter.
pub fn read_csv<R: std::io::Read>(reader: R, schema: &Schema, opts: &CsvOptions) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let id_name = schema.id_column.clone().unwrap_or_else(|| "id".to_string());
    let mut id_pos = None;
    let mut positions: HashMap<&str, usize> = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        if schema.columns.iter().any(|c| &c.name == h) {
            if positions.insert(h.as_str(), i).is_some() {
                return Err(Error::Schema(format!("column `{h}` appears twice in header")));
            }
        } else if *h == id_name {
            id_pos = Some(i);
        } else {
            return Err(Error::Schema(format!("header column `{h}` is not declared in the schema")));
        }
    }
    if schema.id_column.is_some() && id_pos.is_none() {
        return Err(Error::Schema(format!("id column `{id_name}` missing from header")));
    }
    let col_pos: Vec<usize> = schema
        .columns
        .iter()
        .map(|c| {
            positions
                .get(c.name.as_str())
                .copied()
                .ok_or_else(|| Error::Schema(format!("schema column `{}` missing from header", c.name)))
        })
        .collect::<Result<_>>()?;

    let na = opts.na_token.trim();
    let mut rows = Vec::new();
    let mut row_ids = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut row = Vec::with_capacity(schema.columns.len());
        for (col, &pos) in schema.columns.iter().zip(&col_pos) {
            let raw = rec.get(pos).unwrap_or("").trim();
            if raw.is_empty() || (!na.is_empty() && raw == na) {
                row.push(None);
                continue;
            }
            let cell = match col.kind {
                ColumnKind::Numeric => {
                    let x: f64 = raw.parse().map_err(|_| Error::Parse {
                        row: r + 1,
                        column: col.name.clone(),
                        value: raw.to_string(),
                    })?;
                    if !x.is_finite() {
                        return Err(Error::Parse { row: r + 1, column: col.name.clone(), value: raw.to_string() });
                    }
                    Cell::Number(x)
                }
                ColumnKind::Categorical => {
                    let c = col.categories.iter().position(|c| c == raw).ok_or_else(|| {
                        Error::Schema(format!("row {}: unknown category `{raw}` in column `{}`", r + 1, col.name))
                    })?;
                    Cell::Category(c as u32)
                }
            };
            row.push(Some(cell));
        }
        rows.push(row);
        row_ids.push(match id_pos {
            Some(p) => rec.get(p).unwrap_or("").trim().to_string(),
            None => format!("{r}"),
        });
    }
    Dataset::new(schema.columns.clone(), rows, row_ids)
}

/// Keeps only rows without any missing cell, preserving order and ids.
pub fn complete_case_filter(d: &Dataset) -> Result<Dataset> {
    let keep: Vec<usize> = (0..d.n_rows()).filter(|&i| d.rows[i].iter().all(Option::is_some)).collect();
    if keep.is_empty() {
        return Err(Error::EmptyCohort);
    }
    Ok(d.select_rows(&keep))
}
