//! Tidy result tables and their CSV / JSON encodings.
//!
//! Floats are written in shortest round-trip form so identical inputs give
//! identical bytes. Complex columns become `<name>_re`, `<name>_im` in CSV and
//! `[re, im]` pairs in JSON; non-finite numbers are spelled `NaN`, `inf`, `-inf`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use dtscatter_core::C64;
use serde_json::{json, Map, Value as Json};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Real,
    Complex,
    Int,
    Bool,
    Text,
}

impl ColumnKind {
    fn name(self) -> &'static str {
        match self {
            Self::Real => "real",
            Self::Complex => "complex",
            Self::Int => "int",
            Self::Bool => "bool",
            Self::Text => "text",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "real" => Self::Real,
            "complex" => Self::Complex,
            "int" => Self::Int,
            "bool" => Self::Bool,
            "text" => Self::Text,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self { name: name.into(), kind }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Complex(C64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl Cell {
    pub fn kind(&self) -> ColumnKind {
        match self {
            Self::Real(_) => ColumnKind::Real,
            Self::Complex(_) => ColumnKind::Complex,
            Self::Int(_) => ColumnKind::Int,
            Self::Bool(_) => ColumnKind::Bool,
            Self::Text(_) => ColumnKind::Text,
        }
    }

    /// Placeholder for an output that could not be computed.
    pub fn missing(kind: ColumnKind) -> Self {
        match kind {
            ColumnKind::Real => Self::Real(f64::NAN),
            ColumnKind::Complex => Self::Complex(C64::new(f64::NAN, f64::NAN)),
            ColumnKind::Int => Self::Int(-1),
            ColumnKind::Bool => Self::Bool(false),
            ColumnKind::Text => Self::Text(String::new()),
        }
    }

    /// Bitwise comparison, so `NaN` equals itself.
    fn same(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Real(a), Self::Real(b)) => a.to_bits() == b.to_bits(),
            (Self::Complex(a), Self::Complex(b)) => a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits(),
            _ => self == other,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ResultTable {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    pub metadata: Map<String, Json>,
}

impl PartialEq for ResultTable {
    fn eq(&self, other: &Self) -> bool {
        self.columns == other.columns
            && self.metadata == other.metadata
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same(y)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed table: {0}")]
    Malformed(String),
}

impl ResultTable {
    pub fn new(columns: Vec<Column>) -> Self {
        Self {
            columns,
            ..Self::default()
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        debug_assert!(row.iter().zip(&self.columns).all(|(c, col)| c.kind() == col.kind));
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn csv_header(&self) -> Vec<String> {
        self.columns
            .iter()
            .flat_map(|c| match c.kind {
                ColumnKind::Complex => vec![format!("{}_re", c.name), format!("{}_im", c.name)],
                _ => vec![c.name.clone()],
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(w);
        out.write_record(self.csv_header())?;
        for row in &self.rows {
            let fields: Vec<String> = row
                .iter()
                .flat_map(|c| match c {
                    Cell::Real(x) => vec![fmt_float(*x)],
                    Cell::Complex(z) => vec![fmt_float(z.re), fmt_float(z.im)],
                    Cell::Int(i) => vec![i.to_string()],
                    Cell::Bool(b) => vec![b.to_string()],
                    Cell::Text(s) => vec![s.clone()],
                })
                .collect();
            out.write_record(fields)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Json {
        let columns: Vec<Json> = self
            .columns
            .iter()
            .map(|c| json!({ "name": c.name, "kind": c.kind.name() }))
            .collect();
        let rows: Vec<Json> = self
            .rows
            .iter()
            .map(|r| Json::Array(r.iter().map(cell_json).collect()))
            .collect();
        json!({ "metadata": Json::Object(self.metadata.clone()), "columns": columns, "rows": rows })
    }

    pub fn json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("tables always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, TableError> {
        let bad = |m: &str| TableError::Malformed(m.to_string());
        let doc: Json = serde_json::from_str(text).map_err(|e| TableError::Malformed(e.to_string()))?;
        let metadata = doc["metadata"].as_object().ok_or_else(|| bad("metadata is not an object"))?.clone();
        let columns = doc["columns"]
            .as_array()
            .ok_or_else(|| bad("columns is not an array"))?
            .iter()
            .map(|c| {
                let name = c["name"].as_str().ok_or_else(|| bad("column without a name"))?;
                let kind = c["kind"].as_str().and_then(ColumnKind::parse).ok_or_else(|| bad("unknown column kind"))?;
                Ok(Column::new(name, kind))
            })
            .collect::<Result<Vec<_>, TableError>>()?;
        let mut table = Self {
            columns,
            rows: Vec::new(),
            metadata,
        };
        for row in doc["rows"].as_array().ok_or_else(|| bad("rows is not an array"))? {
            let cells = row.as_array().ok_or_else(|| bad("row is not an array"))?;
            if cells.len() != table.columns.len() {
                return Err(bad("row length differs from the column count"));
            }
            let parsed = cells
                .iter()
                .zip(&table.columns)
                .map(|(v, c)| parse_cell(v, c.kind).ok_or_else(|| TableError::Malformed(format!("bad value for `{}`", c.name))))
                .collect::<Result<Vec<_>, _>>()?;
            table.rows.push(parsed);
        }
        Ok(table)
    }

    /// Writes to `path` (or stdout when `None`). CSV output puts the metadata
    /// into a `<path>.meta.json` sidecar.
    pub fn emit(&self, format: Format, path: Option<&Path>) -> Result<(), TableError> {
        let Some(path) = path else {
            let stdout = io::stdout();
            return match format {
                Format::Csv => self.write_csv(stdout.lock()).map_err(|e| io_error("<stdout>", e.into())),
                Format::Json => stdout.lock().write_all(self.json_string().as_bytes()).map_err(|e| io_error("<stdout>", e)),
            };
        };
        match format {
            Format::Csv => {
                let f = File::create(path).map_err(|e| io_error(path, e))?;
                self.write_csv(BufWriter::new(f)).map_err(|e| io_error(path, e.into()))?;
                let mut side = path.as_os_str().to_owned();
                side.push(".meta.json");
                let side = PathBuf::from(side);
                let mut text = serde_json::to_string_pretty(&Json::Object(self.metadata.clone())).expect("metadata serializes");
                text.push('\n');
                std::fs::write(&side, text).map_err(|e| io_error(&side, e))
            }
            Format::Json => std::fs::write(path, self.json_string()).map_err(|e| io_error(path, e)),
        }
    }
}

fn io_error(path: impl AsRef<Path>, source: io::Error) -> TableError {
    TableError::Io {
        path: path.as_ref().to_path_buf(),
        source,
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

fn float_json(x: f64) -> Json {
    if x.is_finite() {
        json!(x)
    } else {
        Json::String(fmt_float(x))
    }
}

fn cell_json(c: &Cell) -> Json {
    match c {
        Cell::Real(x) => float_json(*x),
        Cell::Complex(z) => json!([float_json(z.re), float_json(z.im)]),
        Cell::Int(i) => json!(i),
        Cell::Bool(b) => json!(b),
        Cell::Text(s) => json!(s),
    }
}

fn parse_float(v: &Json) -> Option<f64> {
    match v {
        Json::Number(n) => n.as_f64(),
        Json::String(s) => match s.as_str() {
            "NaN" => Some(f64::NAN),
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            _ => None,
        },
        _ => None,
    }
}

fn parse_cell(v: &Json, kind: ColumnKind) -> Option<Cell> {
    Some(match kind {
        ColumnKind::Real => Cell::Real(parse_float(v)?),
        ColumnKind::Complex => {
            let pair = v.as_array()?;
            if pair.len() != 2 {
                return None;
            }
            Cell::Complex(C64::new(parse_float(&pair[0])?, parse_float(&pair[1])?))
        }
        ColumnKind::Int => Cell::Int(v.as_i64()?),
        ColumnKind::Bool => Cell::Bool(v.as_bool()?),
        ColumnKind::Text => Cell::Text(v.as_str()?.to_string()),
    })
}
