//! Text tables, schema files, mask files and JSON helpers.
//!
//! A schema file is either a bare JSON array of columns or an object with a
//! `format` block and a `columns` array:
//!
//! ```json
//! {"format": {"delimiter": "semicolon", "header": true},
//!  "columns": [{"name": "alcohol", "kind": "numeric"},
//!              {"name": "quality", "kind": "categorical"},
//!              {"name": "id", "kind": "skip"}]}
//! ```
//!
//! Categorical columns without a `categories` list take their labels from the
//! data in first-appearance order. Without a schema every column whose
//! non-empty cells all parse as numbers is numeric and the rest categorical.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tabinr_core::table::{argmax_first, CellMask, ColumnDecl, ColumnKind, EncodedTable, FeatureKind, Layout};
use tabinr_core::{ColumnSpec, TableSchema};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    #[default]
    Comma,
    Semicolon,
    Tab,
    /// Runs of spaces or tabs.
    Whitespace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextFormat {
    pub delimiter: Delimiter,
    pub header: bool,
    /// Require header names to match the schema column names.
    pub check_header: bool,
    /// Cell texts treated as missing besides the empty string.
    pub na_values: Vec<String>,
}

impl Default for TextFormat {
    fn default() -> Self {
        Self {
            delimiter: Delimiter::Comma,
            header: true,
            check_header: true,
            na_values: ["?", "NA", "NaN", "nan"].map(String::from).to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    Numeric,
    Categorical,
    /// Present in the file, dropped on load.
    Skip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemaEntry {
    pub name: String,
    pub kind: EntryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

impl SchemaEntry {
    pub fn numeric(name: &str) -> Self {
        Self { name: name.into(), kind: EntryKind::Numeric, categories: None }
    }

    pub fn categorical(name: &str) -> Self {
        Self { name: name.into(), kind: EntryKind::Categorical, categories: None }
    }

    pub fn skip(name: &str) -> Self {
        Self { name: name.into(), kind: EntryKind::Skip, categories: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "SchemaRepr")]
pub struct SchemaFile {
    pub format: TextFormat,
    pub columns: Vec<SchemaEntry>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SchemaRepr {
    Columns(Vec<SchemaEntry>),
    Full {
        #[serde(default)]
        format: TextFormat,
        columns: Vec<SchemaEntry>,
    },
}

impl From<SchemaRepr> for SchemaFile {
    fn from(repr: SchemaRepr) -> Self {
        match repr {
            SchemaRepr::Columns(columns) => SchemaFile { format: TextFormat::default(), columns },
            SchemaRepr::Full { format, columns } => SchemaFile { format, columns },
        }
    }
}

impl SchemaFile {
    /// Fully resolved schema in the default text format.
    pub fn from_table_schema(schema: &TableSchema) -> Self {
        let columns = schema
            .columns()
            .iter()
            .map(|c| match &c.kind {
                ColumnKind::Numeric => SchemaEntry::numeric(&c.name),
                ColumnKind::Categorical { categories } => SchemaEntry {
                    name: c.name.clone(),
                    kind: EntryKind::Categorical,
                    categories: Some(categories.clone()),
                },
            })
            .collect();
        SchemaFile { format: TextFormat::default(), columns }
    }
}

#[derive(Clone, Debug)]
pub struct LoadedTable {
    pub table: EncodedTable,
    /// The schema used, with every category list filled in.
    pub source: SchemaFile,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::data(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// `<path>.json`, next to `path`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

type Records = Vec<Vec<String>>;

/// Header (if the format has one) and data records, NA tokens blanked.
pub fn read_records(path: &Path, format: &TextFormat) -> CliResult<(Option<Vec<String>>, Records)> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut records: Records = match format.delimiter {
        Delimiter::Whitespace => String::from_utf8_lossy(&bytes)
            .lines()
            .map(|l| l.split_whitespace().map(String::from).collect::<Vec<_>>())
            .filter(|r| !r.is_empty())
            .collect(),
        d => {
            let byte = match d {
                Delimiter::Semicolon => b';',
                Delimiter::Tab => b'\t',
                _ => b',',
            };
            let mut reader =
                csv::ReaderBuilder::new().delimiter(byte).has_headers(false).flexible(true).from_reader(&bytes[..]);
            let mut out = Vec::new();
            for rec in reader.byte_records() {
                let rec = rec.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
                out.push(rec.iter().map(|f| String::from_utf8_lossy(f).trim().to_string()).collect());
            }
            out
        }
    };
    let header = if format.header && !records.is_empty() {
        let mut h = records.remove(0);
        if let Some(first) = h.first_mut() {
            *first = first.trim_start_matches('\u{feff}').to_string();
        }
        Some(h)
    } else {
        None
    };
    for rec in &mut records {
        for cell in rec.iter_mut() {
            if format.na_values.iter().any(|na| na == cell) {
                cell.clear();
            }
        }
    }
    Ok((header, records))
}

pub fn load_table(path: &Path, source: Option<&SchemaFile>) -> CliResult<LoadedTable> {
    let default_format = TextFormat::default();
    let format = source.map_or(&default_format, |s| &s.format);
    let (header, records) = read_records(path, format)?;
    let where_ = |msg: String| CliError::data(format!("{}: {msg}", path.display()));
    if records.is_empty() {
        return Err(where_("no data rows".into()));
    }
    let entries: Vec<SchemaEntry> = match source {
        Some(s) => s.columns.clone(),
        None => {
            let names: Vec<String> = match &header {
                Some(h) => h.clone(),
                None => (1..=records[0].len()).map(|k| format!("x{k}")).collect(),
            };
            let inferred = TableSchema::infer(&names, &records).map_err(|e| where_(e.to_string()))?;
            SchemaFile::from_table_schema(&inferred).columns
        }
    };
    for (i, rec) in records.iter().enumerate() {
        if rec.len() != entries.len() {
            return Err(where_(format!("row {} has {} fields, expected {}", i + 1, rec.len(), entries.len())));
        }
    }
    if let (Some(h), true) = (&header, format.check_header) {
        let names: Vec<&str> = entries.iter().map(|e| e.name.as_str()).collect();
        if h.len() != names.len() || h.iter().zip(&names).any(|(a, b)| a != b) {
            return Err(where_(format!("header {h:?} does not match schema columns {names:?}")));
        }
    }
    let keep: Vec<usize> = (0..entries.len()).filter(|&k| entries[k].kind != EntryKind::Skip).collect();
    if keep.is_empty() {
        return Err(where_("schema keeps no columns".into()));
    }
    let kept: Records = records.iter().map(|r| keep.iter().map(|&k| r[k].clone()).collect()).collect();
    let decls = keep
        .iter()
        .map(|&k| {
            let e = &entries[k];
            let decl = match e.kind {
                EntryKind::Numeric => ColumnDecl::Numeric,
                _ => ColumnDecl::Categorical(e.categories.clone()),
            };
            (e.name.clone(), decl)
        })
        .collect();
    let schema = TableSchema::resolve(decls, &kept).map_err(|e| where_(e.to_string()))?;
    let table = EncodedTable::from_records(schema, &kept).map_err(|e| where_(e.to_string()))?;

    let mut resolved = entries;
    for (col, &k) in table.schema().columns().iter().zip(&keep) {
        if let ColumnKind::Categorical { categories } = &col.kind {
            resolved[k].categories = Some(categories.clone());
        }
    }
    Ok(LoadedTable { table, source: SchemaFile { format: format.clone(), columns: resolved } })
}

fn format_number(v: f64) -> String {
    format!("{v}")
}

/// Writes an expanded matrix in original units as a comma-separated file with
/// a header. NaN numeric cells and categorical groups with any NaN component
/// are written empty; other groups decode to the label of their arg max.
pub fn write_table(path: &Path, schema: &TableSchema, values: &[f64]) -> CliResult<()> {
    let layout = Layout::from_schema(schema);
    let n_cols = layout.n_cols();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let names: Vec<&str> = schema.columns().iter().map(|c| c.name.as_str()).collect();
    w.write_record(&names).map_err(|e| csv_error(path, e))?;
    for row in values.chunks(n_cols) {
        let fields: Vec<String> = layout
            .groups()
            .iter()
            .zip(schema.columns())
            .map(|(g, col)| match (&g.kind, &col.kind) {
                (FeatureKind::Numeric, _) if row[g.start].is_nan() => String::new(),
                (FeatureKind::Numeric, _) => format_number(row[g.start]),
                (FeatureKind::Categorical, ColumnKind::Categorical { categories }) => {
                    let slice = &row[g.columns()];
                    if slice.iter().any(|v| v.is_nan()) {
                        String::new()
                    } else {
                        categories[argmax_first(slice)].clone()
                    }
                }
                (FeatureKind::Categorical, ColumnKind::Numeric) => unreachable!("layout follows schema"),
            })
            .collect();
        w.write_record(&fields).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::data(format!("{}: {other:?}", path.display())),
    }
}

/// One row per table row, one `0`/`1` column per original feature; `1`
/// marks a cell hidden by the mask.
pub fn write_mask(path: &Path, table: &EncodedTable, mask: &CellMask) -> CliResult<()> {
    let m = table.n_features();
    let bits = mask.feature_bits(table.layout());
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let names: Vec<&str> = table.schema().columns().iter().map(|c| c.name.as_str()).collect();
    w.write_record(&names).map_err(|e| csv_error(path, e))?;
    for row in bits.chunks(m) {
        w.write_record(row.iter().map(|&b| if b { "1" } else { "0" })).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads a mask in feature shape (one column per original feature, header
/// must name the features) or expanded shape (one column per one-hot
/// component).
pub fn read_mask(path: &Path, table: &EncodedTable) -> CliResult<CellMask> {
    let (header, records) = read_records(path, &TextFormat { na_values: Vec::new(), ..TextFormat::default() })?;
    let where_ = |msg: String| CliError::data(format!("{}: {msg}", path.display()));
    let header = header.ok_or_else(|| where_("mask file is empty".into()))?;
    if records.len() != table.n_rows() {
        return Err(where_(format!("mask has {} rows, table has {}", records.len(), table.n_rows())));
    }
    let width = header.len();
    let mut bits = Vec::with_capacity(records.len() * width);
    for (i, rec) in records.iter().enumerate() {
        if rec.len() != width {
            return Err(where_(format!("row {} has {} fields, expected {width}", i + 1, rec.len())));
        }
        for cell in rec {
            bits.push(match cell.as_str() {
                "1" | "true" => true,
                "0" | "false" => false,
                other => return Err(where_(format!("row {}: mask entry `{other}` is not 0 or 1", i + 1))),
            });
        }
    }
    if width == table.n_features() {
        let names: Vec<&String> = table.schema().columns().iter().map(|c| &c.name).collect();
        if header.iter().zip(&names).any(|(a, b)| a != *b) {
            return Err(where_(format!("mask header {header:?} does not match table columns")));
        }
        Ok(CellMask::from_feature_bits(table.layout(), table.n_rows(), &bits)?)
    } else if width == table.n_cols() {
        Ok(CellMask::from_bits(table.n_rows(), width, bits)?)
    } else {
        Err(where_(format!(
            "mask has {width} columns, expected {} (features) or {} (expanded)",
            table.n_features(),
            table.n_cols()
        )))
    }
}

/// Writes a schema file for `schema` (fully resolved, default format).
pub fn write_schema(path: &Path, schema: &TableSchema) -> CliResult<()> {
    write_json(path, &SchemaFile::from_table_schema(schema))
}

pub fn table_schema_of(source: &SchemaFile) -> CliResult<TableSchema> {
    let columns = source
        .columns
        .iter()
        .filter(|e| e.kind != EntryKind::Skip)
        .map(|e| match e.kind {
            EntryKind::Numeric => Ok(ColumnSpec::numeric(&e.name)),
            _ => match &e.categories {
                Some(c) => Ok(ColumnSpec::categorical(&e.name, c.iter().cloned())),
                None => Err(CliError::data(format!("column `{}` has no category list", e.name))),
            },
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(TableSchema::new(columns)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn infers_schema_and_blanks_na() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.csv", "a,b\n1.5,x\n?,y\n2,x\n");
        let t = load_table(&p, None).unwrap();
        assert_eq!(t.table.n_cols(), 3);
        assert!(!t.table.is_observed(1, 0));
        assert_eq!(t.source.columns[1].categories, Some(vec!["x".to_string(), "y".to_string()]));
    }

    #[test]
    fn schema_with_skip_and_semicolons() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.csv", "id;v;c\n7;1;a\n8;2;b\n");
        let schema: SchemaFile = serde_json::from_str(
            r#"{"format":{"delimiter":"semicolon"},"columns":[
                {"name":"id","kind":"skip"},{"name":"v","kind":"numeric"},
                {"name":"c","kind":"categorical","categories":["b","a"]}]}"#,
        )
        .unwrap();
        let t = load_table(&p, Some(&schema)).unwrap();
        assert_eq!(t.table.n_features(), 2);
        assert_eq!(t.table.value(0, 2), Some(1.0));
        let bare: SchemaFile = serde_json::from_str(r#"[{"name":"v","kind":"numeric"}]"#).unwrap();
        assert_eq!(bare.format, TextFormat::default());
    }

    #[test]
    fn header_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.csv", "a,b\n1,2\n");
        let schema = SchemaFile {
            format: TextFormat::default(),
            columns: vec![SchemaEntry::numeric("a"), SchemaEntry::numeric("z")],
        };
        assert!(matches!(load_table(&p, Some(&schema)), Err(CliError::Data(_))));
    }

    #[test]
    fn whitespace_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.dat", "  1  2.5\n\n3\t4\n");
        let fmt = TextFormat { delimiter: Delimiter::Whitespace, header: false, ..TextFormat::default() };
        let schema = SchemaFile { format: fmt, columns: vec![SchemaEntry::numeric("a"), SchemaEntry::numeric("b")] };
        let t = load_table(&p, Some(&schema)).unwrap();
        assert_eq!(t.table.values(), &[1.0, 2.5, 3.0, 4.0]);
    }

    #[test]
    fn table_and_mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.csv", "a,c\n0.1,u\n,v\n3,u\n");
        let t = load_table(&p, None).unwrap().table;
        let out = dir.path().join("o.csv");
        write_table(&out, t.schema(), t.values()).unwrap();
        assert_eq!(fs::read_to_string(&out).unwrap(), "a,c\n0.1,u\n,v\n3,u\n");

        let mut mask = CellMask::new(3, t.n_cols());
        mask.set_group(2, &t.layout().groups()[1], true);
        let mp = dir.path().join("m.csv");
        write_mask(&mp, &t, &mask).unwrap();
        assert_eq!(fs::read_to_string(&mp).unwrap(), "a,c\n0,0\n0,0\n0,1\n");
        assert_eq!(read_mask(&mp, &t).unwrap(), mask);
    }
}
