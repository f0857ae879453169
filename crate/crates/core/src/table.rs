//! Mixed-type table encoding.
//!
//! Numeric columns map to one expanded column each; a categorical column with
//! `K` declared categories expands to a one-hot group of `K` binary columns.
//! Observation is tracked per expanded cell but always toggled per group.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum ColumnKind {
    Numeric,
    Categorical { categories: Vec<String> },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ColumnSpec {
    pub name: String,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: ColumnKind::Numeric }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical { categories: categories.into_iter().map(Into::into).collect() },
        }
    }
}

/// Column declaration before categories have been resolved against data.
#[derive(Clone, Debug, PartialEq)]
pub enum ColumnDecl {
    Numeric,
    /// `None` means "collect categories from the data in first-appearance order".
    Categorical(Option<Vec<String>>),
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<ColumnSpec>", into = "Vec<ColumnSpec>"))]
pub struct TableSchema {
    columns: Vec<ColumnSpec>,
}

impl TryFrom<Vec<ColumnSpec>> for TableSchema {
    type Error = Error;

    fn try_from(columns: Vec<ColumnSpec>) -> Result<Self> {
        TableSchema::new(columns)
    }
}

impl From<TableSchema> for Vec<ColumnSpec> {
    fn from(schema: TableSchema) -> Self {
        schema.columns
    }
}

impl TableSchema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidSchema("schema has no columns".into()));
        }
        let mut names = BTreeSet::new();
        for col in &columns {
            if !names.insert(col.name.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate column name `{}`", col.name)));
            }
            if let ColumnKind::Categorical { categories } = &col.kind {
                let distinct: BTreeSet<&str> = categories.iter().map(String::as_str).collect();
                if distinct.len() != categories.len() {
                    return Err(Error::InvalidSchema(format!("column `{}` repeats a category", col.name)));
                }
                if categories.len() < 2 {
                    return Err(Error::InvalidSchema(format!(
                        "categorical column `{}` needs at least 2 categories",
                        col.name
                    )));
                }
            }
        }
        Ok(Self { columns })
    }

    /// Builds a schema from declarations, filling undeclared category lists
    /// from `records` in first-appearance order.
    pub fn resolve<S: AsRef<str>>(decls: Vec<(String, ColumnDecl)>, records: &[Vec<S>]) -> Result<Self> {
        let mut columns = Vec::with_capacity(decls.len());
        for (idx, (name, decl)) in decls.into_iter().enumerate() {
            let kind = match decl {
                ColumnDecl::Numeric => ColumnKind::Numeric,
                ColumnDecl::Categorical(Some(categories)) => ColumnKind::Categorical { categories },
                ColumnDecl::Categorical(None) => {
                    let mut seen: Vec<String> = Vec::new();
                    for rec in records {
                        if let Some(cell) = rec.get(idx) {
                            let label = cell.as_ref().trim();
                            if !label.is_empty() && !seen.iter().any(|s| s == label) {
                                seen.push(label.to_string());
                            }
                        }
                    }
                    ColumnKind::Categorical { categories: seen }
                }
            };
            columns.push(ColumnSpec { name, kind });
        }
        Self::new(columns)
    }

    /// Guesses column kinds: a column is numeric when every non-empty cell
    /// parses as a finite number, categorical otherwise.
    pub fn infer<S: AsRef<str>>(header: &[S], records: &[Vec<S>]) -> Result<Self> {
        let decls = header
            .iter()
            .enumerate()
            .map(|(idx, name)| {
                let numeric = records.iter().all(|rec| match rec.get(idx) {
                    Some(cell) => {
                        let t = cell.as_ref().trim();
                        t.is_empty() || t.parse::<f64>().map(f64::is_finite).unwrap_or(false)
                    }
                    None => true,
                });
                let decl = if numeric { ColumnDecl::Numeric } else { ColumnDecl::Categorical(None) };
                (name.as_ref().to_string(), decl)
            })
            .collect();
        Self::resolve(decls, records)
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn check_header<S: AsRef<str>>(&self, header: &[S]) -> Result<()> {
        for (idx, col) in self.columns.iter().enumerate() {
            match header.get(idx) {
                Some(h) if h.as_ref().trim() == col.name => {}
                Some(h) => {
                    return Err(Error::HeaderMismatch { expected: col.name.clone(), found: h.as_ref().to_string() })
                }
                None => return Err(Error::HeaderMismatch { expected: col.name.clone(), found: String::new() }),
            }
        }
        if header.len() > self.columns.len() {
            return Err(Error::HeaderMismatch {
                expected: String::new(),
                found: header[self.columns.len()].as_ref().to_string(),
            });
        }
        Ok(())
    }

    /// Schema restricted to `features`, in the given order.
    pub fn select(&self, features: &[usize]) -> Result<Self> {
        let columns = features
            .iter()
            .map(|&f| {
                self.columns.get(f).cloned().ok_or(Error::IndexOutOfRange {
                    what: "feature",
                    index: f,
                    len: self.columns.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(columns)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

/// Expanded-column span belonging to one original feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FeatureGroup {
    pub start: usize,
    pub width: usize,
    pub kind: FeatureKind,
}

impl FeatureGroup {
    pub fn columns(&self) -> core::ops::Range<usize> {
        self.start..self.start + self.width
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnRole {
    Numeric,
    Binary,
}

/// Mapping between original features and expanded columns.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(from = "Vec<FeatureGroup>", into = "Vec<FeatureGroup>"))]
pub struct Layout {
    groups: Vec<FeatureGroup>,
    col_group: Vec<usize>,
}

impl From<Vec<FeatureGroup>> for Layout {
    fn from(groups: Vec<FeatureGroup>) -> Self {
        Layout::from_groups(groups)
    }
}

impl From<Layout> for Vec<FeatureGroup> {
    fn from(layout: Layout) -> Self {
        layout.groups
    }
}

impl Layout {
    pub fn from_schema(schema: &TableSchema) -> Self {
        let mut groups = Vec::with_capacity(schema.len());
        let mut start = 0;
        for col in schema.columns() {
            let (width, kind) = match &col.kind {
                ColumnKind::Numeric => (1, FeatureKind::Numeric),
                ColumnKind::Categorical { categories } => (categories.len(), FeatureKind::Categorical),
            };
            groups.push(FeatureGroup { start, width, kind });
            start += width;
        }
        Self::from_groups(groups)
    }

    pub fn from_groups(groups: Vec<FeatureGroup>) -> Self {
        let mut col_group = Vec::new();
        for (g, group) in groups.iter().enumerate() {
            col_group.extend(core::iter::repeat_n(g, group.width));
        }
        Self { groups, col_group }
    }

    pub fn groups(&self) -> &[FeatureGroup] {
        &self.groups
    }

    pub fn n_features(&self) -> usize {
        self.groups.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_group.len()
    }

    pub fn group_of(&self, col: usize) -> usize {
        self.col_group[col]
    }

    pub fn role(&self, col: usize) -> ColumnRole {
        match self.groups[self.col_group[col]].kind {
            FeatureKind::Numeric => ColumnRole::Numeric,
            FeatureKind::Categorical => ColumnRole::Binary,
        }
    }

    pub fn numeric_features(&self) -> impl Iterator<Item = (usize, &FeatureGroup)> {
        self.groups.iter().enumerate().filter(|(_, g)| g.kind == FeatureKind::Numeric)
    }

    pub fn categorical_features(&self) -> impl Iterator<Item = (usize, &FeatureGroup)> {
        self.groups.iter().enumerate().filter(|(_, g)| g.kind == FeatureKind::Categorical)
    }
}

/// Observed min/max of one numeric column.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    /// Constant columns scale to 0.
    pub fn scale(&self, x: f64) -> f64 {
        if self.max > self.min {
            (x - self.min) / (self.max - self.min)
        } else {
            0.0
        }
    }

    pub fn unscale(&self, v: f64) -> f64 {
        if self.max > self.min {
            self.min + v * (self.max - self.min)
        } else {
            self.min
        }
    }
}

/// Per expanded column; `None` for binary columns.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Scaling {
    pub ranges: Vec<Option<MinMax>>,
}

impl Scaling {
    pub fn scale_value(&self, col: usize, x: f64) -> f64 {
        match self.ranges[col] {
            Some(r) => r.scale(x),
            None => x,
        }
    }

    pub fn unscale_value(&self, col: usize, v: f64) -> f64 {
        match self.ranges[col] {
            Some(r) => r.unscale(v),
            None => v,
        }
    }
}

/// One original-feature cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CellValue {
    Number(f64),
    Category(usize),
    Missing,
}

/// Row-major boolean matrix over expanded cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellMask {
    n_rows: usize,
    n_cols: usize,
    bits: Vec<bool>,
}

impl CellMask {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, bits: vec![false; n_rows * n_cols] }
    }

    pub fn from_bits(n_rows: usize, n_cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != n_rows * n_cols {
            return Err(Error::ShapeMismatch { what: "mask cells", expected: n_rows * n_cols, found: bits.len() });
        }
        Ok(Self { n_rows, n_cols, bits })
    }

    /// Expands an `n_rows × n_features` mask to expanded columns.
    pub fn from_feature_bits(layout: &Layout, n_rows: usize, feature_bits: &[bool]) -> Result<Self> {
        let m = layout.n_features();
        if feature_bits.len() != n_rows * m {
            return Err(Error::ShapeMismatch {
                what: "feature mask cells",
                expected: n_rows * m,
                found: feature_bits.len(),
            });
        }
        let mut mask = Self::new(n_rows, layout.n_cols());
        for i in 0..n_rows {
            for (g, group) in layout.groups().iter().enumerate() {
                if feature_bits[i * m + g] {
                    mask.set_group(i, group, true);
                }
            }
        }
        Ok(mask)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.n_cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.n_cols + col] = value;
    }

    pub fn set_group(&mut self, row: usize, group: &FeatureGroup, value: bool) {
        for c in group.columns() {
            self.set(row, c, value);
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Set cells in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n_cols = self.n_cols;
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(move |(k, _)| (k / n_cols, k % n_cols))
    }

    /// Feature-level view: a unit is set when any of its columns is set.
    pub fn feature_bits(&self, layout: &Layout) -> Vec<bool> {
        let m = layout.n_features();
        let mut out = vec![false; self.n_rows * m];
        for i in 0..self.n_rows {
            for (g, group) in layout.groups().iter().enumerate() {
                out[i * m + g] = group.columns().any(|c| self.get(i, c));
            }
        }
        out
    }

    /// Widens every partially set group to the whole group.
    pub fn close_over_groups(&self, layout: &Layout) -> Self {
        let bits = self.feature_bits(layout);
        // from_feature_bits only fails on a shape mismatch, which cannot happen here.
        Self::from_feature_bits(layout, self.n_rows, &bits).expect("shape preserved")
    }

    pub fn union(&self, other: &CellMask) -> Result<Self> {
        if self.bits.len() != other.bits.len() {
            return Err(Error::ShapeMismatch {
                what: "mask cells",
                expected: self.bits.len(),
                found: other.bits.len(),
            });
        }
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect();
        Ok(Self { n_rows: self.n_rows, n_cols: self.n_cols, bits })
    }
}

/// Synthetic missingness mask plus the ground truth it hides.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskPair {
    /// `true` = artificially missing.
    pub mask: CellMask,
    /// `(row, col, value)` for every masked cell, row-major.
    pub truth: Vec<(usize, usize, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedTable {
    schema: TableSchema,
    layout: Layout,
    n_rows: usize,
    values: Vec<f64>,
    observed: Vec<bool>,
    scaling: Option<Scaling>,
}

impl EncodedTable {
    /// Builds a table from original-feature cells (row-major, `n_rows × n_features`).
    pub fn from_cells(schema: TableSchema, n_rows: usize, cells: &[CellValue]) -> Result<Self> {
        if n_rows == 0 {
            return Err(Error::EmptyTable);
        }
        let layout = Layout::from_schema(&schema);
        let m = layout.n_features();
        if cells.len() != n_rows * m {
            return Err(Error::ShapeMismatch { what: "table cells", expected: n_rows * m, found: cells.len() });
        }
        let n_cols = layout.n_cols();
        let mut values = vec![f64::NAN; n_rows * n_cols];
        let mut observed = vec![false; n_rows * n_cols];
        for i in 0..n_rows {
            for (g, group) in layout.groups().iter().enumerate() {
                let name = &schema.columns()[g].name;
                match (cells[i * m + g], group.kind) {
                    (CellValue::Missing, _) => {}
                    (CellValue::Number(x), FeatureKind::Numeric) => {
                        if !x.is_finite() {
                            return Err(Error::NotNumeric { column: name.clone(), text: format!("{x}"), row: i });
                        }
                        values[i * n_cols + group.start] = x;
                        observed[i * n_cols + group.start] = true;
                    }
                    (CellValue::Category(k), FeatureKind::Categorical) if k < group.width => {
                        for c in group.columns() {
                            values[i * n_cols + c] = if c - group.start == k { 1.0 } else { 0.0 };
                            observed[i * n_cols + c] = true;
                        }
                    }
                    (CellValue::Category(k), FeatureKind::Categorical) => {
                        return Err(Error::UnknownCategory { column: name.clone(), label: format!("#{k}"), row: i })
                    }
                    (CellValue::Category(k), FeatureKind::Numeric) => {
                        return Err(Error::NotNumeric { column: name.clone(), text: format!("#{k}"), row: i })
                    }
                    (CellValue::Number(x), FeatureKind::Categorical) => {
                        return Err(Error::UnknownCategory { column: name.clone(), label: format!("{x}"), row: i })
                    }
                }
            }
        }
        Ok(Self { schema, layout, n_rows, values, observed, scaling: None })
    }

    /// Parses text records (no header). Empty or whitespace-only cells are missing.
    pub fn from_records<S: AsRef<str>>(schema: TableSchema, records: &[Vec<S>]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyTable);
        }
        let m = schema.len();
        let mut cells = Vec::with_capacity(records.len() * m);
        for (i, rec) in records.iter().enumerate() {
            if rec.len() != m {
                return Err(Error::RaggedRecord { row: i, expected: m, found: rec.len() });
            }
            for (col, text) in schema.columns().iter().zip(rec) {
                cells.push(parse_cell(col, text.as_ref(), i)?);
            }
        }
        Self::from_cells(schema, records.len(), &cells)
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// Expanded column count.
    pub fn n_cols(&self) -> usize {
        self.layout.n_cols()
    }

    pub fn n_features(&self) -> usize {
        self.layout.n_features()
    }

    /// Row-major expanded values; unobserved cells hold NaN.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    pub fn scaling(&self) -> Option<&Scaling> {
        self.scaling.as_ref()
    }

    #[inline]
    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.observed[row * self.n_cols() + col]
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        let k = row * self.n_cols() + col;
        if self.observed[k] {
            Some(self.values[k])
        } else {
            None
        }
    }

    /// Observed column indices of `row`.
    pub fn row_observed(&self, row: usize) -> Vec<usize> {
        (0..self.n_cols()).filter(|&c| self.is_observed(row, c)).collect()
    }

    /// All observed `(row, col)` pairs in row-major order.
    pub fn observed_pairs(&self) -> Vec<(usize, usize)> {
        let n_cols = self.n_cols();
        self.observed.iter().enumerate().filter(|(_, &o)| o).map(|(k, _)| (k / n_cols, k % n_cols)).collect()
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    pub fn observed_mask(&self) -> CellMask {
        CellMask { n_rows: self.n_rows, n_cols: self.n_cols(), bits: self.observed.clone() }
    }

    /// Hides the masked cells. Mask cells that are not observed are ignored and
    /// partially covered groups are widened to the full group. The hidden
    /// values are overwritten with NaN.
    pub fn apply_mask(&self, mask: &CellMask) -> Result<(EncodedTable, MaskPair)> {
        if mask.n_rows() != self.n_rows || mask.n_cols() != self.n_cols() {
            return Err(Error::ShapeMismatch {
                what: "mask cells",
                expected: self.n_rows * self.n_cols(),
                found: mask.n_rows() * mask.n_cols(),
            });
        }
        let closed = mask.close_over_groups(&self.layout);
        let mut effective = CellMask::new(self.n_rows, self.n_cols());
        let mut out = self.clone();
        let mut truth = Vec::new();
        for (i, j) in closed.iter() {
            let k = i * self.n_cols() + j;
            if self.observed[k] {
                effective.set(i, j, true);
                truth.push((i, j, self.values[k]));
                out.observed[k] = false;
                out.values[k] = f64::NAN;
            }
        }
        Ok((out, MaskPair { mask: effective, truth }))
    }

    /// Min–max scales numeric columns using observed entries only.
    pub fn fit_scaling(&self) -> Result<EncodedTable> {
        if self.scaling.is_some() {
            return Err(Error::InvalidArgument("table is already scaled".into()));
        }
        let n_cols = self.n_cols();
        let mut ranges = vec![None; n_cols];
        for (g, group) in self.layout.numeric_features() {
            let c = group.start;
            let mut range: Option<MinMax> = None;
            for i in 0..self.n_rows {
                if let Some(x) = self.value(i, c) {
                    range = Some(match range {
                        None => MinMax { min: x, max: x },
                        Some(r) => MinMax { min: r.min.min(x), max: r.max.max(x) },
                    });
                }
            }
            match range {
                Some(r) => ranges[c] = Some(r),
                None => return Err(Error::NoObservedValues { column: self.schema.columns()[g].name.clone() }),
            }
        }
        self.apply_scaling(&Scaling { ranges })
    }

    /// Applies existing scaling metadata, e.g. to new rows at inference time.
    pub fn apply_scaling(&self, scaling: &Scaling) -> Result<EncodedTable> {
        if scaling.ranges.len() != self.n_cols() {
            return Err(Error::ShapeMismatch {
                what: "scaling columns",
                expected: self.n_cols(),
                found: scaling.ranges.len(),
            });
        }
        if self.scaling.is_some() {
            return Err(Error::InvalidArgument("table is already scaled".into()));
        }
        let mut out = self.clone();
        let n_cols = self.n_cols();
        for (k, v) in out.values.iter_mut().enumerate() {
            if self.observed[k] {
                *v = scaling.scale_value(k % n_cols, *v);
            }
        }
        out.scaling = Some(scaling.clone());
        Ok(out)
    }

    /// Inverts scaling on a full `n_rows × n_cols` matrix.
    pub fn unscale(&self, values: &[f64]) -> Result<Vec<f64>> {
        let scaling = self.scaling.as_ref().ok_or(Error::MissingScaling)?;
        let n_cols = self.n_cols();
        if !values.len().is_multiple_of(n_cols) {
            return Err(Error::ShapeMismatch {
                what: "matrix length",
                expected: self.values.len(),
                found: values.len(),
            });
        }
        Ok(values.iter().enumerate().map(|(k, &v)| scaling.unscale_value(k % n_cols, v)).collect())
    }

    /// Original units: unscaled if scaling is present, otherwise a copy.
    pub fn to_original(&self, values: &[f64]) -> Result<Vec<f64>> {
        match self.scaling {
            Some(_) => self.unscale(values),
            None => Ok(values.to_vec()),
        }
    }

    /// Decodes an expanded row back to per-feature cells. NaN numeric → missing;
    /// categorical groups decode by arg max (first max wins), or missing when
    /// any component is NaN.
    pub fn decode_row(&self, row: &[f64]) -> Vec<CellValue> {
        self.layout
            .groups()
            .iter()
            .map(|g| match g.kind {
                FeatureKind::Numeric => {
                    let v = row[g.start];
                    if v.is_nan() {
                        CellValue::Missing
                    } else {
                        CellValue::Number(v)
                    }
                }
                FeatureKind::Categorical => {
                    let slice = &row[g.columns()];
                    if slice.iter().any(|v| v.is_nan()) {
                        CellValue::Missing
                    } else {
                        CellValue::Category(argmax_first(slice))
                    }
                }
            })
            .collect()
    }

    /// Rows and features re-selected (and reordered) by index. Scaling, if
    /// present, is carried along for the kept columns.
    pub fn select(&self, rows: &[usize], features: &[usize]) -> Result<EncodedTable> {
        if rows.is_empty() {
            return Err(Error::EmptyTable);
        }
        let schema = self.schema.select(features)?;
        let layout = Layout::from_schema(&schema);
        let src_cols: Vec<usize> = features.iter().flat_map(|&f| self.layout.groups()[f].columns()).collect();
        let n_cols = self.n_cols();
        let mut values = Vec::with_capacity(rows.len() * src_cols.len());
        let mut observed = Vec::with_capacity(rows.len() * src_cols.len());
        for &r in rows {
            if r >= self.n_rows {
                return Err(Error::IndexOutOfRange { what: "row", index: r, len: self.n_rows });
            }
            for &c in &src_cols {
                values.push(self.values[r * n_cols + c]);
                observed.push(self.observed[r * n_cols + c]);
            }
        }
        let scaling =
            self.scaling.as_ref().map(|s| Scaling { ranges: src_cols.iter().map(|&c| s.ranges[c]).collect() });
        Ok(EncodedTable { schema, layout, n_rows: rows.len(), values, observed, scaling })
    }
}

fn parse_cell(col: &ColumnSpec, text: &str, row: usize) -> Result<CellValue> {
    let t = text.trim();
    if t.is_empty() {
        return Ok(CellValue::Missing);
    }
    match &col.kind {
        ColumnKind::Numeric => match t.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(CellValue::Number(x)),
            _ => Err(Error::NotNumeric { column: col.name.clone(), text: t.to_string(), row }),
        },
        ColumnKind::Categorical { categories } => categories
            .iter()
            .position(|c| c == t)
            .map(CellValue::Category)
            .ok_or_else(|| Error::UnknownCategory { column: col.name.clone(), label: t.to_string(), row }),
    }
}

/// Index of the first maximum.
pub fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = k;
        }
    }
    best
}
