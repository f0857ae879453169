//! The embedding-conditioned table model.
//!
//! Cell `(i, j)` is predicted as `net([λ_i ; c_j])`: the row embedding and the
//! feature embedding are concatenated and fed through the shared network. For
//! numeric columns the output is a scaled value, for one-hot components it is
//! a logit.

use alloc::vec;
use alloc::vec::Vec;

use crate::baselines::Imputation;
use crate::error::{Error, Result};
use crate::nn::{Gradients, MlpNet, Mode};
use crate::table::{argmax_first, CellMask, ColumnRole, EncodedTable, FeatureKind, Layout, Scaling, TableSchema};

/// Cells evaluated per network call when predicting.
const PREDICT_CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct TabInrModel {
    pub net: MlpNet,
    /// `n_rows × latent_dim`, row-major.
    pub row_embeddings: Vec<f64>,
    /// `n_cols × latent_dim`, one per expanded column.
    pub feature_embeddings: Vec<f64>,
    pub latent_dim: usize,
    pub schema: TableSchema,
    pub layout: Layout,
    pub scaling: Option<Scaling>,
}

/// Observed cell with its (scaled / binary) target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledCell {
    pub row: usize,
    pub col: usize,
    pub target: f64,
}

/// Loss value plus gradients for every trainable tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGrads {
    pub loss: f64,
    pub net: Gradients,
    /// Same shape as `row_embeddings`.
    pub rows: Vec<f64>,
    /// Same shape as `feature_embeddings`.
    pub features: Vec<f64>,
}

impl LossGrads {
    pub fn zeros(model: &TabInrModel) -> Self {
        Self {
            loss: 0.0,
            net: Gradients::zeros_like(&model.net),
            rows: vec![0.0; model.row_embeddings.len()],
            features: vec![0.0; model.feature_embeddings.len()],
        }
    }
}

/// Squared error for numeric cells, binary cross-entropy with logits for
/// one-hot components. Returns `(loss, d loss / d prediction)`.
#[inline]
pub fn cell_loss(role: ColumnRole, pred: f64, target: f64) -> (f64, f64) {
    match role {
        ColumnRole::Numeric => {
            let r = pred - target;
            (r * r, 2.0 * r)
        }
        ColumnRole::Binary => (bce_with_logits(pred, target), sigmoid(pred) - target),
    }
}

/// `max(z, 0) − z·y + ln(1 + e^{−|z|})`
#[inline]
pub fn bce_with_logits(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + libm::log1p(libm::exp(-z.abs()))
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

impl TabInrModel {
    pub fn new(
        net: MlpNet,
        row_embeddings: Vec<f64>,
        feature_embeddings: Vec<f64>,
        latent_dim: usize,
        schema: TableSchema,
        scaling: Option<Scaling>,
    ) -> Result<Self> {
        let layout = Layout::from_schema(&schema);
        if latent_dim == 0 {
            return Err(Error::InvalidArgument("latent dimension must be positive".into()));
        }
        if net.input_dim() != 2 * latent_dim {
            return Err(Error::ShapeMismatch {
                what: "network input",
                expected: 2 * latent_dim,
                found: net.input_dim(),
            });
        }
        if row_embeddings.is_empty() || !row_embeddings.len().is_multiple_of(latent_dim) {
            return Err(Error::ShapeMismatch {
                what: "row embeddings",
                expected: latent_dim,
                found: row_embeddings.len(),
            });
        }
        if feature_embeddings.len() != layout.n_cols() * latent_dim {
            return Err(Error::ShapeMismatch {
                what: "feature embeddings",
                expected: layout.n_cols() * latent_dim,
                found: feature_embeddings.len(),
            });
        }
        if let Some(s) = &scaling {
            if s.ranges.len() != layout.n_cols() {
                return Err(Error::ShapeMismatch {
                    what: "scaling columns",
                    expected: layout.n_cols(),
                    found: s.ranges.len(),
                });
            }
        }
        if !row_embeddings.iter().chain(&feature_embeddings).all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument("embeddings must be finite".into()));
        }
        Ok(Self { net, row_embeddings, feature_embeddings, latent_dim, schema, layout, scaling })
    }

    pub fn n_rows(&self) -> usize {
        self.row_embeddings.len() / self.latent_dim
    }

    pub fn n_cols(&self) -> usize {
        self.layout.n_cols()
    }

    pub fn row_embedding(&self, row: usize) -> &[f64] {
        &self.row_embeddings[row * self.latent_dim..(row + 1) * self.latent_dim]
    }

    pub fn feature_embedding(&self, col: usize) -> &[f64] {
        &self.feature_embeddings[col * self.latent_dim..(col + 1) * self.latent_dim]
    }

    fn check_cell(&self, row: usize, col: usize) -> Result<()> {
        if row >= self.n_rows() {
            return Err(Error::IndexOutOfRange { what: "row", index: row, len: self.n_rows() });
        }
        if col >= self.n_cols() {
            return Err(Error::IndexOutOfRange { what: "column", index: col, len: self.n_cols() });
        }
        Ok(())
    }

    /// Concatenated `[λ_row ; c_col]` inputs for a list of cells.
    pub(crate) fn gather_inputs(
        &self,
        cells: impl Iterator<Item = (usize, usize)>,
        row_override: Option<&[f64]>,
    ) -> Vec<f64> {
        let d = self.latent_dim;
        let mut xs = Vec::new();
        for (i, j) in cells {
            match row_override {
                Some(lambda) => xs.extend_from_slice(lambda),
                None => xs.extend_from_slice(&self.row_embeddings[i * d..(i + 1) * d]),
            }
            xs.extend_from_slice(&self.feature_embeddings[j * d..(j + 1) * d]);
        }
        xs
    }

    /// Raw network output for one cell (eval mode).
    pub fn predict_cell(&self, row: usize, col: usize) -> Result<f64> {
        self.check_cell(row, col)?;
        let x = self.gather_inputs(core::iter::once((row, col)), None);
        Ok(self.net.predict_batch(&x, 1)?[0])
    }

    /// Raw outputs for many cells, in order.
    pub fn predict_cells(&self, cells: &[(usize, usize)]) -> Result<Vec<f64>> {
        for &(i, j) in cells {
            self.check_cell(i, j)?;
        }
        self.predict_with(cells.iter().copied(), cells.len(), None)
    }

    /// Outputs for columns `cols` of a row described by `lambda`.
    pub fn predict_with_embedding(&self, lambda: &[f64], cols: &[usize]) -> Result<Vec<f64>> {
        if lambda.len() != self.latent_dim {
            return Err(Error::ShapeMismatch { what: "row embedding", expected: self.latent_dim, found: lambda.len() });
        }
        for &j in cols {
            if j >= self.n_cols() {
                return Err(Error::IndexOutOfRange { what: "column", index: j, len: self.n_cols() });
            }
        }
        self.predict_with(cols.iter().map(|&j| (0, j)), cols.len(), Some(lambda))
    }

    fn predict_with(
        &self,
        cells: impl Iterator<Item = (usize, usize)> + Clone,
        len: usize,
        lambda: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(len);
        let mut start = 0;
        while start < len {
            let take = PREDICT_CHUNK.min(len - start);
            let xs = self.gather_inputs(cells.clone().skip(start).take(take), lambda);
            out.extend(self.net.predict_batch(&xs, take)?);
            start += take;
        }
        Ok(out)
    }

    /// Mean mixed loss over `cells` and its gradients w.r.t. the network and
    /// both embedding tables.
    pub fn mixed_loss(&self, cells: &[LabeledCell], mode: Mode<'_>) -> Result<LossGrads> {
        let mut grads = LossGrads::zeros(self);
        self.accumulate_loss(cells, mode, &mut grads)?;
        Ok(grads)
    }

    /// Adds the mean loss over `cells` and its gradients into `acc`.
    pub(crate) fn accumulate_loss(&self, cells: &[LabeledCell], mode: Mode<'_>, acc: &mut LossGrads) -> Result<()> {
        if cells.is_empty() {
            return Err(Error::EmptyCellSet);
        }
        for c in cells {
            self.check_cell(c.row, c.col)?;
            if self.layout.role(c.col) == ColumnRole::Binary && c.target != 0.0 && c.target != 1.0 {
                return Err(Error::InvalidLabel { row: c.row, col: c.col, value: c.target });
            }
        }
        let d = self.latent_dim;
        let n = cells.len();
        let inv = 1.0 / n as f64;
        let xs = self.gather_inputs(cells.iter().map(|c| (c.row, c.col)), None);
        let cache = self.net.forward_batch(&xs, n, mode)?;
        let mut loss = 0.0;
        let mut dout = Vec::with_capacity(n);
        for (c, &pred) in cells.iter().zip(cache.output()) {
            let (l, g) = cell_loss(self.layout.role(c.col), pred, c.target);
            loss += l;
            dout.push(g * inv);
        }
        let (net_grads, dx) = self.net.backward_batch(&cache, &dout)?;
        acc.loss += loss * inv;
        acc.net.add_assign(&net_grads);
        for (c, g) in cells.iter().zip(dx.chunks_exact(2 * d)) {
            let (g_row, g_col) = g.split_at(d);
            acc.rows[c.row * d..(c.row + 1) * d].iter_mut().zip(g_row).for_each(|(a, b)| *a += b);
            acc.features[c.col * d..(c.col + 1) * d].iter_mut().zip(g_col).for_each(|(a, b)| *a += b);
        }
        Ok(())
    }

    /// Mean loss only (eval mode), for validation.
    pub fn eval_loss(&self, cells: &[LabeledCell]) -> Result<f64> {
        if cells.is_empty() {
            return Err(Error::EmptyCellSet);
        }
        let preds = self.predict_cells(&cells.iter().map(|c| (c.row, c.col)).collect::<Vec<_>>())?;
        let total: f64 =
            cells.iter().zip(&preds).map(|(c, &p)| cell_loss(self.layout.role(c.col), p, c.target).0).sum();
        Ok(total / cells.len() as f64)
    }

    fn check_table(&self, table: &EncodedTable) -> Result<()> {
        if table.n_rows() != self.n_rows() {
            return Err(Error::ShapeMismatch { what: "table rows", expected: self.n_rows(), found: table.n_rows() });
        }
        if table.layout() != &self.layout {
            return Err(Error::ShapeMismatch { what: "table columns", expected: self.n_cols(), found: table.n_cols() });
        }
        Ok(())
    }

    /// Fills every targeted, unobserved cell of the training table.
    ///
    /// Observed cells pass through unchanged. Numeric predictions are
    /// unscaled; each one-hot group containing a filled cell is decoded by arg
    /// max over its logits (first maximum wins). `scores` carries the sigmoid
    /// of the logits for binary columns.
    pub fn impute(&self, table: &EncodedTable, target: &CellMask) -> Result<Imputation> {
        self.check_table(table)?;
        if target.n_rows() != table.n_rows() || target.n_cols() != table.n_cols() {
            return Err(Error::ShapeMismatch {
                what: "target mask cells",
                expected: table.n_rows() * table.n_cols(),
                found: target.n_rows() * target.n_cols(),
            });
        }
        let mut values = table.to_original(table.values())?;
        let mut scores = values.clone();
        let n_cols = self.n_cols();
        let mut cells = Vec::new();
        for i in 0..table.n_rows() {
            for group in self.layout.groups() {
                let fill = group.columns().any(|c| target.get(i, c) && !table.is_observed(i, c));
                if fill {
                    cells.extend(group.columns().map(|c| (i, c)));
                }
            }
        }
        let preds = self.predict_with(cells.iter().copied(), cells.len(), None)?;
        let mut k = 0;
        while k < cells.len() {
            let (i, c) = cells[k];
            let group = self.layout.groups()[self.layout.group_of(c)];
            let logits = &preds[k..k + group.width];
            self.write_group(
                &group,
                logits,
                &mut values[i * n_cols..(i + 1) * n_cols],
                &mut scores[i * n_cols..(i + 1) * n_cols],
            );
            k += group.width;
        }
        Ok(Imputation { values, scores })
    }

    pub(crate) fn write_group(
        &self,
        group: &crate::table::FeatureGroup,
        outputs: &[f64],
        values: &mut [f64],
        scores: &mut [f64],
    ) {
        match group.kind {
            FeatureKind::Numeric => {
                let v = match &self.scaling {
                    Some(s) => s.unscale_value(group.start, outputs[0]),
                    None => outputs[0],
                };
                values[group.start] = v;
                scores[group.start] = v;
            }
            FeatureKind::Categorical => {
                let winner = argmax_first(outputs);
                for (k, c) in group.columns().enumerate() {
                    values[c] = if k == winner { 1.0 } else { 0.0 };
                    scores[c] = sigmoid(outputs[k]);
                }
            }
        }
    }
}

/// Labeled cells for every observed entry of a scaled table, row-major.
pub fn labeled_cells(table: &EncodedTable) -> Vec<LabeledCell> {
    table
        .observed_pairs()
        .into_iter()
        .map(|(row, col)| LabeledCell { row, col, target: table.values()[row * table.n_cols() + col] })
        .collect()
}
