//! Test-time adaptation: fit a fresh row embedding for an unseen partial row
//! with the network and feature embeddings frozen.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::baselines::Imputation;
use crate::error::{Error, Result};
use crate::model::{cell_loss, TabInrModel};
use crate::nn::optim::{Adam, AdamConfig, ParamSlot};
use crate::nn::Mode;
use crate::rng::{self, tag};
use crate::table::{EncodedTable, FeatureKind};

/// A new row in the model's encoded (scaled, one-hot) space.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialRow {
    values: Vec<f64>,
    observed: Vec<bool>,
}

impl PartialRow {
    /// `values` are ignored where `observed` is false.
    pub fn new(model: &TabInrModel, values: Vec<f64>, observed: Vec<bool>) -> Result<Self> {
        let n_cols = model.n_cols();
        if values.len() != n_cols || observed.len() != n_cols {
            return Err(Error::ShapeMismatch {
                what: "partial row",
                expected: n_cols,
                found: values.len().max(observed.len()),
            });
        }
        for group in model.layout.groups() {
            let seen: Vec<bool> = group.columns().map(|c| observed[c]).collect();
            if seen.iter().any(|&s| s) != seen.iter().all(|&s| s) {
                return Err(Error::InvalidArgument("one-hot group is partially observed".into()));
            }
            if !seen[0] {
                continue;
            }
            match group.kind {
                FeatureKind::Numeric if !values[group.start].is_finite() => return Err(Error::NonFiniteInput),
                FeatureKind::Categorical => {
                    let hot = values[group.columns()].iter().filter(|&&v| v == 1.0).count();
                    let cold = values[group.columns()].iter().filter(|&&v| v == 0.0).count();
                    if hot != 1 || hot + cold != group.width {
                        return Err(Error::InvalidArgument(
                            "observed one-hot group is not a valid one-hot vector".into(),
                        ));
                    }
                }
                _ => {}
            }
        }
        if !observed.iter().any(|&o| o) {
            return Err(Error::NoObservedCells);
        }
        let values = values.iter().zip(&observed).map(|(&v, &o)| if o { v } else { f64::NAN }).collect();
        Ok(Self { values, observed })
    }

    /// Row `row` of an unscaled table sharing the model's schema, scaled with
    /// the model's scaling.
    pub fn from_table(model: &TabInrModel, table: &EncodedTable, row: usize) -> Result<Self> {
        if table.layout() != &model.layout {
            return Err(Error::ShapeMismatch { what: "row columns", expected: model.n_cols(), found: table.n_cols() });
        }
        if row >= table.n_rows() {
            return Err(Error::IndexOutOfRange { what: "row", index: row, len: table.n_rows() });
        }
        let n_cols = table.n_cols();
        let raw = &table.values()[row * n_cols..(row + 1) * n_cols];
        let observed = table.observed()[row * n_cols..(row + 1) * n_cols].to_vec();
        let values = match (table.scaling(), &model.scaling) {
            (None, Some(s)) => raw.iter().enumerate().map(|(c, &v)| s.scale_value(c, v)).collect(),
            _ => raw.to_vec(),
        };
        Self::new(model, values, observed)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    pub fn observed_cols(&self) -> Vec<usize> {
        (0..self.observed.len()).filter(|&c| self.observed[c]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TtaConfig {
    pub lr: f64,
    pub max_steps: usize,
    /// Plateau window in steps.
    pub window: usize,
    /// Minimum best-loss improvement over `window` steps to keep going.
    pub tol: f64,
    pub seed: u64,
}

impl Default for TtaConfig {
    fn default() -> Self {
        Self { lr: 1e-2, max_steps: 200, window: 10, tol: 1e-6, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TtaFit {
    /// Embedding with the lowest loss seen.
    pub embedding: Vec<f64>,
    /// Loss before each update, then the loss after the last one.
    pub trace: Vec<f64>,
    pub steps: usize,
    pub final_loss: f64,
    pub restarted: bool,
}

/// Summed loss over the observed cells at `lambda`, and its gradient.
fn objective(model: &TabInrModel, row: &PartialRow, cols: &[usize], lambda: &[f64]) -> Result<(f64, Vec<f64>)> {
    let d = model.latent_dim;
    let xs = model.gather_inputs(cols.iter().map(|&j| (0, j)), Some(lambda));
    let cache = model.net.forward_batch(&xs, cols.len(), Mode::Eval)?;
    let mut loss = 0.0;
    let mut dout = Vec::with_capacity(cols.len());
    for (&j, &pred) in cols.iter().zip(cache.output()) {
        let (l, g) = cell_loss(model.layout.role(j), pred, row.values[j]);
        loss += l;
        dout.push(g);
    }
    let dx = model.net.input_gradient(&cache, &dout)?;
    let mut grad = vec![0.0; d];
    for g in dx.chunks_exact(2 * d) {
        grad.iter_mut().zip(&g[..d]).for_each(|(a, b)| *a += b);
    }
    Ok((loss, grad))
}

fn fit_once(model: &TabInrModel, row: &PartialRow, cfg: &TtaConfig, attempt: u64) -> Result<TtaFit> {
    let d = model.latent_dim;
    let cols = row.observed_cols();
    let mut r = rng::stream(cfg.seed, &[tag::TTA, attempt]);
    let mut lambda: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r)).collect();
    let mut adam = Adam::new(AdamConfig::default(), &[d]);
    let mut trace = Vec::new();
    let mut best_trace: Vec<f64> = Vec::new();
    let mut best = (f64::INFINITY, lambda.clone());
    let mut steps = 0;
    loop {
        let (loss, grad) = objective(model, row, &cols, &lambda)?;
        if !loss.is_finite() || !grad.iter().all(|g| g.is_finite()) {
            return Err(Error::Diverged { epoch: steps });
        }
        trace.push(loss);
        if loss < best.0 {
            best = (loss, lambda.clone());
        }
        best_trace.push(best.0);
        let plateau = best_trace.len() > cfg.window && best_trace[best_trace.len() - 1 - cfg.window] - best.0 < cfg.tol;
        if steps == cfg.max_steps || plateau {
            break;
        }
        adam.step(&mut [ParamSlot { name: "lambda", values: &mut lambda, grads: &grad }], cfg.lr)?;
        steps += 1;
    }
    Ok(TtaFit { embedding: best.1, trace, steps, final_loss: best.0, restarted: attempt > 0 })
}

/// Optimizes a fresh row embedding on the observed cells of `row`. The model
/// is borrowed immutably; a diverging fit is restarted once from a new draw.
pub fn adapt_row(model: &TabInrModel, row: &PartialRow, cfg: &TtaConfig) -> Result<TtaFit> {
    if row.values.len() != model.n_cols() {
        return Err(Error::ShapeMismatch { what: "partial row", expected: model.n_cols(), found: row.values.len() });
    }
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::InvalidArgument("lr must be positive".into()));
    }
    if row.observed_cols().is_empty() {
        return Err(Error::NoObservedCells);
    }
    match fit_once(model, row, cfg, 0) {
        Err(Error::Diverged { .. }) => fit_once(model, row, cfg, 1),
        other => other,
    }
}

/// Completes `row` in original units: observed entries pass through, missing
/// groups are predicted from `lambda`.
pub fn impute_row(model: &TabInrModel, lambda: &[f64], row: &PartialRow) -> Result<Imputation> {
    let n_cols = model.n_cols();
    if row.values.len() != n_cols {
        return Err(Error::ShapeMismatch { what: "partial row", expected: n_cols, found: row.values.len() });
    }
    let missing: Vec<usize> = (0..n_cols).filter(|&c| !row.observed[c]).collect();
    let preds = model.predict_with_embedding(lambda, &missing)?;
    let mut values: Vec<f64> = match &model.scaling {
        Some(s) => row.values.iter().enumerate().map(|(c, &v)| s.unscale_value(c, v)).collect(),
        None => row.values.clone(),
    };
    let mut scores = values.clone();
    let mut k = 0;
    for group in model.layout.groups() {
        if row.observed[group.start] {
            continue;
        }
        model.write_group(group, &preds[k..k + group.width], &mut values, &mut scores);
        k += group.width;
    }
    Ok(Imputation { values, scores })
}

/// Mean loss per observed cell, numeric and binary terms together.
pub fn mean_fit_loss(model: &TabInrModel, lambda: &[f64], row: &PartialRow) -> Result<f64> {
    let cols = row.observed_cols();
    let preds = model.predict_with_embedding(lambda, &cols)?;
    let total: f64 = cols.iter().zip(&preds).map(|(&j, &p)| cell_loss(model.layout.role(j), p, row.values[j]).0).sum();
    Ok(total / cols.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, MlpNet, NetDims};
    use crate::table::{ColumnSpec, TableSchema};

    fn model(schema: TableSchema, n: usize, seed: u64) -> TabInrModel {
        let d = 4;
        let layout = crate::table::Layout::from_schema(&schema);
        let net = MlpNet::init(NetDims { input: 2 * d, hidden: 16, depth: 2 }, Activation::siren(), 0.0, seed).unwrap();
        let mut r = rng::stream(seed, &[99]);
        let rows = (0..n * d).map(|_| StandardNormal.sample(&mut r)).collect();
        let cols = (0..layout.n_cols() * d).map(|_| StandardNormal.sample(&mut r)).collect();
        TabInrModel::new(net, rows, cols, d, schema, None).unwrap()
    }

    fn mixed_schema() -> TableSchema {
        TableSchema::new(vec![
            ColumnSpec::numeric("a"),
            ColumnSpec::numeric("b"),
            ColumnSpec::categorical("c", ["x", "y", "z"]),
        ])
        .unwrap()
    }

    #[test]
    fn frozen_parameters_and_determinism() {
        let m = model(mixed_schema(), 3, 1);
        let before = m.clone();
        let row = PartialRow::new(&m, vec![0.2, 0.0, 0.0, 1.0, 0.0], vec![true, false, true, true, true]).unwrap();
        let cfg = TtaConfig { seed: 5, ..TtaConfig::default() };
        let a = adapt_row(&m, &row, &cfg).unwrap();
        let b = adapt_row(&m, &row, &cfg).unwrap();
        assert_eq!(m, before);
        assert_eq!(a, b);
        assert!(a.steps <= cfg.max_steps);
        assert_eq!(a.final_loss, a.trace.iter().cloned().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn single_cell_fits_exactly() {
        let schema = TableSchema::new(vec![ColumnSpec::numeric("a"), ColumnSpec::numeric("b")]).unwrap();
        let m = model(schema, 2, 3);
        let row = PartialRow::new(&m, vec![0.37, f64::NAN], vec![true, false]).unwrap();
        let cfg = TtaConfig { tol: 0.0, ..TtaConfig::default() };
        let fit = adapt_row(&m, &row, &cfg).unwrap();
        assert!(fit.final_loss < 1e-4, "loss {}", fit.final_loss);
    }

    #[test]
    fn impute_row_passes_observed_and_decodes_one_hot() {
        let m = model(mixed_schema(), 2, 7);
        let full = PartialRow::new(&m, vec![0.1, 0.9, 0.0, 0.0, 1.0], vec![true; 5]).unwrap();
        let lambda = vec![0.3; 4];
        assert_eq!(impute_row(&m, &lambda, &full).unwrap().values, vec![0.1, 0.9, 0.0, 0.0, 1.0]);
        let part = PartialRow::new(&m, vec![0.1, 0.0, 0.0, 0.0, 0.0], vec![true, false, false, false, false]).unwrap();
        let out = impute_row(&m, &lambda, &part).unwrap();
        assert_eq!(out.values[0], 0.1);
        assert!(out.values[1].is_finite());
        assert_eq!(out.values[2..].iter().sum::<f64>(), 1.0);
        assert!(out.values[2..].iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn rejects_bad_rows() {
        let m = model(mixed_schema(), 2, 0);
        assert_eq!(PartialRow::new(&m, vec![0.0; 5], vec![false; 5]).unwrap_err(), Error::NoObservedCells);
        assert!(PartialRow::new(&m, vec![0.0; 5], vec![true, true, true, false, true]).is_err());
        assert!(PartialRow::new(&m, vec![0.0, 0.0, 1.0, 1.0, 0.0], vec![true; 5]).is_err());
        assert!(PartialRow::new(&m, vec![0.0; 4], vec![true; 4]).is_err());
    }
}
