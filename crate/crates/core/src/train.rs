//! Joint training of the network and both embedding tables.
//!
//! Observed cells are split once into a training part and a validation part
//! (`masking_ratio` of the observed feature units go to validation). Each
//! epoch walks a seeded shuffle of the rows in batches of `batch_rows` rows,
//! takes one Adam step per batch on the mean mixed loss of the batch's training
//! cells, and then evaluates the validation loss. The snapshot with the lowest
//! validation loss is returned.
//!
//! All random draws are keyed by row and feature *identity* instead of
//! position, and cells are always visited in identity order. Training a
//! row- or column-permuted table with the permuted keys therefore produces
//! the permuted model bit for bit.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LabeledCell, LossGrads, TabInrModel};
use crate::nn::{Activation, Adam, AdamConfig, CosineSchedule, MlpNet, Mode, NetDims, ParamSlot};
use crate::rng::{self, tag};
use crate::table::EncodedTable;

/// How `masking_ratio` is used during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum HoldoutStrategy {
    /// One seeded split, fixed for the whole run.
    #[default]
    StaticValidation,
    /// A fresh random split every epoch; the held-out part is both excluded
    /// from that epoch's updates and used as its validation set.
    PerEpoch,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub latent_dim: usize,
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub dropout: f64,
    pub activation: Activation,
    pub lr: f64,
    /// Floor of the cosine schedule.
    pub eta_min: f64,
    pub epochs: usize,
    pub batch_rows: usize,
    pub masking_ratio: f64,
    pub early_stop_patience: usize,
    pub holdout: HoldoutStrategy,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            latent_dim: 32,
            hidden_layers: 2,
            hidden_units: 256,
            dropout: 0.1,
            activation: Activation::siren(),
            lr: 1e-3,
            eta_min: 0.0,
            epochs: 500,
            batch_rows: 64,
            masking_ratio: 0.3,
            early_stop_patience: 20,
            holdout: HoldoutStrategy::StaticValidation,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if self.latent_dim == 0 {
            return bad("latent_dim must be positive");
        }
        if self.hidden_layers > 0 && self.hidden_units == 0 {
            return bad("hidden_units must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(self.eta_min >= 0.0 && self.eta_min <= self.lr) {
            return bad("eta_min must lie in [0, lr]");
        }
        if self.batch_rows == 0 {
            return bad("batch_rows must be positive");
        }
        if !(self.masking_ratio > 0.0 && self.masking_ratio < 1.0) {
            return bad("masking_ratio must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.early_stop_patience == 0 {
            return bad("early_stop_patience must be positive");
        }
        Ok(())
    }

    pub fn net_dims(&self) -> NetDims {
        NetDims { input: 2 * self.latent_dim, hidden: self.hidden_units, depth: self.hidden_layers }
    }
}

/// Identity of every row and original feature, used to key random draws.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdentityKeys {
    pub rows: Vec<u64>,
    pub features: Vec<u64>,
}

impl IdentityKeys {
    /// Position-based keys.
    pub fn positional(n_rows: usize, n_features: usize) -> Self {
        Self { rows: (0..n_rows as u64).collect(), features: (0..n_features as u64).collect() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TrainLog {
    pub initial_val_loss: f64,
    pub best_val_loss: f64,
    /// `None` when the initial model was never beaten.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    pub epochs: Vec<EpochRecord>,
}

pub fn train(table: &EncodedTable, config: &TrainConfig) -> Result<(TabInrModel, TrainLog)> {
    train_with_keys(table, config, &IdentityKeys::positional(table.n_rows(), table.n_features()))
}

pub fn train_with_keys(
    table: &EncodedTable,
    config: &TrainConfig,
    keys: &IdentityKeys,
) -> Result<(TabInrModel, TrainLog)> {
    train_observed(table, config, keys, &mut |_, _| true)
}

/// As [`train_with_keys`], calling `observer` with the live model after every
/// epoch. Training stops early when it returns `false`.
pub fn train_observed(
    table: &EncodedTable,
    config: &TrainConfig,
    keys: &IdentityKeys,
    observer: &mut dyn FnMut(&EpochRecord, &TabInrModel) -> bool,
) -> Result<(TabInrModel, TrainLog)> {
    config.validate()?;
    if keys.rows.len() != table.n_rows() || keys.features.len() != table.n_features() {
        return Err(Error::ShapeMismatch { what: "identity keys", expected: table.n_rows(), found: keys.rows.len() });
    }
    if table.observed_count() == 0 {
        return Err(Error::NoObservedCells);
    }
    let mut model = init_model(table, config, keys)?;
    let plan = CellPlan::new(table, keys);
    let seed = config.seed;

    let static_split = plan.split(table, |row_key, feat_key| {
        rng::unit_uniform(seed, &[tag::SPLIT, row_key, feat_key]) < config.masking_ratio
    });
    let mut log = TrainLog::default();
    if config.epochs == 0 {
        log.initial_val_loss = match static_split.validation.is_empty() {
            true => f64::NAN,
            false => model.eval_loss(&static_split.validation)?,
        };
        log.best_val_loss = log.initial_val_loss;
        return Ok((model, log));
    }
    if static_split.validation.is_empty() || static_split.train_cells == 0 {
        return Err(Error::DegenerateSplit);
    }

    let initial = model.eval_loss(&static_split.validation)?;
    if !initial.is_finite() {
        return Err(Error::Diverged { epoch: 0 });
    }
    log.initial_val_loss = initial;
    log.best_val_loss = initial;
    let mut best = model.clone();
    let mut since_best = 0;

    let schedule = CosineSchedule { base_lr: config.lr, eta_min: config.eta_min, t_max: config.epochs };
    let mut sizes: Vec<usize> = model.net.layers().iter().flat_map(|l| [l.weight.len(), l.bias.len()]).collect();
    sizes.push(model.row_embeddings.len());
    sizes.push(model.feature_embeddings.len());
    let mut adam = Adam::new(AdamConfig::default(), &sizes);
    let names = model.net.param_names();
    let mut grads = LossGrads::zeros(&model);

    for epoch in 0..config.epochs {
        let lr = schedule.lr_at(epoch);
        let per_epoch;
        let split = match config.holdout {
            HoldoutStrategy::StaticValidation => &static_split,
            HoldoutStrategy::PerEpoch => {
                per_epoch = plan.split(table, |row_key, feat_key| {
                    rng::unit_uniform(seed, &[tag::VALIDATION_EPOCH, epoch as u64, row_key, feat_key])
                        < config.masking_ratio
                });
                if per_epoch.validation.is_empty() || per_epoch.train_cells == 0 {
                    return Err(Error::DegenerateSplit);
                }
                &per_epoch
            }
        };

        let mut order = plan.row_order.clone();
        order.shuffle(&mut rng::stream(seed, &[tag::SHUFFLE, epoch as u64]));
        let mut epoch_loss = 0.0;
        let mut epoch_cells = 0usize;
        let mut batch_cells: Vec<LabeledCell> = Vec::new();
        for (b, rows) in order.chunks(config.batch_rows).enumerate() {
            batch_cells.clear();
            for &r in rows {
                batch_cells.extend_from_slice(&split.train_by_row[r]);
            }
            if batch_cells.is_empty() {
                continue;
            }
            let mut dropout_rng = rng::stream(seed, &[tag::DROPOUT, epoch as u64, b as u64]);
            model.accumulate_loss(&batch_cells, Mode::Train(&mut dropout_rng), &mut grads)?;
            if !grads.loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            epoch_loss += grads.loss * batch_cells.len() as f64;
            epoch_cells += batch_cells.len();

            let mut slots: Vec<ParamSlot<'_>> = Vec::with_capacity(sizes.len());
            for ((layer, g), (wn, bn)) in model.net.layers_mut().iter_mut().zip(&grads.net.layers).zip(&names) {
                slots.push(ParamSlot { name: wn, values: &mut layer.weight, grads: &g.weight });
                slots.push(ParamSlot { name: bn, values: &mut layer.bias, grads: &g.bias });
            }
            slots.push(ParamSlot { name: "row_embeddings", values: &mut model.row_embeddings, grads: &grads.rows });
            slots.push(ParamSlot {
                name: "feature_embeddings",
                values: &mut model.feature_embeddings,
                grads: &grads.features,
            });
            adam.step(&mut slots, lr).map_err(|e| match e {
                Error::NonFiniteGradient { .. } => Error::Diverged { epoch },
                other => other,
            })?;

            // reset only what this batch touched
            grads.loss = 0.0;
            grads.net.scale(0.0);
            grads.features.iter_mut().for_each(|g| *g = 0.0);
            let d = model.latent_dim;
            for &r in rows {
                grads.rows[r * d..(r + 1) * d].iter_mut().for_each(|g| *g = 0.0);
            }
        }

        let val_loss = model.eval_loss(&split.validation)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let train_loss = if epoch_cells > 0 { epoch_loss / epoch_cells as f64 } else { f64::NAN };
        let record = EpochRecord { epoch, train_loss, val_loss, lr };
        log.epochs.push(record);
        let carry_on = observer(&record, &model);
        if val_loss < log.best_val_loss {
            log.best_val_loss = val_loss;
            log.best_epoch = Some(epoch);
            best = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.early_stop_patience {
                log.stopped_early = true;
                break;
            }
        }
        if !carry_on {
            log.stopped_early = true;
            break;
        }
    }
    Ok((best, log))
}

/// The static `(train, validation)` cell split `train` would use.
pub fn split_cells(
    table: &EncodedTable,
    config: &TrainConfig,
    keys: &IdentityKeys,
) -> (Vec<LabeledCell>, Vec<LabeledCell>) {
    let split = CellPlan::new(table, keys).split(table, |row_key, feat_key| {
        rng::unit_uniform(config.seed, &[tag::SPLIT, row_key, feat_key]) < config.masking_ratio
    });
    (split.train_by_row.into_iter().flatten().collect(), split.validation)
}

fn init_model(table: &EncodedTable, config: &TrainConfig, keys: &IdentityKeys) -> Result<TabInrModel> {
    let d = config.latent_dim;
    let net = MlpNet::init(config.net_dims(), config.activation, config.dropout, config.seed)?;
    let mut rows = Vec::with_capacity(table.n_rows() * d);
    for &key in &keys.rows {
        let mut r = rng::stream(config.seed, &[tag::ROW_EMBEDDING, key]);
        rows.extend((0..d).map(|_| -> f64 { StandardNormal.sample(&mut r) }));
    }
    let mut cols = Vec::with_capacity(table.n_cols() * d);
    for (g, group) in table.layout().groups().iter().enumerate() {
        for k in 0..group.width {
            let mut r = rng::stream(config.seed, &[tag::FEATURE_EMBEDDING, keys.features[g], k as u64]);
            cols.extend((0..d).map(|_| -> f64 { StandardNormal.sample(&mut r) }));
        }
    }
    TabInrModel::new(net, rows, cols, d, table.schema().clone(), table.scaling().cloned())
}

/// Identity-ordered traversal of the table.
struct CellPlan {
    /// Row indices sorted by row key.
    row_order: Vec<usize>,
    /// Feature indices sorted by feature key.
    feature_order: Vec<usize>,
    row_keys: Vec<u64>,
    feature_keys: Vec<u64>,
}

struct Split {
    /// Training cells per row (indexed by row position), identity-ordered.
    train_by_row: Vec<Vec<LabeledCell>>,
    train_cells: usize,
    validation: Vec<LabeledCell>,
}

impl CellPlan {
    fn new(table: &EncodedTable, keys: &IdentityKeys) -> Self {
        let mut row_order: Vec<usize> = (0..table.n_rows()).collect();
        row_order.sort_by_key(|&i| (keys.rows[i], i));
        let mut feature_order: Vec<usize> = (0..table.n_features()).collect();
        feature_order.sort_by_key(|&g| (keys.features[g], g));
        Self { row_order, feature_order, row_keys: keys.rows.clone(), feature_keys: keys.features.clone() }
    }

    /// Splits observed feature units; `to_validation(row_key, feature_key)`.
    fn split(&self, table: &EncodedTable, to_validation: impl Fn(u64, u64) -> bool) -> Split {
        let groups = table.layout().groups();
        let n_cols = table.n_cols();
        let mut train_by_row = vec![Vec::new(); table.n_rows()];
        let mut validation = Vec::new();
        let mut train_cells = 0;
        for &i in &self.row_order {
            for &g in &self.feature_order {
                let group = groups[g];
                if !table.is_observed(i, group.start) {
                    continue;
                }
                let held_out = to_validation(self.row_keys[i], self.feature_keys[g]);
                let dest = if held_out { &mut validation } else { &mut train_by_row[i] };
                for c in group.columns() {
                    dest.push(LabeledCell { row: i, col: c, target: table.values()[i * n_cols + c] });
                }
                if !held_out {
                    train_cells += group.width;
                }
            }
        }
        Split { train_by_row, train_cells, validation }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn small_config() -> TrainConfig {
        TrainConfig {
            latent_dim: 4,
            hidden_units: 16,
            hidden_layers: 2,
            epochs: 5,
            batch_rows: 8,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_returns_initialised_model() {
        let t = synthetic::rank_one(20, 4, 0.0, 1).fit_scaling().unwrap();
        let cfg = TrainConfig { epochs: 0, ..small_config() };
        let (m, log) = train(&t, &cfg).unwrap();
        assert!(log.epochs.is_empty());
        let (m2, _) = train(&t, &cfg).unwrap();
        assert_eq!(m, m2);
        assert_eq!(m.n_rows(), 20);
    }

    #[test]
    fn training_is_deterministic() {
        let t = synthetic::rank_one(30, 4, 0.0, 2).fit_scaling().unwrap();
        let (a, la) = train(&t, &small_config()).unwrap();
        let (b, lb) = train(&t, &small_config()).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
    }

    #[test]
    fn best_validation_never_worse_than_initial() {
        let t = synthetic::rank_one(40, 5, 0.05, 3).fit_scaling().unwrap();
        for holdout in [HoldoutStrategy::StaticValidation, HoldoutStrategy::PerEpoch] {
            let (_, log) = train(&t, &TrainConfig { epochs: 15, holdout, ..small_config() }).unwrap();
            assert!(log.best_val_loss <= log.initial_val_loss);
            assert!(log.epochs.iter().all(|e| e.train_loss.is_finite() && e.val_loss.is_finite()));
        }
    }

    #[test]
    fn early_stopping_triggers() {
        let t = synthetic::rank_one(30, 4, 0.0, 4).fit_scaling().unwrap();
        let cfg = TrainConfig { epochs: 400, early_stop_patience: 1, lr: 5e-2, ..small_config() };
        let (_, log) = train(&t, &cfg).unwrap();
        assert!(log.stopped_early);
        assert!(log.epochs.len() < 400);
    }

    #[test]
    fn config_validation() {
        let t = synthetic::rank_one(10, 3, 0.0, 0).fit_scaling().unwrap();
        for cfg in [
            TrainConfig { masking_ratio: 0.0, ..small_config() },
            TrainConfig { masking_ratio: 1.0, ..small_config() },
            TrainConfig { batch_rows: 0, ..small_config() },
            TrainConfig { latent_dim: 0, ..small_config() },
        ] {
            assert!(matches!(train(&t, &cfg), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn single_cell_table_cannot_be_split() {
        let t = synthetic::rank_one(1, 1, 0.0, 0).fit_scaling().unwrap();
        assert_eq!(train(&t, &small_config()).unwrap_err(), Error::DegenerateSplit);
    }
}
