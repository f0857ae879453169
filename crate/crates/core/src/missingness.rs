//! Synthetic missingness: MCAR, MAR and MNAR masks over feature units.
//!
//! A unit is one `(row, original feature)` pair; categorical features are
//! masked as a whole one-hot group. Only observed units are ever masked.
//! Bernoulli draws are taken for every unit of the stage, observed or not, in
//! row-major order so the stream layout does not depend on native missingness.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::sigmoid;
use crate::rng::StreamRng;
use crate::table::{CellMask, EncodedTable, MaskPair};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Mechanism {
    Mcar,
    Mar,
    Mnar,
}

impl Mechanism {
    pub fn name(&self) -> &'static str {
        match self {
            Mechanism::Mcar => "mcar",
            Mechanism::Mar => "mar",
            Mechanism::Mnar => "mnar",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mcar" => Some(Mechanism::Mcar),
            "mar" => Some(Mechanism::Mar),
            "mnar" => Some(Mechanism::Mnar),
            _ => None,
        }
    }
}

/// Which cells the second MNAR stage may mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MnarScope {
    /// Only the always-observed columns of the MAR stage.
    #[default]
    SubsetOnly,
    /// Every unit left unmasked by the MAR stage.
    AllRemaining,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MissingnessSpec {
    pub mechanism: Mechanism,
    pub p_miss: f64,
    /// Fraction of features kept always observed by MAR/MNAR.
    pub observed_subset_fraction: f64,
    pub mnar_scope: MnarScope,
    pub seed: u64,
}

impl MissingnessSpec {
    pub fn new(mechanism: Mechanism, p_miss: f64, seed: u64) -> Self {
        Self { mechanism, p_miss, observed_subset_fraction: 0.3, mnar_scope: MnarScope::SubsetOnly, seed }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_miss) {
            return Err(Error::InvalidArgument("p_miss must lie in [0, 1]".into()));
        }
        if !(self.observed_subset_fraction > 0.0 && self.observed_subset_fraction < 1.0) {
            return Err(Error::InvalidArgument("observed_subset_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Dispatches on `spec.mechanism`.
pub fn synthesize(table: &EncodedTable, spec: &MissingnessSpec) -> Result<MaskPair> {
    spec.validate()?;
    match spec.mechanism {
        Mechanism::Mcar => mask_mcar(table, spec.p_miss, spec.seed),
        Mechanism::Mar => mask_mar(table, spec),
        Mechanism::Mnar => mask_mnar(table, spec),
    }
}

/// Feature-level bits → `MaskPair` via the table (drops unobserved units).
fn finish(table: &EncodedTable, unit_bits: &[bool]) -> Result<MaskPair> {
    let mask = CellMask::from_feature_bits(table.layout(), table.n_rows(), unit_bits)?;
    Ok(table.apply_mask(&mask)?.1)
}

fn unit_observed(table: &EncodedTable, row: usize, feature: usize) -> bool {
    table.is_observed(row, table.layout().groups()[feature].start)
}

/// Independent Bernoulli(`p_miss`) per observed unit.
pub fn mask_mcar(table: &EncodedTable, p_miss: f64, seed: u64) -> Result<MaskPair> {
    if !(0.0..=1.0).contains(&p_miss) {
        return Err(Error::InvalidArgument("p_miss must lie in [0, 1]".into()));
    }
    let m = table.n_features();
    let mut r = crate::rng::stream(seed, &[0x4d43_4152]);
    let mut bits = vec![false; table.n_rows() * m];
    for i in 0..table.n_rows() {
        for g in 0..m {
            let u: f64 = r.random();
            bits[i * m + g] = u < p_miss && unit_observed(table, i, g);
        }
    }
    finish(table, &bits)
}

/// State shared by the MAR and MNAR constructions.
struct MarStage {
    bits: Vec<bool>,
    always_observed: Vec<usize>,
    rng: StreamRng,
}

/// The always-observed subset (sorted) and the stream positioned after drawing it.
fn observed_subset(table: &EncodedTable, spec: &MissingnessSpec) -> Result<(Vec<usize>, StreamRng)> {
    spec.validate()?;
    let m = table.n_features();
    if m < 2 {
        return Err(Error::NoMaskableColumns);
    }
    let subset_size = libm::ceil(spec.observed_subset_fraction * m as f64) as usize;
    let subset_size = subset_size.max(1);
    if subset_size >= m {
        return Err(Error::NoMaskableColumns);
    }
    let mut r = crate::rng::stream(spec.seed, &[0x4d41_5200]);
    let mut always_observed = index::sample(&mut r, m, subset_size).into_vec();
    always_observed.sort_unstable();
    Ok((always_observed, r))
}

/// Features the mechanism's target rate refers to: every feature for MCAR
/// and MNAR, the complement of the always-observed subset for MAR.
pub fn target_features(table: &EncodedTable, spec: &MissingnessSpec) -> Result<Vec<usize>> {
    let m = table.n_features();
    match spec.mechanism {
        Mechanism::Mar => {
            let (always_observed, _) = observed_subset(table, spec)?;
            Ok((0..m).filter(|g| !always_observed.contains(g)).collect())
        }
        _ => Ok((0..m).collect()),
    }
}

fn mar_stage(table: &EncodedTable, spec: &MissingnessSpec) -> Result<MarStage> {
    let n = table.n_rows();
    let m = table.n_features();
    let (always_observed, mut r) = observed_subset(table, spec)?;
    let maskable: Vec<usize> = (0..m).filter(|g| !always_observed.contains(g)).collect();

    // standardized expanded columns of the always-observed features
    let cols: Vec<usize> = always_observed.iter().flat_map(|&g| table.layout().groups()[g].columns()).collect();
    let mut inputs = vec![0.0; n * cols.len()];
    for (k, &c) in cols.iter().enumerate() {
        let obs: Vec<f64> = (0..n).filter_map(|i| table.value(i, c)).collect();
        if obs.is_empty() {
            continue;
        }
        let mean = obs.iter().sum::<f64>() / obs.len() as f64;
        let var = obs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / obs.len() as f64;
        let std = libm::sqrt(var);
        for i in 0..n {
            inputs[i * cols.len() + k] = match table.value(i, c) {
                Some(x) if std > 0.0 => (x - mean) / std,
                _ => 0.0,
            };
        }
    }

    // per maskable feature: weights, scores, calibrated probabilities
    let mut probs = vec![0.0; n * maskable.len()];
    for (slot, &g) in maskable.iter().enumerate() {
        let w: Vec<f64> = (0..cols.len()).map(|_| StandardNormal.sample(&mut r)).collect();
        let scores: Vec<f64> = (0..n)
            .map(|i| w.iter().zip(&inputs[i * cols.len()..(i + 1) * cols.len()]).map(|(a, b)| a * b).sum())
            .collect();
        let rows: Vec<usize> = (0..n).filter(|&i| unit_observed(table, i, g)).collect();
        let p = if spec.p_miss <= 0.0 || rows.is_empty() {
            Vec::new()
        } else if spec.p_miss >= 1.0 {
            vec![1.0; n]
        } else {
            let sel: Vec<f64> = rows.iter().map(|&i| scores[i]).collect();
            let b = calibrate_intercept(|b| mean_sigmoid(&sel, b), spec.p_miss)?;
            scores.iter().map(|s| sigmoid(s + b)).collect()
        };
        for i in 0..n {
            probs[i * maskable.len() + slot] = p.get(i).copied().unwrap_or(0.0);
        }
    }

    let mut bits = vec![false; n * m];
    for i in 0..n {
        for (slot, &g) in maskable.iter().enumerate() {
            let u: f64 = r.random();
            bits[i * m + g] = u < probs[i * maskable.len() + slot] && unit_observed(table, i, g);
        }
    }
    Ok(MarStage { bits, always_observed, rng: r })
}

fn mean_sigmoid(scores: &[f64], b: f64) -> f64 {
    scores.iter().map(|s| sigmoid(s + b)).sum::<f64>() / scores.len() as f64
}

/// A random subset of features stays observed; every other feature is masked
/// with a logistic probability of the standardized observed subset, with the
/// intercept calibrated so its mean probability equals `p_miss`.
pub fn mask_mar(table: &EncodedTable, spec: &MissingnessSpec) -> Result<MaskPair> {
    let stage = mar_stage(table, spec)?;
    finish(table, &stage.bits)
}

/// MAR stage, then an independent Bernoulli(`p_miss`) over the previously
/// always-observed features (or every remaining unit, per `mnar_scope`),
/// continuing the same random stream.
pub fn mask_mnar(table: &EncodedTable, spec: &MissingnessSpec) -> Result<MaskPair> {
    let MarStage { mut bits, always_observed, rng: mut r } = mar_stage(table, spec)?;
    let m = table.n_features();
    for i in 0..table.n_rows() {
        for g in 0..m {
            let eligible = match spec.mnar_scope {
                MnarScope::SubsetOnly => always_observed.contains(&g),
                MnarScope::AllRemaining => !bits[i * m + g],
            };
            if !eligible {
                continue;
            }
            let u: f64 = r.random();
            if u < spec.p_miss && unit_observed(table, i, g) {
                bits[i * m + g] = true;
            }
        }
    }
    finish(table, &bits)
}

/// Bisection for `b` with `probability(b) = target`, `probability` increasing.
/// Searches `[-50, 50]`, then once more over `[-500, 500]`.
pub fn calibrate_intercept(probability: impl Fn(f64) -> f64, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidArgument("target rate must lie in (0, 1)".into()));
    }
    for half_width in [50.0, 500.0] {
        let (mut lo, mut hi) = (-half_width, half_width);
        if probability(lo) > target || probability(hi) < target {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let p = probability(mid);
            if libm::fabs(p - target) <= 1e-9 {
                return Ok(mid);
            }
            if p < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mid = 0.5 * (lo + hi);
        if libm::fabs(probability(mid) - target) <= 1e-6 {
            return Ok(mid);
        }
    }
    Err(Error::CalibrationFailed { target })
}

/// Masked units ÷ observed units, at feature-unit granularity.
pub fn realized_rate(table: &EncodedTable, mask: &CellMask) -> f64 {
    realized_rate_over(table, mask, &(0..table.n_features()).collect::<Vec<_>>())
}

/// As [`realized_rate`], restricted to `features`.
pub fn realized_rate_over(table: &EncodedTable, mask: &CellMask, features: &[usize]) -> f64 {
    let groups = table.layout().groups();
    let (mut masked, mut observed) = (0usize, 0usize);
    for i in 0..table.n_rows() {
        for &g in features {
            let c = groups[g].start;
            if table.is_observed(i, c) {
                observed += 1;
                if mask.get(i, c) {
                    masked += 1;
                }
            }
        }
    }
    if observed == 0 {
        0.0
    } else {
        masked as f64 / observed as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;
    use crate::table::{CellValue, ColumnSpec, TableSchema};

    fn table(n: usize) -> EncodedTable {
        synthetic::correlated_gaussian(n, 10, 0.5, 3)
    }

    #[test]
    fn mcar_extremes() {
        let t = table(200);
        assert!(mask_mcar(&t, 0.0, 1).unwrap().mask.is_empty());
        let all = mask_mcar(&t, 1.0, 1).unwrap();
        assert_eq!(all.mask.count(), t.observed_count());
        assert_eq!(all.truth.len(), t.observed_count());
    }

    #[test]
    fn mcar_rate_inside_binomial_interval() {
        let t = table(10_000);
        let pair = mask_mcar(&t, 0.3, 7).unwrap();
        let n = (t.n_rows() * t.n_features()) as f64;
        let half = 3.29 * libm::sqrt(0.3 * 0.7 / n);
        let rate = realized_rate(&t, &pair.mask);
        assert!((rate - 0.3).abs() <= half, "rate {rate}");
    }

    #[test]
    fn mar_extremes_and_subset_never_masked() {
        let t = table(500);
        let spec = MissingnessSpec::new(Mechanism::Mar, 0.0, 4);
        assert!(mask_mar(&t, &spec).unwrap().mask.is_empty());
        for seed in 0..5 {
            let spec = MissingnessSpec::new(Mechanism::Mar, 0.6, seed);
            let stage = mar_stage(&t, &spec).unwrap();
            assert_eq!(stage.always_observed.len(), 3);
            let pair = mask_mar(&t, &spec).unwrap();
            for &g in &stage.always_observed {
                assert!((0..t.n_rows()).all(|i| !pair.mask.get(i, g)));
            }
        }
    }

    #[test]
    fn mar_calibrated_rate() {
        let t = table(10_000);
        let spec = MissingnessSpec::new(Mechanism::Mar, 0.3, 11);
        let stage = mar_stage(&t, &spec).unwrap();
        let maskable: Vec<usize> = (0..10).filter(|g| !stage.always_observed.contains(g)).collect();
        assert_eq!(target_features(&t, &spec).unwrap(), maskable);
        let pair = mask_mar(&t, &spec).unwrap();
        let rate = realized_rate_over(&t, &pair.mask, &maskable);
        assert!((rate - 0.3).abs() <= 0.02, "rate {rate}");
    }

    #[test]
    fn mnar_extends_mar() {
        let t = table(2000);
        let spec = MissingnessSpec::new(Mechanism::Mnar, 0.3, 5);
        let mar = mask_mar(&t, &MissingnessSpec { mechanism: Mechanism::Mar, ..spec }).unwrap();
        let mnar = mask_mnar(&t, &spec).unwrap();
        let subset = mar_stage(&t, &spec).unwrap().always_observed;
        for i in 0..t.n_rows() {
            for g in (0..10).filter(|g| !subset.contains(g)) {
                assert_eq!(mar.mask.get(i, g), mnar.mask.get(i, g));
            }
        }
        assert!(mask_mnar(&t, &MissingnessSpec { p_miss: 0.0, ..spec }).unwrap().mask.is_empty());
        let wide = mask_mnar(&t, &MissingnessSpec { mnar_scope: MnarScope::AllRemaining, ..spec }).unwrap();
        assert!(wide.mask.count() > mnar.mask.count());
    }

    #[test]
    fn masks_are_reproducible() {
        let t = table(300);
        for mech in [Mechanism::Mcar, Mechanism::Mar, Mechanism::Mnar] {
            let spec = MissingnessSpec::new(mech, 0.4, 9);
            assert_eq!(synthesize(&t, &spec).unwrap(), synthesize(&t, &spec).unwrap());
        }
    }

    #[test]
    fn never_masks_native_missing() {
        let schema =
            TableSchema::new(vec![ColumnSpec::numeric("a"), ColumnSpec::numeric("b"), ColumnSpec::numeric("c")])
                .unwrap();
        let cells: Vec<CellValue> =
            (0..300).map(|k| if k % 4 == 0 { CellValue::Missing } else { CellValue::Number(k as f64) }).collect();
        let t = EncodedTable::from_cells(schema, 100, &cells).unwrap();
        for mech in [Mechanism::Mcar, Mechanism::Mar, Mechanism::Mnar] {
            let pair = synthesize(&t, &MissingnessSpec::new(mech, 0.9, 2)).unwrap();
            assert!(pair.mask.iter().all(|(i, j)| t.is_observed(i, j)));
        }
    }

    #[test]
    fn too_few_columns_is_an_error() {
        let t = synthetic::rank_one(10, 1, 0.0, 0);
        let spec = MissingnessSpec::new(Mechanism::Mar, 0.3, 0);
        assert_eq!(mask_mar(&t, &spec).unwrap_err(), Error::NoMaskableColumns);
        let t2 = synthetic::rank_one(10, 3, 0.0, 0);
        let greedy = MissingnessSpec { observed_subset_fraction: 0.99, ..spec };
        assert_eq!(mask_mar(&t2, &greedy).unwrap_err(), Error::NoMaskableColumns);
    }

    #[test]
    fn calibration_closed_forms() {
        let zeros = [0.0; 8];
        let b = calibrate_intercept(|b| mean_sigmoid(&zeros, b), 0.5).unwrap();
        assert!(b.abs() < 1e-6);
        let b = calibrate_intercept(|b| mean_sigmoid(&zeros, b), 0.3).unwrap();
        assert!((b - libm::log(0.3 / 0.7)).abs() < 1e-5);
        assert!((b + 0.8473).abs() < 1e-4);
    }

    #[test]
    fn calibration_self_check() {
        let mut r = crate::rng::stream(1, &[]);
        let scores: Vec<f64> = StandardNormal.sample_iter(&mut r).take(500).map(|z: f64| 3.0 * z).collect();
        for target in [0.05, 0.3, 0.77] {
            let b = calibrate_intercept(|b| mean_sigmoid(&scores, b), target).unwrap();
            assert!((mean_sigmoid(&scores, b) - target).abs() <= 1e-6);
        }
    }

    #[test]
    fn calibration_failure() {
        // a probability function that never reaches the target
        assert_eq!(calibrate_intercept(|_| 0.1, 0.5).unwrap_err(), Error::CalibrationFailed { target: 0.5 });
    }
}
