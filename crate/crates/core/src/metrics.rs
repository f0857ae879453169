//! Imputation metrics: per-feature NRMSE and rank-based AUROC.
//!
//! Both take expanded `n_rows × n_cols` matrices in original units and an
//! evaluation mask over the same cells.

use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{CellMask, FeatureKind, Layout};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct NrmseReport {
    /// Indexed by original feature; `None` for categorical features, features
    /// without evaluated cells and skipped ones.
    pub per_feature: Vec<Option<f64>>,
    pub mean: Option<f64>,
    /// Unnormalized RMSE, same indexing.
    pub rmse_per_feature: Vec<Option<f64>>,
    pub rmse_mean: Option<f64>,
    /// Features with evaluated cells but zero ground-truth spread.
    pub skipped: Vec<usize>,
}

fn check_shapes(truth: &[f64], predicted: &[f64], mask: &CellMask, layout: &Layout) -> Result<()> {
    let cells = mask.n_rows() * mask.n_cols();
    if mask.n_cols() != layout.n_cols() {
        return Err(Error::ShapeMismatch { what: "mask columns", expected: layout.n_cols(), found: mask.n_cols() });
    }
    for (what, m) in [("truth matrix", truth), ("predicted matrix", predicted)] {
        if m.len() != cells {
            return Err(Error::ShapeMismatch { what, expected: cells, found: m.len() });
        }
    }
    Ok(())
}

fn mean_of(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        None
    } else {
        Some(sum / n as f64)
    }
}

/// RMSE over masked cells of each numeric feature divided by the population
/// standard deviation of that feature's full ground-truth column (NaN cells
/// of `truth` are left out of the spread).
pub fn nrmse(truth: &[f64], predicted: &[f64], mask: &CellMask, layout: &Layout) -> Result<NrmseReport> {
    check_shapes(truth, predicted, mask, layout)?;
    let n_cols = layout.n_cols();
    let n = mask.n_rows();
    let m = layout.n_features();
    let mut report = NrmseReport {
        per_feature: alloc::vec![None; m],
        mean: None,
        rmse_per_feature: alloc::vec![None; m],
        rmse_mean: None,
        skipped: Vec::new(),
    };
    for (g, group) in layout.numeric_features() {
        let c = group.start;
        let (mut sq, mut count) = (0.0, 0usize);
        for i in (0..n).filter(|&i| mask.get(i, c)) {
            let (t, p) = (truth[i * n_cols + c], predicted[i * n_cols + c]);
            if !(t.is_finite() && p.is_finite()) {
                return Err(Error::NonFiniteInput);
            }
            sq += (p - t) * (p - t);
            count += 1;
        }
        if count == 0 {
            continue;
        }
        let rmse = libm::sqrt(sq / count as f64);
        report.rmse_per_feature[g] = Some(rmse);
        let column = || (0..n).map(|i| truth[i * n_cols + c]).filter(|x| !x.is_nan());
        let mu = mean_of(column()).unwrap_or(0.0);
        let std = libm::sqrt(mean_of(column().map(|x| (x - mu) * (x - mu))).unwrap_or(0.0));
        if std > 0.0 {
            report.per_feature[g] = Some(rmse / std);
        } else {
            report.skipped.push(g);
        }
    }
    report.mean = mean_of(report.per_feature.iter().flatten().copied());
    report.rmse_mean = mean_of(report.rmse_per_feature.iter().flatten().copied());
    Ok(report)
}

/// Level at which component AUROCs are averaged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum AurocAverage {
    /// Macro average over every valid one-hot component.
    #[default]
    Component,
    /// Average within each categorical feature first, then across features.
    Group,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AurocReport {
    /// `(expanded column, auroc)` for each valid component.
    pub per_component: Vec<(usize, f64)>,
    /// Indexed by original feature; `None` for numeric or degenerate features.
    pub per_group: Vec<Option<f64>>,
    /// Absent when no component had both classes among masked cells.
    pub mean: Option<f64>,
}

/// Rank-based AUROC with midranks for ties. `None` unless both classes occur.
pub fn auroc_binary(labels: &[bool], scores: &[f64]) -> Option<f64> {
    let n = labels.len().min(scores.len());
    let positives = labels[..n].iter().filter(|&&l| l).count();
    let negatives = n - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start..end (0-based) share the midrank
        let midrank = (start + end + 1) as f64 / 2.0;
        rank_sum += midrank * order[start..end].iter().filter(|&&k| labels[k]).count() as f64;
        start = end;
    }
    let p = positives as f64;
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

/// AUROC of `scores` against the binary truth over masked one-hot cells.
pub fn auroc(
    truth: &[f64],
    scores: &[f64],
    mask: &CellMask,
    layout: &Layout,
    average: AurocAverage,
) -> Result<AurocReport> {
    check_shapes(truth, scores, mask, layout)?;
    let n_cols = layout.n_cols();
    let mut per_component = Vec::new();
    let mut per_group = alloc::vec![None; layout.n_features()];
    for (g, group) in layout.groups().iter().enumerate() {
        if group.kind != FeatureKind::Categorical {
            continue;
        }
        let mut valid = Vec::new();
        for c in group.columns() {
            let rows: Vec<usize> = (0..mask.n_rows()).filter(|&i| mask.get(i, c)).collect();
            let labels: Vec<bool> = rows.iter().map(|&i| truth[i * n_cols + c] == 1.0).collect();
            let s: Vec<f64> = rows.iter().map(|&i| scores[i * n_cols + c]).collect();
            if s.iter().any(|x| x.is_nan()) {
                return Err(Error::NonFiniteInput);
            }
            if let Some(a) = auroc_binary(&labels, &s) {
                per_component.push((c, a));
                valid.push(a);
            }
        }
        per_group[g] = mean_of(valid.into_iter());
    }
    let mean = match average {
        AurocAverage::Component => mean_of(per_component.iter().map(|&(_, a)| a)),
        AurocAverage::Group => mean_of(per_group.iter().flatten().copied()),
    };
    Ok(AurocReport { per_component, per_group, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{ColumnSpec, TableSchema};

    #[test]
    fn nrmse_hand_case() {
        let layout = Layout::from_schema(&TableSchema::new(alloc::vec![ColumnSpec::numeric("x")]).unwrap());
        let mask = CellMask::from_bits(2, 1, alloc::vec![true, true]).unwrap();
        let r = nrmse(&[0.0, 2.0], &[1.0, 1.0], &mask, &layout).unwrap();
        assert_eq!(r.per_feature, alloc::vec![Some(1.0)]);
        assert_eq!(r.mean, Some(1.0));
        let perfect = nrmse(&[0.0, 2.0], &[0.0, 2.0], &mask, &layout).unwrap();
        assert_eq!(perfect.mean, Some(0.0));
    }

    #[test]
    fn nrmse_skips_constant_columns() {
        let layout = Layout::from_schema(
            &TableSchema::new(alloc::vec![ColumnSpec::numeric("x"), ColumnSpec::numeric("y")]).unwrap(),
        );
        let mask = CellMask::from_bits(2, 2, alloc::vec![true, true, false, false]).unwrap();
        let r = nrmse(&[3.0, 0.0, 3.0, 2.0], &[1.0, 1.0, 3.0, 2.0], &mask, &layout).unwrap();
        assert_eq!(r.skipped, alloc::vec![0]);
        assert_eq!(r.per_feature, alloc::vec![None, Some(1.0)]);
        assert_eq!(r.mean, Some(1.0));
    }

    #[test]
    fn auroc_limits() {
        assert_eq!(auroc_binary(&[false, false, true, true], &[0.1, 0.2, 0.3, 0.4]), Some(1.0));
        assert_eq!(auroc_binary(&[true, true, false, false], &[0.1, 0.2, 0.3, 0.4]), Some(0.0));
        assert_eq!(auroc_binary(&[false, true, false, true], &[0.5; 4]), Some(0.5));
        assert_eq!(auroc_binary(&[true, true], &[0.1, 0.2]), None);
    }

    #[test]
    fn auroc_absent_without_both_classes() {
        let layout =
            Layout::from_schema(&TableSchema::new(alloc::vec![ColumnSpec::categorical("c", ["a", "b"])]).unwrap());
        let mask = CellMask::from_bits(2, 2, alloc::vec![true, true, false, false]).unwrap();
        let r = auroc(&[1.0, 0.0, 0.0, 1.0], &[0.9, 0.1, 0.2, 0.8], &mask, &layout, AurocAverage::Component).unwrap();
        assert_eq!(r.mean, None);
        assert!(r.per_component.is_empty());
    }
}
