//! Reference imputers: column mean / mode and k-nearest neighbours.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::table::{CellMask, EncodedTable, FeatureGroup, FeatureKind};

/// A completed `n_rows × n_cols` matrix in original units.
///
/// `scores` equals `values` on numeric columns; on one-hot columns it holds a
/// probability-like score per component for ranking metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct Imputation {
    pub values: Vec<f64>,
    pub scores: Vec<f64>,
}

fn check_target(table: &EncodedTable, target: &CellMask) -> Result<()> {
    if target.n_rows() != table.n_rows() || target.n_cols() != table.n_cols() {
        return Err(Error::ShapeMismatch {
            what: "target mask cells",
            expected: table.n_rows() * table.n_cols(),
            found: target.n_rows() * target.n_cols(),
        });
    }
    Ok(())
}

/// Groups of row `i` that need filling.
fn needs_fill(table: &EncodedTable, target: &CellMask, i: usize, group: &FeatureGroup) -> bool {
    group.columns().any(|c| target.get(i, c) && !table.is_observed(i, c))
}

/// Per-column fill values: the observed mean for numeric columns, the
/// one-hot of the modal category (lowest index on ties) for categorical ones,
/// with category frequencies as scores. `None` for columns with no
/// observed cell.
struct ColumnStats {
    fill: Vec<Option<f64>>,
    score: Vec<Option<f64>>,
}

fn column_stats(table: &EncodedTable) -> ColumnStats {
    let n_cols = table.n_cols();
    let mut fill = vec![None; n_cols];
    let mut score = vec![None; n_cols];
    for group in table.layout().groups() {
        let rows: Vec<usize> = (0..table.n_rows()).filter(|&i| table.is_observed(i, group.start)).collect();
        if rows.is_empty() {
            continue;
        }
        match group.kind {
            FeatureKind::Numeric => {
                let mean =
                    rows.iter().map(|&i| table.values()[i * n_cols + group.start]).sum::<f64>() / rows.len() as f64;
                fill[group.start] = Some(mean);
                score[group.start] = Some(mean);
            }
            FeatureKind::Categorical => {
                let counts: Vec<f64> = group
                    .columns()
                    .map(|c| rows.iter().map(|&i| table.values()[i * n_cols + c]).sum::<f64>())
                    .collect();
                let mode = crate::table::argmax_first(&counts);
                for (k, c) in group.columns().enumerate() {
                    fill[c] = Some(if k == mode { 1.0 } else { 0.0 });
                    score[c] = Some(counts[k] / rows.len() as f64);
                }
            }
        }
    }
    ColumnStats { fill, score }
}

fn column_name(table: &EncodedTable, group_index: usize) -> alloc::string::String {
    table.schema().columns()[group_index].name.clone()
}

fn finish(table: &EncodedTable, mut values: Vec<f64>, mut scores: Vec<f64>) -> Result<Imputation> {
    let n_cols = table.n_cols();
    // scaled fills are unscaled once at the end; observed cells go through the same path
    values = table.to_original(&values)?;
    for (k, s) in scores.iter_mut().enumerate() {
        if table.layout().role(k % n_cols) == crate::table::ColumnRole::Numeric {
            *s = values[k];
        }
    }
    Ok(Imputation { values, scores })
}

/// Column mean / mode imputation of every targeted, unobserved cell.
pub fn impute_mean_mode(table: &EncodedTable, target: &CellMask) -> Result<Imputation> {
    check_target(table, target)?;
    let stats = column_stats(table);
    let n_cols = table.n_cols();
    let mut values = table.values().to_vec();
    let mut scores = values.clone();
    for i in 0..table.n_rows() {
        for (g, group) in table.layout().groups().iter().enumerate() {
            if !needs_fill(table, target, i, group) {
                continue;
            }
            for c in group.columns() {
                let fill = stats.fill[c].ok_or_else(|| Error::NoObservedValues { column: column_name(table, g) })?;
                values[i * n_cols + c] = fill;
                scores[i * n_cols + c] = stats.score[c].unwrap_or(fill);
            }
        }
    }
    finish(table, values, scores)
}

/// Numeric columns rescaled to `[0, 1]` by their observed range, used only
/// for distances.
fn normalized(table: &EncodedTable) -> Vec<f64> {
    let n_cols = table.n_cols();
    let mut out = table.values().to_vec();
    for (_, group) in table.layout().numeric_features() {
        let c = group.start;
        let obs = (0..table.n_rows()).filter_map(|i| table.value(i, c));
        let (lo, hi) = obs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        let span = hi - lo;
        for i in 0..table.n_rows() {
            let v = &mut out[i * n_cols + c];
            *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
        }
    }
    out
}

/// Category index of an observed one-hot group.
fn category(values: &[f64], group: &FeatureGroup) -> usize {
    crate::table::argmax_first(&values[group.columns()])
}

/// Distance between rows `a` and `b`: root of the summed squared numeric
/// differences plus categorical mismatches, divided by the number of
/// co-observed features. `None` when nothing is co-observed.
pub fn row_distance(table: &EncodedTable, norm: &[f64], a: usize, b: usize) -> Option<f64> {
    let n_cols = table.n_cols();
    let (ra, rb) = (&norm[a * n_cols..(a + 1) * n_cols], &norm[b * n_cols..(b + 1) * n_cols]);
    let mut total = 0.0;
    let mut count = 0usize;
    for group in table.layout().groups() {
        if !(table.is_observed(a, group.start) && table.is_observed(b, group.start)) {
            continue;
        }
        count += 1;
        total += match group.kind {
            FeatureKind::Numeric => {
                let diff = ra[group.start] - rb[group.start];
                diff * diff
            }
            FeatureKind::Categorical => {
                if category(ra, group) == category(rb, group) {
                    0.0
                } else {
                    1.0
                }
            }
        };
    }
    if count == 0 {
        None
    } else {
        Some(libm::sqrt(total / count as f64))
    }
}

/// k-nearest-neighbour imputation. Donors for a cell are the other rows with
/// that feature observed and at least one feature in common with the
/// recipient, ordered by distance and then row index. Numeric cells take the
/// donors' mean; categorical groups take the majority label, ties going to the
/// label of the nearest tied donor. Cells without donors fall back to the
/// column mean / mode.
pub fn impute_knn(table: &EncodedTable, target: &CellMask, k: usize) -> Result<Imputation> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    check_target(table, target)?;
    let stats = column_stats(table);
    let norm = normalized(table);
    let n = table.n_rows();
    let n_cols = table.n_cols();
    let mut values = table.values().to_vec();
    let mut scores = values.clone();
    let groups = table.layout().groups();
    for i in 0..n {
        let wanted: Vec<usize> = (0..groups.len()).filter(|&g| needs_fill(table, target, i, &groups[g])).collect();
        if wanted.is_empty() {
            continue;
        }
        let mut ranked: Vec<(f64, usize)> =
            (0..n).filter(|&b| b != i).filter_map(|b| row_distance(table, &norm, i, b).map(|d| (d, b))).collect();
        ranked.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for g in wanted {
            let group = &groups[g];
            let donors: Vec<usize> =
                ranked.iter().map(|&(_, b)| b).filter(|&b| table.is_observed(b, group.start)).take(k).collect();
            let row = &mut values[i * n_cols..(i + 1) * n_cols];
            let row_scores = &mut scores[i * n_cols..(i + 1) * n_cols];
            if donors.is_empty() {
                for c in group.columns() {
                    let fill =
                        stats.fill[c].ok_or_else(|| Error::NoObservedValues { column: column_name(table, g) })?;
                    row[c] = fill;
                    row_scores[c] = stats.score[c].unwrap_or(fill);
                }
                continue;
            }
            match group.kind {
                FeatureKind::Numeric => {
                    let c = group.start;
                    row[c] = donors.iter().map(|&b| table.values()[b * n_cols + c]).sum::<f64>() / donors.len() as f64;
                }
                FeatureKind::Categorical => {
                    let labels: Vec<usize> = donors
                        .iter()
                        .map(|&b| category(&table.values()[b * n_cols..(b + 1) * n_cols], group))
                        .collect();
                    let mut votes = vec![0usize; group.width];
                    labels.iter().for_each(|&l| votes[l] += 1);
                    let top = *votes.iter().max().unwrap_or(&0);
                    let winner = labels.iter().copied().find(|&l| votes[l] == top).unwrap_or(0);
                    for (kk, c) in group.columns().enumerate() {
                        row[c] = if kk == winner { 1.0 } else { 0.0 };
                        row_scores[c] = votes[kk] as f64 / donors.len() as f64;
                    }
                }
            }
        }
    }
    finish(table, values, scores)
}
