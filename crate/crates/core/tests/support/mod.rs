//! Brute-force reference implementations and fixtures shared by the
//! integration tests.

#![allow(dead_code)]

use tabinr_core::model::labeled_cells;
use tabinr_core::nn::{Activation, MlpNet, Mode, NetDims};
use tabinr_core::rng;
use tabinr_core::table::{FeatureKind, Layout};
use tabinr_core::{CellMask, CellValue, ColumnSpec, EncodedTable, TabInrModel, TableSchema};

/// Counter-based uniform draws.
pub struct Draws {
    seed: u64,
    k: u64,
}

impl Draws {
    pub fn new(seed: u64) -> Self {
        Self { seed, k: 0 }
    }

    pub fn uniform(&mut self) -> f64 {
        self.k += 1;
        rng::unit_uniform(self.seed, &[self.k])
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn normal(&mut self) -> f64 {
        let u = 1.0 - self.uniform();
        let v = self.uniform();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }
}

/// Mixed table of up to `max_rows × max_features` with native gaps. Numeric
/// values sit on a coarse grid half the time so distances tie.
pub fn random_mixed_table(d: &mut Draws, max_rows: usize, max_features: usize) -> EncodedTable {
    let n = 2 + d.below(max_rows - 1);
    let m = 1 + d.below(max_features);
    let gap = 0.3 * d.uniform();
    let coarse = d.uniform() < 0.5;
    let columns: Vec<ColumnSpec> = (0..m)
        .map(|j| match d.below(3) {
            0 => ColumnSpec::categorical(format!("c{j}"), (0..2 + d.below(3)).map(|k| format!("v{k}"))),
            _ => ColumnSpec::numeric(format!("x{j}")),
        })
        .collect();
    let mut cells = Vec::with_capacity(n * m);
    for _ in 0..n {
        for col in &columns {
            if d.uniform() < gap {
                cells.push(CellValue::Missing);
                continue;
            }
            cells.push(match &col.kind {
                tabinr_core::ColumnKind::Categorical { categories } => CellValue::Category(d.below(categories.len())),
                tabinr_core::ColumnKind::Numeric if coarse => CellValue::Number(d.below(4) as f64),
                tabinr_core::ColumnKind::Numeric => CellValue::Number(10.0 * d.normal()),
            });
        }
    }
    EncodedTable::from_cells(TableSchema::new(columns).unwrap(), n, &cells).unwrap()
}

/// Fraction of (positive, negative) pairs ordered correctly, ties counting one half.
pub fn auroc_pairs(labels: &[bool], scores: &[f64]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0usize;
    for (a, &la) in labels.iter().enumerate() {
        for (b, &lb) in labels.iter().enumerate() {
            if la && !lb {
                pairs += 1;
                if scores[a] > scores[b] {
                    wins += 1.0;
                } else if scores[a] == scores[b] {
                    wins += 0.5;
                }
            }
        }
    }
    (pairs > 0).then(|| wins / pairs as f64)
}

/// Per numeric feature: masked RMSE over the population standard deviation of
/// the whole truth column. Returns the per-feature values and their mean.
pub fn nrmse_scalar(truth: &[f64], pred: &[f64], mask: &CellMask, layout: &Layout) -> (Vec<Option<f64>>, Option<f64>) {
    let w = layout.n_cols();
    let n = mask.n_rows();
    let mut per = vec![None; layout.n_features()];
    for (g, group) in layout.groups().iter().enumerate() {
        if group.kind != FeatureKind::Numeric {
            continue;
        }
        let c = group.start;
        let mut sq = Vec::new();
        let mut column = Vec::new();
        for i in 0..n {
            let t = truth[i * w + c];
            if !t.is_nan() {
                column.push(t);
            }
            if mask.get(i, c) {
                sq.push((pred[i * w + c] - t).powi(2));
            }
        }
        if sq.is_empty() {
            continue;
        }
        let mut mean = 0.0;
        for x in &column {
            mean += x;
        }
        mean /= column.len() as f64;
        let mut var = 0.0;
        for x in &column {
            var += (x - mean) * (x - mean);
        }
        let std = (var / column.len() as f64).sqrt();
        let mut mse = 0.0;
        for s in &sq {
            mse += s;
        }
        let rmse = (mse / sq.len() as f64).sqrt();
        if std > 0.0 {
            per[g] = Some(rmse / std);
        }
    }
    let vals: Vec<f64> = per.iter().flatten().copied().collect();
    let mean = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
    (per, mean)
}

fn category_of(row: &[f64], start: usize, width: usize) -> usize {
    let mut best = 0;
    for k in 1..width {
        if row[start + k] > row[start + best] {
            best = k;
        }
    }
    best
}

/// Straight-line KNN on an unscaled table, filling every targeted unobserved
/// group. Returns the completed matrix.
pub fn knn_brute(table: &EncodedTable, target: &CellMask, k: usize) -> Vec<f64> {
    let n = table.n_rows();
    let w = table.n_cols();
    let groups = table.layout().groups().to_vec();
    let vals = table.values();
    let obs = |i: usize, g: usize| table.is_observed(i, groups[g].start);

    let mut lo = vec![0.0; w];
    let mut span = vec![0.0; w];
    for (g, grp) in groups.iter().enumerate() {
        if grp.kind == FeatureKind::Numeric {
            let xs: Vec<f64> = (0..n).filter(|&i| obs(i, g)).map(|i| vals[i * w + grp.start]).collect();
            let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            lo[grp.start] = min;
            span[grp.start] = max - min;
        }
    }
    let scaled = |i: usize, c: usize| if span[c] > 0.0 { (vals[i * w + c] - lo[c]) / span[c] } else { 0.0 };
    let dist = |a: usize, b: usize| -> Option<f64> {
        let mut total = 0.0;
        let mut count = 0;
        for (g, grp) in groups.iter().enumerate() {
            if !(obs(a, g) && obs(b, g)) {
                continue;
            }
            count += 1;
            match grp.kind {
                FeatureKind::Numeric => {
                    let diff = scaled(a, grp.start) - scaled(b, grp.start);
                    total += diff * diff;
                }
                FeatureKind::Categorical => {
                    let ca = category_of(&vals[a * w..(a + 1) * w], grp.start, grp.width);
                    let cb = category_of(&vals[b * w..(b + 1) * w], grp.start, grp.width);
                    if ca != cb {
                        total += 1.0;
                    }
                }
            }
        }
        (count > 0).then(|| (total / count as f64).sqrt())
    };

    let mut out = vals.to_vec();
    for i in 0..n {
        for (g, grp) in groups.iter().enumerate() {
            let wanted = (grp.start..grp.start + grp.width).any(|c| target.get(i, c)) && !obs(i, g);
            if !wanted {
                continue;
            }
            let mut cands: Vec<(f64, usize)> = Vec::new();
            for b in 0..n {
                if b != i && obs(b, g) {
                    if let Some(dv) = dist(i, b) {
                        cands.push((dv, b));
                    }
                }
            }
            cands.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
            let donors: Vec<usize> = cands.iter().take(k).map(|c| c.1).collect();
            let pool: Vec<usize> =
                if donors.is_empty() { (0..n).filter(|&b| obs(b, g)).collect() } else { donors.clone() };
            match grp.kind {
                FeatureKind::Numeric => {
                    let mut s = 0.0;
                    for &b in &pool {
                        s += vals[b * w + grp.start];
                    }
                    out[i * w + grp.start] = s / pool.len() as f64;
                }
                FeatureKind::Categorical => {
                    let labels: Vec<usize> =
                        pool.iter().map(|&b| category_of(&vals[b * w..(b + 1) * w], grp.start, grp.width)).collect();
                    let mut votes = vec![0; grp.width];
                    for &l in &labels {
                        votes[l] += 1;
                    }
                    let top = *votes.iter().max().unwrap();
                    let winner = if donors.is_empty() {
                        votes.iter().position(|&v| v == top).unwrap()
                    } else {
                        *labels.iter().find(|&&l| votes[l] == top).unwrap()
                    };
                    for kk in 0..grp.width {
                        out[i * w + grp.start + kk] = if kk == winner { 1.0 } else { 0.0 };
                    }
                }
            }
        }
    }
    out
}

/// 4 rows × (2 numeric + 1 three-way categorical) with one gap in each kind.
pub fn toy_table() -> EncodedTable {
    use CellValue::{Category as C, Missing as M, Number as N};
    let schema = TableSchema::new(vec![
        ColumnSpec::numeric("a"),
        ColumnSpec::numeric("b"),
        ColumnSpec::categorical("c", ["p", "q", "r"]),
    ])
    .unwrap();
    let cells = [N(0.5), N(2.0), C(0), N(1.5), M, C(2), N(-1.0), N(4.0), M, N(3.0), N(1.0), C(1)];
    EncodedTable::from_cells(schema, 4, &cells).unwrap().fit_scaling().unwrap()
}

pub fn toy_model(table: &EncodedTable, activation: Activation, depth: usize, seed: u64) -> TabInrModel {
    let d = 3;
    let net = MlpNet::init(NetDims { input: 2 * d, hidden: 6, depth }, activation, 0.0, seed).unwrap();
    let mut draws = Draws::new(seed ^ 0xE5);
    let rows = (0..table.n_rows() * d).map(|_| 0.5 * draws.normal()).collect();
    let feats = (0..table.n_cols() * d).map(|_| 0.5 * draws.normal()).collect();
    TabInrModel::new(net, rows, feats, d, table.schema().clone(), table.scaling().cloned()).unwrap()
}

fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Largest relative error between analytic and central-difference gradients
/// over all parameter tensors, with the tensor that produced it.
pub fn gradient_check(activation: Activation, depth: usize, seed: u64) -> (f64, String) {
    let table = toy_table();
    let cells = labeled_cells(&table);
    let model = toy_model(&table, activation, depth, seed);
    let analytic = model.mixed_loss(&cells, Mode::Eval).unwrap();
    let h = 1e-6;
    let loss_at = |m: &TabInrModel| m.mixed_loss(&cells, Mode::Eval).unwrap().loss;

    let mut worst = (0.0, String::new());
    let mut record = |name: String, a: &[f64], fd: &[f64]| {
        let e = rel_error(a, fd);
        if e > worst.0 {
            worst = (e, name);
        }
    };
    let central = |poke: &dyn Fn(&mut TabInrModel, f64)| {
        let mut plus = model.clone();
        poke(&mut plus, h);
        let mut minus = model.clone();
        poke(&mut minus, -h);
        (loss_at(&plus) - loss_at(&minus)) / (2.0 * h)
    };

    for l in 0..model.net.layers().len() {
        let fd: Vec<f64> = (0..model.net.layers()[l].weight.len())
            .map(|k| central(&|m, e| m.net.layers_mut()[l].weight[k] += e))
            .collect();
        record(format!("layer{l}.weight"), &analytic.net.layers[l].weight, &fd);
        let fd: Vec<f64> = (0..model.net.layers()[l].bias.len())
            .map(|k| central(&|m, e| m.net.layers_mut()[l].bias[k] += e))
            .collect();
        record(format!("layer{l}.bias"), &analytic.net.layers[l].bias, &fd);
    }
    let fd: Vec<f64> = (0..model.row_embeddings.len()).map(|k| central(&|m, e| m.row_embeddings[k] += e)).collect();
    record("rows".into(), &analytic.rows, &fd);
    let fd: Vec<f64> =
        (0..model.feature_embeddings.len()).map(|k| central(&|m, e| m.feature_embeddings[k] += e)).collect();
    record("features".into(), &analytic.features, &fd);
    worst
}
