//! Synthetic tables with known structure. All generators are deterministic in
//! their seed and return unscaled, fully observed tables.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::rng;
use crate::table::{CellValue, ColumnSpec, EncodedTable, TableSchema};

fn numeric_schema(m: usize, prefix: &str) -> Vec<ColumnSpec> {
    (0..m).map(|j| ColumnSpec::numeric(format!("{prefix}{j}"))).collect()
}

fn build(columns: Vec<ColumnSpec>, n: usize, cells: Vec<CellValue>) -> EncodedTable {
    let schema = TableSchema::new(columns).expect("generated schema is valid");
    EncodedTable::from_cells(schema, n, &cells).expect("generated cells are valid")
}

/// `x_ij = a_i · b_j + noise · ε`, with `a_i ~ N(0, 1)`, `b_j ~ U(0.5, 2)`.
pub fn rank_one(n: usize, m: usize, noise: f64, seed: u64) -> EncodedTable {
    let mut r = rng::stream(seed, &[0x5241_4e4b]);
    let b: Vec<f64> = (0..m).map(|_| r.random_range(0.5..2.0)).collect();
    let mut cells = Vec::with_capacity(n * m);
    for _ in 0..n {
        let a: f64 = StandardNormal.sample(&mut r);
        for bj in &b {
            let e: f64 = StandardNormal.sample(&mut r);
            cells.push(CellValue::Number(a * bj + noise * e));
        }
    }
    build(numeric_schema(m, "x"), n, cells)
}

/// Low-rank linear table `X = A·B` with `A ~ N(0,1)^{n×rank}`, `B ~ N(0,1)^{rank×m}`.
pub fn linear(n: usize, m: usize, rank: usize, seed: u64) -> EncodedTable {
    let mut r = rng::stream(seed, &[0x4c49_4e45]);
    let basis: Vec<f64> = (0..rank * m).map(|_| StandardNormal.sample(&mut r)).collect();
    let mut cells = Vec::with_capacity(n * m);
    for _ in 0..n {
        let a: Vec<f64> = (0..rank).map(|_| StandardNormal.sample(&mut r)).collect();
        for j in 0..m {
            let v: f64 = (0..rank).map(|k| a[k] * basis[k * m + j]).sum();
            cells.push(CellValue::Number(v));
        }
    }
    build(numeric_schema(m, "x"), n, cells)
}

/// Equicorrelated Gaussian columns: `x_ij = √ρ·z_i + √(1−ρ)·ε_ij`.
pub fn correlated_gaussian(n: usize, m: usize, rho: f64, seed: u64) -> EncodedTable {
    let mut r = rng::stream(seed, &[0x4741_5553]);
    let (shared, own) = (libm::sqrt(rho), libm::sqrt(1.0 - rho));
    let mut cells = Vec::with_capacity(n * m);
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut r);
        for _ in 0..m {
            let e: f64 = StandardNormal.sample(&mut r);
            cells.push(CellValue::Number(shared * z + own * e));
        }
    }
    build(numeric_schema(m, "x"), n, cells)
}

/// Gaussian numeric columns plus categorical columns drawn from a softmax
/// over a random linear function of the numeric ones.
pub fn logistic_categorical(
    n: usize,
    m_numeric: usize,
    n_categorical: usize,
    categories: usize,
    seed: u64,
) -> EncodedTable {
    let mut r = rng::stream(seed, &[0x4c4f_4749]);
    let weights: Vec<f64> = (0..n_categorical * categories * m_numeric)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut r);
            2.0 * z
        })
        .collect();
    let mut columns = numeric_schema(m_numeric, "x");
    for g in 0..n_categorical {
        let labels: Vec<String> = (0..categories).map(|k| format!("k{k}")).collect();
        columns.push(ColumnSpec::categorical(format!("c{g}"), labels));
    }
    let m = m_numeric + n_categorical;
    let mut cells = Vec::with_capacity(n * m);
    for _ in 0..n {
        let x: Vec<f64> = (0..m_numeric).map(|_| StandardNormal.sample(&mut r)).collect();
        cells.extend(x.iter().map(|&v| CellValue::Number(v)));
        for g in 0..n_categorical {
            let logits: Vec<f64> = (0..categories)
                .map(|k| {
                    let w = &weights[(g * categories + k) * m_numeric..(g * categories + k + 1) * m_numeric];
                    w.iter().zip(&x).map(|(a, b)| a * b).sum()
                })
                .collect();
            let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let probs: Vec<f64> = logits.iter().map(|l| libm::exp(l - top)).collect();
            let total: f64 = probs.iter().sum();
            let mut u = r.random::<f64>() * total;
            let mut pick = categories - 1;
            for (k, p) in probs.iter().enumerate() {
                if u < *p {
                    pick = k;
                    break;
                }
                u -= p;
            }
            cells.push(CellValue::Category(pick));
        }
    }
    build(columns, n, cells)
}

/// Stand-in for the UCI letter-recognition table: 16 integer features in
/// `0..=15` scattered around one of 26 class prototypes, plus the class label
/// as a categorical column.
pub fn letter_like(n: usize, seed: u64) -> EncodedTable {
    const FEATURES: usize = 16;
    const CLASSES: usize = 26;
    let mut r = rng::stream(seed, &[0x4c45_5454]);
    let prototypes: Vec<f64> = (0..CLASSES * FEATURES).map(|_| r.random_range(2.0..13.0)).collect();
    let mut columns = numeric_schema(FEATURES, "f");
    let labels: Vec<String> = (0..CLASSES).map(|k| String::from(char::from(b'A' + k as u8))).collect();
    columns.push(ColumnSpec::categorical("lettr", labels));
    let mut cells = Vec::with_capacity(n * (FEATURES + 1));
    for _ in 0..n {
        let class = r.random_range(0..CLASSES);
        let size: f64 = StandardNormal.sample(&mut r);
        for j in 0..FEATURES {
            let e: f64 = StandardNormal.sample(&mut r);
            let v = prototypes[class * FEATURES + j] + 1.2 * size + 1.5 * e;
            cells.push(CellValue::Number(libm::round(v).clamp(0.0, 15.0)));
        }
        cells.push(CellValue::Category(class));
    }
    build(columns, n, cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic_and_sized() {
        assert_eq!(rank_one(10, 3, 0.1, 1), rank_one(10, 3, 0.1, 1));
        assert_ne!(rank_one(10, 3, 0.1, 1), rank_one(10, 3, 0.1, 2));
        let t = logistic_categorical(50, 3, 2, 4, 0);
        assert_eq!(t.n_cols(), 3 + 8);
        assert_eq!(t.observed_count(), 50 * 11);
        let l = letter_like(30, 0);
        assert_eq!(l.n_features(), 17);
        assert!(l.values().iter().all(|v| (0.0..=15.0).contains(v)));
        assert_eq!(linear(5, 4, 2, 0).n_cols(), 4);
        assert_eq!(correlated_gaussian(5, 4, 0.5, 0).n_rows(), 5);
    }
}
