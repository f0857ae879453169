mod support;

use support::{auroc_pairs, knn_brute, nrmse_scalar, random_mixed_table, Draws};
use tabinr_core::baselines::impute_knn;
use tabinr_core::metrics::{auroc, auroc_binary, nrmse, AurocAverage};
use tabinr_core::{CellMask, Error};

#[test]
fn auroc_matches_pair_counting() {
    let mut d = Draws::new(11);
    let mut checked = 0;
    for _ in 0..200 {
        let n = 2 + d.below(80);
        let levels = 1 + d.below(12);
        let labels: Vec<bool> = (0..n).map(|_| d.uniform() < 0.4).collect();
        let scores: Vec<f64> = (0..n).map(|_| if levels < 6 { d.below(levels) as f64 } else { d.normal() }).collect();
        let expected = auroc_pairs(&labels, &scores);
        let got = auroc_binary(&labels, &scores);
        match (got, expected) {
            (Some(a), Some(b)) => {
                assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
                checked += 1;
            }
            (None, None) => {}
            other => panic!("class presence disagrees: {other:?}"),
        }
    }
    assert!(checked > 150);
}

#[test]
fn auroc_over_masked_components_matches_pair_counting() {
    let mut d = Draws::new(12);
    for _ in 0..50 {
        let t = random_mixed_table(&mut d, 40, 6);
        let w = t.n_cols();
        let truth = t.values().to_vec();
        let scores: Vec<f64> = (0..truth.len()).map(|_| d.below(5) as f64 / 4.0).collect();
        let bits = (0..truth.len()).map(|k| t.observed()[k] && d.uniform() < 0.6).collect();
        let mask = CellMask::from_bits(t.n_rows(), w, bits).unwrap().close_over_groups(t.layout());
        let mask = t.apply_mask(&mask).unwrap().1.mask;
        let report = auroc(&truth, &scores, &mask, t.layout(), AurocAverage::Component).unwrap();
        let mut expected = Vec::new();
        for (_, g) in t.layout().categorical_features() {
            for c in g.columns() {
                let rows: Vec<usize> = (0..t.n_rows()).filter(|&i| mask.get(i, c)).collect();
                let labels: Vec<bool> = rows.iter().map(|&i| truth[i * w + c] == 1.0).collect();
                let s: Vec<f64> = rows.iter().map(|&i| scores[i * w + c]).collect();
                if let Some(a) = auroc_pairs(&labels, &s) {
                    expected.push((c, a));
                }
            }
        }
        assert_eq!(report.per_component.len(), expected.len());
        for ((c1, a), (c2, b)) in report.per_component.iter().zip(&expected) {
            assert_eq!(c1, c2);
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn nrmse_matches_scalar_reference() {
    let mut d = Draws::new(13);
    for _ in 0..200 {
        let t = random_mixed_table(&mut d, 40, 6);
        let truth = t.values().to_vec();
        let pred: Vec<f64> = truth.iter().map(|x| if x.is_nan() { 0.0 } else { x + d.normal() }).collect();
        let bits = (0..truth.len()).map(|k| t.observed()[k] && d.uniform() < 0.5).collect();
        let mask = CellMask::from_bits(t.n_rows(), t.n_cols(), bits).unwrap();
        let got = nrmse(&truth, &pred, &mask, t.layout()).unwrap();
        let (per, mean) = nrmse_scalar(&truth, &pred, &mask, t.layout());
        for (a, b) in got.per_feature.iter().zip(&per) {
            match (a, b) {
                (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-12 * b.max(1.0)),
                (None, None) => {}
                other => panic!("{other:?}"),
            }
        }
        match (got.mean, mean) {
            (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-12 * b.max(1.0)),
            (None, None) => {}
            other => panic!("{other:?}"),
        }
    }
}

fn same(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x.is_nan() && y.is_nan()) || (x - y).abs() <= 1e-12 * x.abs().max(1.0))
}

#[test]
fn knn_matches_brute_force() {
    let mut d = Draws::new(14);
    let mut checked = 0;
    for _ in 0..400 {
        let t = random_mixed_table(&mut d, 40, 6);
        let k = 1 + d.below(6);
        let bits = (0..t.n_rows() * t.n_cols()).map(|_| d.uniform() < 0.8).collect();
        let target = CellMask::from_bits(t.n_rows(), t.n_cols(), bits).unwrap();
        match impute_knn(&t, &target, k) {
            Ok(out) => {
                let expected = knn_brute(&t, &target, k);
                assert!(same(&out.values, &expected), "k={k}\n{:?}\n{:?}", out.values, expected);
                checked += 1;
            }
            Err(Error::NoObservedValues { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }
    assert!(checked > 300, "{checked}");
}
