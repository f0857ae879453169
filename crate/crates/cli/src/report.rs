//! JSON-lines records and summary tables.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::bench::MetricsReport;
use crate::error::{CliError, CliResult};

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> CliResult<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| CliError::data(e.to_string()))?;
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| serde_json::from_str(l).map_err(|e| CliError::data(format!("{}:{}: {e}", path.display(), k + 1))))
        .collect()
}

/// Mean and sample standard deviation (`n − 1`; 0 for a single value).
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    Some((mean, std))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub method: String,
    pub mechanism: String,
    pub rate: f64,
    pub runs: usize,
    pub failed: usize,
    pub nrmse_mean: Option<f64>,
    pub nrmse_std: Option<f64>,
    pub auroc_mean: Option<f64>,
    pub auroc_std: Option<f64>,
    pub wall_time_mean_s: Option<f64>,
}

/// One row per (dataset, method, mechanism, rate), in first-appearance order.
/// Failed records count towards `failed` only.
pub fn summarize(records: &[MetricsReport]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, &str, &str, f64)> = Vec::new();
    for r in records {
        let key = (r.dataset.clone(), r.method.name(), r.mechanism.name(), r.rate);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(dataset, method, mechanism, rate)| {
            let group: Vec<&MetricsReport> = records
                .iter()
                .filter(|r| {
                    r.dataset == dataset
                        && r.method.name() == method
                        && r.mechanism.name() == mechanism
                        && r.rate == rate
                })
                .collect();
            let ok: Vec<&&MetricsReport> = group.iter().filter(|r| r.error.is_none()).collect();
            let nrmse: Vec<f64> = ok.iter().filter_map(|r| r.nrmse_mean).collect();
            let auroc: Vec<f64> = ok.iter().filter_map(|r| r.auroc_mean).collect();
            let times: Vec<f64> = ok.iter().map(|r| r.wall_time_s).collect();
            SummaryRow {
                dataset,
                method: method.into(),
                mechanism: mechanism.into(),
                rate,
                runs: group.len(),
                failed: group.len() - ok.len(),
                nrmse_mean: mean_std(&nrmse).map(|m| m.0),
                nrmse_std: mean_std(&nrmse).map(|m| m.1),
                auroc_mean: mean_std(&auroc).map(|m| m.0),
                auroc_std: mean_std(&auroc).map(|m| m.1),
                wall_time_mean_s: mean_std(&times).map(|m| m.0),
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    for row in rows {
        w.serialize(row).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Plain-text table of a summary for the terminal.
pub fn print_summary(rows: &[SummaryRow], out: &mut dyn Write) -> std::io::Result<()> {
    let fmt = |m: Option<f64>, s: Option<f64>| match (m, s) {
        (Some(m), Some(s)) => format!("{m:.4} ± {s:.4}"),
        _ => "-".into(),
    };
    writeln!(
        out,
        "{:<16} {:<10} {:<5} {:>5} {:>18} {:>18} {:>6}",
        "dataset", "method", "mech", "rate", "nrmse", "auroc", "failed"
    )?;
    for r in rows {
        writeln!(
            out,
            "{:<16} {:<10} {:<5} {:>5} {:>18} {:>18} {:>6}",
            r.dataset,
            r.method,
            r.mechanism,
            r.rate,
            fmt(r.nrmse_mean, r.nrmse_std),
            fmt(r.auroc_mean, r.auroc_std),
            r.failed
        )?;
    }
    Ok(())
}
