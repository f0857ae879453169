//! One-axis sweeps over a base configuration.
//!
//! ```json
//! {"dataset": {"name": "letter", "path": "letter-recognition.data"},
//!  "mechanism": "mcar", "rate": 0.1, "seeds": [0, 1, 2],
//!  "base": {"epochs": 200},
//!  "sweep": {"latent": [16, 32, 64, 128, 256]}}
//! ```
//!
//! Every sweep point is run as a benchmark with a single dataset, mechanism
//! and rate, so a one-point sweep reproduces the matching benchmark records.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use tabinr_core::metrics::AurocAverage;
use tabinr_core::missingness::{Mechanism, MnarScope};
use tabinr_core::nn::Activation;
use tabinr_core::TrainConfig;

use crate::bench::{self, BenchConfig, Method, MetricsReport};
use crate::datasets::DatasetSpec;
use crate::error::{CliError, CliResult};
use crate::report::summarize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Depth,
    Latent,
    Width,
    Activation,
    DatasetSize,
    FeatureCount,
    Rate,
}

impl Axis {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "depth" => Axis::Depth,
            "latent" => Axis::Latent,
            "width" => Axis::Width,
            "activation" => Axis::Activation,
            "dataset_size" => Axis::DatasetSize,
            "feature_count" => Axis::FeatureCount,
            "rate" => Axis::Rate,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblateConfig {
    pub dataset: DatasetSpec,
    #[serde(default = "tabinr_only")]
    pub methods: Vec<Method>,
    #[serde(default = "mcar")]
    pub mechanism: Mechanism,
    #[serde(default = "default_rate")]
    pub rate: f64,
    #[serde(default = "bench::default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub base: TrainConfig,
    #[serde(default = "default_k")]
    pub knn_k: usize,
    #[serde(default)]
    pub auroc_average: AurocAverage,
    #[serde(default)]
    pub mnar_scope: MnarScope,
    #[serde(default)]
    pub workers: Option<usize>,
    pub sweep: Map<String, Value>,
}

fn tabinr_only() -> Vec<Method> {
    vec![Method::Tabinr]
}

fn mcar() -> Mechanism {
    Mechanism::Mcar
}

fn default_rate() -> f64 {
    0.3
}

fn default_k() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub axis: String,
    pub value: String,
    pub method: String,
    pub runs: usize,
    pub failed: usize,
    pub nrmse_mean: Option<f64>,
    pub nrmse_std: Option<f64>,
    pub auroc_mean: Option<f64>,
    pub auroc_std: Option<f64>,
    pub wall_time_mean_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRecord {
    pub axis: String,
    pub value: String,
    #[serde(flatten)]
    pub record: MetricsReport,
}

fn usage(msg: String) -> CliError {
    CliError::Usage(msg)
}

fn as_usize(axis: &str, v: &Value) -> CliResult<usize> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| usage(format!("{axis} values must be non-negative integers, got {v}")))
}

fn parse_activation(v: &Value) -> CliResult<Activation> {
    match v {
        Value::String(s) => match s.as_str() {
            "relu" => Ok(Activation::Relu),
            "siren" => Ok(Activation::siren()),
            "hosc" => Ok(Activation::hosc()),
            other => Err(usage(format!("unknown activation `{other}`"))),
        },
        other => serde_json::from_value(other.clone()).map_err(|e| usage(format!("bad activation {other}: {e}"))),
    }
}

fn label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl AblateConfig {
    /// The single sweep axis and its values.
    pub fn axis(&self) -> CliResult<(Axis, &str, &[Value])> {
        let keys: Vec<&String> = self.sweep.keys().collect();
        match keys.as_slice() {
            [] => Err(usage("sweep names no axis".into())),
            [key] => {
                let axis = Axis::parse(key).ok_or_else(|| usage(format!("unknown sweep axis `{key}`")))?;
                let values =
                    self.sweep[*key].as_array().ok_or_else(|| usage(format!("sweep `{key}` must be a list")))?;
                if values.is_empty() {
                    return Err(usage(format!("sweep `{key}` has no values")));
                }
                Ok((axis, key.as_str(), values.as_slice()))
            }
            many => Err(usage(format!(
                "conflicting sweep axes: {}; sweep exactly one axis per run",
                many.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", ")
            ))),
        }
    }

    /// Benchmark configuration for one sweep value.
    pub fn point(&self, axis: Axis, name: &str, value: &Value) -> CliResult<BenchConfig> {
        let mut dataset = self.dataset.clone();
        let mut base = self.base.clone();
        let mut rate = self.rate;
        match axis {
            Axis::Depth => base.hidden_layers = as_usize(name, value)?,
            Axis::Latent => base.latent_dim = as_usize(name, value)?,
            Axis::Width => base.hidden_units = as_usize(name, value)?,
            Axis::Activation => base.activation = parse_activation(value)?,
            Axis::DatasetSize => dataset.max_rows = Some(as_usize(name, value)?),
            Axis::FeatureCount => dataset.max_features = Some(as_usize(name, value)?),
            Axis::Rate => {
                rate = value.as_f64().ok_or_else(|| usage(format!("rate values must be numbers, got {value}")))?
            }
        }
        let mut cfg = BenchConfig::new(vec![dataset]);
        cfg.methods = self.methods.clone();
        cfg.mechanisms = vec![self.mechanism];
        cfg.rates = vec![rate];
        cfg.seeds = self.seeds.clone();
        cfg.master_seed = self.master_seed;
        cfg.defaults = base;
        cfg.knn_k = self.knn_k;
        cfg.auroc_average = self.auroc_average;
        cfg.mnar_scope = self.mnar_scope;
        cfg.workers = self.workers;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn run(&self, base_dir: &Path) -> CliResult<(Vec<AblationRow>, Vec<AblationRecord>)> {
        let (axis, name, values) = self.axis()?;
        let points = values.iter().map(|v| self.point(axis, name, v)).collect::<CliResult<Vec<_>>>()?;
        let mut rows = Vec::new();
        let mut records = Vec::new();
        for (value, cfg) in values.iter().zip(&points) {
            let recs = bench::run(cfg, base_dir)?;
            for s in summarize(&recs) {
                rows.push(AblationRow {
                    axis: name.into(),
                    value: label(value),
                    method: s.method,
                    runs: s.runs,
                    failed: s.failed,
                    nrmse_mean: s.nrmse_mean,
                    nrmse_std: s.nrmse_std,
                    auroc_mean: s.auroc_mean,
                    auroc_std: s.auroc_std,
                    wall_time_mean_s: s.wall_time_mean_s,
                });
            }
            records.extend(recs.into_iter().map(|record| AblationRecord {
                axis: name.into(),
                value: label(value),
                record,
            }));
        }
        Ok((rows, records))
    }
}
