//! Benchmark grid: datasets × mechanisms × rates × seeds × methods.
//!
//! Seed splitting: every cell derives its seeds from the master seed with
//! [`rng::derive`],
//!
//! ```text
//! mask_seed  = derive(master, [1, name_key(dataset), mechanism, rate bits, seed])
//! model_seed = derive(master, [2, name_key(dataset), mechanism, rate bits, seed])
//! ```
//!
//! with `mechanism` 0/1/2 for MCAR/MAR/MNAR. All methods of one
//! (dataset, mechanism, rate, seed) cell see the same mask. Synthetic datasets
//! without an explicit seed use `derive(master, [name_key(dataset)])`.
//!
//! Cells run on a bounded pool of scoped threads; records come back in grid
//! order regardless of the worker count. A cell that fails or panics yields a
//! record with `error` set and the run continues.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use tabinr_core::baselines::{impute_knn, impute_mean_mode, Imputation};
use tabinr_core::metrics::{auroc, nrmse, AurocAverage};
use tabinr_core::missingness::{
    realized_rate_over, synthesize, target_features, Mechanism, MissingnessSpec, MnarScope,
};
use tabinr_core::rng;
use tabinr_core::{train, EncodedTable, TrainConfig};

use crate::datasets::{name_key, DatasetSpec};
use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tabinr,
    MeanMode,
    Knn,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Tabinr => "tabinr",
            Method::MeanMode => "mean_mode",
            Method::Knn => "knn",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub datasets: Vec<DatasetSpec>,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "mcar_only")]
    pub mechanisms: Vec<Mechanism>,
    #[serde(default = "default_rates")]
    pub rates: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub master_seed: u64,
    /// TabINR settings; `seed` is replaced by the derived model seed.
    #[serde(default)]
    pub defaults: TrainConfig,
    #[serde(default = "default_k")]
    pub knn_k: usize,
    #[serde(default)]
    pub auroc_average: AurocAverage,
    #[serde(default = "default_subset")]
    pub observed_subset_fraction: f64,
    #[serde(default)]
    pub mnar_scope: MnarScope,
    /// Worker threads; the machine's parallelism when absent.
    #[serde(default)]
    pub workers: Option<usize>,
}

fn all_methods() -> Vec<Method> {
    vec![Method::Tabinr, Method::MeanMode, Method::Knn]
}

fn mcar_only() -> Vec<Mechanism> {
    vec![Mechanism::Mcar]
}

fn default_rates() -> Vec<f64> {
    vec![0.3]
}

pub fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn default_k() -> usize {
    5
}

fn default_subset() -> f64 {
    0.3
}

impl BenchConfig {
    pub fn new(datasets: Vec<DatasetSpec>) -> Self {
        serde_json::from_value(json!({ "datasets": datasets })).expect("defaults deserialize")
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Usage(m.into()));
        if self.datasets.is_empty() || self.methods.is_empty() || self.mechanisms.is_empty() {
            return bad("config needs at least one dataset, method and mechanism");
        }
        if self.rates.is_empty() || self.seeds.is_empty() {
            return bad("config needs at least one rate and seed");
        }
        if self.rates.iter().any(|r| !(0.0..1.0).contains(r)) {
            return bad("rates must lie in [0, 1)");
        }
        if self.knn_k == 0 {
            return bad("knn_k must be positive");
        }
        if self.workers == Some(0) {
            return bad("workers must be positive");
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("dataset names must be unique");
        }
        self.defaults.validate()?;
        Ok(())
    }

    pub fn tasks(&self) -> Vec<Task> {
        let mut out = Vec::new();
        for (d, ds) in self.datasets.iter().enumerate() {
            for &mechanism in &self.mechanisms {
                for &rate in &self.rates {
                    for &seed in &self.seeds {
                        let path = |kind: u64| {
                            let mech = mechanism as u64;
                            rng::derive(self.master_seed, &[kind, name_key(&ds.name), mech, rate.to_bits(), seed])
                        };
                        for &method in &self.methods {
                            out.push(Task {
                                dataset: d,
                                mechanism,
                                rate,
                                seed,
                                method,
                                mask_seed: path(1),
                                model_seed: path(2),
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Task {
    pub dataset: usize,
    pub mechanism: Mechanism,
    pub rate: f64,
    pub seed: u64,
    pub method: Method,
    pub mask_seed: u64,
    pub model_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub mechanism: Mechanism,
    pub rate: f64,
    pub seed: u64,
    pub method: Method,
    pub mask_seed: u64,
    pub model_seed: u64,
    pub realized_rate: Option<f64>,
    pub nrmse_per_feature: Vec<Option<f64>>,
    pub nrmse_mean: Option<f64>,
    pub rmse_mean: Option<f64>,
    pub auroc_per_group: Vec<Option<f64>>,
    pub auroc_mean: Option<f64>,
    /// Epochs actually run (TabINR only).
    pub epochs: Option<usize>,
    pub wall_time_s: f64,
    pub error: Option<String>,
    pub config: serde_json::Value,
}

impl MetricsReport {
    /// Copy with the timing zeroed, for comparing reruns.
    pub fn without_timing(&self) -> Self {
        Self { wall_time_s: 0.0, ..self.clone() }
    }
}

fn method_config(cfg: &BenchConfig, task: &Task) -> serde_json::Value {
    match task.method {
        Method::Tabinr => json!(TrainConfig { seed: task.model_seed, ..cfg.defaults.clone() }),
        Method::MeanMode => json!({}),
        Method::Knn => json!({ "k": cfg.knn_k }),
    }
}

fn missingness_spec(cfg: &BenchConfig, task: &Task) -> MissingnessSpec {
    MissingnessSpec {
        observed_subset_fraction: cfg.observed_subset_fraction,
        mnar_scope: cfg.mnar_scope,
        ..MissingnessSpec::new(task.mechanism, task.rate, task.mask_seed)
    }
}

/// Runs one grid cell; never panics.
pub fn run_task(table: &EncodedTable, name: &str, cfg: &BenchConfig, task: &Task) -> MetricsReport {
    let spec = missingness_spec(cfg, task);
    let mut report = MetricsReport {
        dataset: name.into(),
        mechanism: task.mechanism,
        rate: task.rate,
        seed: task.seed,
        method: task.method,
        mask_seed: task.mask_seed,
        model_seed: task.model_seed,
        realized_rate: None,
        nrmse_per_feature: Vec::new(),
        nrmse_mean: None,
        rmse_mean: None,
        auroc_per_group: Vec::new(),
        auroc_mean: None,
        epochs: None,
        wall_time_s: 0.0,
        error: None,
        config: json!({ "missingness": spec, "method": method_config(cfg, task) }),
    };
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| score(table, cfg, task, &spec, &mut report)));
    match outcome {
        Ok(Ok(())) => {}
        Ok(Err(e)) => report.error = Some(e.to_string()),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            report.error = Some(format!("panic: {msg}"));
        }
    }
    report
}

fn score(
    table: &EncodedTable,
    cfg: &BenchConfig,
    task: &Task,
    spec: &MissingnessSpec,
    report: &mut MetricsReport,
) -> tabinr_core::Result<()> {
    let pair = synthesize(table, spec)?;
    report.realized_rate = Some(realized_rate_over(table, &pair.mask, &target_features(table, spec)?));
    let (masked, _) = table.apply_mask(&pair.mask)?;
    let start = Instant::now();
    let imputation: Imputation = match task.method {
        Method::MeanMode => impute_mean_mode(&masked, &pair.mask)?,
        Method::Knn => impute_knn(&masked, &pair.mask, cfg.knn_k)?,
        Method::Tabinr => {
            let scaled = masked.fit_scaling()?;
            let config = TrainConfig { seed: task.model_seed, ..cfg.defaults.clone() };
            let (model, log) = train(&scaled, &config)?;
            report.epochs = Some(log.epochs.len());
            model.impute(&scaled, &pair.mask)?
        }
    };
    report.wall_time_s = start.elapsed().as_secs_f64();
    let truth = table.to_original(table.values())?;
    let layout = table.layout();
    let n = nrmse(&truth, &imputation.values, &pair.mask, layout)?;
    let a = auroc(&truth, &imputation.scores, &pair.mask, layout, cfg.auroc_average)?;
    report.nrmse_per_feature = n.per_feature;
    report.nrmse_mean = n.mean;
    report.rmse_mean = n.rmse_mean;
    report.auroc_per_group = a.per_group;
    report.auroc_mean = a.mean;
    Ok(())
}

pub fn worker_count(requested: Option<usize>) -> usize {
    requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1)
}

/// Loads every dataset (relative paths resolve against `base`) and runs the
/// grid. Dataset loading errors abort; cell errors are recorded.
pub fn run(cfg: &BenchConfig, base: &Path) -> CliResult<Vec<MetricsReport>> {
    cfg.validate()?;
    let tables =
        cfg.datasets.iter().map(|d| d.load(base, cfg.master_seed)).collect::<CliResult<Vec<EncodedTable>>>()?;
    Ok(run_loaded(cfg, &tables))
}

pub fn run_loaded(cfg: &BenchConfig, tables: &[EncodedTable]) -> Vec<MetricsReport> {
    let tasks = cfg.tasks();
    let slots: Vec<Mutex<Option<MetricsReport>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = worker_count(cfg.workers).min(tasks.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(task) = tasks.get(k) else { break };
                let report = run_task(&tables[task.dataset], &cfg.datasets[task.dataset].name, cfg, task);
                *slots[k].lock().unwrap() = Some(report);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().expect("every task ran")).collect()
}
