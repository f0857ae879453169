//! Command-line interface.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tabinr_core::missingness::{
    realized_rate, realized_rate_over, synthesize, target_features, Mechanism, MissingnessSpec, MnarScope,
};
use tabinr_core::rng;
use tabinr_core::table::CellMask;
use tabinr_core::train::{train_observed, IdentityKeys};
use tabinr_core::tta::{adapt_row, impute_row, PartialRow, TtaConfig};
use tabinr_core::{EncodedTable, TrainConfig};

use crate::ablate::AblateConfig;
use crate::bench::{self, BenchConfig};
use crate::checkpoint::{self, Checkpoint};
use crate::datasets::{self, SyntheticKind, SyntheticSpec};
use crate::error::{exit, CliError, CliResult};
use crate::io::{self, LoadedTable, SchemaFile};
use crate::report;

#[derive(Parser, Debug)]
#[command(name = "tabinr", version, about = "Tabular imputation with implicit neural representations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic dataset (CSV plus schema file).
    Generate(GenerateArgs),
    /// Draw a missingness mask for a table.
    Synthesize(SynthesizeArgs),
    /// Train a model on the observed cells of a table.
    Train(TrainArgs),
    /// Fill every missing cell of the training table.
    Impute(ImputeArgs),
    /// Complete unseen rows by fitting a fresh row embedding per row.
    Tta(TtaArgs),
    /// Run a benchmark grid from a JSON config.
    Benchmark(RunArgs),
    /// Run a one-axis sweep from a JSON config.
    Ablate(RunArgs),
    /// Re-aggregate benchmark records into a summary CSV.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Input table.
    #[arg(long)]
    pub data: PathBuf,
    /// Schema file (JSON).
    #[arg(long, conflicts_with = "preset")]
    pub schema: Option<PathBuf>,
    /// Built-in schema for one of the UCI benchmark files.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MechanismArg {
    Mcar,
    Mar,
    Mnar,
}

impl From<MechanismArg> for Mechanism {
    fn from(m: MechanismArg) -> Self {
        match m {
            MechanismArg::Mcar => Mechanism::Mcar,
            MechanismArg::Mar => Mechanism::Mar,
            MechanismArg::Mnar => Mechanism::Mnar,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScopeArg {
    Subset,
    All,
}

#[derive(Args, Debug)]
pub struct SynthesizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub mechanism: MechanismArg,
    #[arg(long)]
    pub rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of features kept always observed by MAR and MNAR.
    #[arg(long, default_value_t = 0.3)]
    pub subset_fraction: f64,
    #[arg(long, value_enum, default_value = "subset")]
    pub mnar_scope: ScopeArg,
    /// Mask CSV; the sidecar goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Mask CSV; masked cells are hidden from training.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Training settings (JSON, missing fields take defaults).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Checkpoint path; the per-epoch loss CSV goes to `<out>.loss.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ImputeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, conflicts_with = "preset")]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TtaArgs {
    /// New rows, same columns as the training table.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, conflicts_with = "preset")]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub model: PathBuf,
    /// Adaptation settings (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Completed rows; per-row traces go to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's worker count.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Overrides the config's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Benchmark records (JSON lines).
    #[arg(long)]
    pub data: PathBuf,
    /// Summary CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KindArg {
    RankOne,
    Linear,
    CorrelatedGaussian,
    LogisticCategorical,
    LetterLike,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long)]
    pub rows: usize,
    #[arg(long, default_value_t = 8)]
    pub cols: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 2)]
    pub rank: usize,
    #[arg(long, default_value_t = 0.8)]
    pub rho: f64,
    #[arg(long, default_value_t = 2)]
    pub categorical: usize,
    #[arg(long, default_value_t = 3)]
    pub categories: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Data CSV; the schema goes to `<out>.schema.json`.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    match run(cli.command) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Synthesize(a) => cmd_synthesize(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Impute(a) => cmd_impute(&a),
        Command::Tta(a) => cmd_tta(&a),
        Command::Benchmark(a) => cmd_benchmark(&a),
        Command::Ablate(a) => cmd_ablate(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

fn schema_source(schema: &Option<PathBuf>, preset: &Option<String>) -> CliResult<Option<SchemaFile>> {
    match (schema, preset) {
        (Some(path), _) => Ok(Some(io::read_json(path)?)),
        (None, Some(name)) => datasets::preset(name).map(Some).ok_or_else(|| {
            CliError::Usage(format!("unknown preset `{name}`; known: {}", datasets::PRESETS.join(", ")))
        }),
        (None, None) => Ok(None),
    }
}

fn load(data: &Path, source: Option<&SchemaFile>) -> CliResult<LoadedTable> {
    io::load_table(data, source)
}

fn masked(table: &EncodedTable, mask: &Option<PathBuf>) -> CliResult<EncodedTable> {
    match mask {
        Some(path) => {
            let m = io::read_mask(path, table)?;
            Ok(table.apply_mask(&m)?.0)
        }
        None => Ok(table.clone()),
    }
}

fn check_rate(rate: f64) -> CliResult<()> {
    if (0.0..=1.0).contains(&rate) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--rate must lie in [0, 1], got {rate}")))
    }
}

#[derive(Serialize)]
struct MaskSidecar {
    mechanism: Mechanism,
    rate: f64,
    seed: u64,
    observed_subset_fraction: f64,
    mnar_scope: MnarScope,
    /// Over the features the mechanism targets (all but the always-observed
    /// subset for MAR).
    realized_rate: f64,
    realized_rate_all: f64,
    masked_units: usize,
    observed_units: usize,
    n_rows: usize,
    n_features: usize,
}

pub fn cmd_synthesize(a: &SynthesizeArgs) -> CliResult<()> {
    check_rate(a.rate)?;
    let source = schema_source(&a.data.schema, &a.data.preset)?;
    let table = load(&a.data.data, source.as_ref())?.table;
    let spec = MissingnessSpec {
        observed_subset_fraction: a.subset_fraction,
        mnar_scope: match a.mnar_scope {
            ScopeArg::Subset => MnarScope::SubsetOnly,
            ScopeArg::All => MnarScope::AllRemaining,
        },
        ..MissingnessSpec::new(a.mechanism.into(), a.rate, a.seed)
    };
    let pair = synthesize(&table, &spec)?;
    io::write_mask(&a.out, &table, &pair.mask)?;
    let layout = table.layout();
    let unit_observed = |bits: &[bool]| {
        (0..table.n_rows())
            .flat_map(|i| layout.groups().iter().map(move |g| (i, g.start)))
            .filter(|&(i, c)| bits[i * table.n_cols() + c])
            .count()
    };
    let sidecar = MaskSidecar {
        mechanism: spec.mechanism,
        rate: spec.p_miss,
        seed: spec.seed,
        observed_subset_fraction: spec.observed_subset_fraction,
        mnar_scope: spec.mnar_scope,
        realized_rate: realized_rate_over(&table, &pair.mask, &target_features(&table, &spec)?),
        realized_rate_all: realized_rate(&table, &pair.mask),
        masked_units: unit_observed(pair.mask.bits()),
        observed_units: unit_observed(table.observed()),
        n_rows: table.n_rows(),
        n_features: table.n_features(),
    };
    io::write_json(&io::sidecar_path(&a.out), &sidecar)
}

#[derive(Serialize)]
struct LossRow {
    epoch: usize,
    train_loss: f64,
    val_loss: f64,
    lr: f64,
}

pub fn cmd_train(a: &TrainArgs) -> CliResult<()> {
    let source = schema_source(&a.data.schema, &a.data.preset)?;
    let loaded = load(&a.data.data, source.as_ref())?;
    let table = masked(&loaded.table, &a.mask)?;
    let mut config: TrainConfig = match &a.config {
        Some(path) => io::read_json(path)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let scaled = table.fit_scaling()?;
    let keys = IdentityKeys::positional(scaled.n_rows(), scaled.n_features());
    let (model, log) = train_observed(&scaled, &config, &keys, &mut |rec, _| {
        if (rec.epoch + 1) % 50 == 0 {
            eprintln!("epoch {:>5}  train {:.6}  val {:.6}", rec.epoch + 1, rec.train_loss, rec.val_loss);
        }
        true
    })?;
    let ckpt = Checkpoint {
        model,
        source: loaded.source,
        train_config: Some(config),
        lineage: checkpoint::lineage_of(&table),
    };
    checkpoint::save(&a.out, &ckpt)?;
    let rows: Vec<LossRow> = log
        .epochs
        .iter()
        .map(|r| LossRow { epoch: r.epoch, train_loss: r.train_loss, val_loss: r.val_loss, lr: r.lr })
        .collect();
    report::write_csv(&io::with_suffix(&a.out, ".loss.csv"), &rows)?;
    eprintln!(
        "trained {} epochs, best validation loss {:.6}{}",
        log.epochs.len(),
        log.best_val_loss,
        if log.stopped_early { " (early stop)" } else { "" }
    );
    Ok(())
}

/// Observed cells take their values from `raw` so they pass through exactly.
fn restore_observed(values: &mut [f64], raw: &EncodedTable, rows: std::ops::Range<usize>) {
    let n_cols = raw.n_cols();
    for i in rows.clone() {
        for c in 0..n_cols {
            if raw.is_observed(i, c) {
                values[(i - rows.start) * n_cols + c] = raw.values()[i * n_cols + c];
            }
        }
    }
}

pub fn cmd_impute(a: &ImputeArgs) -> CliResult<()> {
    let ckpt = checkpoint::load(&a.model)?;
    let source = schema_source(&a.schema, &a.preset)?.unwrap_or_else(|| ckpt.source.clone());
    let loaded = load(&a.data, Some(&source))?;
    let table = masked(&loaded.table, &a.mask)?;
    ckpt.check_lineage(&table)?;
    let scaled = table.apply_scaling(ckpt.model.scaling.as_ref().ok_or(tabinr_core::Error::MissingScaling)?)?;
    let target = CellMask::from_bits(table.n_rows(), table.n_cols(), table.observed().iter().map(|o| !o).collect())?;
    let mut imputation = ckpt.model.impute(&scaled, &target)?;
    restore_observed(&mut imputation.values, &table, 0..table.n_rows());
    io::write_table(&a.out, table.schema(), &imputation.values)
}

#[derive(Serialize)]
struct RowTrace {
    row: usize,
    steps: usize,
    final_loss: f64,
    restarted: bool,
    trace: Vec<f64>,
}

pub fn cmd_tta(a: &TtaArgs) -> CliResult<()> {
    let ckpt = checkpoint::load(&a.model)?;
    let model = &ckpt.model;
    let source = schema_source(&a.schema, &a.preset)?.unwrap_or_else(|| ckpt.source.clone());
    let table = load(&a.data, Some(&source))?.table;
    ckpt.check_schema(&table)?;
    let base: TtaConfig = match &a.config {
        Some(path) => io::read_json(path)?,
        None => TtaConfig::default(),
    };
    let n_cols = table.n_cols();
    let mut values = Vec::with_capacity(table.n_rows() * n_cols);
    let mut traces = Vec::with_capacity(table.n_rows());
    for i in 0..table.n_rows() {
        let row = PartialRow::from_table(model, &table, i)
            .map_err(|e| CliError::data(format!("{}: row {}: {e}", a.data.display(), i + 1)))?;
        let cfg = TtaConfig { seed: rng::derive(a.seed, &[i as u64]), ..base };
        let fit = adapt_row(model, &row, &cfg)?;
        let mut imp = impute_row(model, &fit.embedding, &row)?;
        restore_observed(&mut imp.values, &table, i..i + 1);
        values.extend_from_slice(&imp.values);
        traces.push(RowTrace {
            row: i,
            steps: fit.steps,
            final_loss: fit.final_loss,
            restarted: fit.restarted,
            trace: fit.trace,
        });
    }
    io::write_table(&a.out, table.schema(), &values)?;
    io::write_json(&io::sidecar_path(&a.out), &traces)
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn cmd_benchmark(a: &RunArgs) -> CliResult<()> {
    let mut cfg: BenchConfig = io::read_json(&a.config).map_err(|e| match e {
        CliError::Data(m) => CliError::Usage(m),
        other => other,
    })?;
    if a.workers.is_some() {
        cfg.workers = a.workers;
    }
    if let Some(seed) = a.seed {
        cfg.master_seed = seed;
    }
    let records = bench::run(&cfg, &config_dir(&a.config))?;
    create_dir(&a.out)?;
    report::write_jsonl(&a.out.join("records.jsonl"), &records)?;
    let summary = report::summarize(&records);
    report::write_csv(&a.out.join("summary.csv"), &summary)?;
    let _ = report::print_summary(&summary, &mut std::io::stdout().lock());
    Ok(())
}

pub fn cmd_ablate(a: &RunArgs) -> CliResult<()> {
    let mut cfg: AblateConfig = io::read_json(&a.config).map_err(|e| match e {
        CliError::Data(m) => CliError::Usage(m),
        other => other,
    })?;
    if a.workers.is_some() {
        cfg.workers = a.workers;
    }
    if let Some(seed) = a.seed {
        cfg.master_seed = seed;
    }
    let (rows, records) = cfg.run(&config_dir(&a.config))?;
    create_dir(&a.out)?;
    report::write_csv(&a.out.join("ablation.csv"), &rows)?;
    report::write_jsonl(&a.out.join("records.jsonl"), &records)?;
    let mut out = std::io::stdout().lock();
    for r in &rows {
        let _ = writeln!(
            out,
            "{}={:<10} {:<10} nrmse {:>8} auroc {:>8}",
            r.axis,
            r.value,
            r.method,
            r.nrmse_mean.map_or("-".into(), |v| format!("{v:.4}")),
            r.auroc_mean.map_or("-".into(), |v| format!("{v:.4}"))
        );
    }
    Ok(())
}

pub fn cmd_report(a: &ReportArgs) -> CliResult<()> {
    let records: Vec<bench::MetricsReport> = report::read_jsonl(&a.data)?;
    let summary = report::summarize(&records);
    report::write_csv(&a.out, &summary)?;
    let _ = report::print_summary(&summary, &mut std::io::stdout().lock());
    Ok(())
}

pub fn cmd_generate(a: &GenerateArgs) -> CliResult<()> {
    let kind = match a.kind {
        KindArg::RankOne => SyntheticKind::RankOne { noise: a.noise },
        KindArg::Linear => SyntheticKind::Linear { rank: a.rank },
        KindArg::CorrelatedGaussian => SyntheticKind::CorrelatedGaussian { rho: a.rho },
        KindArg::LogisticCategorical => {
            SyntheticKind::LogisticCategorical { categorical: a.categorical, categories: a.categories }
        }
        KindArg::LetterLike => SyntheticKind::LetterLike,
    };
    let table = SyntheticSpec { kind, rows: a.rows, cols: a.cols, seed: Some(a.seed) }.generate(a.seed)?;
    io::write_table(&a.out, table.schema(), table.values())?;
    io::write_schema(&io::with_suffix(&a.out, ".schema.json"), table.schema())
}
