//! Built-in schemas for the UCI benchmark tables and synthetic generators.
//!
//! Files are not downloaded. Each preset describes the file as it is
//! distributed (delimiter, header, missing-value token); spreadsheets
//! (concrete, raisin) are expected exported to comma-separated text with a
//! header row.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tabinr_core::rng;
use tabinr_core::synthetic;
use tabinr_core::EncodedTable;

use crate::error::{CliError, CliResult};
use crate::io::{self, Delimiter, SchemaEntry, SchemaFile, TextFormat};

pub const PRESETS: [&str; 12] = [
    "housing", "climate", "concrete", "diabetes", "obesity", "credit", "wine", "raisin", "spam", "bike", "letter",
    "yacht",
];

fn fmt(delimiter: Delimiter, header: bool) -> TextFormat {
    TextFormat { delimiter, header, check_header: false, ..TextFormat::default() }
}

fn numeric(names: &[&str]) -> Vec<SchemaEntry> {
    names.iter().map(|n| SchemaEntry::numeric(n)).collect()
}

/// Schema for one of [`PRESETS`].
pub fn preset(name: &str) -> Option<SchemaFile> {
    use Delimiter::*;
    let (format, columns) = match name {
        "housing" => (
            fmt(Comma, true),
            numeric(&[
                "MedInc",
                "HouseAge",
                "AveRooms",
                "AveBedrms",
                "Population",
                "AveOccup",
                "Latitude",
                "Longitude",
                "MedHouseVal",
            ]),
        ),
        "climate" => {
            let mut cols = vec![SchemaEntry::skip("Study"), SchemaEntry::skip("Run")];
            cols.extend(numeric(&[
                "vconst_corr",
                "vconst_2",
                "vconst_3",
                "vconst_4",
                "vconst_5",
                "vconst_7",
                "ah_corr",
                "ah_bolus",
                "slm_corr",
                "efficiency_factor",
                "tidal_mix_max",
                "vertical_decay_scale",
                "convect_corr",
                "bckgrnd_vdc1",
                "bckgrnd_vdc_ban",
                "bckgrnd_vdc_eq",
                "bckgrnd_vdc_psim",
                "Prandtl",
            ]));
            cols.push(SchemaEntry::categorical("outcome"));
            (fmt(Whitespace, true), cols)
        }
        "concrete" => (
            fmt(Comma, true),
            numeric(&[
                "cement",
                "slag",
                "fly_ash",
                "water",
                "superplasticizer",
                "coarse_agg",
                "fine_agg",
                "age",
                "strength",
            ]),
        ),
        "diabetes" => {
            let mut cols = numeric(&["AGE"]);
            cols.push(SchemaEntry::categorical("SEX"));
            cols.extend(numeric(&["BMI", "BP", "S1", "S2", "S3", "S4", "S5", "S6", "Y"]));
            (fmt(Tab, true), cols)
        }
        "obesity" => {
            let c = SchemaEntry::categorical;
            let n = SchemaEntry::numeric;
            let cols = vec![
                c("Gender"),
                n("Age"),
                n("Height"),
                n("Weight"),
                c("family_history_with_overweight"),
                c("FAVC"),
                n("FCVC"),
                n("NCP"),
                c("CAEC"),
                c("SMOKE"),
                n("CH2O"),
                c("SCC"),
                n("FAF"),
                n("TUE"),
                c("CALC"),
                c("MTRANS"),
                c("NObeyesdad"),
            ];
            (fmt(Comma, true), cols)
        }
        "credit" => {
            let numeric_cols = [2, 3, 8, 11, 14, 15];
            let cols = (1..=16)
                .map(|k| {
                    let name = format!("A{k}");
                    if numeric_cols.contains(&k) {
                        SchemaEntry::numeric(&name)
                    } else {
                        SchemaEntry::categorical(&name)
                    }
                })
                .collect();
            (fmt(Comma, false), cols)
        }
        "wine" => {
            let mut cols = numeric(&[
                "fixed_acidity",
                "volatile_acidity",
                "citric_acid",
                "residual_sugar",
                "chlorides",
                "free_sulfur_dioxide",
                "total_sulfur_dioxide",
                "density",
                "pH",
                "sulphates",
                "alcohol",
            ]);
            cols.push(SchemaEntry::categorical("quality"));
            (fmt(Semicolon, true), cols)
        }
        "raisin" => {
            let mut cols = numeric(&[
                "Area",
                "MajorAxisLength",
                "MinorAxisLength",
                "Eccentricity",
                "ConvexArea",
                "Extent",
                "Perimeter",
            ]);
            cols.push(SchemaEntry::categorical("Class"));
            (fmt(Comma, true), cols)
        }
        "spam" => {
            let words = [
                "make",
                "address",
                "all",
                "3d",
                "our",
                "over",
                "remove",
                "internet",
                "order",
                "mail",
                "receive",
                "will",
                "people",
                "report",
                "addresses",
                "free",
                "business",
                "email",
                "you",
                "credit",
                "your",
                "font",
                "000",
                "money",
                "hp",
                "hpl",
                "george",
                "650",
                "lab",
                "labs",
                "telnet",
                "857",
                "data",
                "415",
                "85",
                "technology",
                "1999",
                "parts",
                "pm",
                "direct",
                "cs",
                "meeting",
                "original",
                "project",
                "re",
                "edu",
                "table",
                "conference",
            ];
            let chars = ["semicolon", "paren", "bracket", "bang", "dollar", "hash"];
            let mut cols: Vec<SchemaEntry> =
                words.iter().map(|w| SchemaEntry::numeric(&format!("word_freq_{w}"))).collect();
            cols.extend(chars.iter().map(|c| SchemaEntry::numeric(&format!("char_freq_{c}"))));
            cols.extend(numeric(&[
                "capital_run_length_average",
                "capital_run_length_longest",
                "capital_run_length_total",
            ]));
            cols.push(SchemaEntry::categorical("spam"));
            (fmt(Comma, false), cols)
        }
        "bike" => {
            let mut cols = vec![SchemaEntry::skip("Date")];
            cols.extend(numeric(&[
                "rented_bike_count",
                "hour",
                "temperature",
                "humidity",
                "wind_speed",
                "visibility",
                "dew_point",
                "solar_radiation",
                "rainfall",
                "snowfall",
            ]));
            cols.extend(["seasons", "holiday", "functioning_day"].map(SchemaEntry::categorical));
            (fmt(Comma, true), cols)
        }
        "letter" => {
            let mut cols = vec![SchemaEntry::categorical("lettr")];
            cols.extend(numeric(&[
                "x-box", "y-box", "width", "high", "onpix", "x-bar", "y-bar", "x2bar", "y2bar", "xybar", "x2ybr",
                "xy2br", "x-ege", "xegvy", "y-ege", "yegvx",
            ]));
            (fmt(Comma, false), cols)
        }
        "yacht" => (
            fmt(Whitespace, false),
            numeric(&[
                "lcb",
                "prismatic",
                "length_displacement",
                "beam_draught",
                "length_beam",
                "froude",
                "resistance",
            ]),
        ),
        _ => return None,
    };
    Some(SchemaFile { format, columns })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticKind {
    RankOne {
        #[serde(default)]
        noise: f64,
    },
    Linear {
        rank: usize,
    },
    CorrelatedGaussian {
        rho: f64,
    },
    LogisticCategorical {
        categorical: usize,
        categories: usize,
    },
    /// Letter-recognition stand-in; `cols` is ignored.
    LetterLike,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(flatten)]
    pub kind: SyntheticKind,
    pub rows: usize,
    #[serde(default = "default_cols")]
    pub cols: usize,
    /// Defaults to a value derived from the benchmark master seed and the
    /// dataset name.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_cols() -> usize {
    8
}

impl SyntheticSpec {
    pub fn generate(&self, seed: u64) -> CliResult<EncodedTable> {
        let (n, m) = (self.rows, self.cols);
        if n == 0 || (m == 0 && self.kind != SyntheticKind::LetterLike) {
            return Err(CliError::Usage("synthetic datasets need rows > 0 and cols > 0".into()));
        }
        Ok(match self.kind {
            SyntheticKind::RankOne { noise } => synthetic::rank_one(n, m, noise, seed),
            SyntheticKind::Linear { rank } => synthetic::linear(n, m, rank.max(1), seed),
            SyntheticKind::CorrelatedGaussian { rho } => {
                if !(0.0..1.0).contains(&rho) {
                    return Err(CliError::Usage("rho must lie in [0, 1)".into()));
                }
                synthetic::correlated_gaussian(n, m, rho, seed)
            }
            SyntheticKind::LogisticCategorical { categorical, categories } => {
                if categories < 2 {
                    return Err(CliError::Usage("categorical columns need at least 2 categories".into()));
                }
                synthetic::logistic_categorical(n, m, categorical, categories, seed)
            }
            SyntheticKind::LetterLike => synthetic::letter_like(n, seed),
        })
    }
}

/// One benchmark dataset: a file (with an explicit schema, a preset, or
/// inference) or a synthetic generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    /// Built-in schema; defaults to `name` when that is a preset name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    /// Seeded subsample of at most this many rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rows: Option<usize>,
    /// Keep only the first `max_features` features.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_features: Option<usize>,
}

impl DatasetSpec {
    pub fn synthetic(name: &str, spec: SyntheticSpec) -> Self {
        Self {
            name: name.into(),
            path: None,
            schema: None,
            preset: None,
            synthetic: Some(spec),
            max_rows: None,
            max_features: None,
        }
    }

    /// Loads the full table. Relative paths resolve against `base`.
    pub fn load(&self, base: &Path, master_seed: u64) -> CliResult<EncodedTable> {
        let name_key = name_key(&self.name);
        let table = match (&self.path, &self.synthetic) {
            (Some(path), None) => {
                let source = match (&self.schema, &self.preset) {
                    (Some(s), _) => Some(io::read_json::<SchemaFile>(&base.join(s))?),
                    (None, Some(p)) => Some(preset(p).ok_or_else(|| CliError::Usage(format!("unknown preset `{p}`")))?),
                    (None, None) => preset(&self.name),
                };
                io::load_table(&base.join(path), source.as_ref())?.table
            }
            (None, Some(syn)) => syn.generate(syn.seed.unwrap_or_else(|| rng::derive(master_seed, &[name_key])))?,
            _ => {
                return Err(CliError::Usage(format!(
                    "dataset `{}` needs exactly one of `path` and `synthetic`",
                    self.name
                )))
            }
        };
        self.restrict(table, rng::derive(master_seed, &[name_key, 1]))
    }

    fn restrict(&self, table: EncodedTable, seed: u64) -> CliResult<EncodedTable> {
        let n = table.n_rows();
        let m = table.n_features();
        let mut rows: Vec<usize> = (0..n).collect();
        if let Some(k) = self.max_rows.filter(|&k| k < n) {
            if k == 0 {
                return Err(CliError::Usage("max_rows must be positive".into()));
            }
            rows.sort_by_key(|&i| rng::derive(seed, &[i as u64]));
            rows.truncate(k);
            rows.sort_unstable();
        }
        let features: Vec<usize> = (0..self.max_features.map_or(m, |k| k.min(m))).collect();
        if features.is_empty() {
            return Err(CliError::Usage("max_features must be positive".into()));
        }
        if rows.len() == n && features.len() == m {
            return Ok(table);
        }
        Ok(table.select(&rows, &features)?)
    }
}

/// Stable 64-bit key of a dataset name: the first eight bytes of its SHA-256.
pub fn name_key(name: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(name.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
