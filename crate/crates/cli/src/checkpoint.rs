//! Model checkpoints.
//!
//! Layout: the 8-byte magic `TABINRCK`, a little-endian `u64` header length,
//! a JSON header, then every parameter as little-endian `f64` in the order
//! (weights, bias) per layer, row embeddings, feature embeddings. The header
//! carries a SHA-256 of the parameter bytes and two lineage hashes: one of the
//! resolved schema and one of the (masked) training data.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tabinr_core::nn::{Activation, Dense, MlpNet};
use tabinr_core::table::Scaling;
use tabinr_core::{EncodedTable, TabInrModel, TableSchema, TrainConfig};

use crate::error::{CliError, CliResult};
use crate::io::SchemaFile;

pub const MAGIC: &[u8; 8] = b"TABINRCK";
pub const VERSION: &str = "tabinr-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lineage {
    pub schema_sha256: String,
    pub data_sha256: String,
    pub n_rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    version: String,
    schema: TableSchema,
    /// How the training file was read; reused for new rows.
    source: SchemaFile,
    scaling: Option<Scaling>,
    activation: Activation,
    dropout: f64,
    latent_dim: usize,
    /// `(inputs, outputs)` per layer.
    layers: Vec<(usize, usize)>,
    n_rows: usize,
    train_config: Option<TrainConfig>,
    lineage: Lineage,
    payload_sha256: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: TabInrModel,
    pub source: SchemaFile,
    pub train_config: Option<TrainConfig>,
    pub lineage: Lineage,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn schema_hash(schema: &TableSchema) -> String {
    let json = serde_json::to_string(schema).expect("schema serializes");
    hex(&Sha256::digest(json.as_bytes()))
}

/// Hash of the schema, the observed pattern and the observed values of an
/// unscaled table.
pub fn data_hash(table: &EncodedTable) -> String {
    let mut h = Sha256::new();
    h.update(schema_hash(table.schema()).as_bytes());
    h.update((table.n_rows() as u64).to_le_bytes());
    for (&v, &o) in table.values().iter().zip(table.observed()) {
        h.update([o as u8]);
        h.update(if o { v.to_le_bytes() } else { [0; 8] });
    }
    hex(&h.finalize())
}

pub fn lineage_of(table: &EncodedTable) -> Lineage {
    Lineage { schema_sha256: schema_hash(table.schema()), data_sha256: data_hash(table), n_rows: table.n_rows() }
}

fn params(model: &TabInrModel) -> impl Iterator<Item = f64> + '_ {
    model
        .net
        .layers()
        .iter()
        .flat_map(|l| l.weight.iter().chain(&l.bias))
        .chain(&model.row_embeddings)
        .chain(&model.feature_embeddings)
        .copied()
}

pub fn save(path: &Path, ckpt: &Checkpoint) -> CliResult<()> {
    let model = &ckpt.model;
    let payload: Vec<u8> = params(model).flat_map(f64::to_le_bytes).collect();
    let header = Header {
        version: VERSION.into(),
        schema: model.schema.clone(),
        source: ckpt.source.clone(),
        scaling: model.scaling.clone(),
        activation: model.net.activation(),
        dropout: model.net.dropout(),
        latent_dim: model.latent_dim,
        layers: model.net.layers().iter().map(|l| (l.inputs, l.outputs)).collect(),
        n_rows: model.n_rows(),
        train_config: ckpt.train_config.clone(),
        lineage: ckpt.lineage.clone(),
        payload_sha256: hex(&Sha256::digest(&payload)),
    };
    let json = serde_json::to_vec(&header).map_err(|e| CliError::data(e.to_string()))?;
    let mut bytes = Vec::with_capacity(16 + json.len() + payload.len());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&json);
    bytes.extend_from_slice(&payload);
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn load(path: &Path) -> CliResult<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let bad = |msg: &str| CliError::Checkpoint { path: path.to_path_buf(), msg: msg.into() };
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("not a tabinr checkpoint (bad magic)"));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if header_len > body.len() {
        return Err(bad("truncated header"));
    }
    let header: Header =
        serde_json::from_slice(&body[..header_len]).map_err(|e| bad(&format!("unreadable header: {e}")))?;
    if header.version != VERSION {
        return Err(bad(&format!("unsupported version `{}`, expected `{VERSION}`", header.version)));
    }
    let payload = &body[header_len..];
    let d = header.latent_dim;
    let n_cols = tabinr_core::table::Layout::from_schema(&header.schema).n_cols();
    let expected: usize = header.layers.iter().map(|&(i, o)| i * o + o).sum::<usize>() + (header.n_rows + n_cols) * d;
    if payload.len() != expected * 8 {
        return Err(bad(&format!("payload has {} bytes, expected {}", payload.len(), expected * 8)));
    }
    if hex(&Sha256::digest(payload)) != header.payload_sha256 {
        return Err(bad("payload checksum mismatch"));
    }
    let mut values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |k: usize| values.by_ref().take(k).collect::<Vec<f64>>();
    let layers = header
        .layers
        .iter()
        .map(|&(inputs, outputs)| Dense { inputs, outputs, weight: take(inputs * outputs), bias: take(outputs) })
        .collect();
    let net = MlpNet::from_layers(layers, header.activation, header.dropout).map_err(|e| bad(&e.to_string()))?;
    let rows = take(header.n_rows * d);
    let features = take(n_cols * d);
    let model =
        TabInrModel::new(net, rows, features, d, header.schema, header.scaling).map_err(|e| bad(&e.to_string()))?;
    Ok(Checkpoint { model, source: header.source, train_config: header.train_config, lineage: header.lineage })
}

impl Checkpoint {
    /// Errors unless `table` is exactly the (masked, unscaled) training table.
    pub fn check_lineage(&self, table: &EncodedTable) -> CliResult<()> {
        let found = lineage_of(table);
        if found.schema_sha256 != self.lineage.schema_sha256 {
            return Err(CliError::data("lineage mismatch: data schema differs from the checkpoint's"));
        }
        if found.n_rows != self.lineage.n_rows || found.data_sha256 != self.lineage.data_sha256 {
            return Err(CliError::data(
                "lineage mismatch: data (after masking) is not the table this checkpoint was trained on",
            ));
        }
        Ok(())
    }

    pub fn check_schema(&self, table: &EncodedTable) -> CliResult<()> {
        if schema_hash(table.schema()) != self.lineage.schema_sha256 {
            return Err(CliError::data("lineage mismatch: data schema differs from the checkpoint's"));
        }
        Ok(())
    }
}
