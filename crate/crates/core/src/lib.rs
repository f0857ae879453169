//! Tabular imputation with an implicit neural representation.
//!
//! A table is modelled as a function `f(row_embedding, feature_embedding) -> cell`.
//! The shared network and both embedding tables are trained jointly on observed
//! cells only; unseen rows are handled by fitting a fresh row embedding with the
//! network frozen.
//!
//! The crate is `no_std` + `alloc`. The default `std` feature only switches on
//! runtime CPU feature detection in the matrix kernels.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baselines;
pub mod error;
pub mod metrics;
pub mod missingness;
pub mod model;
pub mod nn;
pub mod rng;
pub mod synthetic;
pub mod table;
pub mod train;
pub mod tta;

pub use error::{Error, Result};
pub use model::TabInrModel;
pub use table::{CellMask, CellValue, ColumnKind, ColumnSpec, EncodedTable, TableSchema};
pub use train::{train, TrainConfig, TrainLog};
