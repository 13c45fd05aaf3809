//! Dataset CSV, run configuration, tree JSON, DOT and diagnostics tables.

mod config;
mod data;
mod dot;
mod model;
mod tables;

use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::DataError;
use crate::tree::TreeError;

pub use config::{RunConfig, Transform, KEYS as CONFIG_KEYS};
pub use data::{load_csv, read_csv, write_dataset, write_predictions, Schema};
pub use dot::export_dot;
pub use model::{load_tree, read_tree, save_tree, write_tree, ModelMeta, FORMAT_NAME, FORMAT_VERSION};
pub use tables::{
    read_curves, write_contributions, write_curves, write_diagnostics, write_importance, CurveRow,
};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Stream(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("column '{0}' not found in the header")]
    MissingColumn(String),
    #[error("the file has no data rows")]
    EmptyFile,
    #[error("{count} unparseable numeric cells; first: {examples}")]
    BadNumbers { count: usize, examples: String },
    #[error("row {row}: tag '{value}' is neither 'train' nor 'test'")]
    BadTag { row: usize, value: String },
    #[error("unsupported model format {found} (expected {expected})")]
    Version { found: String, expected: String },
    #[error("schema drift: {0}")]
    SchemaDrift(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid setting '{key}': {message}")]
    Setting { key: String, message: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

impl IoError {
    pub fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::File {
            path: path.into(),
            source,
        }
    }
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:?}")
}
