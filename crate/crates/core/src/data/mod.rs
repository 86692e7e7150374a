//! Datasets of labeled stroke samples.

mod dataset;
pub mod format;
pub mod import;
mod split;
pub mod synth;

pub use dataset::{Dataset, Provenance, SampleKey};
pub use format::{
    export_dataset, load_dataset, read_canonical, write_canonical, DATASET_FORMAT, DATASET_VERSION,
};
pub use import::{
    import_dataset, DelimitedSpec, FormatSpec, ImportReport, ImportSummary, InputDigest,
    Quarantined, StrokeRule,
};
pub use split::{make_split, Split, SplitSpec};
pub use synth::{generate_synthetic, generate_synthetic_with_truth, SynthConfig, SynthTruth};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unmappable schema: {0}")]
    Schema(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("duplicate sample key {0}")]
    Duplicate(String),
    #[error("invalid split: {0}")]
    Split(String),
    #[error("invalid synthetic configuration: {0}")]
    Synth(String),
}
