//! Drawn-password biometrics.
//!
//! Each character of a password is drawn on a touchscreen. The drawing is
//! turned into 21 time functions ([`signal`]), pre-aligned against a
//! reference drawing with (sliding-window) dynamic time warping ([`align`]),
//! and scored either by the DTW distance itself or by a Siamese
//! bidirectional-LSTM network ([`rnn`]). [`evalproto`] implements the
//! enrollment/test protocol, score fusion and error-rate estimation, and
//! [`data`] handles datasets, splits and a synthetic benchmark generator.
//!
//! # Module Structure
//!
//! - `signal`: stroke samples, resampling, time-function extraction
//! - `align`: DTW / SW-DTW distances, warping paths, path application
//! - `rnn`: LSTM cells, bidirectional layers, Siamese model, training, checkpoints
//! - `evalproto`: scorers, Z-vs-1 scoring, fusion, EER/DET, protocol runner
//! - `data`: dataset container, canonical format, importers, splits, synthesis
//! - `pairs`: turning labeled samples into network training pairs

pub mod align;
pub mod data;
pub mod evalproto;
pub mod pairs;
pub mod rnn;
pub mod signal;
pub mod util;

pub use align::{dtw, dtw_multichannel, sw_dtw, sw_dtw_multichannel, AlignmentPath, DtwConfig};
pub use data::{Dataset, SynthConfig};
pub use evalproto::{compute_eer, det_curve, ProtocolConfig, ProtocolReport, Scorer};
pub use rnn::{SiameseModel, TrainConfig};
pub use signal::{StrokeSample, TimeFunctionSet};
