use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::EvalError;
use crate::align::{dtw_multichannel, sw_dtw_multichannel, DtwConfig};
use crate::pairs::{pair_inputs, Pairing, PreparedSample};
use crate::rnn::SiameseModel;

/// One-to-one comparison of an enrolled sample with a test sample. Higher
/// scores mean "more likely the same user".
pub trait PairScorer: Sync {
    fn name(&self) -> String;
    fn score(&self, enrolled: &PreparedSample, test: &PreparedSample) -> Result<f64, EvalError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerKind {
    Dtw,
    SwDtw,
    Rnn,
    TaRnn,
}

impl ScorerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScorerKind::Dtw => "dtw",
            ScorerKind::SwDtw => "sw-dtw",
            ScorerKind::Rnn => "rnn",
            ScorerKind::TaRnn => "ta-rnn",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, ScorerKind::Rnn | ScorerKind::TaRnn)
    }

    pub const ALL: [ScorerKind; 4] = [
        ScorerKind::Dtw,
        ScorerKind::SwDtw,
        ScorerKind::Rnn,
        ScorerKind::TaRnn,
    ];
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScorerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "dtw" => Ok(ScorerKind::Dtw),
            "sw-dtw" | "swdtw" => Ok(ScorerKind::SwDtw),
            "rnn" => Ok(ScorerKind::Rnn),
            "ta-rnn" | "tarnn" => Ok(ScorerKind::TaRnn),
            other => Err(format!(
                "unknown scorer {other:?} (dtw, sw-dtw, rnn, ta-rnn)"
            )),
        }
    }
}

/// The built-in scorers.
#[derive(Debug, Clone)]
pub enum Scorer {
    /// Negated normalized DTW distance.
    Dtw(DtwConfig),
    /// Negated normalized SW-DTW distance.
    SwDtw(DtwConfig),
    /// Siamese network on linearly resampled inputs.
    Rnn(Arc<SiameseModel>),
    /// Siamese network on SW-DTW aligned inputs.
    TaRnn {
        model: Arc<SiameseModel>,
        dtw: DtwConfig,
    },
    /// 1 when both samples belong to the same user, else 0. A test stub.
    LabelOracle,
}

impl Scorer {
    /// Scorer of `kind` with default alignment settings; network kinds need
    /// a model.
    pub fn build(kind: ScorerKind, model: Option<Arc<SiameseModel>>) -> Result<Self, EvalError> {
        let need = || EvalError::Config(format!("scorer {kind} needs a trained model checkpoint"));
        Ok(match kind {
            ScorerKind::Dtw => Scorer::Dtw(DtwConfig::plain()),
            ScorerKind::SwDtw => Scorer::SwDtw(DtwConfig::default()),
            ScorerKind::Rnn => Scorer::Rnn(model.ok_or_else(need)?),
            ScorerKind::TaRnn => Scorer::TaRnn {
                model: model.ok_or_else(need)?,
                dtw: DtwConfig::default(),
            },
        })
    }

    pub fn score_sets(
        &self,
        enrolled: &crate::signal::TimeFunctionSet,
        test: &crate::signal::TimeFunctionSet,
    ) -> Result<f64, EvalError> {
        match self {
            Scorer::Dtw(cfg) => Ok(-dtw_multichannel(enrolled, test, cfg)?.normalized_distance),
            Scorer::SwDtw(cfg) => {
                Ok(-sw_dtw_multichannel(enrolled, test, cfg)?.normalized_distance)
            }
            Scorer::Rnn(model) => {
                let (a, b) = pair_inputs(enrolled, test, &Pairing::Linear)?;
                Ok(model.score(&a, &b)?)
            }
            Scorer::TaRnn { model, dtw } => {
                let (a, b) = pair_inputs(enrolled, test, &Pairing::Aligned { dtw: dtw.clone() })?;
                Ok(model.score(&a, &b)?)
            }
            Scorer::LabelOracle => Err(EvalError::Config(
                "the label oracle needs sample identities".into(),
            )),
        }
    }
}

impl PairScorer for Scorer {
    fn name(&self) -> String {
        match self {
            Scorer::Dtw(_) => "dtw",
            Scorer::SwDtw(_) => "sw-dtw",
            Scorer::Rnn(_) => "rnn",
            Scorer::TaRnn { .. } => "ta-rnn",
            Scorer::LabelOracle => "label-oracle",
        }
        .into()
    }

    fn score(&self, enrolled: &PreparedSample, test: &PreparedSample) -> Result<f64, EvalError> {
        match self {
            Scorer::LabelOracle => Ok(if enrolled.key.user_id == test.key.user_id {
                1.0
            } else {
                0.0
            }),
            _ => self.score_sets(&enrolled.tf, &test.tf),
        }
    }
}
