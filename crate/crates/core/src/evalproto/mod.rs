//! Evaluation protocol: Z-vs-1 scoring, sum-rule fusion, EER and DET.
//!
//! Every scorer follows one polarity: higher means more genuine. Distance
//! based scorers return the negated normalized distance.

mod metrics;
mod protocol;
mod scorer;

pub use metrics::{
    compute_eer, det_curve, fuse_password, rank_by_eer, score_zvs1, DetPoint, EerPoint,
};
pub use protocol::{
    intra_user_schemes, rank_characters, run_protocol, template_update_schemes, CharacterResult,
    FusedResult, ImpostorPick, ProtocolConfig, ProtocolReport, ReportMetadata, ScoreRecord,
    SessionScheme, REPORT_SCHEMA_VERSION,
};
pub use scorer::{PairScorer, Scorer, ScorerKind};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty score list")]
    EmptyScores,
    #[error("non-finite score")]
    NonFiniteScore,
    #[error("empty enrollment set")]
    EmptyEnrollment,
    #[error("invalid protocol configuration: {0}")]
    Config(String),
    #[error("users lack the sessions or samples the scheme needs: {users:?} ({})", problems.join("; "))]
    MissingSessions {
        users: Vec<String>,
        problems: Vec<String>,
    },
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error(transparent)]
    Pair(#[from] crate::pairs::PairError),
    #[error(transparent)]
    Align(#[from] crate::align::AlignError),
    #[error(transparent)]
    Rnn(#[from] crate::rnn::RnnError),
}
