//! Condition-blinded rating packets and the statistics computed from human
//! ratings: dimension means, flag rate, ordinal Krippendorff's alpha, and
//! paired condition comparisons.

mod packets;
mod ratings;
mod stats;

pub use packets::{build_packets, PacketDoc, PacketKey, KeyEntry, TopicPacket};
pub use ratings::{read_ratings, Dimension, Rating, RawRating, Scores};
pub use stats::{
    assess, condition_topic_scores, dimension_mean, flag_rate, krippendorff_alpha_ordinal,
    krippendorff_alpha_ordinal_table, overall_mean, paired_comparison, AssessmentReport, ConditionSummary,
    PairedMethod, PairedResult,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AssessmentError {
    #[error("sample_k = {sample_k} exceeds the smallest topic count {min_k}")]
    SampleTooLarge { sample_k: usize, min_k: usize },
    #[error("no conditions to sample from")]
    NoConditions,
    #[error("rating {index}: {message}")]
    InvalidRating { index: usize, message: String },
    #[error("no ratings for {0}")]
    Empty(String),
    #[error("need at least {need} {what}, got {got}")]
    TooFew { what: &'static str, need: usize, got: usize },
    #[error("paired samples differ in length ({a} vs {b})")]
    Unpaired { a: usize, b: usize },
    #[error("packet `{0}` is not in the key")]
    UnknownPacket(String),
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

impl AssessmentError {
    pub fn is_input_error(&self) -> bool {
        true
    }
}
