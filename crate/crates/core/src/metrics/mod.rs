//! Automated topic-quality metrics and the composite refinement score.
//!
//! Coherence statistics (NPMI, UMass) use document co-occurrence over the
//! modeled training documents; C_V uses boolean sliding windows over the same
//! token streams. Perplexity is computed on the held-out split under a
//! topic-mixture unigram model whose topic posterior comes from centroid
//! distances.

mod coherence;
mod diversity;
mod fit;
mod score;

pub use coherence::{
    cv_coherence, cv_per_topic, npmi_coherence, npmi_from_probabilities, npmi_per_topic, sliding_windows,
    umass_coherence, umass_per_topic, CooccurrenceTable,
};
pub use diversity::{inverted_rbo, rbo_ext, topic_diversity};
pub use fit::{exclusivity, exclusivity_per_topic, perplexity, topic_posterior, HoldoutDoc, PerplexityReport};
pub use score::{adjusted_rand_index, quality_score, ScoreWeights};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::descriptor::{TopicDescriptor, TopicTermCounts};
use crate::embedding::AlignedDataset;
use crate::induction::{inertia, Centroids, TopicPartition};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("rbo persistence {0} must lie in (0, 1)")]
    Persistence(f64),
    #[error("term id {0} missing from co-occurrence table")]
    MissingTerm(u32),
    #[error("term id {0} has zero document frequency")]
    ZeroFrequency(u32),
    #[error("window must be at least 1")]
    Window,
    #[error("smoothing {0} must be non-negative")]
    Smoothing(f64),
    #[error("{lists} keyword lists for {topics} topics")]
    TopicCount { lists: usize, topics: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("score weights must be non-negative and sum to 1")]
    Weights,
    #[error("keyword `{0}` is not in the vocabulary")]
    UnknownKeyword(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub top_n: usize,
    pub rbo_persistence: f64,
    pub npmi_epsilon: f64,
    pub cv_window: usize,
    /// Posterior temperature for perplexity; `None` uses the mean squared
    /// distance of training documents to their centroids.
    pub temperature: Option<f64>,
    pub smoothing: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            top_n: 10,
            rbo_persistence: 0.9,
            npmi_epsilon: 1e-12,
            cv_window: 110,
            temperature: None,
            smoothing: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerTopicMetrics {
    pub npmi: Vec<Option<f64>>,
    pub umass: Vec<f64>,
    pub cv: Vec<f64>,
    pub excl: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub td: f64,
    pub irbo: f64,
    pub npmi: f64,
    pub umass: f64,
    pub cv: f64,
    pub excl: f64,
    pub ppl: f64,
    pub per_topic: PerTopicMetrics,
    pub perplexity: PerplexityReport,
    /// Configuration with the temperature resolved to the value used.
    pub config: MetricConfig,
}

impl MetricReport {
    pub fn summary(&self, score: f64) -> MetricSummary {
        MetricSummary {
            td: self.td,
            irbo: self.irbo,
            npmi: self.npmi,
            umass: self.umass,
            cv: self.cv,
            excl: self.excl,
            ppl: self.ppl,
            score,
        }
    }
}

/// The seven headline metrics plus the composite score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub td: f64,
    pub irbo: f64,
    pub npmi: f64,
    pub umass: f64,
    pub cv: f64,
    pub excl: f64,
    pub ppl: f64,
    pub score: f64,
}

impl MetricSummary {
    pub const NAMES: [&'static str; 7] = ["TD", "iRBO", "NPMI", "UMass", "C_V", "Excl", "PPL"];

    pub fn values(&self) -> [f64; 7] {
        [self.td, self.irbo, self.npmi, self.umass, self.cv, self.excl, self.ppl]
    }
}

/// Everything needed to score one topic state.
#[derive(Debug, Clone, Copy)]
pub struct EvaluationInput<'a> {
    pub corpus: &'a Corpus,
    /// Documents covered by the partition, in partition order.
    pub data: &'a AlignedDataset,
    pub partition: &'a TopicPartition,
    pub centroids: &'a Centroids,
    pub descriptors: &'a [TopicDescriptor],
    pub holdout: &'a AlignedDataset,
}

/// Top-N keyword ids per topic.
pub fn keyword_lists(
    descriptors: &[TopicDescriptor],
    corpus: &Corpus,
    top_n: usize,
) -> Result<Vec<Vec<u32>>, MetricError> {
    descriptors
        .iter()
        .map(|d| {
            d.keyword_terms()
                .take(top_n)
                .map(|t| corpus.vocabulary().id(t).ok_or_else(|| MetricError::UnknownKeyword(t.to_owned())))
                .collect()
        })
        .collect()
}

pub fn evaluate(input: &EvaluationInput<'_>, config: &MetricConfig) -> Result<MetricReport, MetricError> {
    let EvaluationInput {
        corpus,
        data,
        partition,
        centroids,
        descriptors,
        holdout,
    } = *input;
    let lists = keyword_lists(descriptors, corpus, config.top_n)?;
    let streams: Vec<&[u32]> = data
        .doc_index
        .iter()
        .map(|&pos| corpus.documents()[pos].terms.as_slice())
        .collect();
    let terms: Vec<u32> = lists.iter().flatten().copied().collect();
    let table = CooccurrenceTable::build(streams.iter().copied(), &terms);
    let counts = TopicTermCounts::build(partition, &data.doc_index, corpus);

    let npmi_topics = npmi_per_topic(&lists, &table, config.npmi_epsilon)?;
    let umass_topics = umass_per_topic(&lists, &table)?;
    let cv_topics = cv_per_topic(&lists, &streams, config.cv_window, config.npmi_epsilon)?;
    let excl_topics = exclusivity_per_topic(&lists, &counts)?;

    let temperature = match config.temperature {
        Some(t) => t,
        None => inertia(&data.matrix, partition.assignments(), &centroids.matrix) / data.len().max(1) as f64,
    };
    let docs: Vec<HoldoutDoc<'_>> = holdout
        .doc_index
        .iter()
        .enumerate()
        .map(|(row, &pos)| HoldoutDoc {
            tokens: &corpus.documents()[pos].tokens,
            embedding: holdout.matrix.row(row),
        })
        .collect();
    let ppl = perplexity(&docs, centroids, &counts, corpus.vocabulary(), temperature, config.smoothing)?;

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    Ok(MetricReport {
        td: topic_diversity(&lists)?,
        irbo: inverted_rbo(&lists, config.rbo_persistence)?,
        npmi: coherence::mean_defined(&npmi_topics),
        umass: mean(&umass_topics),
        cv: mean(&cv_topics),
        excl: mean(&excl_topics),
        ppl: ppl.ppl,
        per_topic: PerTopicMetrics {
            npmi: npmi_topics,
            umass: umass_topics,
            cv: cv_topics,
            excl: excl_topics,
        },
        perplexity: ppl,
        config: MetricConfig {
            temperature: Some(temperature),
            ..config.clone()
        },
    })
}
