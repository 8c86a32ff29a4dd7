//! Exclusivity and held-out perplexity, both driven by per-topic term counts.

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::descriptor::TopicTermCounts;
use crate::induction::Centroids;
use crate::matrix::squared_distance;

use super::MetricError;

/// Mean over topics of the mean share of each top term's total frequency that
/// falls inside its topic.
pub fn exclusivity_per_topic(lists: &[Vec<u32>], counts: &TopicTermCounts) -> Result<Vec<f64>, MetricError> {
    if lists.len() != counts.k() {
        return Err(MetricError::TopicCount {
            lists: lists.len(),
            topics: counts.k(),
        });
    }
    Ok(lists
        .iter()
        .enumerate()
        .map(|(k, list)| {
            if list.is_empty() {
                return 0.0;
            }
            let shares: f64 = list
                .iter()
                .map(|&w| {
                    let total = counts.total_tf(w);
                    if total == 0 {
                        0.0
                    } else {
                        counts.tf(w, k) as f64 / total as f64
                    }
                })
                .sum();
            shares / list.len() as f64
        })
        .collect())
}

pub fn exclusivity(lists: &[Vec<u32>], counts: &TopicTermCounts) -> Result<f64, MetricError> {
    let per = exclusivity_per_topic(lists, counts)?;
    if per.is_empty() {
        return Err(MetricError::EmptyInput("keyword lists"));
    }
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// A held-out document: its tokens and its embedding.
#[derive(Debug, Clone, Copy)]
pub struct HoldoutDoc<'a> {
    pub tokens: &'a [String],
    pub embedding: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerplexityReport {
    pub ppl: f64,
    pub scored_tokens: u64,
    pub skipped_tokens: u64,
}

/// Topic posterior `softmax(-||z - mu_k||^2 / temperature)`. A zero temperature
/// collapses onto the nearest centroid.
pub fn topic_posterior(z: &[f64], centroids: &Centroids, temperature: f64) -> Vec<f64> {
    let d2: Vec<f64> = centroids.matrix.iter_rows().map(|c| squared_distance(z, c)).collect();
    let k = d2.len();
    if temperature <= 0.0 {
        let mut best = 0;
        for (i, &d) in d2.iter().enumerate() {
            if d < d2[best] {
                best = i;
            }
        }
        let mut out = vec![0.0; k];
        out[best] = 1.0;
        return out;
    }
    let logits: Vec<f64> = d2.iter().map(|d| -d / temperature).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Perplexity of held-out tokens under the topic-mixture unigram model
/// `p(w|d) = sum_k p(k|d) (tf(w,k) + s) / (sum_w' tf(w',k) + s|V|)`.
/// Tokens outside the vocabulary are skipped and counted.
pub fn perplexity(
    holdout: &[HoldoutDoc<'_>],
    centroids: &Centroids,
    counts: &TopicTermCounts,
    vocab: &Vocabulary,
    temperature: f64,
    smoothing: f64,
) -> Result<PerplexityReport, MetricError> {
    if holdout.is_empty() {
        return Err(MetricError::EmptyInput("holdout documents"));
    }
    if smoothing < 0.0 {
        return Err(MetricError::Smoothing(smoothing));
    }
    if counts.k() != centroids.k() {
        return Err(MetricError::TopicCount {
            lists: centroids.k(),
            topics: counts.k(),
        });
    }
    let v = vocab.len() as f64;
    let denominators: Vec<f64> = (0..counts.k())
        .map(|k| counts.topic_total(k) as f64 + smoothing * v)
        .collect();

    // Running mean keeps a constant log-probability exact.
    let mut mean_log = 0.0;
    let mut scored = 0u64;
    let mut skipped = 0u64;
    for doc in holdout {
        if doc.embedding.len() != centroids.dim() {
            return Err(MetricError::Dimension {
                expected: centroids.dim(),
                actual: doc.embedding.len(),
            });
        }
        let post = topic_posterior(doc.embedding, centroids, temperature);
        for tok in doc.tokens {
            let Some(w) = vocab.id(tok) else {
                skipped += 1;
                continue;
            };
            let p: f64 = post
                .iter()
                .enumerate()
                .filter(|(_, &pk)| pk > 0.0)
                .map(|(k, &pk)| pk * (counts.tf(w, k) as f64 + smoothing) / denominators[k])
                .sum();
            scored += 1;
            mean_log += (p.ln() - mean_log) / scored as f64;
        }
    }
    if scored == 0 {
        return Err(MetricError::EmptyInput("scorable holdout tokens"));
    }
    Ok(PerplexityReport {
        ppl: (-mean_log).exp(),
        scored_tokens: scored,
        skipped_tokens: skipped,
    })
}
