//! Document co-occurrence coherence (NPMI, UMass) and the sliding-window C_V.

use std::collections::{HashMap, HashSet};

use crate::matrix::cosine;

use super::MetricError;

/// Document frequencies and pairwise joint document frequencies for a fixed
/// set of terms over a reference collection.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceTable {
    slot: HashMap<u32, usize>,
    df: Vec<u64>,
    joint: Vec<u64>,
    total_docs: u64,
}

impl CooccurrenceTable {
    /// Each reference unit (document or window) counts once per term it contains.
    pub fn build<'a>(units: impl IntoIterator<Item = &'a [u32]>, terms: &[u32]) -> Self {
        let mut slot = HashMap::new();
        for &t in terms {
            let next = slot.len();
            slot.entry(t).or_insert(next);
        }
        let n = slot.len();
        let mut df = vec![0u64; n];
        let mut joint = vec![0u64; n * n];
        let mut total_docs = 0u64;
        let mut present = Vec::new();
        for unit in units {
            total_docs += 1;
            present.clear();
            let mut seen = HashSet::new();
            for t in unit {
                if let Some(&s) = slot.get(t) {
                    if seen.insert(s) {
                        present.push(s);
                    }
                }
            }
            for (x, &a) in present.iter().enumerate() {
                df[a] += 1;
                for &b in &present[x + 1..] {
                    joint[a * n + b] += 1;
                    joint[b * n + a] += 1;
                }
            }
        }
        Self {
            slot,
            df,
            joint,
            total_docs,
        }
    }

    pub fn total_docs(&self) -> u64 {
        self.total_docs
    }

    pub fn contains(&self, term: u32) -> bool {
        self.slot.contains_key(&term)
    }

    pub fn df(&self, term: u32) -> Option<u64> {
        self.slot.get(&term).map(|&s| self.df[s])
    }

    /// Joint count; a term's joint count with itself is its document frequency.
    pub fn joint(&self, a: u32, b: u32) -> Option<u64> {
        let (&sa, &sb) = (self.slot.get(&a)?, self.slot.get(&b)?);
        if sa == sb {
            return Some(self.df[sa]);
        }
        Some(self.joint[sa * self.df.len() + sb])
    }

    fn require(&self, term: u32) -> Result<u64, MetricError> {
        self.df(term).ok_or(MetricError::MissingTerm(term))
    }

    pub fn npmi(&self, a: u32, b: u32, epsilon: f64) -> Result<f64, MetricError> {
        let d = self.total_docs as f64;
        let pa = self.require(a)? as f64 / d;
        let pb = self.require(b)? as f64 / d;
        let pab = self.joint(a, b).unwrap_or(0) as f64 / d;
        Ok(npmi_from_probabilities(pa, pb, pab, epsilon))
    }
}

/// `ln(P(a,b) / (P(a)P(b))) / -ln P(a,b)` with `epsilon` added to the joint.
/// A joint probability of one is perfect association.
pub fn npmi_from_probabilities(pa: f64, pb: f64, pab: f64, epsilon: f64) -> f64 {
    if pa <= 0.0 || pb <= 0.0 {
        return 0.0;
    }
    let joint = pab + epsilon;
    if joint >= 1.0 {
        return 1.0;
    }
    ((joint / (pa * pb)).ln() / -joint.ln()).clamp(-1.0, 1.0)
}

/// Per-topic mean NPMI over unordered pairs of each list. Lists with fewer than
/// two terms have no pairs and yield `None`.
pub fn npmi_per_topic(
    lists: &[Vec<u32>],
    table: &CooccurrenceTable,
    epsilon: f64,
) -> Result<Vec<Option<f64>>, MetricError> {
    lists
        .iter()
        .map(|list| {
            if list.len() < 2 {
                for &t in list {
                    table.require(t)?;
                }
                return Ok(None);
            }
            let mut sum = 0.0;
            let mut pairs = 0usize;
            for i in 0..list.len() {
                for j in i + 1..list.len() {
                    sum += table.npmi(list[i], list[j], epsilon)?;
                    pairs += 1;
                }
            }
            Ok(Some(sum / pairs as f64))
        })
        .collect()
}

pub fn npmi_coherence(lists: &[Vec<u32>], table: &CooccurrenceTable, epsilon: f64) -> Result<f64, MetricError> {
    Ok(mean_defined(&npmi_per_topic(lists, table, epsilon)?))
}

/// Per-topic UMass sum over ranked pairs, `ln((D(w_i, w_j) + 1) / D(w_j))`
/// with `w_j` the higher-ranked term.
pub fn umass_per_topic(lists: &[Vec<u32>], table: &CooccurrenceTable) -> Result<Vec<f64>, MetricError> {
    lists
        .iter()
        .map(|list| {
            let mut sum = 0.0;
            for (i, &lower) in list.iter().enumerate().skip(1) {
                table.require(lower)?;
                for &higher in &list[..i] {
                    let d_high = table.require(higher)?;
                    if d_high == 0 {
                        return Err(MetricError::ZeroFrequency(higher));
                    }
                    let joint = table.joint(lower, higher).unwrap_or(0);
                    sum += ((joint as f64 + 1.0) / d_high as f64).ln();
                }
            }
            if let Some(&t) = list.first() {
                table.require(t)?;
            }
            Ok(sum)
        })
        .collect()
}

pub fn umass_coherence(lists: &[Vec<u32>], table: &CooccurrenceTable) -> Result<f64, MetricError> {
    let per = umass_per_topic(lists, table)?;
    if per.is_empty() {
        return Err(MetricError::EmptyInput("keyword lists"));
    }
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// Boolean sliding windows over each reference stream. Streams no longer than
/// the window form a single window.
pub fn sliding_windows<'a>(streams: &'a [&'a [u32]], window: usize) -> impl Iterator<Item = &'a [u32]> + 'a {
    streams.iter().flat_map(move |s| {
        let count = if s.len() <= window { 1 } else { s.len() - window + 1 };
        (0..count).map(move |start| &s[start..(start + window).min(s.len())])
    })
}

/// C_V with one-set segmentation: each top word's NPMI vector against the whole
/// top-word set, compared by cosine with the sum of all such vectors.
pub fn cv_per_topic(
    lists: &[Vec<u32>],
    reference: &[&[u32]],
    window: usize,
    epsilon: f64,
) -> Result<Vec<f64>, MetricError> {
    if window < 1 {
        return Err(MetricError::Window);
    }
    if reference.iter().all(|s| s.is_empty()) {
        return Err(MetricError::EmptyInput("reference streams"));
    }
    let terms: Vec<u32> = lists.iter().flatten().copied().collect();
    let table = CooccurrenceTable::build(sliding_windows(reference, window), &terms);
    Ok(lists
        .iter()
        .map(|list| cv_for_list(list, &table, epsilon))
        .collect())
}

fn cv_for_list(list: &[u32], table: &CooccurrenceTable, epsilon: f64) -> f64 {
    if list.len() == 1 {
        return 1.0;
    }
    if list.is_empty() {
        return 0.0;
    }
    let vectors: Vec<Vec<f64>> = list
        .iter()
        .map(|&a| {
            list.iter()
                .map(|&b| table.npmi(a, b, epsilon).unwrap_or(0.0))
                .collect()
        })
        .collect();
    let mut set_vector = vec![0.0; list.len()];
    for v in &vectors {
        for (s, x) in set_vector.iter_mut().zip(v) {
            *s += x;
        }
    }
    vectors.iter().map(|v| cosine(v, &set_vector)).sum::<f64>() / list.len() as f64
}

pub fn cv_coherence(lists: &[Vec<u32>], reference: &[&[u32]], window: usize, epsilon: f64) -> Result<f64, MetricError> {
    let per = cv_per_topic(lists, reference, window, epsilon)?;
    if per.is_empty() {
        return Err(MetricError::EmptyInput("keyword lists"));
    }
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

pub(crate) fn mean_defined(values: &[Option<f64>]) -> f64 {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        0.0
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    }
}
