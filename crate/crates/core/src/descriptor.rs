//! Topic descriptors: salient keywords, representative documents, labels, and
//! the topic-to-topic correlation structure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Vocabulary};
use crate::embedding::AlignedDataset;
use crate::induction::{Centroids, TopicPartition};
use crate::matrix::{cosine, squared_distance, Matrix};

#[derive(Debug, Error, PartialEq)]
pub enum DescriptorError {
    #[error("unknown term `{0}`")]
    UnknownTerm(String),
    #[error("topic {topic} out of range (k = {k})")]
    TopicOutOfRange { topic: usize, k: usize },
    #[error("topic {0} has no members")]
    EmptyCluster(usize),
    #[error("invalid descriptor config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescriptorConfig {
    pub m_keywords: usize,
    pub p_representatives: usize,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self {
            m_keywords: 10,
            p_representatives: 5,
        }
    }
}

impl DescriptorConfig {
    pub fn validate(&self) -> Result<(), DescriptorError> {
        if self.m_keywords < 1 || self.p_representatives < 1 {
            return Err(DescriptorError::InvalidConfig(
                "m_keywords and p_representatives must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicDescriptor {
    pub topic: usize,
    pub label: String,
    pub keywords: Vec<(String, f64)>,
    pub representatives: Vec<(String, f64)>,
}

impl TopicDescriptor {
    pub fn keyword_terms(&self) -> impl Iterator<Item = &str> {
        self.keywords.iter().map(|(t, _)| t.as_str())
    }
}

/// Token counts of every vocabulary term within every topic.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicTermCounts {
    counts: Vec<Vec<u64>>,
    /// Number of topics in which each term occurs at least once.
    topic_presence: Vec<u32>,
}

impl TopicTermCounts {
    /// `doc_index[i]` is the corpus position of partition member `i`.
    pub fn build(partition: &TopicPartition, doc_index: &[usize], corpus: &Corpus) -> Self {
        let v = corpus.vocabulary().len();
        let mut counts = vec![vec![0u64; v]; partition.k()];
        for (&topic, &pos) in partition.assignments().iter().zip(doc_index) {
            for &t in &corpus.documents()[pos].terms {
                counts[topic][t as usize] += 1;
            }
        }
        let topic_presence = (0..v)
            .map(|t| counts.iter().filter(|row| row[t] > 0).count() as u32)
            .collect();
        Self { counts, topic_presence }
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn vocab_len(&self) -> usize {
        self.topic_presence.len()
    }

    pub fn tf(&self, term: u32, topic: usize) -> u64 {
        self.counts[topic][term as usize]
    }

    pub fn topic_row(&self, topic: usize) -> &[u64] {
        &self.counts[topic]
    }

    pub fn total_tf(&self, term: u32) -> u64 {
        self.counts.iter().map(|row| row[term as usize]).sum()
    }

    pub fn topic_total(&self, topic: usize) -> u64 {
        self.counts[topic].iter().sum()
    }

    fn check_topic(&self, topic: usize) -> Result<(), DescriptorError> {
        if topic >= self.k() {
            return Err(DescriptorError::TopicOutOfRange { topic, k: self.k() });
        }
        Ok(())
    }

    /// `tf(w, C_k) * ln(K / (1 + #topics containing w))`.
    pub fn salience(&self, term: u32, topic: usize) -> f64 {
        let tf = self.tf(term, topic);
        if tf == 0 {
            return 0.0;
        }
        let k = self.k() as f64;
        tf as f64 * (k / (1.0 + f64::from(self.topic_presence[term as usize]))).ln()
    }
}

pub fn term_salience(
    term: &str,
    topic: usize,
    counts: &TopicTermCounts,
    vocab: &Vocabulary,
) -> Result<f64, DescriptorError> {
    let id = vocab.id(term).ok_or_else(|| DescriptorError::UnknownTerm(term.to_owned()))?;
    counts.check_topic(topic)?;
    Ok(counts.salience(id, topic))
}

/// Up to `m_keywords` terms present in the topic, by descending salience with
/// lexicographic tie-break.
pub fn top_keywords(
    topic: usize,
    config: &DescriptorConfig,
    counts: &TopicTermCounts,
    vocab: &Vocabulary,
) -> Result<Vec<(String, f64)>, DescriptorError> {
    counts.check_topic(topic)?;
    let mut scored: Vec<(&str, f64)> = counts
        .topic_row(topic)
        .iter()
        .enumerate()
        .filter(|(_, &tf)| tf > 0)
        .map(|(t, _)| (vocab.term(t as u32), counts.salience(t as u32, topic)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    scored.truncate(config.m_keywords);
    Ok(scored.into_iter().map(|(t, s)| (t.to_owned(), s)).collect())
}

/// The members closest to the topic centroid, ascending by Euclidean distance.
pub fn representative_docs(
    topic: usize,
    config: &DescriptorConfig,
    data: &AlignedDataset,
    centroids: &Centroids,
    partition: &TopicPartition,
) -> Result<Vec<(String, f64)>, DescriptorError> {
    if topic >= partition.k() {
        return Err(DescriptorError::TopicOutOfRange { topic, k: partition.k() });
    }
    let centroid = centroids.row(topic);
    let mut members: Vec<(usize, f64)> = partition
        .members(topic)
        .map(|i| (i, squared_distance(data.matrix.row(i), centroid).sqrt()))
        .collect();
    if members.is_empty() {
        return Err(DescriptorError::EmptyCluster(topic));
    }
    members.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    members.truncate(config.p_representatives);
    Ok(members.into_iter().map(|(i, d)| (data.ids[i].clone(), d)).collect())
}

/// Top three keywords joined by `/`.
pub fn auto_label(keywords: &[(String, f64)]) -> String {
    keywords.iter().take(3).map(|(t, _)| t.as_str()).collect::<Vec<_>>().join("/")
}

pub fn build_descriptors(
    data: &AlignedDataset,
    partition: &TopicPartition,
    centroids: &Centroids,
    corpus: &Corpus,
    config: &DescriptorConfig,
) -> Result<Vec<TopicDescriptor>, DescriptorError> {
    config.validate()?;
    let counts = TopicTermCounts::build(partition, &data.doc_index, corpus);
    (0..partition.k())
        .map(|k| {
            let keywords = top_keywords(k, config, &counts, corpus.vocabulary())?;
            let representatives = representative_docs(k, config, data, centroids, partition)?;
            Ok(TopicDescriptor {
                topic: k,
                label: auto_label(&keywords),
                keywords,
                representatives,
            })
        })
        .collect()
}

/// Cosine similarity between topics' term-count vectors.
pub fn topic_correlation_matrix(counts: &TopicTermCounts) -> Matrix {
    let k = counts.k();
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|t| counts.topic_row(t).iter().map(|&c| c as f64).collect())
        .collect();
    let mut out = Matrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let c = cosine(&rows[a], &rows[b]);
            out.row_mut(a)[b] = c;
            out.row_mut(b)[a] = c;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CorpusRecord, PreprocessConfig};
    use std::collections::BTreeMap;

    fn corpus(docs: &[&[&str]]) -> Corpus {
        let recs = docs
            .iter()
            .enumerate()
            .map(|(i, toks)| CorpusRecord {
                id: format!("d{i}"),
                text: None,
                tokens: Some(toks.iter().map(|s| s.to_string()).collect()),
                label: None,
            })
            .collect();
        let cfg = PreprocessConfig {
            min_df: 1,
            max_df_ratio: 1.0,
            stopwords: vec![],
        };
        Corpus::from_records(recs, &cfg).unwrap().0
    }

    fn toy() -> (Corpus, TopicPartition) {
        let c = corpus(&[
            &["apple", "apple", "pear", "shared"],
            &["apple", "fig", "shared"],
            &["car", "bus", "car", "shared"],
            &["bus", "train", "shared", "shared"],
            &["sun", "moon", "sun"],
            &["moon", "star", "pear"],
        ]);
        (c, TopicPartition::new(vec![0, 0, 1, 1, 2, 2], 3))
    }

    #[test]
    fn absent_term_scores_zero() {
        let (c, p) = toy();
        let counts = TopicTermCounts::build(&p, &[0, 1, 2, 3, 4, 5], &c);
        assert_eq!(term_salience("car", 0, &counts, c.vocabulary()).unwrap(), 0.0);
        assert!(matches!(
            term_salience("nope", 0, &counts, c.vocabulary()),
            Err(DescriptorError::UnknownTerm(_))
        ));
        assert!(matches!(
            term_salience("car", 3, &counts, c.vocabulary()),
            Err(DescriptorError::TopicOutOfRange { .. })
        ));
    }

    #[test]
    fn exclusive_term_direct_substitution() {
        let c = corpus(&[&["a", "a", "a"], &["b"], &["c"], &["d"]]);
        let p = TopicPartition::new(vec![0, 1, 2, 3], 4);
        let counts = TopicTermCounts::build(&p, &[0, 1, 2, 3], &c);
        let s = term_salience("a", 0, &counts, c.vocabulary()).unwrap();
        assert!((s - 3.0 * 2f64.ln()).abs() < 1e-15);
    }

    /// Recount tf and topic presence straight from the raw token lists.
    #[test]
    fn salience_matches_brute_force_recount() {
        let (c, p) = toy();
        let counts = TopicTermCounts::build(&p, &[0, 1, 2, 3, 4, 5], &c);
        let mut tf: BTreeMap<(&str, usize), f64> = BTreeMap::new();
        for (i, d) in c.documents().iter().enumerate() {
            for t in &d.tokens {
                *tf.entry((t.as_str(), p.assignments()[i])).or_default() += 1.0;
            }
        }
        for term in c.vocabulary().terms() {
            let present = (0..3).filter(|&k| tf.contains_key(&(term.as_str(), k))).count() as f64;
            for k in 0..3 {
                let f = tf.get(&(term.as_str(), k)).copied().unwrap_or(0.0);
                let expect = f * (3.0 / (1.0 + present)).ln();
                let got = term_salience(term, k, &counts, c.vocabulary()).unwrap();
                assert!((got - expect).abs() < 1e-12, "{term} {k}");
            }
        }
        // Token mass per topic is conserved.
        for k in 0..3 {
            let tokens: u64 = p.members(k).map(|i| c.documents()[i].tokens.len() as u64).sum();
            assert_eq!(counts.topic_total(k), tokens);
        }
    }

    #[test]
    fn keywords_truncate_and_tie_break() {
        let (c, p) = toy();
        let counts = TopicTermCounts::build(&p, &[0, 1, 2, 3, 4, 5], &c);
        let cfg = DescriptorConfig {
            m_keywords: 10,
            p_representatives: 2,
        };
        let kw = top_keywords(2, &cfg, &counts, c.vocabulary()).unwrap();
        assert_eq!(kw.len(), 4);
        // sun: 2 ln(3/2); moon: 2 ln(3/2); star: ln(3/2); pear: ln(3/3) = 0
        let names: Vec<&str> = kw.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(names, vec!["moon", "sun", "star", "pear"]);

        // Full-table sort oracle.
        for k in 0..3 {
            let mut table: Vec<(String, f64)> = c
                .vocabulary()
                .terms()
                .iter()
                .filter(|t| counts.tf(c.vocabulary().id(t).unwrap(), k) > 0)
                .map(|t| (t.clone(), term_salience(t, k, &counts, c.vocabulary()).unwrap()))
                .collect();
            table.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            table.truncate(3);
            let cfg3 = DescriptorConfig {
                m_keywords: 3,
                p_representatives: 1,
            };
            assert_eq!(top_keywords(k, &cfg3, &counts, c.vocabulary()).unwrap(), table);
        }
    }

    #[test]
    fn shared_term_scores_negative() {
        let shared4 = corpus(&[&["x", "a"], &["x", "b"], &["x", "c"]]);
        let p3 = TopicPartition::new(vec![0, 1, 2], 3);
        let counts = TopicTermCounts::build(&p3, &[0, 1, 2], &shared4);
        let s = term_salience("x", 1, &counts, shared4.vocabulary()).unwrap();
        assert!((s - (3.0f64 / 4.0).ln()).abs() < 1e-15);
        assert!(s < 0.0);
    }

    #[test]
    fn single_topic_scores_nonpositive_but_ordered() {
        let (c, _) = toy();
        let p = TopicPartition::new(vec![0; 6], 1);
        let data = AlignedDataset {
            ids: c.documents().iter().map(|d| d.id.clone()).collect(),
            doc_index: (0..6).collect(),
            matrix: Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0], [5.0]]),
        };
        let cents = Centroids::new(Matrix::from_rows(&[[2.5]]));
        let d = build_descriptors(&data, &p, &cents, &c, &DescriptorConfig::default()).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d[0].keywords.iter().all(|(_, s)| *s <= 0.0));
        for w in d[0].keywords.windows(2) {
            assert!(w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0));
        }
        assert_eq!(d[0].label.split('/').count(), 3);
    }

    #[test]
    fn representatives_by_distance() {
        let (c, p) = toy();
        let data = AlignedDataset {
            ids: c.documents().iter().map(|d| d.id.clone()).collect(),
            doc_index: (0..6).collect(),
            matrix: Matrix::from_rows(&[[0.0], [1.0], [5.0], [7.0], [9.0], [12.0]]),
        };
        let cents = Centroids::new(Matrix::from_rows(&[[0.0], [6.0], [10.5]]));
        let cfg = DescriptorConfig {
            m_keywords: 5,
            p_representatives: 5,
        };
        let r = representative_docs(0, &cfg, &data, &cents, &p).unwrap();
        assert_eq!(r, vec![("d0".to_string(), 0.0), ("d1".to_string(), 1.0)]);
        let empty = TopicPartition::new(vec![0, 0, 0, 0, 0, 0], 2);
        assert_eq!(
            representative_docs(1, &cfg, &data, &cents, &empty),
            Err(DescriptorError::EmptyCluster(1))
        );
    }

    #[test]
    fn representatives_match_full_sort() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<[f64; 3]> = (0..20).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let c = corpus(&vec![&["t"][..]; 20]);
        let data = AlignedDataset {
            ids: c.documents().iter().map(|d| d.id.clone()).collect(),
            doc_index: (0..20).collect(),
            matrix: Matrix::from_rows(&rows),
        };
        let p = TopicPartition::new(vec![0; 20], 1);
        let mu = [0.4, 0.5, 0.6];
        let cents = Centroids::new(Matrix::from_rows(&[mu]));
        let cfg = DescriptorConfig {
            m_keywords: 1,
            p_representatives: 3,
        };
        let got = representative_docs(0, &cfg, &data, &cents, &p).unwrap();
        let mut all: Vec<(String, f64)> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (format!("d{i}"), r.iter().zip(mu).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()))
            .collect();
        all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        assert_eq!(got.iter().map(|x| &x.0).collect::<Vec<_>>(), all[..3].iter().map(|x| &x.0).collect::<Vec<_>>());
    }

    #[test]
    fn correlation_identity_and_orthogonality() {
        let c = corpus(&[&["a", "b"], &["a", "b"], &["c"]]);
        let p = TopicPartition::new(vec![0, 1, 2], 3);
        let counts = TopicTermCounts::build(&p, &[0, 1, 2], &c);
        let m = topic_correlation_matrix(&counts);
        assert!((m.row(0)[1] - 1.0).abs() < 1e-12);
        assert_eq!(m.row(0)[2], 0.0);
        assert!((m.row(2)[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_matches_hand_dot_products() {
        let (c, p) = toy();
        let counts = TopicTermCounts::build(&p, &[0, 1, 2, 3, 4, 5], &c);
        let m = topic_correlation_matrix(&counts);
        // topic0: apple 3, pear 1, shared 2, fig 1; topic1: car 2, bus 2, shared 3, train 1;
        // topic2: sun 2, moon 2, star 1, pear 1.
        let n0 = (9.0f64 + 1.0 + 4.0 + 1.0).sqrt();
        let n1 = (4.0f64 + 4.0 + 9.0 + 1.0).sqrt();
        let n2 = (4.0f64 + 4.0 + 1.0 + 1.0).sqrt();
        assert!((m.row(0)[1] - 6.0 / (n0 * n1)).abs() < 1e-12);
        assert!((m.row(0)[2] - 1.0 / (n0 * n2)).abs() < 1e-12);
        assert_eq!(m.row(1)[2], 0.0);
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(m.row(a)[b], m.row(b)[a]);
            }
        }
    }
}
