//! Corpus ingestion: line-delimited JSON records, tokenization, vocabulary
//! construction with document-frequency filters, and the train/holdout split.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("record `{0}` has neither text nor tokens")]
    MissingContent(String),
    #[error("holdout ratio {0} must lie strictly between 0 and 1")]
    RatioOutOfRange(f64),
    #[error("holdout split needs at least 2 documents, corpus has {0}")]
    TooFewDocuments(usize),
    #[error("invalid preprocessing config: {0}")]
    InvalidConfig(String),
    #[error("no documents survived preprocessing")]
    Empty,
}

/// One line of the corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    /// Minimum number of documents a term must occur in.
    pub min_df: usize,
    /// Terms occurring in more than this fraction of documents are dropped.
    pub max_df_ratio: f64,
    pub stopwords: Vec<String>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            min_df: 2,
            max_df_ratio: 0.5,
            stopwords: Vec::new(),
        }
    }
}

impl PreprocessConfig {
    fn validate(&self) -> Result<(), CorpusError> {
        if self.min_df < 1 {
            return Err(CorpusError::InvalidConfig("min_df must be at least 1".into()));
        }
        if !(self.max_df_ratio > 0.0 && self.max_df_ratio <= 1.0) {
            return Err(CorpusError::InvalidConfig(format!(
                "max_df_ratio {} must lie in (0, 1]",
                self.max_df_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub text: Option<String>,
    /// Vocabulary terms in document order.
    pub tokens: Vec<String>,
    /// `tokens` encoded as vocabulary indices.
    pub terms: Vec<u32>,
    pub label: Option<String>,
}

impl Document {
    /// Raw text if present, otherwise the tokens joined by spaces.
    pub fn display_text(&self) -> String {
        match &self.text {
            Some(t) => t.clone(),
            None => self.tokens.join(" "),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
    doc_freq: Vec<u32>,
    corpus_freq: Vec<u64>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn doc_freq(&self, id: u32) -> u32 {
        self.doc_freq[id as usize]
    }

    pub fn corpus_freq(&self, id: u32) -> u64 {
        self.corpus_freq[id as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub id: String,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    /// Nothing left after tokenization and stopword removal.
    EmptyAfterStopwords,
    /// Every remaining token was removed by the document-frequency filters.
    NoVocabularyTerms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub total: usize,
    pub retained: usize,
    pub excluded: Vec<Exclusion>,
    pub reasons: BTreeMap<ExclusionReason, usize>,
    pub vocabulary_size: usize,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
    vocabulary: Vocabulary,
    holdout_ids: BTreeSet<String>,
    id_index: HashMap<String, usize>,
}

/// Lowercase, drop punctuation and symbols, split on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .flat_map(char::to_lowercase)
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    cleaned.split_whitespace().map(str::to_owned).collect()
}

pub fn read_records(path: &Path) -> Result<Vec<CorpusRecord>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

pub fn load_corpus(path: &Path, preprocess: &PreprocessConfig) -> Result<(Corpus, LoadReport), CorpusError> {
    let records = read_records(path)?;
    Corpus::from_records(records, preprocess)
}

impl Corpus {
    pub fn from_records(
        records: Vec<CorpusRecord>,
        preprocess: &PreprocessConfig,
    ) -> Result<(Corpus, LoadReport), CorpusError> {
        preprocess.validate()?;
        let stop: HashSet<&str> = preprocess.stopwords.iter().map(String::as_str).collect();
        let total = records.len();

        let mut seen = HashSet::new();
        let mut excluded = Vec::new();
        let mut staged = Vec::new();
        for rec in records {
            if !seen.insert(rec.id.clone()) {
                return Err(CorpusError::DuplicateId(rec.id));
            }
            let raw = match (&rec.tokens, &rec.text) {
                (Some(tokens), _) => tokens.clone(),
                (None, Some(text)) => tokenize(text),
                (None, None) => return Err(CorpusError::MissingContent(rec.id)),
            };
            let tokens: Vec<String> = raw.into_iter().filter(|t| !stop.contains(t.as_str())).collect();
            if tokens.is_empty() {
                excluded.push(Exclusion {
                    id: rec.id,
                    reason: ExclusionReason::EmptyAfterStopwords,
                });
                continue;
            }
            staged.push((rec, tokens));
        }

        let mut df: HashMap<&str, u32> = HashMap::new();
        for (_, tokens) in &staged {
            let distinct: HashSet<&str> = tokens.iter().map(String::as_str).collect();
            for t in distinct {
                *df.entry(t).or_default() += 1;
            }
        }
        let max_df = preprocess.max_df_ratio * staged.len() as f64;
        let keep: HashSet<String> = df
            .iter()
            .filter(|(_, &d)| d as usize >= preprocess.min_df && f64::from(d) <= max_df)
            .map(|(t, _)| (*t).to_owned())
            .collect();

        let mut documents = Vec::new();
        let mut cf: HashMap<String, u64> = HashMap::new();
        for (rec, tokens) in staged {
            let tokens: Vec<String> = tokens.into_iter().filter(|t| keep.contains(t)).collect();
            if tokens.is_empty() {
                excluded.push(Exclusion {
                    id: rec.id,
                    reason: ExclusionReason::NoVocabularyTerms,
                });
                continue;
            }
            for t in &tokens {
                *cf.entry(t.clone()).or_default() += 1;
            }
            documents.push(Document {
                id: rec.id,
                text: rec.text,
                tokens,
                terms: Vec::new(),
                label: rec.label,
            });
        }
        if documents.is_empty() {
            return Err(CorpusError::Empty);
        }

        let mut ordered: Vec<(String, u64)> = cf.into_iter().collect();
        ordered.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let index: HashMap<String, u32> = ordered
            .iter()
            .enumerate()
            .map(|(i, (t, _))| (t.clone(), i as u32))
            .collect();
        let mut doc_freq = vec![0u32; ordered.len()];
        for doc in &mut documents {
            doc.terms = doc.tokens.iter().map(|t| index[t]).collect();
            let distinct: BTreeSet<u32> = doc.terms.iter().copied().collect();
            for id in distinct {
                doc_freq[id as usize] += 1;
            }
        }
        let vocabulary = Vocabulary {
            corpus_freq: ordered.iter().map(|(_, c)| *c).collect(),
            terms: ordered.into_iter().map(|(t, _)| t).collect(),
            index,
            doc_freq,
        };

        let mut reasons = BTreeMap::new();
        for e in &excluded {
            *reasons.entry(e.reason).or_insert(0) += 1;
        }
        let report = LoadReport {
            total,
            retained: documents.len(),
            excluded,
            reasons,
            vocabulary_size: vocabulary.len(),
        };
        let id_index = documents.iter().enumerate().map(|(i, d)| (d.id.clone(), i)).collect();
        Ok((
            Corpus {
                documents,
                vocabulary,
                holdout_ids: BTreeSet::new(),
                id_index,
            },
            report,
        ))
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.id_index.get(id).map(|&i| &self.documents[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.id_index.get(id).copied()
    }

    pub fn holdout_ids(&self) -> &BTreeSet<String> {
        &self.holdout_ids
    }

    pub fn is_holdout(&self, id: &str) -> bool {
        self.holdout_ids.contains(id)
    }

    /// Reserves `round(ratio * N)` documents (at least one, at most N - 1) for
    /// held-out evaluation. The choice depends only on `seed` and document order.
    pub fn split_holdout(mut self, ratio: f64, seed: u64) -> Result<Corpus, CorpusError> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(CorpusError::RatioOutOfRange(ratio));
        }
        let n = self.documents.len();
        if n < 2 {
            return Err(CorpusError::TooFewDocuments(n));
        }
        let count = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        self.holdout_ids = order[..count]
            .iter()
            .map(|&i| self.documents[i].id.clone())
            .collect();
        Ok(self)
    }

    pub fn train_ids(&self) -> Vec<&str> {
        self.documents
            .iter()
            .filter(|d| !self.holdout_ids.contains(&d.id))
            .map(|d| d.id.as_str())
            .collect()
    }
}
