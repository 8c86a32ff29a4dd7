//! Document embedding files and their alignment to the corpus.
//!
//! The on-disk format is a JSON header next to a raw little-endian `f32`
//! matrix (row-major, no padding) and a UTF-8 id list with one id per line.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::matrix::Matrix;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
    #[error("bad header: {0}")]
    Header(String),
    #[error("unsupported dtype `{0}`, only f32 is accepted")]
    Dtype(String),
    #[error("data file is {actual} bytes, expected {expected} (n * m * 4)")]
    SizeMismatch { expected: u64, actual: u64 },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("id list has {actual} entries, header declares n = {expected}")]
    IdCount { expected: usize, actual: usize },
    #[error("duplicate id `{0}` in embedding id list")]
    DuplicateId(String),
    #[error("row {0} has zero norm and cannot be normalized")]
    ZeroNorm(usize),
    #[error("corpus and embeddings share no document ids")]
    EmptyIntersection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingHeader {
    pub n: usize,
    pub m: usize,
    pub dtype: String,
    #[serde(default)]
    pub encoder: String,
    /// Id list path, relative to the header's directory unless absolute.
    pub ids: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    n: usize,
    m: usize,
    values: Vec<f32>,
    doc_ids: Vec<String>,
    pub encoder_tag: String,
    normalized: bool,
}

fn io_err(path: &Path, e: std::io::Error) -> EmbeddingError {
    EmbeddingError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

impl EmbeddingSet {
    pub fn new(
        doc_ids: Vec<String>,
        m: usize,
        values: Vec<f32>,
        encoder_tag: impl Into<String>,
    ) -> Result<Self, EmbeddingError> {
        let n = doc_ids.len();
        if values.len() != n * m {
            return Err(EmbeddingError::SizeMismatch {
                expected: (n * m * 4) as u64,
                actual: (values.len() * 4) as u64,
            });
        }
        let set = Self {
            n,
            m,
            values,
            doc_ids,
            encoder_tag: encoder_tag.into(),
            normalized: false,
        };
        set.check()?;
        Ok(set)
    }

    fn check(&self) -> Result<(), EmbeddingError> {
        if let Some(pos) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite {
                row: pos / self.m,
                col: pos % self.m,
            });
        }
        let mut seen = HashSet::new();
        for id in &self.doc_ids {
            if !seen.insert(id.as_str()) {
                return Err(EmbeddingError::DuplicateId(id.clone()));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Scales every row to unit L2 norm.
    pub fn normalize(&mut self) -> Result<(), EmbeddingError> {
        for i in 0..self.n {
            let row = &mut self.values[i * self.m..(i + 1) * self.m];
            let norm = row.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(EmbeddingError::ZeroNorm(i));
            }
            for v in row.iter_mut() {
                *v = (f64::from(*v) / norm) as f32;
            }
        }
        self.normalized = true;
        Ok(())
    }

    /// Writes header, raw data and id list. The header references the id list
    /// by file name so the three files can be moved together.
    pub fn save(&self, header_path: &Path, data_path: &Path, ids_path: &Path) -> Result<(), EmbeddingError> {
        let ids_ref = match (ids_path.parent(), header_path.parent()) {
            (Some(a), Some(b)) if a == b => PathBuf::from(ids_path.file_name().unwrap_or_default()),
            _ => ids_path.to_path_buf(),
        };
        let header = EmbeddingHeader {
            n: self.n,
            m: self.m,
            dtype: "f32".into(),
            encoder: self.encoder_tag.clone(),
            ids: ids_ref,
        };
        let json = serde_json::to_string_pretty(&header).map_err(|e| EmbeddingError::Header(e.to_string()))?;
        fs::write(header_path, json).map_err(|e| io_err(header_path, e))?;
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(data_path, bytes).map_err(|e| io_err(data_path, e))?;
        let mut ids = self.doc_ids.join("\n");
        ids.push('\n');
        fs::write(ids_path, ids).map_err(|e| io_err(ids_path, e))?;
        Ok(())
    }
}

pub fn load_embeddings(header_path: &Path, data_path: &Path, normalize: bool) -> Result<EmbeddingSet, EmbeddingError> {
    let raw = fs::read_to_string(header_path).map_err(|e| io_err(header_path, e))?;
    let header: EmbeddingHeader = serde_json::from_str(&raw).map_err(|e| EmbeddingError::Header(e.to_string()))?;
    if header.dtype != "f32" {
        return Err(EmbeddingError::Dtype(header.dtype));
    }
    let bytes = fs::read(data_path).map_err(|e| io_err(data_path, e))?;
    let expected = (header.n * header.m * 4) as u64;
    if bytes.len() as u64 != expected {
        return Err(EmbeddingError::SizeMismatch {
            expected,
            actual: bytes.len() as u64,
        });
    }
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();

    let ids_path = if header.ids.is_absolute() {
        header.ids.clone()
    } else {
        header_path.parent().unwrap_or(Path::new(".")).join(&header.ids)
    };
    let id_text = fs::read_to_string(&ids_path).map_err(|e| io_err(&ids_path, e))?;
    let doc_ids: Vec<String> = id_text.lines().filter(|l| !l.is_empty()).map(str::to_owned).collect();
    if doc_ids.len() != header.n {
        return Err(EmbeddingError::IdCount {
            expected: header.n,
            actual: doc_ids.len(),
        });
    }
    let mut set = EmbeddingSet {
        n: header.n,
        m: header.m,
        values,
        doc_ids,
        encoder_tag: header.encoder,
        normalized: false,
    };
    set.check()?;
    if normalize {
        set.normalize()?;
    }
    Ok(set)
}

/// Documents present in both the corpus and the embedding set, in corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDataset {
    pub ids: Vec<String>,
    /// Position of each row's document in the corpus.
    pub doc_index: Vec<usize>,
    pub matrix: Matrix,
}

impl AlignedDataset {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    /// Rows whose ids satisfy `keep`, order preserved.
    pub fn filter(&self, mut keep: impl FnMut(&str) -> bool) -> AlignedDataset {
        let rows: Vec<usize> = (0..self.len()).filter(|&i| keep(&self.ids[i])).collect();
        AlignedDataset {
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            doc_index: rows.iter().map(|&i| self.doc_index[i]).collect(),
            matrix: self.matrix.select_rows(&rows),
        }
    }

    pub fn select(&self, rows: &[usize]) -> AlignedDataset {
        AlignedDataset {
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            doc_index: rows.iter().map(|&i| self.doc_index[i]).collect(),
            matrix: self.matrix.select_rows(rows),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignReport {
    /// Corpus documents without an embedding.
    pub dropped_from_corpus: Vec<String>,
    /// Embeddings without a corpus document.
    pub dropped_from_embeddings: Vec<String>,
}

pub fn align(corpus: &Corpus, embeddings: &EmbeddingSet) -> Result<(AlignedDataset, AlignReport), EmbeddingError> {
    let rows: HashMap<&str, usize> = embeddings
        .doc_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut ids = Vec::new();
    let mut doc_index = Vec::new();
    let mut data = Vec::new();
    let mut dropped_from_corpus = Vec::new();
    for (pos, doc) in corpus.documents().iter().enumerate() {
        match rows.get(doc.id.as_str()) {
            Some(&r) => {
                ids.push(doc.id.clone());
                doc_index.push(pos);
                data.extend(embeddings.row(r).iter().map(|&v| f64::from(v)));
            }
            None => dropped_from_corpus.push(doc.id.clone()),
        }
    }
    if ids.is_empty() {
        return Err(EmbeddingError::EmptyIntersection);
    }
    let dropped_from_embeddings = embeddings
        .doc_ids()
        .iter()
        .filter(|id| corpus.position(id).is_none())
        .cloned()
        .collect();
    let matrix = Matrix::from_vec(ids.len(), embeddings.m(), data);
    Ok((
        AlignedDataset { ids, doc_index, matrix },
        AlignReport {
            dropped_from_corpus,
            dropped_from_embeddings,
        },
    ))
}
